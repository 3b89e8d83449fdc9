#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pivio/odometry.hpp"
#include "pivio/simulator.hpp"

namespace pivio {

struct PoseError {
  double t = 0.0;
  double rot = 0.0;    // rad
  double trans = 0.0;  // m
};

// Log-distance split into rotational/translational norms (reference first).
PoseError pose_error(const Transform& ref, const Transform& est);

// Nearest-neighbor association of est against ref within max_dt; unmatched
// samples are skipped and counted.
std::vector<PoseError> trajectory_error(const PoseStream& ref, const PoseStream& est,
                                        double max_dt, int* skipped = nullptr);

struct ErrorSummary {
  double median_rot = 0.0, median_trans = 0.0;
  double p95_rot = 0.0, p95_trans = 0.0;
  double max_rot = 0.0, max_trans = 0.0;
  double final_rot = 0.0, final_trans = 0.0;
  int count = 0;
};

ErrorSummary summarize_errors(std::vector<PoseError> errors);

// Per-kind expectation/variance over residual components; count is the mean
// number of residuals of that kind per keyframe timestamp.
ResidualStatistics compute_residual_stats(const ResidualLog& log);

// ---- experiment harness ----

struct RunOutcome {
  OdometryResult odo;
  std::vector<PoseError> errors;  // against dense ground truth
  ErrorSummary summary;
};

// Runs the odometry on generated data: realigns the IMU clock with the known
// offset, corrects accel/mag with the injected calibration, and hands the
// true pivot (plus optional offset, e.g. a V4 initial guess) to the tracker.
RunOutcome run_on_scenario(const SimData& data, const OdometryConfig& cfg,
                           const Vec3& pivot_guess_offset = Vec3::Zero());

struct AblationRow {
  std::string variant;
  ErrorSummary summary;
  int sanity_rejections = 0;
  int tracking_lost_frames = 0;
};

// V1..V4 without optimization plus V3 with optimization ("V3opt").
std::vector<AblationRow> ablation(const SimData& data, const OdometryConfig& base);

struct GammaPoint {
  double gamma = 0.0;
  ErrorSummary summary;
  std::array<double, 5> mean_delta_f{};  // per residual kind, over all solves
  int solves = 0;
};

std::vector<GammaPoint> gamma_sweep(const SimData& data, const OdometryConfig& base,
                                    const std::vector<double>& gammas);

}  // namespace pivio
