#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pivio/camera.hpp"
#include "pivio/geometry.hpp"
#include "pivio/sensors.hpp"

namespace pivio {

enum class ResidualKind { pivot, accel, mag, reproj, gyro };

inline constexpr std::array<ResidualKind, 5> kResidualKinds = {
    ResidualKind::pivot, ResidualKind::accel, ResidualKind::mag,
    ResidualKind::reproj, ResidualKind::gyro};

const char* residual_kind_name(ResidualKind k);
int residual_dimension(ResidualKind k);

enum class Robustifier { identity, huber };

// 3D point stored in the camera frame of the keyframe that triangulated it.
struct Landmark {
  int id = -1;
  int anchor_keyframe = -1;
  Vec3 position_in_anchor = Vec3::Zero();  // meters, camera frame at anchor time
};

struct Observation {
  int landmark = -1;
  int keyframe = -1;
  int lens = 0;  // 0|1
  PixelPoint pixel;
};

struct StatsEntry {
  double mean = 0.0;
  double variance = 1.0;
  int count = 1;  // N_k, residuals of this kind per keyframe
  std::string unit;
};

struct ResidualStatistics {
  StatsEntry& entry(ResidualKind k) { return entries_[static_cast<int>(k)]; }
  const StatsEntry& entry(ResidualKind k) const { return entries_[static_cast<int>(k)]; }

  // Reference values from a prior run on real data, converted to SI.
  static ResidualStatistics reference_defaults();

 private:
  std::array<StatsEntry, 5> entries_{};
};

void write_residual_stats_csv(const std::filesystem::path& path,
                              const ResidualStatistics& stats);
ResidualStatistics read_residual_stats_csv(const std::filesystem::path& path);

// ---- Residual functions. Poses are camera<-world unless noted. ----

// Off-axis translation (t_y, t_z); zero exactly on the 4-DoF manifold.
Vec2 r_pivot(const Transform& pose);

// gravity_in_c - R * gravity_world, both in m/s^2.
Vec3 r_accel(const Transform& pose, const Vec3& gravity_in_c,
             const WorldReferences& refs);

// field_in_c - R * field_world, both in microtesla.
Vec3 r_mag(const Transform& pose, const Vec3& field_in_c,
           const WorldReferences& refs);

// Projection of the anchored landmark into the observing lens minus the
// measured pixel. `anchor_pose_inv` is world<-camera at anchor time.
// nullopt when the point lands behind the lens (block deactivated).
std::optional<Vec2> r_reproj(const Transform& obs_pose,
                             const Transform& anchor_pose_inv,
                             const Vec3& landmark_in_anchor, const PixelPoint& u,
                             const StereoRig& rig, int lens);

// Log(R2 R1^T * delta): deviation of consecutive orientations from the
// preintegrated gyro increment.
Vec3 r_gyro(const Transform& pose1, const Transform& pose2,
            const PreintegratedGyro& gyro);

// x^2/2 below delta, delta*(x - delta/2) above.
double huber(double x, double delta);

double robust_cost(Robustifier rho, double x, double huber_delta);
// IRLS weight rho'(x)/x for the norm-robustified cost.
double robust_weight(Robustifier rho, double x, double huber_delta);

// alpha_k = beta / (N * sqrt(Var)); throws DegenerateStatisticError on
// zero variance.
double scale_factor(ResidualKind kind, const StatsEntry& stats, double beta);

// ---- Block form used by the optimizer ----

struct ResidualBlock {
  ResidualKind kind = ResidualKind::pivot;
  int pose_i = -1;  // pivot/accel/mag: the pose; reproj: observer; gyro: earlier
  int pose_j = -1;  // reproj: anchor; gyro: later; unused otherwise

  Vec3 vector_meas = Vec3::Zero();      // accel/mag measurement payload
  PixelPoint pixel;                     // reproj
  Vec3 landmark_in_anchor = Vec3::Zero();
  int lens = 0;
  Rotation gyro_delta;                  // gyro

  double alpha = 1.0;
  Robustifier robustifier = Robustifier::identity;
  double huber_delta = 1.345;

  int pose_count() const { return pose_j >= 0 ? 2 : 1; }
};

struct EvalContext {
  const StereoRig* rig = nullptr;
  WorldReferences refs;
};

struct BlockEval {
  Eigen::Matrix<double, 3, 1> residual = Eigen::Matrix<double, 3, 1>::Zero();
  int dim = 0;
  // d residual / d xi for a right-multiplied twist T*Exp(xi), [omega, upsilon].
  Eigen::Matrix<double, 3, 6> j_i = Eigen::Matrix<double, 3, 6>::Zero();
  Eigen::Matrix<double, 3, 6> j_j = Eigen::Matrix<double, 3, 6>::Zero();
  bool active = true;  // false: behind-camera reprojection, skip this iteration
};

// Unweighted residual and, when requested, analytic Jacobians with respect
// to right-multiplied twist perturbations of the referenced poses.
BlockEval evaluate_block(const ResidualBlock& block, const Transform& pose_i,
                         const Transform* pose_j, const EvalContext& ctx,
                         bool with_jacobians);

// ---- Residual logging (stats pipeline input) ----

struct ResidualRecord {
  double t = 0.0;
  ResidualKind kind = ResidualKind::pivot;
  int dim = 0;
  std::array<double, 3> values{};
};

using ResidualLog = std::vector<ResidualRecord>;

void append_record(ResidualLog& log, double t, ResidualKind kind, const Vec2& r);
void append_record(ResidualLog& log, double t, ResidualKind kind, const Vec3& r);

void write_residual_log_csv(const std::filesystem::path& path, const ResidualLog& log);
ResidualLog read_residual_log_csv(const std::filesystem::path& path);

}  // namespace pivio
