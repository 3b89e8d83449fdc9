#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include "pivio/residuals.hpp"

namespace pivio {

struct Keyframe {
  int id = -1;
  double t = 0.0;
  Transform pose;  // camera<-world (pivot-centered)
  std::vector<Observation> observations;
  PreintegratedGyro gyro_link;  // spans (previous keyframe t, this t)
  Vec3 gravity_in_c = Vec3::Zero();  // m/s^2, time-nearest calibrated sample
  Vec3 mag_in_c = Vec3::Zero();      // microtesla
};

struct KeyframeGraph {
  std::vector<Keyframe> keyframes;
  std::unordered_map<int, Landmark> landmarks;

  const Keyframe* find(int id) const;
};

// Windowed problem over an inclusive keyframe range. Pose parameters are the
// window keyframes; anchors outside the window join as fixed parameters, and
// the oldest window pose is the gauge.
struct WindowProblem {
  std::vector<int> keyframe_ids;        // parameter order; fixed anchors appended
  std::vector<Transform> poses;         // current values, index-aligned
  std::vector<char> fixed;              // 1 = held constant
  std::vector<ResidualBlock> blocks;    // pose_i/pose_j are local indices
  const StereoRig* rig = nullptr;
  WorldReferences refs;
  double gamma = 0.4;

  int free_count() const;
};

WindowProblem build_problem(const KeyframeGraph& graph, int first, int last,
                            const ResidualStatistics& stats, double gamma,
                            const StereoRig* rig, const WorldReferences& refs,
                            double huber_delta = 1.345);

struct SolveOptions {
  double initial_lambda = 1e-4;
  double lambda_up = 2.0;
  double lambda_down = 3.0;
  double lambda_max = 1e12;
  double gradient_tol = 1e-10;
  double relative_cost_tol = 1e-9;
  int max_iterations = 50;
  bool use_dense = false;  // brute-force dense normal equations (reference path)
};

struct SolveReport {
  int iterations = 0;
  std::vector<double> cost_history;  // initial cost followed by accepted costs
  std::array<double, 5> cost_before{};
  std::array<double, 5> cost_after{};
  std::string termination;
  bool success = false;
  int deactivated_blocks = 0;

  std::array<double, 5> delta_f() const;
};

// Levenberg-Marquardt with right-multiplied twist updates; updates
// problem.poses in place. Robustified total cost is non-increasing over
// accepted steps.
SolveReport solve(WindowProblem& problem, const SolveOptions& opts = {});

// Per-kind robustified costs f_k at the given poses; sums to the solver's
// internal total exactly.
std::array<double, 5> cost_breakdown(const WindowProblem& problem,
                                     const std::vector<Transform>& poses);

std::array<double, 5> delta_f(const WindowProblem& problem,
                              const std::vector<Transform>& before,
                              const std::vector<Transform>& after);

// One damped step at the given poses; exposed so the sparse production path
// and the dense reference path can be compared directly.
VecX lm_step(const WindowProblem& problem, const std::vector<Transform>& poses,
             double lambda, bool dense);

// Minimum eigenvalue of the undamped reduced normal matrix (gauge check).
double reduced_hessian_min_eigenvalue(const WindowProblem& problem,
                                      const std::vector<Transform>& poses);

}  // namespace pivio
