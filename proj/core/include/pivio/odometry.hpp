#pragma once

#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pivio/optimizer.hpp"
#include "pivio/tracks.hpp"

namespace pivio {

// Table-style ablation switches: V1 = gyro only, V2 = visual only,
// V3 = both, V4 = both + online pivot refinement.
struct VariantConfig {
  bool use_gyro_update = true;
  bool use_visual_update = true;
  bool pivot_online = false;
  bool use_optimization = false;

  static VariantConfig from_name(const std::string& name);  // "V1".."V4"
};

struct OdometryConfig {
  VariantConfig variant;
  double gamma = 0.4;
  int trigger_every = 10;  // optimize every K keyframes
  int window_size = 10;    // over the last W keyframes

  // keyframe decision
  int min_tracked = 50;
  double max_mean_track_age = 30.0;  // frames
  double kf_rotation_deg = 10.0;
  double kf_translation = 0.01;        // m, camera-center motion
  double min_keyframe_interval = 0.1;  // s

  // sanity check
  double sanity_rotation_deg = 5.0;
  double sanity_off_axis = 0.005;  // m

  // PnP-RANSAC
  double ransac_threshold_px = 2.0;
  int ransac_iterations = 200;
  double min_inlier_ratio = 0.3;

  double epipolar_threshold = 1e-2;  // d_th
  double huber_delta = 1.345;
  double track_gap_threshold = 0.5;  // s

  ResidualStatistics stats = ResidualStatistics::reference_defaults();
  std::uint64_t seed = 1;
};

// Live track state: current pixel per (landmark, lens) plus the age in
// frames since the track appeared.
struct TrackFrame {
  double t = 0.0;
  struct Entry {
    int landmark = -1;
    int lens = 0;
    PixelPoint pixel;
    int age = 0;
  };
  std::vector<Entry> entries;
};

struct PivotEstimate {
  Vec3 point = Vec3::Zero();
  double confidence = 0.0;  // eigenvalue ratio of the line-intersection system
};

enum class SanityVerdict { accept, reject_rotation, reject_off_axis };

// Eq-style constrained propagation: keep the translation (t_x e_x), rotate
// the orientation by the preintegrated gyro increment.
Transform gyro_pose_update(const Transform& prev, const PreintegratedGyro& gyro);

// Advances the live track set from incoming per-frame candidates; only
// landmarks accepted by `known` are tracked, ages increment, missing tracks
// drop. Throws StreamError on a timestamp gap beyond the threshold.
TrackFrame advance_tracks(const TrackFrame& prev, const TrackFrameData& incoming,
                          const std::function<bool(int)>& known,
                          double gap_threshold);

struct PnpCorrespondence {
  int landmark = -1;
  int lens = 0;
  PixelPoint pixel;
  Vec3 world_point = Vec3::Zero();
};

struct PnpResult {
  Transform pose;  // camera<-world
  std::vector<int> inliers;
  double inlier_ratio = 0.0;
  bool tracking_lost = false;
};

struct PnpOptions {
  double threshold_px = 2.0;
  int iterations = 200;
  double min_inlier_ratio = 0.3;
  int refine_iterations = 15;
};

// Minimal 3-point hypotheses (lens 0) disambiguated by a fourth point inside
// RANSAC, damped least-squares refinement on the inliers of both lenses.
// Throws InsufficientDataError below 4 correspondences.
PnpResult pnp_ransac(const std::vector<PnpCorrespondence>& correspondences,
                     const Transform& init, const StereoRig& rig,
                     const PnpOptions& opts, std::mt19937_64& rng);

SanityVerdict sanity_check(const Transform& candidate, const Transform& predicted,
                           double max_rotation_rad, double max_off_axis);

struct KeyframeState {
  bool first = false;
  int tracked_count = 0;
  double mean_track_age = 0.0;   // frames
  double rotation_since_kf = 0.0;  // rad
  double translation_since_kf = 0.0;  // m, camera centers
  double time_since_kf = 0.0;    // s
};

bool keyframe_decision(const KeyframeState& state, const OdometryConfig& cfg);

// Epipolar-filtered stereo pairs triangulated and anchored at the keyframe.
std::vector<Landmark> init_landmarks(const TrackFrameData& frame,
                                     const StereoRig& rig, const Transform& kf_pose,
                                     int kf_id,
                                     const std::function<bool(int)>& already_known,
                                     double epipolar_threshold);

// Least-squares intersection of the camera x-axis lines; throws
// IllConditionedError (condition number in the message) when under 3 poses
// or the axes are near-parallel.
PivotEstimate estimate_pivot(std::span<const Transform> keyframe_poses);

struct OdometryInputs {
  const StereoRig* rig = nullptr;
  ImuStream imu;  // time-aligned to the track clock
  ImuCalibration imu_cal;
  std::vector<TrackFrameData> tracks;
  Transform initial_pose;  // camera<-world at the first frame
  Vec3 pivot = Vec3::Zero();  // known pivot, or the initial guess for V4
  WorldReferences refs;
};

struct OdometryResult {
  PoseStream trajectory;  // camera<-world, one pose per track frame
  KeyframeGraph graph;    // poses in the pivot-centered frame
  ResidualLog residual_log;
  std::vector<SolveReport> solves;
  std::vector<std::pair<double, Vec3>> pivot_history;  // world-frame estimates
  Vec3 final_pivot = Vec3::Zero();
  int sanity_rejections = 0;
  int tracking_lost_frames = 0;
};

OdometryResult run_odometry(const OdometryInputs& inputs, const OdometryConfig& cfg);

}  // namespace pivio
