#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "pivio/camera.hpp"
#include "pivio/geometry.hpp"
#include "pivio/io.hpp"
#include "pivio/sensors.hpp"
#include "pivio/tracks.hpp"

namespace pivio {

// Deterministic synthetic trocar world. Every field is plain data; the
// manifest round-trips the whole struct, so (spec, seed) reproduces a run
// bit-exactly.
struct Scenario {
  std::string name = "custom";
  std::uint64_t seed = 1;
  double duration = 60.0;  // seconds

  double imu_rate = 220.0;   // Hz
  double video_rate = 60.0;  // Hz
  double ir_rate = 20.0;     // Hz

  Vec3 pivot = Vec3::Zero();  // trocar point in the world frame

  // body-rate tumble profile (seeded sinusoids per axis)
  double rate_amplitude = 0.5;    // rad/s
  double rate_base_period = 6.0;  // s
  // one-shot yaw sweep pulse (fast-sweep preset)
  double sweep_rate = 0.0;     // rad/s peak
  double sweep_start = 0.0;    // s
  double sweep_duration = 0.0; // s

  // insertion depth profile t_x(t)
  double depth0 = 0.10;          // m
  double depth_slope = 0.0;      // m/s
  double depth_wobble = 0.0;     // m
  double depth_wobble_period = 11.0;

  // landmark cloud (shell beyond the pivot around the initial viewing axis)
  int landmark_count = 300;
  double landmark_radius_min = 0.02;  // m beyond pivot
  double landmark_radius_max = 0.07;
  double landmark_spread_deg = 80.0;

  // dynamic outlier cluster
  double dynamic_fraction = 0.0;
  double dynamic_rot_amplitude = 0.5;   // rad
  double dynamic_trans_amplitude = 0.01;  // m

  // occlusion window: camera-frame azimuth sector hiding static landmarks
  double occlusion_start = -1.0;
  double occlusion_end = -1.0;
  double occlusion_half_angle_deg = 25.0;
  double occlusion_center_start_deg = -20.0;
  double occlusion_center_rate_deg_s = 10.0;

  // noise levels
  double sigma_gyro = 0.0;      // rad/s
  double sigma_accel = 0.0;     // g
  double sigma_mag = 0.0;       // microtesla
  double sigma_px = 0.0;        // px
  double sigma_track_rw = 0.0;  // px per frame random walk
  Vec3 gyro_bias = Vec3::Zero();  // rad/s, injected but never calibrated out

  // injected calibration errors (measurement-side model)
  Vec3 accel_bias = Vec3::Zero();
  double accel_scale = 1.0;
  Vec3 mag_bias = Vec3::Zero();
  double mag_scale = 1.0;

  // injected per-stream time offsets (tracks are the reference clock)
  double imu_offset = 0.0;  // s
  double ir_offset = 0.0;   // s

  bool accel_include_linear = false;  // add true linear acceleration to Eq-style accel model

  WorldReferences refs;
};

// Presets: "pure-rotation", "inward-motion", "fast-sweep-occlusion",
// "calibration-wand". Throws ConfigError for unknown names.
Scenario preset_scenario(const std::string& name);
std::vector<std::string> preset_names();

Manifest scenario_to_manifest(const Scenario& s);
Scenario scenario_from_manifest(const Manifest& m);

struct SimLandmark {
  int id = -1;
  Vec3 position = Vec3::Zero();  // world frame, at t = 0
  bool dynamic = false;
};

// Exact trajectory query machinery: the ground-truth orientation is the
// product integral of the zero-order-held body-rate profile on the IMU grid,
// which keeps gyro integration and ground truth consistent to round-off.
class TrajectorySampler {
 public:
  TrajectorySampler(const Scenario& spec, std::uint64_t profile_seed);

  Rotation orientation_wc_at(double t) const;  // world<-camera
  Vec3 body_rate_at(double t) const;           // held rate active at t
  double depth_at(double t) const;
  Vec3 camera_center_at(double t) const;       // world frame
  // Linear acceleration of the camera center in camera coordinates, in g.
  Vec3 linear_accel_c_at(double t) const;

  Transform pose_pivot_at(double t) const;  // camera<-pivot-centered world
  Transform pose_world_at(double t) const;  // camera<-world

  double grid_dt() const { return dt_; }

 private:
  Vec3 smooth_rate(double t) const;
  Vec3 pivot_;
  double dt_ = 0.0;
  double t_end_ = 0.0;
  // per-axis sinusoid bank
  struct Harmonic {
    double amp, freq, phase;
  };
  std::array<std::array<Harmonic, 2>, 3> bank_{};
  double sweep_rate_, sweep_start_, sweep_duration_;
  double depth0_, depth_slope_, depth_wobble_, depth_wobble_freq_, depth_phase_;
  std::vector<Vec3> rates_;     // ZOH body rates on the grid
  std::vector<Rotation> w_wc_;  // cumulative world<-camera at grid points
};

struct GroundTruth {
  PoseStream video_poses;  // camera<-world at video timestamps, exact
  std::vector<SimLandmark> landmarks;
  Vec3 pivot = Vec3::Zero();
  double imu_offset = 0.0;
  double ir_offset = 0.0;
  std::shared_ptr<const TrajectorySampler> sampler;
};

struct SimData {
  Scenario spec;
  StereoRig rig;
  GroundTruth truth;
  ImuStream imu;                      // timestamps shifted by imu_offset
  std::vector<TrackFrameData> tracks;  // reference clock
  PoseStream ir_poses;                 // timestamps shifted by ir_offset
};

// The rig every scenario ships with (also the repo calibration fixture).
StereoRig default_rig();

// World position of a landmark at time t (dynamic cluster motion applied).
Vec3 landmark_position_at(const SimLandmark& lm, double t, const Scenario& spec);

SimData generate(const Scenario& spec);

// Writes manifest.txt, calibration.csv, imu.csv, tracks.csv, ir_poses.csv,
// groundtruth.csv and landmarks.csv into dir.
void emit(const SimData& data, const std::filesystem::path& dir);

// Inputs parsed back from an emitted directory (or a compatible hand-made
// one); ground truth files are optional.
struct SimDir {
  Scenario spec;
  StereoRig rig;
  ImuStream imu;
  std::vector<TrackFrameData> tracks;
  PoseStream ir_poses;    // empty if absent
  PoseStream gt_poses;    // empty if absent
  bool has_ground_truth = false;
};

SimDir load_sim_dir(const std::filesystem::path& dir);

}  // namespace pivio
