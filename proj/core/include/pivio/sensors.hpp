#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "pivio/geometry.hpp"

namespace pivio {

struct ImuSample {
  double t = 0.0;              // seconds
  Vec3 gyro = Vec3::Zero();    // rad/s
  Vec3 accel = Vec3::Zero();   // units of g = 9.81 m/s^2
  Vec3 mag = Vec3::Zero();     // microtesla
};

using ImuStream = std::vector<ImuSample>;

struct ImuCalibration {
  Vec3 accel_bias = Vec3::Zero();  // b_a, measurement units (g)
  double accel_scale = 1.0;        // d_a
  Vec3 mag_bias = Vec3::Zero();    // b_m, microtesla
  double mag_scale = 1.0;          // d_m
  double sigma_accel = 0.0;        // per-axis noise, g
  double sigma_mag = 0.0;          // per-axis noise, microtesla
};

// Absolute reference vectors in the world frame.
struct WorldReferences {
  static constexpr double kGravityNorm = 9.81;    // m/s^2
  static constexpr double kMagneticNorm = 48.6;   // microtesla

  Vec3 gravity = Vec3(0.0, 0.0, -kGravityNorm);
  Vec3 magnetic_field =
      kMagneticNorm * Vec3(0.44, 0.05, -0.89).normalized();
};

struct PreintegratedGyro {
  Rotation delta;          // right-multiplied product of per-sample exponentials
  double t_begin = 0.0;
  double t_end = 0.0;
  int count = 0;
};

// (a_meas - b_a) * d_a, the model-inverted specific force in g units.
Vec3 correct_accel(const Vec3& accel_meas, const ImuCalibration& cal);
// (m_meas - b_m) * d_m in microtesla.
Vec3 correct_mag(const Vec3& mag_meas, const ImuCalibration& cal);

struct SphereFit {
  Vec3 bias = Vec3::Zero();
  double scale = 1.0;
  double rms = 0.0;
};

// Minimizes sum((scale * |s - bias| - radius)^2) by Gauss-Newton from an
// algebraic-sphere initialization. Throws RankDeficiencyError on coplanar or
// otherwise degenerate sample sets.
SphereFit fit_sphere_calibration(std::span<const Vec3> samples, double radius);

// Product of Exp(gyro_i * dt) in sample order over a uniformly sampled slice.
PreintegratedGyro integrate_gyro(std::span<const ImuSample> samples, double dt);

// Zero-order-hold integration of a gyro stream over [t1, t2]: each sample's
// rate holds until the next sample, partial boundary intervals included.
PreintegratedGyro integrate_gyro_span(const ImuStream& stream, double t1, double t2);

// Index of the sample whose timestamp is nearest to t.
size_t nearest_sample(const ImuStream& stream, double t);

struct TimedPose {
  double t = 0.0;
  Transform pose;
};
using PoseStream = std::vector<TimedPose>;

struct TimedTwist {
  double t = 0.0;
  Twist xi;
};
using TwistStream = std::vector<TimedTwist>;

// Finite-difference twists ((T_i^-1 T_{i+1}) logged) / dt, stamped at the
// interval midpoint. Body-frame when poses are world<-camera.
TwistStream twist_from_trajectory(const PoseStream& poses);

struct TimeOffsetResult {
  double dt = 0.0;
  std::vector<std::pair<double, double>> cost_curve;  // (dt, cost)
  bool reliable = true;  // false when the curve range is < 5% of its mean
};

// Grid search of sum_i |xi_j(t_i + dt) - xi_k(t_i)| with linear interpolation
// of stream_j, evaluated on a fixed index set valid at every candidate dt.
// Ties break toward the smallest |dt|. Throws StreamError when no overlap
// exists at any candidate.
TimeOffsetResult estimate_time_offset(const TwistStream& stream_j,
                                      const TwistStream& stream_k,
                                      double search_min, double search_max,
                                      double step);

// CSV schema: timestamp_s,wx,wy,wz,ax,ay,az,mx,my,mz ; one stream per file.
ImuStream read_imu_csv(const std::filesystem::path& path);
void write_imu_csv(const std::filesystem::path& path, const ImuStream& stream);

// CSV schema: timestamp_s followed by 12 row-major [R|t] entries.
PoseStream read_pose_csv(const std::filesystem::path& path,
                         Frame to = Frame::camera, Frame from = Frame::world);
void write_pose_csv(const std::filesystem::path& path, const PoseStream& poses);

}  // namespace pivio
