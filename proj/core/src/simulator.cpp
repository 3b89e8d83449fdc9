#include "pivio/simulator.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "pivio/errors.hpp"
#include "pivio/io.hpp"

namespace pivio {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMinLensDepth = 0.02;  // m, visibility cutoff

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vec3 normal3(std::mt19937_64& rng, std::normal_distribution<double>& n) {
  const double a = n(rng), b = n(rng), c = n(rng);
  return Vec3(a, b, c);
}

}  // namespace

StereoRig default_rig() {
  StereoRig rig;
  rig.left = {1000.0, 1005.0, 960.0, 540.0, -0.17, 0.03, 1920.0, 1080.0};
  rig.right = {998.0, 1002.0, 958.0, 542.0, -0.16, 0.028, 1920.0, 1080.0};
  rig.extrinsic = Transform(exp_so3(Vec3(0.002, -0.004, 0.001)),
                            Vec3(0.0045, 0.0002, -0.0001), Frame::lens0,
                            Frame::lens1);
  Mat3 axis_swap;  // lens z (optical) -> body x (scope axis)
  axis_swap << 0, 0, 1, 1, 0, 0, 0, 1, 0;
  rig.mount = Transform(exp_so3(Vec3(0.02, -0.01, 0.015)) *
                            Rotation::from_matrix_unchecked(axis_swap),
                        Vec3(0.001, 0.002, -0.001), Frame::camera, Frame::lens0);
  return rig;
}

TrajectorySampler::TrajectorySampler(const Scenario& spec, std::uint64_t profile_seed)
    : pivot_(spec.pivot),
      sweep_rate_(spec.sweep_rate),
      sweep_start_(spec.sweep_start),
      sweep_duration_(spec.sweep_duration),
      depth0_(spec.depth0),
      depth_slope_(spec.depth_slope),
      depth_wobble_(spec.depth_wobble) {
  std::mt19937_64 rng(profile_seed);
  for (int axis = 0; axis < 3; ++axis) {
    for (int h = 0; h < 2; ++h) {
      Harmonic& hm = bank_[axis][h];
      hm.amp = 0.5 * spec.rate_amplitude * uniform(rng, 0.4, 1.0);
      hm.freq = 2.0 * kPi / (spec.rate_base_period * uniform(rng, 0.6, 1.6));
      hm.phase = uniform(rng, 0.0, 2.0 * kPi);
    }
  }
  depth_wobble_freq_ = 2.0 * kPi / std::max(1e-6, spec.depth_wobble_period);
  depth_phase_ = uniform(rng, 0.0, 2.0 * kPi);
  const Vec3 v0(uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3),
                uniform(rng, -0.3, 0.3));

  dt_ = 1.0 / spec.imu_rate;
  const int n = std::max(1, static_cast<int>(std::floor(spec.duration * spec.imu_rate)));
  t_end_ = n * dt_;
  rates_.resize(n);
  w_wc_.resize(n);
  Rotation w = exp_so3(v0);
  for (int k = 0; k < n; ++k) {
    w_wc_[k] = w;
    rates_[k] = smooth_rate(k * dt_);
    w = w * exp_so3(rates_[k] * dt_);
    if ((k & 511) == 511) w = w.renormalized();
  }
}

Vec3 TrajectorySampler::smooth_rate(double t) const {
  Vec3 w = Vec3::Zero();
  for (int axis = 0; axis < 3; ++axis) {
    for (const Harmonic& h : bank_[axis]) {
      w(axis) += h.amp * std::sin(h.freq * t + h.phase);
    }
  }
  if (sweep_rate_ != 0.0 && t >= sweep_start_ && t < sweep_start_ + sweep_duration_) {
    const double tau = (t - sweep_start_) / sweep_duration_;
    const double bump = std::sin(kPi * tau);
    w(2) += sweep_rate_ * bump * bump;
  }
  return w;
}

Rotation TrajectorySampler::orientation_wc_at(double t) const {
  const int n = static_cast<int>(rates_.size());
  int idx = static_cast<int>(std::floor(t / dt_));
  idx = std::clamp(idx, 0, n - 1);
  const double rem = t - idx * dt_;
  if (rem == 0.0) return w_wc_[idx];
  return w_wc_[idx] * exp_so3(rates_[idx] * rem);
}

Vec3 TrajectorySampler::body_rate_at(double t) const {
  const int n = static_cast<int>(rates_.size());
  const int idx = std::clamp(static_cast<int>(std::floor(t / dt_)), 0, n - 1);
  return rates_[idx];
}

double TrajectorySampler::depth_at(double t) const {
  return depth0_ + depth_slope_ * t +
         depth_wobble_ * std::sin(depth_wobble_freq_ * t + depth_phase_);
}

Vec3 TrajectorySampler::camera_center_at(double t) const {
  return pivot_ - orientation_wc_at(t) * Vec3(depth_at(t), 0.0, 0.0);
}

Vec3 TrajectorySampler::linear_accel_c_at(double t) const {
  const Rotation w = orientation_wc_at(t);
  const Vec3 omega = body_rate_at(t);
  const double tx = depth_at(t);
  const double txd = depth_slope_ + depth_wobble_ * depth_wobble_freq_ *
                                        std::cos(depth_wobble_freq_ * t + depth_phase_);
  const double txdd = -depth_wobble_ * depth_wobble_freq_ * depth_wobble_freq_ *
                      std::sin(depth_wobble_freq_ * t + depth_phase_);
  const Mat3 k = hat(omega);
  // c = -W * e_x * tx;  within a hold interval W' = W*hat(omega)
  const Vec3 cdd_world = -(w.matrix() * (k * k * Vec3::UnitX() * tx +
                                         2.0 * k * Vec3::UnitX() * txd +
                                         Vec3::UnitX() * txdd));
  return (w.transposed() * cdd_world) / WorldReferences::kGravityNorm;
}

Transform TrajectorySampler::pose_pivot_at(double t) const {
  return expand_pivot({depth_at(t), orientation_wc_at(t).transposed()});
}

Transform TrajectorySampler::pose_world_at(double t) const {
  return pose_pivot_at(t) *
         Transform(Rotation::identity(), -pivot_, Frame::world, Frame::world);
}

namespace {

struct ClusterMotion {
  Vec3 center = Vec3::Zero();
  Vec3 axis = Vec3::UnitZ();
  Vec3 trans_dir = Vec3::UnitY();
  double rot_amp = 0.0;
  double trans_amp = 0.0;
};

Vec3 cluster_point_at(const ClusterMotion& c, const Vec3& p0, double t) {
  const double theta = c.rot_amp * std::sin(2.0 * kPi * t / 9.0);
  const double shift = c.trans_amp * std::sin(2.0 * kPi * t / 7.0);
  return c.center + exp_so3(c.axis * theta) * (p0 - c.center) + shift * c.trans_dir;
}

}  // namespace

Vec3 landmark_position_at(const SimLandmark& lm, double t, const Scenario& spec) {
  if (!lm.dynamic) return lm.position;
  // replay the deterministic cluster parameters
  std::mt19937_64 master(spec.seed);
  const std::uint64_t profile_seed = master();
  const std::uint64_t lm_seed = master();
  TrajectorySampler sampler(spec, profile_seed);
  std::mt19937_64 rng(lm_seed);
  ClusterMotion c;
  c.center = spec.pivot + 0.045 * (sampler.orientation_wc_at(0.0) * Vec3::UnitX());
  std::normal_distribution<double> n(0.0, 1.0);
  c.axis = normal3(rng, n).normalized();
  c.trans_dir = normal3(rng, n).normalized();
  c.rot_amp = spec.dynamic_rot_amplitude;
  c.trans_amp = spec.dynamic_trans_amplitude;
  return cluster_point_at(c, lm.position, t);
}

SimData generate(const Scenario& spec) {
  if (spec.imu_rate <= 0.0 || spec.video_rate <= 0.0 || spec.ir_rate <= 0.0) {
    throw ConfigError("scenario rates must be positive");
  }
  if (spec.dynamic_fraction < 0.0 || spec.dynamic_fraction >= 1.0) {
    throw ConfigError("dynamic fraction must lie in [0, 1)");
  }

  SimData data;
  data.spec = spec;
  data.rig = default_rig();

  std::mt19937_64 master(spec.seed);
  const std::uint64_t profile_seed = master();
  const std::uint64_t lm_seed = master();
  const std::uint64_t imu_seed = master();
  const std::uint64_t track_seed = master();

  auto sampler = std::make_shared<TrajectorySampler>(spec, profile_seed);
  data.truth.sampler = sampler;
  data.truth.pivot = spec.pivot;
  data.truth.imu_offset = spec.imu_offset;
  data.truth.ir_offset = spec.ir_offset;

  // ---- landmarks: shell patch beyond the pivot around the initial view ----
  std::mt19937_64 lm_rng(lm_seed);
  std::normal_distribution<double> unit_n(0.0, 1.0);
  const Vec3 view0 = sampler->orientation_wc_at(0.0) * Vec3::UnitX();
  Vec3 ortho = view0.cross(std::abs(view0.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitY());
  ortho.normalize();
  const Vec3 ortho2 = view0.cross(ortho).normalized();
  const double spread = spec.landmark_spread_deg * kPi / 180.0;
  const int n_dynamic = static_cast<int>(std::floor(spec.landmark_count * spec.dynamic_fraction));
  const int n_static = spec.landmark_count - n_dynamic;

  ClusterMotion cluster;
  cluster.center = spec.pivot + 0.045 * view0;
  cluster.axis = normal3(lm_rng, unit_n).normalized();
  cluster.trans_dir = normal3(lm_rng, unit_n).normalized();
  cluster.rot_amp = spec.dynamic_rot_amplitude;
  cluster.trans_amp = spec.dynamic_trans_amplitude;

  for (int i = 0; i < spec.landmark_count; ++i) {
    SimLandmark lm;
    lm.id = i;
    lm.dynamic = i >= n_static;
    if (lm.dynamic) {
      // tight ball around the cluster center
      lm.position = cluster.center + 0.015 * normal3(lm_rng, unit_n);
    } else {
      const double cos_a = uniform(lm_rng, std::cos(spread), 1.0);
      const double sin_a = std::sqrt(std::max(0.0, 1.0 - cos_a * cos_a));
      const double az = uniform(lm_rng, 0.0, 2.0 * kPi);
      const Vec3 dir = cos_a * view0 + sin_a * (std::cos(az) * ortho + std::sin(az) * ortho2);
      const double radius =
          uniform(lm_rng, spec.landmark_radius_min, spec.landmark_radius_max);
      lm.position = spec.pivot + radius * dir;
    }
    data.truth.landmarks.push_back(lm);
  }

  // ---- IMU stream on the exact grid the trajectory integrates over ----
  std::mt19937_64 imu_rng(imu_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double dt = sampler->grid_dt();
  const int n_imu = static_cast<int>(std::floor(spec.duration * spec.imu_rate));
  data.imu.reserve(n_imu);
  const Vec3 gravity_dir = spec.refs.gravity / WorldReferences::kGravityNorm;
  for (int k = 0; k < n_imu; ++k) {
    const double t = k * dt;
    const Rotation r_cw = sampler->orientation_wc_at(t).transposed();  // camera<-world
    const Vec3 g_c = r_cw * gravity_dir;                               // unit g
    const Vec3 m_c = r_cw * spec.refs.magnetic_field;                  // uT
    const Vec3 a_lin = spec.accel_include_linear ? sampler->linear_accel_c_at(t)
                                                 : Vec3::Zero();
    const Vec3 n_g = normal3(imu_rng, gauss);
    const Vec3 n_a = normal3(imu_rng, gauss);
    const Vec3 n_m = normal3(imu_rng, gauss);

    ImuSample s;
    s.t = t + spec.imu_offset;
    s.gyro = sampler->body_rate_at(t) + spec.gyro_bias + spec.sigma_gyro * n_g;
    s.accel = (a_lin - g_c) / spec.accel_scale + spec.accel_bias + spec.sigma_accel * n_a;
    s.mag = m_c / spec.mag_scale + spec.mag_bias + spec.sigma_mag * n_m;
    data.imu.push_back(s);
  }

  // ---- stereo tracks at video rate ----
  std::mt19937_64 track_rng(track_seed);
  const int n_video = static_cast<int>(std::floor(spec.duration * spec.video_rate));
  const Transform lens_tf[2] = {data.rig.lens_from_camera(0), data.rig.lens_from_camera(1)};
  const int n_lm = spec.landmark_count;
  std::vector<std::array<bool, 2>> visible_prev(n_lm, {false, false});
  std::vector<std::array<Vec2, 2>> walk(n_lm, {Vec2::Zero(), Vec2::Zero()});
  data.tracks.reserve(n_video);
  data.truth.video_poses.reserve(n_video);

  for (int j = 0; j < n_video; ++j) {
    const double t = j / spec.video_rate;
    const Transform pose = sampler->pose_world_at(t);
    data.truth.video_poses.push_back({t, pose});

    TrackFrameData frame;
    frame.t = t;
    const bool occluding = spec.occlusion_start >= 0.0 && t >= spec.occlusion_start &&
                           t < spec.occlusion_end;
    const double occl_center =
        (spec.occlusion_center_start_deg +
         spec.occlusion_center_rate_deg_s * (t - spec.occlusion_start)) *
        kPi / 180.0;
    const double occl_half = spec.occlusion_half_angle_deg * kPi / 180.0;

    for (const SimLandmark& lm : data.truth.landmarks) {
      const Vec3 pos_w = lm.dynamic ? cluster_point_at(cluster, lm.position, t)
                                    : lm.position;
      const Vec3 in_cam = pose * pos_w;
      if (occluding && !lm.dynamic) {
        const double az = std::atan2(in_cam.y(), in_cam.x());
        if (std::abs(az - occl_center) < occl_half) {
          visible_prev[lm.id] = {false, false};
          continue;
        }
      }
      for (int lens = 0; lens < 2; ++lens) {
        const Vec3 in_lens = lens_tf[lens] * in_cam;
        bool vis = in_lens.z() > kMinLensDepth;
        PixelPoint px;
        if (vis) {
          px = project(in_lens, data.rig.intrinsics(lens));
          vis = data.rig.intrinsics(lens).contains(px.u, px.v);
        }
        if (!vis) {
          visible_prev[lm.id][lens] = false;
          continue;
        }
        Vec2& rw = walk[lm.id][lens];
        if (visible_prev[lm.id][lens]) {
          if (spec.sigma_track_rw > 0.0) {
            rw += spec.sigma_track_rw * Vec2(gauss(track_rng), gauss(track_rng));
          }
        } else {
          rw.setZero();
        }
        visible_prev[lm.id][lens] = true;
        if (spec.sigma_px > 0.0) {
          px.u += spec.sigma_px * gauss(track_rng);
          px.v += spec.sigma_px * gauss(track_rng);
        }
        px.u += rw.x();
        px.v += rw.y();
        frame.obs.push_back({lm.id, lens, px});
      }
    }
    data.tracks.push_back(std::move(frame));
  }

  // ---- IR-style ground truth poses ----
  const int n_ir = static_cast<int>(std::floor(spec.duration * spec.ir_rate));
  data.ir_poses.reserve(n_ir);
  for (int i = 0; i < n_ir; ++i) {
    const double t = i / spec.ir_rate;
    data.ir_poses.push_back({t + spec.ir_offset, sampler->pose_world_at(t)});
  }

  return data;
}

// ---- presets ----

namespace {

void apply_standard_noise(Scenario& s) {
  s.sigma_gyro = 0.002;
  s.sigma_accel = 0.01;
  s.sigma_mag = 0.3;
  s.sigma_px = 0.5;
  s.sigma_track_rw = 0.2;
  s.gyro_bias = Vec3(0.002, -0.001, 0.0015);
  s.accel_bias = Vec3(0.1, -0.05, 0.2);
  s.accel_scale = 1.03;
  s.mag_bias = Vec3(3.0, -1.0, 0.5);
  s.mag_scale = 0.97;
  s.imu_offset = 0.166;
  s.ir_offset = 0.100;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"pure-rotation", "inward-motion", "fast-sweep-occlusion", "calibration-wand"};
}

Scenario preset_scenario(const std::string& name) {
  Scenario s;
  s.name = name;
  if (name == "pure-rotation") {
    s.seed = 101;
    s.duration = 60.0;
    s.rate_amplitude = 0.5;
    s.rate_base_period = 6.0;
    s.depth0 = 0.10;
    s.landmark_count = 300;
    apply_standard_noise(s);
  } else if (name == "inward-motion") {
    s.seed = 102;
    s.duration = 40.0;
    s.rate_amplitude = 0.25;
    s.rate_base_period = 8.0;
    s.depth0 = 0.09;
    s.depth_slope = 0.0015;
    s.depth_wobble = 0.003;
    s.landmark_count = 300;
    apply_standard_noise(s);
  } else if (name == "fast-sweep-occlusion") {
    s.seed = 103;
    s.duration = 30.0;
    s.rate_amplitude = 0.35;
    s.rate_base_period = 7.0;
    s.sweep_rate = 1.0;
    s.sweep_start = 10.0;
    s.sweep_duration = 6.0;
    s.depth0 = 0.10;
    s.depth_wobble = 0.002;
    s.landmark_count = 350;
    s.landmark_spread_deg = 95.0;
    s.dynamic_fraction = 0.30;
    s.occlusion_start = 10.0;
    s.occlusion_end = 16.0;
    s.occlusion_half_angle_deg = 35.0;
    s.occlusion_center_start_deg = -25.0;
    s.occlusion_center_rate_deg_s = 9.0;
    apply_standard_noise(s);
  } else if (name == "calibration-wand") {
    s.seed = 104;
    s.duration = 600.0;
    s.video_rate = 2.0;
    s.ir_rate = 5.0;
    s.rate_amplitude = 0.027;
    s.rate_base_period = 47.0;
    s.depth0 = 0.10;
    s.depth_wobble = 0.002;
    s.landmark_count = 40;
    s.landmark_spread_deg = 60.0;
    apply_standard_noise(s);
    s.sigma_mag = 0.01;
    s.sigma_accel = 0.01;
  } else {
    throw ConfigError("unknown preset scenario \"" + name + "\"");
  }
  return s;
}

// ---- manifest (de)serialization ----

namespace {

std::string vec3_str(const Vec3& v) {
  return format_double(v.x()) + "," + format_double(v.y()) + "," + format_double(v.z());
}

Vec3 vec3_from(const std::string& s, const std::string& key) {
  Vec3 v;
  std::istringstream is(s);
  std::string cell;
  for (int i = 0; i < 3; ++i) {
    if (!std::getline(is, cell, ',')) {
      throw ParseError("manifest: key \"" + key + "\" needs 3 comma-separated values");
    }
    v(i) = parse_double_cell(cell, "manifest", 0, key);
  }
  return v;
}

}  // namespace

Manifest scenario_to_manifest(const Scenario& s) {
  Manifest m;
  m["format"] = "pivio-scenario-1";
  m["scenario.name"] = s.name;
  m["scenario.seed"] = std::to_string(s.seed);
  m["scenario.duration"] = format_double(s.duration);
  m["scenario.imu_rate"] = format_double(s.imu_rate);
  m["scenario.video_rate"] = format_double(s.video_rate);
  m["scenario.ir_rate"] = format_double(s.ir_rate);
  m["scenario.pivot"] = vec3_str(s.pivot);
  m["scenario.rate_amplitude"] = format_double(s.rate_amplitude);
  m["scenario.rate_base_period"] = format_double(s.rate_base_period);
  m["scenario.sweep_rate"] = format_double(s.sweep_rate);
  m["scenario.sweep_start"] = format_double(s.sweep_start);
  m["scenario.sweep_duration"] = format_double(s.sweep_duration);
  m["scenario.depth0"] = format_double(s.depth0);
  m["scenario.depth_slope"] = format_double(s.depth_slope);
  m["scenario.depth_wobble"] = format_double(s.depth_wobble);
  m["scenario.depth_wobble_period"] = format_double(s.depth_wobble_period);
  m["scenario.landmark_count"] = std::to_string(s.landmark_count);
  m["scenario.landmark_radius_min"] = format_double(s.landmark_radius_min);
  m["scenario.landmark_radius_max"] = format_double(s.landmark_radius_max);
  m["scenario.landmark_spread_deg"] = format_double(s.landmark_spread_deg);
  m["scenario.dynamic_fraction"] = format_double(s.dynamic_fraction);
  m["scenario.dynamic_rot_amplitude"] = format_double(s.dynamic_rot_amplitude);
  m["scenario.dynamic_trans_amplitude"] = format_double(s.dynamic_trans_amplitude);
  m["scenario.occlusion_start"] = format_double(s.occlusion_start);
  m["scenario.occlusion_end"] = format_double(s.occlusion_end);
  m["scenario.occlusion_half_angle_deg"] = format_double(s.occlusion_half_angle_deg);
  m["scenario.occlusion_center_start_deg"] = format_double(s.occlusion_center_start_deg);
  m["scenario.occlusion_center_rate_deg_s"] = format_double(s.occlusion_center_rate_deg_s);
  m["scenario.sigma_gyro"] = format_double(s.sigma_gyro);
  m["scenario.sigma_accel"] = format_double(s.sigma_accel);
  m["scenario.sigma_mag"] = format_double(s.sigma_mag);
  m["scenario.sigma_px"] = format_double(s.sigma_px);
  m["scenario.sigma_track_rw"] = format_double(s.sigma_track_rw);
  m["scenario.gyro_bias"] = vec3_str(s.gyro_bias);
  m["scenario.accel_bias"] = vec3_str(s.accel_bias);
  m["scenario.accel_scale"] = format_double(s.accel_scale);
  m["scenario.mag_bias"] = vec3_str(s.mag_bias);
  m["scenario.mag_scale"] = format_double(s.mag_scale);
  m["scenario.imu_offset"] = format_double(s.imu_offset);
  m["scenario.ir_offset"] = format_double(s.ir_offset);
  m["scenario.accel_include_linear"] = s.accel_include_linear ? "1" : "0";
  m["scenario.gravity"] = vec3_str(s.refs.gravity);
  m["scenario.magnetic_field"] = vec3_str(s.refs.magnetic_field);
  return m;
}

Scenario scenario_from_manifest(const Manifest& m) {
  Scenario s;
  s.name = manifest_get(m, "scenario.name");
  s.seed = std::stoull(manifest_get(m, "scenario.seed"));
  s.duration = manifest_get_double(m, "scenario.duration");
  s.imu_rate = manifest_get_double(m, "scenario.imu_rate");
  s.video_rate = manifest_get_double(m, "scenario.video_rate");
  s.ir_rate = manifest_get_double(m, "scenario.ir_rate");
  s.pivot = vec3_from(manifest_get(m, "scenario.pivot"), "scenario.pivot");
  s.rate_amplitude = manifest_get_double(m, "scenario.rate_amplitude");
  s.rate_base_period = manifest_get_double(m, "scenario.rate_base_period");
  s.sweep_rate = manifest_get_double(m, "scenario.sweep_rate");
  s.sweep_start = manifest_get_double(m, "scenario.sweep_start");
  s.sweep_duration = manifest_get_double(m, "scenario.sweep_duration");
  s.depth0 = manifest_get_double(m, "scenario.depth0");
  s.depth_slope = manifest_get_double(m, "scenario.depth_slope");
  s.depth_wobble = manifest_get_double(m, "scenario.depth_wobble");
  s.depth_wobble_period = manifest_get_double(m, "scenario.depth_wobble_period");
  s.landmark_count = static_cast<int>(manifest_get_double(m, "scenario.landmark_count"));
  s.landmark_radius_min = manifest_get_double(m, "scenario.landmark_radius_min");
  s.landmark_radius_max = manifest_get_double(m, "scenario.landmark_radius_max");
  s.landmark_spread_deg = manifest_get_double(m, "scenario.landmark_spread_deg");
  s.dynamic_fraction = manifest_get_double(m, "scenario.dynamic_fraction");
  s.dynamic_rot_amplitude = manifest_get_double(m, "scenario.dynamic_rot_amplitude");
  s.dynamic_trans_amplitude = manifest_get_double(m, "scenario.dynamic_trans_amplitude");
  s.occlusion_start = manifest_get_double(m, "scenario.occlusion_start");
  s.occlusion_end = manifest_get_double(m, "scenario.occlusion_end");
  s.occlusion_half_angle_deg = manifest_get_double(m, "scenario.occlusion_half_angle_deg");
  s.occlusion_center_start_deg =
      manifest_get_double(m, "scenario.occlusion_center_start_deg");
  s.occlusion_center_rate_deg_s =
      manifest_get_double(m, "scenario.occlusion_center_rate_deg_s");
  s.sigma_gyro = manifest_get_double(m, "scenario.sigma_gyro");
  s.sigma_accel = manifest_get_double(m, "scenario.sigma_accel");
  s.sigma_mag = manifest_get_double(m, "scenario.sigma_mag");
  s.sigma_px = manifest_get_double(m, "scenario.sigma_px");
  s.sigma_track_rw = manifest_get_double(m, "scenario.sigma_track_rw");
  s.gyro_bias = vec3_from(manifest_get(m, "scenario.gyro_bias"), "scenario.gyro_bias");
  s.accel_bias = vec3_from(manifest_get(m, "scenario.accel_bias"), "scenario.accel_bias");
  s.accel_scale = manifest_get_double(m, "scenario.accel_scale");
  s.mag_bias = vec3_from(manifest_get(m, "scenario.mag_bias"), "scenario.mag_bias");
  s.mag_scale = manifest_get_double(m, "scenario.mag_scale");
  s.imu_offset = manifest_get_double(m, "scenario.imu_offset");
  s.ir_offset = manifest_get_double(m, "scenario.ir_offset");
  s.accel_include_linear = manifest_get(m, "scenario.accel_include_linear") == "1";
  s.refs.gravity = vec3_from(manifest_get(m, "scenario.gravity"), "scenario.gravity");
  s.refs.magnetic_field =
      vec3_from(manifest_get(m, "scenario.magnetic_field"), "scenario.magnetic_field");
  return s;
}

void emit(const SimData& data, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec && !std::filesystem::exists(dir)) {
    throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  }
  write_manifest(dir / "manifest.txt", scenario_to_manifest(data.spec));
  write_calibration(dir / "calibration.csv", data.rig);
  write_imu_csv(dir / "imu.csv", data.imu);
  write_track_csv(dir / "tracks.csv", data.tracks);
  write_pose_csv(dir / "ir_poses.csv", data.ir_poses);
  write_pose_csv(dir / "groundtruth.csv", data.truth.video_poses);

  std::ostringstream os;
  os << "id,x,y,z,dynamic\n";
  for (const SimLandmark& lm : data.truth.landmarks) {
    os << lm.id << "," << format_double(lm.position.x()) << ","
       << format_double(lm.position.y()) << "," << format_double(lm.position.z())
       << "," << (lm.dynamic ? 1 : 0) << "\n";
  }
  write_text_file(dir / "landmarks.csv", os.str());
}

SimDir load_sim_dir(const std::filesystem::path& dir) {
  SimDir out;
  out.spec = scenario_from_manifest(read_manifest(dir / "manifest.txt"));
  out.rig = parse_calibration(dir / "calibration.csv");
  out.imu = read_imu_csv(dir / "imu.csv");
  out.tracks = read_track_csv(dir / "tracks.csv");
  if (std::filesystem::exists(dir / "ir_poses.csv")) {
    out.ir_poses = read_pose_csv(dir / "ir_poses.csv");
  }
  if (std::filesystem::exists(dir / "groundtruth.csv")) {
    out.gt_poses = read_pose_csv(dir / "groundtruth.csv");
    out.has_ground_truth = true;
  }
  return out;
}

}  // namespace pivio
