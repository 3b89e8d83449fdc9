#include "pivio/eval.hpp"

#include <algorithm>
#include <cmath>

#include "pivio/errors.hpp"

namespace pivio {

PoseError pose_error(const Transform& ref, const Transform& est) {
  const Twist xi = ominus(ref, est);
  return {0.0, xi.omega.norm(), xi.upsilon.norm()};
}

std::vector<PoseError> trajectory_error(const PoseStream& ref, const PoseStream& est,
                                        double max_dt, int* skipped) {
  std::vector<PoseError> out;
  int missed = 0;
  size_t cursor = 0;
  for (const TimedPose& e : est) {
    while (cursor + 1 < ref.size() &&
           std::abs(ref[cursor + 1].t - e.t) <= std::abs(ref[cursor].t - e.t)) {
      ++cursor;
    }
    if (ref.empty() || std::abs(ref[cursor].t - e.t) > max_dt) {
      ++missed;
      continue;
    }
    PoseError pe = pose_error(ref[cursor].pose, e.pose);
    pe.t = e.t;
    out.push_back(pe);
  }
  if (skipped) *skipped = missed;
  return out;
}

namespace {

double percentile(std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * (sorted.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double w = pos - lo;
  return (1.0 - w) * sorted[lo] + w * sorted[hi];
}

}  // namespace

ErrorSummary summarize_errors(std::vector<PoseError> errors) {
  ErrorSummary s;
  s.count = static_cast<int>(errors.size());
  if (errors.empty()) return s;
  s.final_rot = errors.back().rot;
  s.final_trans = errors.back().trans;
  std::vector<double> rot, trans;
  rot.reserve(errors.size());
  trans.reserve(errors.size());
  for (const PoseError& e : errors) {
    rot.push_back(e.rot);
    trans.push_back(e.trans);
  }
  std::sort(rot.begin(), rot.end());
  std::sort(trans.begin(), trans.end());
  s.median_rot = percentile(rot, 0.5);
  s.median_trans = percentile(trans, 0.5);
  s.p95_rot = percentile(rot, 0.95);
  s.p95_trans = percentile(trans, 0.95);
  s.max_rot = rot.back();
  s.max_trans = trans.back();
  return s;
}

ResidualStatistics compute_residual_stats(const ResidualLog& log) {
  ResidualStatistics stats;
  for (const ResidualKind kind : kResidualKinds) {
    double sum = 0.0, sum_sq = 0.0;
    long n = 0;
    long records = 0;
    double last_t = std::numeric_limits<double>::quiet_NaN();
    long timestamps = 0;
    for (const ResidualRecord& rec : log) {
      if (rec.kind != kind) continue;
      ++records;
      if (rec.t != last_t) {
        ++timestamps;
        last_t = rec.t;
      }
      for (int i = 0; i < rec.dim; ++i) {
        sum += rec.values[i];
        sum_sq += rec.values[i] * rec.values[i];
        ++n;
      }
    }
    StatsEntry& e = stats.entry(kind);
    switch (kind) {
      case ResidualKind::pivot: e.unit = "m"; break;
      case ResidualKind::accel: e.unit = "m/s^2"; break;
      case ResidualKind::mag: e.unit = "uT"; break;
      case ResidualKind::reproj: e.unit = "px"; break;
      case ResidualKind::gyro: e.unit = "rad"; break;
    }
    if (n < 2) continue;
    e.mean = sum / n;
    e.variance = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1));
    e.count = std::max(1, static_cast<int>(std::lround(
                              static_cast<double>(records) / timestamps)));
  }
  return stats;
}

RunOutcome run_on_scenario(const SimData& data, const OdometryConfig& cfg,
                           const Vec3& pivot_guess_offset) {
  OdometryInputs in;
  in.rig = &data.rig;
  in.imu = data.imu;
  for (ImuSample& s : in.imu) s.t -= data.spec.imu_offset;  // realign clocks
  in.imu_cal.accel_bias = data.spec.accel_bias;
  in.imu_cal.accel_scale = data.spec.accel_scale;
  in.imu_cal.mag_bias = data.spec.mag_bias;
  in.imu_cal.mag_scale = data.spec.mag_scale;
  in.tracks = data.tracks;
  in.initial_pose = data.truth.video_poses.front().pose;
  in.pivot = data.truth.pivot + pivot_guess_offset;
  in.refs = data.spec.refs;

  RunOutcome out;
  out.odo = run_odometry(in, cfg);
  const double half_period = 0.5 / data.spec.video_rate;
  out.errors = trajectory_error(data.truth.video_poses, out.odo.trajectory,
                                half_period);
  out.summary = summarize_errors(out.errors);
  return out;
}

std::vector<AblationRow> ablation(const SimData& data, const OdometryConfig& base) {
  std::vector<AblationRow> rows;
  const std::vector<std::pair<std::string, bool>> variants = {
      {"V1", false}, {"V2", false}, {"V3", false}, {"V4", false}, {"V3", true}};
  for (const auto& [name, optimize] : variants) {
    OdometryConfig cfg = base;
    cfg.variant = VariantConfig::from_name(name);
    cfg.variant.use_optimization = optimize;
    const Vec3 guess_offset = cfg.variant.pivot_online
                                  ? Vec3(0.01, -0.008, 0.012)
                                  : Vec3::Zero();
    const RunOutcome run = run_on_scenario(data, cfg, guess_offset);
    AblationRow row;
    row.variant = optimize ? name + "opt" : name;
    row.summary = run.summary;
    row.sanity_rejections = run.odo.sanity_rejections;
    row.tracking_lost_frames = run.odo.tracking_lost_frames;
    rows.push_back(row);
  }
  return rows;
}

std::vector<GammaPoint> gamma_sweep(const SimData& data, const OdometryConfig& base,
                                    const std::vector<double>& gammas) {
  std::vector<GammaPoint> points;
  for (const double gamma : gammas) {
    if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must lie in [0, 1]");
    OdometryConfig cfg = base;
    cfg.variant = VariantConfig::from_name("V3");
    cfg.variant.use_optimization = true;
    cfg.gamma = gamma;
    const RunOutcome run = run_on_scenario(data, cfg);
    GammaPoint p;
    p.gamma = gamma;
    p.summary = run.summary;
    p.solves = static_cast<int>(run.odo.solves.size());
    for (const SolveReport& rep : run.odo.solves) {
      const auto d = rep.delta_f();
      for (int i = 0; i < 5; ++i) p.mean_delta_f[i] += d[i];
    }
    if (p.solves > 0) {
      for (double& v : p.mean_delta_f) v /= p.solves;
    }
    points.push_back(p);
  }
  return points;
}

}  // namespace pivio
