#include "pivio/sensors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pivio/errors.hpp"
#include "pivio/io.hpp"

namespace pivio {

Vec3 correct_accel(const Vec3& accel_meas, const ImuCalibration& cal) {
  return (accel_meas - cal.accel_bias) * cal.accel_scale;
}

Vec3 correct_mag(const Vec3& mag_meas, const ImuCalibration& cal) {
  return (mag_meas - cal.mag_bias) * cal.mag_scale;
}

SphereFit fit_sphere_calibration(std::span<const Vec3> samples, double radius) {
  const size_t n = samples.size();
  if (n < 4) {
    throw RankDeficiencyError("sphere fit needs at least 4 samples, got " +
                              std::to_string(n));
  }

  // Algebraic initialization: |s|^2 = 2 s.c + (rho^2 - |c|^2).
  MatX a(n, 4);
  VecX y(n);
  for (size_t i = 0; i < n; ++i) {
    a.row(i) << 2.0 * samples[i].transpose(), 1.0;
    y(i) = samples[i].squaredNorm();
  }
  const Eigen::JacobiSVD<MatX> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smin = svd.singularValues()(3);
  const double smax = svd.singularValues()(0);
  if (smax <= 0.0 || smin / smax < 1e-9) {
    std::ostringstream os;
    os << "degenerate (coplanar) sample set, singular value ratio "
       << (smax > 0.0 ? smin / smax : 0.0);
    throw RankDeficiencyError(os.str());
  }
  const Vec4 sol = svd.solve(y);
  const Vec3 center = sol.head<3>();
  const double rho2 = sol(3) + center.squaredNorm();
  if (rho2 <= 0.0) throw RankDeficiencyError("algebraic sphere fit collapsed");

  Vec3 bias = center;
  double scale = radius / std::sqrt(rho2);

  // Gauss-Newton on f_i = scale * |s_i - bias| - radius.
  for (int it = 0; it < 50; ++it) {
    Mat4 h = Mat4::Zero();
    Vec4 g = Vec4::Zero();
    for (size_t i = 0; i < n; ++i) {
      const Vec3 d = samples[i] - bias;
      const double dist = d.norm();
      if (dist < 1e-12) continue;
      const double f = scale * dist - radius;
      Vec4 j;
      j << -scale * d / dist, dist;
      h += j * j.transpose();
      g += j * f;
    }
    const Vec4 step = h.ldlt().solve(-g);
    bias += step.head<3>();
    scale += step(3);
    if (step.norm() < 1e-14 * std::max(1.0, bias.norm() + std::abs(scale))) break;
  }
  if (scale <= 0.0) throw RankDeficiencyError("sphere fit produced non-positive scale");

  double ss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double f = scale * (samples[i] - bias).norm() - radius;
    ss += f * f;
  }
  return {bias, scale, std::sqrt(ss / static_cast<double>(n))};
}

PreintegratedGyro integrate_gyro(std::span<const ImuSample> samples, double dt) {
  PreintegratedGyro out;
  if (samples.empty()) return out;
  out.t_begin = samples.front().t;
  out.t_end = samples.front().t + dt * static_cast<double>(samples.size());
  Rotation r;
  int since_renorm = 0;
  for (const ImuSample& s : samples) {
    r = r * exp_so3(s.gyro * dt);
    if (++since_renorm == 256) {
      r = r.renormalized();
      since_renorm = 0;
    }
  }
  out.delta = r;
  out.count = static_cast<int>(samples.size());
  return out;
}

PreintegratedGyro integrate_gyro_span(const ImuStream& stream, double t1, double t2) {
  PreintegratedGyro out;
  out.t_begin = t1;
  out.t_end = t2;
  if (stream.empty() || t2 <= t1) return out;

  // First sample whose hold interval can reach past t1.
  auto it = std::upper_bound(stream.begin(), stream.end(), t1,
                             [](double t, const ImuSample& s) { return t < s.t; });
  if (it != stream.begin()) --it;

  Rotation r;
  int count = 0;
  double cursor = t1;
  for (; it != stream.end() && cursor < t2; ++it) {
    const double hold_end = std::next(it) != stream.end() ? std::next(it)->t : t2;
    const double seg_end = std::min(t2, std::max(cursor, hold_end));
    const double len = seg_end - cursor;
    if (len > 0.0) {
      r = r * exp_so3(it->gyro * len);
      ++count;
      cursor = seg_end;
    }
  }
  out.delta = r;
  out.count = count;
  return out;
}

size_t nearest_sample(const ImuStream& stream, double t) {
  if (stream.empty()) throw StreamError("nearest_sample on empty stream");
  const auto it = std::lower_bound(
      stream.begin(), stream.end(), t,
      [](const ImuSample& s, double value) { return s.t < value; });
  if (it == stream.begin()) return 0;
  if (it == stream.end()) return stream.size() - 1;
  const size_t hi = static_cast<size_t>(it - stream.begin());
  return (it->t - t < t - std::prev(it)->t) ? hi : hi - 1;
}

TwistStream twist_from_trajectory(const PoseStream& poses) {
  if (poses.size() < 2) {
    throw InsufficientDataError("twist_from_trajectory needs at least 2 poses");
  }
  TwistStream out;
  out.reserve(poses.size() - 1);
  for (size_t i = 0; i + 1 < poses.size(); ++i) {
    const double dt = poses[i + 1].t - poses[i].t;
    if (dt <= 0.0) {
      std::ostringstream os;
      os << "non-increasing timestamps at index " << i << ": " << poses[i].t
         << " -> " << poses[i + 1].t;
      throw StreamError(os.str());
    }
    const Twist xi = log_se3(poses[i].pose.inverse() * poses[i + 1].pose);
    out.push_back({0.5 * (poses[i].t + poses[i + 1].t),
                   Twist{xi.omega / dt, xi.upsilon / dt}});
  }
  return out;
}

namespace {

Vec6 interpolate_twist(const TwistStream& s, double t) {
  const auto it = std::lower_bound(
      s.begin(), s.end(), t,
      [](const TimedTwist& a, double value) { return a.t < value; });
  if (it == s.begin()) return it->xi.vector();
  if (it == s.end()) return std::prev(it)->xi.vector();
  const TimedTwist& hi = *it;
  const TimedTwist& lo = *std::prev(it);
  const double w = (t - lo.t) / (hi.t - lo.t);
  return (1.0 - w) * lo.xi.vector() + w * hi.xi.vector();
}

}  // namespace

TimeOffsetResult estimate_time_offset(const TwistStream& stream_j,
                                      const TwistStream& stream_k,
                                      double search_min, double search_max,
                                      double step) {
  if (stream_j.empty() || stream_k.empty()) {
    throw StreamError("estimate_time_offset: empty stream");
  }
  if (!(step > 0.0) || search_max < search_min) {
    throw ConfigError("estimate_time_offset: bad search grid");
  }

  // Fixed evaluation set: indices of stream_k valid at every candidate dt, so
  // all grid points integrate the same samples.
  const double jlo = stream_j.front().t;
  const double jhi = stream_j.back().t;
  std::vector<size_t> eval;
  for (size_t i = 0; i < stream_k.size(); ++i) {
    const double t = stream_k[i].t;
    if (t + search_min >= jlo && t + search_max <= jhi) eval.push_back(i);
  }
  if (eval.empty()) {
    throw StreamError("estimate_time_offset: no overlap at any candidate offset");
  }

  TimeOffsetResult out;
  const int steps = static_cast<int>(std::floor((search_max - search_min) / step + 0.5));
  double best_cost = std::numeric_limits<double>::infinity();
  for (int s = 0; s <= steps; ++s) {
    const double dt = search_min + step * static_cast<double>(s);
    double cost = 0.0;
    for (const size_t i : eval) {
      const Vec6 a = interpolate_twist(stream_j, stream_k[i].t + dt);
      cost += (a - stream_k[i].xi.vector()).norm();
    }
    out.cost_curve.emplace_back(dt, cost);
    if (cost < best_cost ||
        (cost == best_cost && std::abs(dt) < std::abs(out.dt))) {
      best_cost = cost;
      out.dt = dt;
    }
  }

  double lo = out.cost_curve.front().second, hi = lo, mean = 0.0;
  for (const auto& [d, c] : out.cost_curve) {
    lo = std::min(lo, c);
    hi = std::max(hi, c);
    mean += c;
  }
  mean /= static_cast<double>(out.cost_curve.size());
  out.reliable = mean > 0.0 && (hi - lo) >= 0.05 * mean;
  return out;
}

ImuStream read_imu_csv(const std::filesystem::path& path) {
  ImuStream stream;
  for (const auto& row : read_csv_rows(path)) {
    if (!row.cells.empty() && row.cells.front() == "timestamp_s") continue;  // header
    if (row.cells.size() != 10) {
      std::ostringstream os;
      os << path.string() << ":" << row.line << ": expected 10 cells, got "
         << row.cells.size();
      throw ParseError(os.str());
    }
    static const char* kCols[10] = {"timestamp_s", "wx", "wy", "wz", "ax",
                                    "ay", "az", "mx", "my", "mz"};
    double v[10];
    for (int i = 0; i < 10; ++i) {
      v[i] = parse_double_cell(row.cells[i], path, row.line, kCols[i]);
    }
    ImuSample s;
    s.t = v[0];
    s.gyro = Vec3(v[1], v[2], v[3]);
    s.accel = Vec3(v[4], v[5], v[6]);
    s.mag = Vec3(v[7], v[8], v[9]);
    if (!stream.empty() && s.t <= stream.back().t) {
      std::ostringstream os;
      os << path.string() << ":" << row.line << ": timestamps not strictly increasing";
      throw ParseError(os.str());
    }
    stream.push_back(s);
  }
  return stream;
}

void write_imu_csv(const std::filesystem::path& path, const ImuStream& stream) {
  std::ostringstream os;
  os << "timestamp_s,wx,wy,wz,ax,ay,az,mx,my,mz\n";
  for (const ImuSample& s : stream) {
    os << format_double(s.t);
    for (int i = 0; i < 3; ++i) os << "," << format_double(s.gyro(i));
    for (int i = 0; i < 3; ++i) os << "," << format_double(s.accel(i));
    for (int i = 0; i < 3; ++i) os << "," << format_double(s.mag(i));
    os << "\n";
  }
  write_text_file(path, os.str());
}

PoseStream read_pose_csv(const std::filesystem::path& path, Frame to, Frame from) {
  PoseStream poses;
  for (const auto& row : read_csv_rows(path)) {
    if (!row.cells.empty() && row.cells.front() == "timestamp_s") continue;
    if (row.cells.size() != 13) {
      std::ostringstream os;
      os << path.string() << ":" << row.line << ": expected 13 cells, got "
         << row.cells.size();
      throw ParseError(os.str());
    }
    double v[13];
    for (int i = 0; i < 13; ++i) {
      v[i] = parse_double_cell(row.cells[i], path, row.line,
                               i == 0 ? "timestamp_s" : "T" + std::to_string(i - 1));
    }
    Mat3 r;
    r << v[1], v[2], v[3], v[5], v[6], v[7], v[9], v[10], v[11];
    const Vec3 t(v[4], v[8], v[12]);
    try {
      poses.push_back({v[0], Transform(Rotation::from_matrix(r), t, to, from)});
    } catch (const DegenerateGeometryError& e) {
      std::ostringstream os;
      os << path.string() << ":" << row.line << ": " << e.what();
      throw ParseError(os.str());
    }
  }
  return poses;
}

void write_pose_csv(const std::filesystem::path& path, const PoseStream& poses) {
  std::ostringstream os;
  os << "timestamp_s,r00,r01,r02,tx,r10,r11,r12,ty,r20,r21,r22,tz\n";
  for (const TimedPose& p : poses) {
    os << format_double(p.t);
    const Mat3& r = p.pose.rotation().matrix();
    const Vec3& t = p.pose.translation();
    for (int row = 0; row < 3; ++row) {
      for (int col = 0; col < 3; ++col) os << "," << format_double(r(row, col));
      os << "," << format_double(t(row));
    }
    os << "\n";
  }
  write_text_file(path, os.str());
}

}  // namespace pivio
