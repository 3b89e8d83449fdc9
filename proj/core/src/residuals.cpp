#include "pivio/residuals.hpp"

#include <cmath>
#include <sstream>

#include "pivio/errors.hpp"
#include "pivio/io.hpp"

namespace pivio {

const char* residual_kind_name(ResidualKind k) {
  switch (k) {
    case ResidualKind::pivot: return "pivot";
    case ResidualKind::accel: return "accel";
    case ResidualKind::mag: return "mag";
    case ResidualKind::reproj: return "reproj";
    case ResidualKind::gyro: return "gyro";
  }
  return "?";
}

int residual_dimension(ResidualKind k) {
  switch (k) {
    case ResidualKind::pivot: return 2;
    case ResidualKind::reproj: return 2;
    default: return 3;
  }
}

ResidualStatistics ResidualStatistics::reference_defaults() {
  // Measured on a prior real-data run; pivot arrives in cm and accel in g,
  // stored here converted to m / (m/s^2).
  ResidualStatistics s;
  s.entry(ResidualKind::reproj) = {1.6263, 9.3767, 1, "px"};
  s.entry(ResidualKind::gyro) = {0.0003, 0.0051, 1, "rad"};
  s.entry(ResidualKind::pivot) = {0.0511e-2, 0.4374e-4, 1, "m"};
  s.entry(ResidualKind::accel) = {0.0235 * 9.81, 0.0405 * 9.81 * 9.81, 1, "m/s^2"};
  s.entry(ResidualKind::mag) = {-0.2730, 4.2801, 1, "uT"};
  return s;
}

void write_residual_stats_csv(const std::filesystem::path& path,
                              const ResidualStatistics& stats) {
  std::ostringstream os;
  os << "kind,E,Var,N,unit\n";
  for (const ResidualKind k : kResidualKinds) {
    const StatsEntry& e = stats.entry(k);
    os << residual_kind_name(k) << "," << format_double(e.mean) << ","
       << format_double(e.variance) << "," << e.count << "," << e.unit << "\n";
  }
  write_text_file(path, os.str());
}

ResidualStatistics read_residual_stats_csv(const std::filesystem::path& path) {
  ResidualStatistics stats;
  for (const auto& row : read_csv_rows(path)) {
    if (!row.cells.empty() && row.cells.front() == "kind") continue;
    if (row.cells.size() != 5) {
      throw ParseError(path.string() + ":" + std::to_string(row.line) +
                       ": expected kind,E,Var,N,unit");
    }
    bool known = false;
    for (const ResidualKind k : kResidualKinds) {
      if (row.cells[0] == residual_kind_name(k)) {
        StatsEntry& e = stats.entry(k);
        e.mean = parse_double_cell(row.cells[1], path, row.line, "E");
        e.variance = parse_double_cell(row.cells[2], path, row.line, "Var");
        e.count = static_cast<int>(parse_double_cell(row.cells[3], path, row.line, "N"));
        e.unit = row.cells[4];
        known = true;
        break;
      }
    }
    if (!known) {
      throw ParseError(path.string() + ":" + std::to_string(row.line) +
                       ": unknown residual kind \"" + row.cells[0] + "\"");
    }
  }
  return stats;
}

Vec2 r_pivot(const Transform& pose) {
  return Vec2(pose.translation().y(), pose.translation().z());
}

Vec3 r_accel(const Transform& pose, const Vec3& gravity_in_c,
             const WorldReferences& refs) {
  return gravity_in_c - pose.rotation() * refs.gravity;
}

Vec3 r_mag(const Transform& pose, const Vec3& field_in_c,
           const WorldReferences& refs) {
  return field_in_c - pose.rotation() * refs.magnetic_field;
}

std::optional<Vec2> r_reproj(const Transform& obs_pose,
                             const Transform& anchor_pose_inv,
                             const Vec3& landmark_in_anchor, const PixelPoint& u,
                             const StereoRig& rig, int lens) {
  const Vec3 in_camera = obs_pose * (anchor_pose_inv * landmark_in_anchor);
  const Vec3 in_lens = rig.lens_from_camera(lens) * in_camera;
  if (!(in_lens.z() > 0.0)) return std::nullopt;
  const PixelPoint proj = project(in_lens, rig.intrinsics(lens));
  return Vec2(proj.u - u.u, proj.v - u.v);
}

Vec3 r_gyro(const Transform& pose1, const Transform& pose2,
            const PreintegratedGyro& gyro) {
  const Rotation rel =
      pose2.rotation() * pose1.rotation().transposed() * gyro.delta;
  return log_so3(rel);
}

double huber(double x, double delta) {
  return x <= delta ? 0.5 * x * x : delta * (x - 0.5 * delta);
}

double robust_cost(Robustifier rho, double x, double huber_delta) {
  return rho == Robustifier::huber ? huber(x, huber_delta) : 0.5 * x * x;
}

double robust_weight(Robustifier rho, double x, double huber_delta) {
  if (rho == Robustifier::huber && x > huber_delta) return huber_delta / x;
  return 1.0;
}

double scale_factor(ResidualKind kind, const StatsEntry& stats, double beta) {
  if (!(stats.variance > 0.0)) {
    throw DegenerateStatisticError(std::string("zero variance for kind ") +
                                   residual_kind_name(kind));
  }
  if (stats.count < 1) {
    throw DegenerateStatisticError(std::string("non-positive count for kind ") +
                                   residual_kind_name(kind));
  }
  return beta / (static_cast<double>(stats.count) * std::sqrt(stats.variance));
}

BlockEval evaluate_block(const ResidualBlock& block, const Transform& pose_i,
                         const Transform* pose_j, const EvalContext& ctx,
                         bool with_jacobians) {
  BlockEval out;
  switch (block.kind) {
    case ResidualKind::pivot: {
      out.dim = 2;
      out.residual.head<2>() = r_pivot(pose_i);
      if (with_jacobians) {
        // Right perturbation moves t by R*upsilon only.
        out.j_i.block<2, 3>(0, 3) = pose_i.rotation().matrix().bottomRows<2>();
      }
      break;
    }
    case ResidualKind::accel:
    case ResidualKind::mag: {
      out.dim = 3;
      const Vec3 world_ref = block.kind == ResidualKind::accel
                                 ? ctx.refs.gravity
                                 : ctx.refs.magnetic_field;
      out.residual = block.vector_meas - pose_i.rotation() * world_ref;
      if (with_jacobians) {
        out.j_i.block<3, 3>(0, 0) = pose_i.rotation().matrix() * hat(world_ref);
      }
      break;
    }
    case ResidualKind::reproj: {
      out.dim = 2;
      if (!ctx.rig) throw ConfigError("reprojection block evaluated without a rig");
      const Transform anchor_inv = pose_j->inverse();
      const Vec3 in_world = anchor_inv * block.landmark_in_anchor;
      const Vec3 in_camera = pose_i * in_world;
      const Transform lens_tf = ctx.rig->lens_from_camera(block.lens);
      const Vec3 in_lens = lens_tf * in_camera;
      if (!(in_lens.z() > 0.0)) {
        out.active = false;
        return out;
      }
      const PixelPoint proj = project(in_lens, ctx.rig->intrinsics(block.lens));
      out.residual.head<2>() = Vec2(proj.u - block.pixel.u, proj.v - block.pixel.v);
      if (with_jacobians) {
        const Eigen::Matrix<double, 2, 3> jp =
            project_jacobian(in_lens, ctx.rig->intrinsics(block.lens));
        const Mat3 rl = lens_tf.rotation().matrix();
        const Mat3 ro = pose_i.rotation().matrix();
        Eigen::Matrix<double, 2, 6> j_obs;
        j_obs.block<2, 3>(0, 0) = jp * rl * (-(ro * hat(in_world)));
        j_obs.block<2, 3>(0, 3) = jp * rl * ro;
        out.j_i.topRows<2>() = j_obs;
        out.j_j.topRows<2>() = -j_obs;
      }
      break;
    }
    case ResidualKind::gyro: {
      out.dim = 3;
      out.residual = r_gyro(pose_i, *pose_j, PreintegratedGyro{block.gyro_delta});
      if (with_jacobians) {
        const Mat3 jw = left_jacobian_inv_so3(out.residual) *
                        pose_j->rotation().matrix();
        out.j_j.block<3, 3>(0, 0) = jw;
        out.j_i.block<3, 3>(0, 0) = -jw;
      }
      break;
    }
  }
  return out;
}

void append_record(ResidualLog& log, double t, ResidualKind kind, const Vec2& r) {
  log.push_back({t, kind, 2, {r.x(), r.y(), 0.0}});
}

void append_record(ResidualLog& log, double t, ResidualKind kind, const Vec3& r) {
  log.push_back({t, kind, 3, {r.x(), r.y(), r.z()}});
}

void write_residual_log_csv(const std::filesystem::path& path, const ResidualLog& log) {
  std::ostringstream os;
  os << "timestamp_s,kind,c0,c1,c2\n";
  for (const ResidualRecord& rec : log) {
    os << format_double(rec.t) << "," << residual_kind_name(rec.kind);
    for (int i = 0; i < rec.dim; ++i) os << "," << format_double(rec.values[i]);
    for (int i = rec.dim; i < 3; ++i) os << ",";
    os << "\n";
  }
  write_text_file(path, os.str());
}

ResidualLog read_residual_log_csv(const std::filesystem::path& path) {
  ResidualLog log;
  for (const auto& row : read_csv_rows(path)) {
    if (!row.cells.empty() && row.cells.front() == "timestamp_s") continue;
    if (row.cells.size() != 5) {
      throw ParseError(path.string() + ":" + std::to_string(row.line) +
                       ": expected timestamp_s,kind,c0,c1,c2");
    }
    ResidualRecord rec;
    rec.t = parse_double_cell(row.cells[0], path, row.line, "timestamp_s");
    bool known = false;
    for (const ResidualKind k : kResidualKinds) {
      if (row.cells[1] == residual_kind_name(k)) {
        rec.kind = k;
        known = true;
        break;
      }
    }
    if (!known) {
      throw ParseError(path.string() + ":" + std::to_string(row.line) +
                       ": unknown residual kind \"" + row.cells[1] + "\"");
    }
    rec.dim = 0;
    for (int i = 0; i < 3; ++i) {
      if (row.cells[2 + i].empty()) break;
      rec.values[i] =
          parse_double_cell(row.cells[2 + i], path, row.line, "c" + std::to_string(i));
      rec.dim = i + 1;
    }
    log.push_back(rec);
  }
  return log;
}

}  // namespace pivio
