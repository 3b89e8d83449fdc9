#include "pivio/odometry.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "pivio/errors.hpp"

namespace pivio {

namespace {

constexpr double kPi = std::numbers::pi;

struct LensKey {
  int landmark;
  int lens;
  bool operator==(const LensKey&) const = default;
};

struct LensKeyHash {
  size_t operator()(const LensKey& k) const {
    return std::hash<long long>()((static_cast<long long>(k.landmark) << 2) | k.lens);
  }
};

}  // namespace

VariantConfig VariantConfig::from_name(const std::string& name) {
  VariantConfig v;
  if (name == "V1") {
    v = {true, false, false, false};
  } else if (name == "V2") {
    v = {false, true, false, false};
  } else if (name == "V3") {
    v = {true, true, false, false};
  } else if (name == "V4") {
    v = {true, true, true, false};
  } else {
    throw ConfigError("unknown variant \"" + name + "\" (expected V1..V4)");
  }
  return v;
}

Transform gyro_pose_update(const Transform& prev, const PreintegratedGyro& gyro) {
  const Rotation updated = Rotation::from_matrix_unchecked(
      gyro.delta.matrix().transpose() * prev.rotation().matrix());
  return Transform(updated, prev.translation(), prev.to_frame(), prev.from_frame());
}

TrackFrame advance_tracks(const TrackFrame& prev, const TrackFrameData& incoming,
                          const std::function<bool(int)>& known,
                          double gap_threshold) {
  if (!prev.entries.empty() && incoming.t - prev.t > gap_threshold) {
    std::ostringstream os;
    os << "track stream gap of " << incoming.t - prev.t << " s at t=" << incoming.t;
    throw StreamError(os.str());
  }
  std::unordered_map<LensKey, int, LensKeyHash> prev_age;
  prev_age.reserve(prev.entries.size());
  for (const TrackFrame::Entry& e : prev.entries) {
    prev_age[{e.landmark, e.lens}] = e.age;
  }

  TrackFrame out;
  out.t = incoming.t;
  std::unordered_set<long long> seen;
  for (const TrackObs& obs : incoming.obs) {
    if (!known(obs.landmark)) continue;
    const long long key = (static_cast<long long>(obs.landmark) << 2) | obs.lens;
    if (!seen.insert(key).second) {
      throw StreamError("landmark " + std::to_string(obs.landmark) +
                        " appears twice in lens " + std::to_string(obs.lens));
    }
    TrackFrame::Entry e;
    e.landmark = obs.landmark;
    e.lens = obs.lens;
    e.pixel = obs.pixel;
    const auto it = prev_age.find({obs.landmark, obs.lens});
    e.age = it == prev_age.end() ? 0 : it->second + 1;
    out.entries.push_back(e);
  }
  return out;
}

// ---- P3P (three-point pose) with a fourth-point disambiguator ----

namespace {

// real roots of sum_i c[i] v^i via the companion matrix
std::vector<double> real_roots(std::vector<double> c) {
  while (!c.empty() && std::abs(c.back()) < 1e-14) c.pop_back();
  if (c.size() < 2) return {};
  const int deg = static_cast<int>(c.size()) - 1;
  MatX companion = MatX::Zero(deg, deg);
  for (int i = 0; i < deg; ++i) {
    companion(0, i) = -c[deg - 1 - i] / c[deg];
    if (i + 1 < deg) companion(i + 1, i) = 1.0;
  }
  const Eigen::EigenSolver<MatX> eig(companion);
  std::vector<double> roots;
  for (int i = 0; i < deg; ++i) {
    const auto z = eig.eigenvalues()(i);
    if (std::abs(z.imag()) < 1e-8 * std::max(1.0, std::abs(z.real()))) {
      roots.push_back(z.real());
    }
  }
  return roots;
}

Transform kabsch(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
  Vec3 cf = Vec3::Zero(), ct = Vec3::Zero();
  for (size_t i = 0; i < from.size(); ++i) {
    cf += from[i];
    ct += to[i];
  }
  cf /= static_cast<double>(from.size());
  ct /= static_cast<double>(to.size());
  Mat3 h = Mat3::Zero();
  for (size_t i = 0; i < from.size(); ++i) {
    h += (from[i] - cf) * (to[i] - ct).transpose();
  }
  const Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
  const Mat3 r = svd.matrixV() * d * svd.matrixU().transpose();
  return Transform(Rotation::from_matrix_unchecked(r), ct - r * cf);
}

// Solves for the camera-from-world transform of a central camera given three
// world points and their unit bearings (Grunert's distance equations).
std::vector<Transform> p3p_grunert(const std::array<Vec3, 3>& x_world,
                                   const std::array<Vec3, 3>& bearing) {
  const double a = (x_world[1] - x_world[2]).norm();
  const double b = (x_world[0] - x_world[2]).norm();
  const double c = (x_world[0] - x_world[1]).norm();
  if (a < 1e-9 || b < 1e-9 || c < 1e-9) return {};
  const double cos_alpha = bearing[1].dot(bearing[2]);
  const double cos_beta = bearing[0].dot(bearing[2]);
  const double cos_gamma = bearing[0].dot(bearing[1]);

  const double a2 = a * a, b2 = b * b, c2 = c * c;
  // u = N(v)/D(v) from eliminating u^2 between the two distance ratios
  const std::array<double, 3> n_poly = {
      (a2 - c2) + b2, -2.0 * (a2 - c2) * cos_beta, (a2 - c2) - b2};
  const std::array<double, 2> d_poly = {2.0 * b2 * cos_gamma, -2.0 * b2 * cos_alpha};

  // quartic: b^2 (D^2 + N^2 - 2 N D cos_gamma) - c^2 D^2 (1 + v^2 - 2 v cos_beta)
  std::vector<double> q(5, 0.0);
  const auto add_conv = [&](const auto& p1, const auto& p2, double scale) {
    for (size_t i = 0; i < p1.size(); ++i) {
      for (size_t j = 0; j < p2.size(); ++j) {
        q[i + j] += scale * p1[i] * p2[j];
      }
    }
  };
  add_conv(d_poly, d_poly, b2);
  add_conv(n_poly, n_poly, b2);
  add_conv(n_poly, d_poly, -2.0 * b2 * cos_gamma);
  const std::array<double, 3> quad = {1.0, -2.0 * cos_beta, 1.0};
  std::vector<double> d2(3, 0.0);
  for (size_t i = 0; i < d_poly.size(); ++i) {
    for (size_t j = 0; j < d_poly.size(); ++j) d2[i + j] += d_poly[i] * d_poly[j];
  }
  for (size_t i = 0; i < d2.size(); ++i) {
    for (size_t j = 0; j < quad.size(); ++j) q[i + j] -= c2 * d2[i] * quad[j];
  }

  std::vector<Transform> poses;
  for (const double v : real_roots(q)) {
    if (!(v > 0.0)) continue;
    const double denom = d_poly[0] + d_poly[1] * v;
    if (std::abs(denom) < 1e-12) continue;
    const double u = (n_poly[0] + n_poly[1] * v + n_poly[2] * v * v) / denom;
    if (!(u > 0.0)) continue;
    const double s1sq = b2 / (1.0 + v * v - 2.0 * v * cos_beta);
    if (!(s1sq > 0.0)) continue;
    const double s1 = std::sqrt(s1sq);
    const double s2 = u * s1;
    const double s3 = v * s1;
    const std::vector<Vec3> cam = {s1 * bearing[0], s2 * bearing[1], s3 * bearing[2]};
    const std::vector<Vec3> world(x_world.begin(), x_world.end());
    poses.push_back(kabsch(world, cam));
  }
  return poses;
}

double reproj_error_px(const Transform& pose_c_from_w, const PnpCorrespondence& c,
                       const StereoRig& rig, const Transform lens_tf[2]) {
  const Vec3 in_lens = lens_tf[c.lens] * (pose_c_from_w * c.world_point);
  if (!(in_lens.z() > 1e-6)) return std::numeric_limits<double>::infinity();
  const PixelPoint p = project(in_lens, rig.intrinsics(c.lens));
  return std::hypot(p.u - c.pixel.u, p.v - c.pixel.v);
}

// damped Gauss-Newton on the inlier reprojection errors, both lenses
Transform refine_pose(const Transform& init,
                      const std::vector<PnpCorrespondence>& correspondences,
                      const std::vector<int>& subset, const StereoRig& rig,
                      const Transform lens_tf[2], int iterations) {
  Transform pose = init;
  double lambda = 1e-6;
  double last_cost = std::numeric_limits<double>::infinity();
  for (int it = 0; it < iterations; ++it) {
    Mat6 h = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    double cost = 0.0;
    for (const int idx : subset) {
      const PnpCorrespondence& c = correspondences[idx];
      const Vec3 in_cam = pose * c.world_point;
      const Vec3 in_lens = lens_tf[c.lens] * in_cam;
      if (!(in_lens.z() > 1e-6)) continue;
      const PixelPoint p = project(in_lens, rig.intrinsics(c.lens));
      const Vec2 r(p.u - c.pixel.u, p.v - c.pixel.v);
      const Eigen::Matrix<double, 2, 3> jp =
          project_jacobian(in_lens, rig.intrinsics(c.lens));
      const Mat3 rl = lens_tf[c.lens].rotation().matrix();
      const Mat3 rp = pose.rotation().matrix();
      Eigen::Matrix<double, 2, 6> j;
      j.leftCols<3>() = jp * rl * rp * (-hat(c.world_point));
      j.rightCols<3>() = jp * rl * rp;
      h += j.transpose() * j;
      g += j.transpose() * r;
      cost += r.squaredNorm();
    }
    if (cost >= last_cost && it > 0) break;
    last_cost = cost;
    Mat6 damped = h;
    damped.diagonal() += lambda * h.diagonal().cwiseMax(1e-12);
    const Vec6 step = damped.ldlt().solve(-g);
    if (!step.allFinite() || step.norm() < 1e-14) break;
    pose = pose * exp_se3(Twist::from_vector(step));
  }
  return pose;
}

}  // namespace

PnpResult pnp_ransac(const std::vector<PnpCorrespondence>& correspondences,
                     const Transform& init, const StereoRig& rig,
                     const PnpOptions& opts, std::mt19937_64& rng) {
  const int n = static_cast<int>(correspondences.size());
  if (n < 4) {
    throw InsufficientDataError("pnp needs at least 4 correspondences, got " +
                                std::to_string(n));
  }
  const Transform lens_tf[2] = {rig.lens_from_camera(0), rig.lens_from_camera(1)};

  std::vector<int> lens0;
  std::vector<Vec3> bearings(n);
  for (int i = 0; i < n; ++i) {
    bearings[i] = unproject(correspondences[i].pixel,
                            rig.intrinsics(correspondences[i].lens));
    if (correspondences[i].lens == 0) lens0.push_back(i);
  }

  const auto count_inliers = [&](const Transform& pose, std::vector<int>* out) {
    int count = 0;
    double rms = 0.0;
    if (out) out->clear();
    for (int i = 0; i < n; ++i) {
      const double e = reproj_error_px(pose, correspondences[i], rig, lens_tf);
      if (e < opts.threshold_px) {
        ++count;
        rms += e * e;
        if (out) out->push_back(i);
      }
    }
    return std::make_pair(count, count ? std::sqrt(rms / count) : 0.0);
  };

  Transform best = init;
  auto [best_count, best_rms] = count_inliers(init, nullptr);

  if (lens0.size() >= 4) {
    std::uniform_int_distribution<size_t> pick(0, lens0.size() - 1);
    for (int it = 0; it < opts.iterations; ++it) {
      // four distinct lens-0 correspondences: three for the minimal solver,
      // one to disambiguate roots
      std::array<int, 4> sel{};
      for (int k = 0; k < 4;) {
        const int cand = lens0[pick(rng)];
        bool dup = false;
        for (int j = 0; j < k; ++j) dup |= sel[j] == cand;
        if (!dup) sel[k++] = cand;
      }
      const std::array<Vec3, 3> xs = {correspondences[sel[0]].world_point,
                                      correspondences[sel[1]].world_point,
                                      correspondences[sel[2]].world_point};
      const std::array<Vec3, 3> fs = {bearings[sel[0]], bearings[sel[1]],
                                      bearings[sel[2]]};
      for (const Transform& c0_from_w : p3p_grunert(xs, fs)) {
        const Transform pose = rig.mount * c0_from_w;
        const double e4 = reproj_error_px(pose, correspondences[sel[3]], rig, lens_tf);
        if (!(e4 < 4.0 * opts.threshold_px)) continue;
        const auto [count, rms] = count_inliers(pose, nullptr);
        if (count > best_count || (count == best_count && rms < best_rms)) {
          best = pose;
          best_count = count;
          best_rms = rms;
        }
      }
      if (best_count > static_cast<int>(0.9 * n)) break;
    }
  }

  PnpResult result;
  std::vector<int> inliers;
  count_inliers(best, &inliers);
  for (int round = 0; round < 2 && static_cast<int>(inliers.size()) >= 4; ++round) {
    best = refine_pose(best, correspondences, inliers, rig, lens_tf,
                       opts.refine_iterations);
    count_inliers(best, &inliers);
  }
  result.pose = best.retagged(Frame::camera, Frame::world);
  result.inliers = inliers;
  result.inlier_ratio = static_cast<double>(inliers.size()) / n;
  result.tracking_lost = result.inlier_ratio < opts.min_inlier_ratio;
  return result;
}

SanityVerdict sanity_check(const Transform& candidate, const Transform& predicted,
                           double max_rotation_rad, double max_off_axis) {
  if (candidate.rotation().angle_to(predicted.rotation()) > max_rotation_rad) {
    return SanityVerdict::reject_rotation;
  }
  if (r_pivot(candidate).norm() > max_off_axis) {
    return SanityVerdict::reject_off_axis;
  }
  return SanityVerdict::accept;
}

bool keyframe_decision(const KeyframeState& state, const OdometryConfig& cfg) {
  if (state.first) return true;
  if (state.time_since_kf < cfg.min_keyframe_interval) return false;
  if (state.tracked_count < cfg.min_tracked) return true;
  if (state.mean_track_age > cfg.max_mean_track_age) return true;
  if (state.rotation_since_kf > cfg.kf_rotation_deg * kPi / 180.0) return true;
  if (state.translation_since_kf > cfg.kf_translation) return true;
  return false;
}

std::vector<Landmark> init_landmarks(const TrackFrameData& frame,
                                     const StereoRig& rig, const Transform& kf_pose,
                                     int kf_id,
                                     const std::function<bool(int)>& already_known,
                                     double epipolar_threshold) {
  std::unordered_map<int, PixelPoint> left, right;
  for (const TrackObs& obs : frame.obs) {
    if (already_known(obs.landmark)) continue;
    (obs.lens == 0 ? left : right)[obs.landmark] = obs.pixel;
  }
  std::vector<int> ids;
  ids.reserve(left.size());
  for (const auto& [id, px] : left) {
    if (right.count(id)) ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());

  std::vector<Landmark> out;
  for (const int id : ids) {
    try {
      const Vec3 b0 = unproject(left[id], rig.left);
      const Vec3 b1 = unproject(right[id], rig.right);
      if (std::abs(epipolar_error(b0, b1, rig)) > epipolar_threshold) continue;
      const Vec3 in_c0 = triangulate(left[id], right[id], rig);
      Landmark lm;
      lm.id = id;
      lm.anchor_keyframe = kf_id;
      lm.position_in_anchor = rig.mount * in_c0;
      out.push_back(lm);
    } catch (const DegenerateGeometryError&) {
    } catch (const NonConvergenceError&) {
    }
  }
  (void)kf_pose;
  return out;
}

PivotEstimate estimate_pivot(std::span<const Transform> keyframe_poses) {
  if (keyframe_poses.size() < 3) {
    throw IllConditionedError(
        "pivot estimation needs at least 3 keyframes, got " +
        std::to_string(keyframe_poses.size()) + " (condition number inf)");
  }
  Mat3 a = Mat3::Zero();
  Vec3 rhs = Vec3::Zero();
  for (const Transform& pose : keyframe_poses) {
    const Vec3 axis = pose.rotation().matrix().row(0).transpose();  // camera x in world
    const Vec3 center = pose.inverse().translation();
    const Mat3 proj = Mat3::Identity() - axis * axis.transpose();
    a += proj;
    rhs += proj * center;
  }
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(a);
  const double lo = eig.eigenvalues()(0);
  const double hi = eig.eigenvalues()(2);
  if (!(lo > 1e-8 * hi)) {
    std::ostringstream os;
    os << "pivot estimation ill-conditioned, condition number "
       << (lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity());
    throw IllConditionedError(os.str());
  }
  PivotEstimate est;
  est.point = a.ldlt().solve(rhs);
  est.confidence = lo / hi;
  return est;
}

OdometryResult run_odometry(const OdometryInputs& inputs, const OdometryConfig& cfg) {
  if (!inputs.rig) throw ConfigError("run_odometry: missing stereo rig");
  if (inputs.tracks.empty()) throw ConfigError("run_odometry: no track frames");
  if (!cfg.variant.use_gyro_update && !cfg.variant.use_visual_update) {
    throw ConfigError("at least one of the gyro/visual update paths must be enabled");
  }
  if ((cfg.variant.use_gyro_update || !inputs.imu.empty()) && inputs.imu.empty()) {
    if (cfg.variant.use_gyro_update) {
      throw ConfigError("gyro updates enabled but the IMU stream is empty");
    }
  }

  OdometryResult result;
  std::mt19937_64 rng(cfg.seed);
  PnpOptions pnp_opts{cfg.ransac_threshold_px, cfg.ransac_iterations,
                      cfg.min_inlier_ratio, 15};

  Vec3 pivot_est = inputs.pivot;
  const auto to_pivot_frame = [&](const Transform& world_pose) {
    return world_pose *
           Transform(Rotation::identity(), pivot_est, Frame::world, Frame::world);
  };
  const auto to_world_frame = [&](const Transform& pivot_pose) {
    return pivot_pose *
           Transform(Rotation::identity(), -pivot_est, Frame::world, Frame::world);
  };

  Transform cur = to_pivot_frame(inputs.initial_pose);
  TrackFrame live;
  bool have_live = false;
  double t_prev = inputs.tracks.front().t;
  int next_kf_id = 0;
  double last_kf_t = 0.0;
  Transform last_kf_pose;
  int kfs_since_solve = 0;

  const auto known = [&](int id) {
    return result.graph.landmarks.find(id) != result.graph.landmarks.end();
  };

  for (size_t frame_idx = 0; frame_idx < inputs.tracks.size(); ++frame_idx) {
    const TrackFrameData& frame = inputs.tracks[frame_idx];

    // 1. constrained gyro propagation
    Transform predicted = cur;
    if (frame_idx > 0 && cfg.variant.use_gyro_update) {
      const PreintegratedGyro link = integrate_gyro_span(inputs.imu, t_prev, frame.t);
      predicted = gyro_pose_update(cur, link);
    }

    // 2. track advance
    live = advance_tracks(have_live ? live : TrackFrame{frame.t, {}}, frame, known,
                          cfg.track_gap_threshold);
    have_live = true;
    cur = predicted;

    // 3. track-based pose refinement
    if (cfg.variant.use_visual_update && !result.graph.landmarks.empty()) {
      std::vector<PnpCorrespondence> corr;
      corr.reserve(live.entries.size());
      std::unordered_map<int, Transform> anchor_inv;
      for (const TrackFrame::Entry& e : live.entries) {
        const Landmark& lm = result.graph.landmarks.at(e.landmark);
        auto it = anchor_inv.find(lm.anchor_keyframe);
        if (it == anchor_inv.end()) {
          const Keyframe* anchor = result.graph.find(lm.anchor_keyframe);
          it = anchor_inv.emplace(lm.anchor_keyframe, anchor->pose.inverse()).first;
        }
        corr.push_back({e.landmark, e.lens, e.pixel, it->second * lm.position_in_anchor});
      }
      if (corr.size() >= 4) {
        const PnpResult pnp = pnp_ransac(corr, predicted, *inputs.rig, pnp_opts, rng);
        if (pnp.tracking_lost) {
          ++result.tracking_lost_frames;
        } else if (cfg.variant.use_gyro_update) {
          const SanityVerdict verdict =
              sanity_check(pnp.pose, predicted,
                           cfg.sanity_rotation_deg * kPi / 180.0, cfg.sanity_off_axis);
          if (verdict == SanityVerdict::accept) {
            cur = pnp.pose;
          } else {
            ++result.sanity_rejections;
          }
        } else {
          cur = pnp.pose;
        }
      } else {
        ++result.tracking_lost_frames;
      }
    }

    // 4. keyframe decision
    KeyframeState st;
    st.first = result.graph.keyframes.empty();
    std::unordered_set<int> distinct;
    double age_sum = 0.0;
    for (const TrackFrame::Entry& e : live.entries) {
      distinct.insert(e.landmark);
      age_sum += e.age;
    }
    st.tracked_count = static_cast<int>(distinct.size());
    st.mean_track_age = live.entries.empty() ? 0.0 : age_sum / live.entries.size();
    if (!st.first) {
      st.rotation_since_kf = cur.rotation().angle_to(last_kf_pose.rotation());
      st.translation_since_kf =
          (cur.inverse().translation() - last_kf_pose.inverse().translation()).norm();
      st.time_since_kf = frame.t - last_kf_t;
    }

    if (keyframe_decision(st, cfg)) {
      Keyframe kf;
      kf.id = next_kf_id++;
      kf.t = frame.t;
      kf.pose = cur;
      if (!st.first) {
        kf.gyro_link = integrate_gyro_span(inputs.imu, last_kf_t, frame.t);
      }
      if (!inputs.imu.empty()) {
        const ImuSample& s = inputs.imu[nearest_sample(inputs.imu, frame.t)];
        kf.gravity_in_c = -WorldReferences::kGravityNorm *
                          correct_accel(s.accel, inputs.imu_cal);
        kf.mag_in_c = correct_mag(s.mag, inputs.imu_cal);
      }

      // stereo landmark initialization
      std::unordered_set<int> fresh;
      for (Landmark& lm : init_landmarks(frame, *inputs.rig, cur, kf.id, known,
                                         cfg.epipolar_threshold)) {
        fresh.insert(lm.id);
        result.graph.landmarks.emplace(lm.id, lm);
      }
      // pick up the brand-new tracks without touching existing ages
      for (const TrackObs& obs : frame.obs) {
        if (fresh.count(obs.landmark)) {
          live.entries.push_back({obs.landmark, obs.lens, obs.pixel, 0});
        }
      }

      for (const TrackFrame::Entry& e : live.entries) {
        kf.observations.push_back({e.landmark, kf.id, e.lens, e.pixel});
      }

      // residual log at this keyframe
      append_record(result.residual_log, kf.t, ResidualKind::pivot, r_pivot(kf.pose));
      if (!inputs.imu.empty()) {
        append_record(result.residual_log, kf.t, ResidualKind::accel,
                      r_accel(kf.pose, kf.gravity_in_c, inputs.refs));
        append_record(result.residual_log, kf.t, ResidualKind::mag,
                      r_mag(kf.pose, kf.mag_in_c, inputs.refs));
      }
      if (!st.first) {
        append_record(result.residual_log, kf.t, ResidualKind::gyro,
                      r_gyro(last_kf_pose, kf.pose, kf.gyro_link));
      }
      for (const Observation& obs : kf.observations) {
        const Landmark& lm = result.graph.landmarks.at(obs.landmark);
        const Keyframe* anchor =
            lm.anchor_keyframe == kf.id ? &kf : result.graph.find(lm.anchor_keyframe);
        const auto r = r_reproj(kf.pose, anchor->pose.inverse(),
                                lm.position_in_anchor, obs.pixel, *inputs.rig, obs.lens);
        if (r) {
          append_record(result.residual_log, kf.t, ResidualKind::reproj, *r);
        }
      }

      result.graph.keyframes.push_back(std::move(kf));
      last_kf_t = frame.t;
      last_kf_pose = result.graph.keyframes.back().pose;
      ++kfs_since_solve;

      // online pivot refinement (V4)
      if (cfg.variant.pivot_online && result.graph.keyframes.size() >= 3) {
        std::vector<Transform> poses;
        poses.reserve(result.graph.keyframes.size());
        for (const Keyframe& k : result.graph.keyframes) poses.push_back(k.pose);
        try {
          const PivotEstimate est = estimate_pivot(poses);
          const Transform shift(Rotation::identity(), est.point, Frame::world,
                                Frame::world);
          for (Keyframe& k : result.graph.keyframes) k.pose = k.pose * shift;
          cur = cur * shift;
          last_kf_pose = last_kf_pose * shift;
          pivot_est += est.point;
          result.pivot_history.emplace_back(frame.t, pivot_est);
        } catch (const IllConditionedError&) {
        }
      }

      // windowed optimization
      if (cfg.variant.use_optimization && kfs_since_solve >= cfg.trigger_every) {
        kfs_since_solve = 0;
        const int last = static_cast<int>(result.graph.keyframes.size()) - 1;
        const int first = std::max(0, last - cfg.window_size + 1);
        WindowProblem problem =
            build_problem(result.graph, first, last, cfg.stats, cfg.gamma,
                          inputs.rig, inputs.refs, cfg.huber_delta);
        SolveReport report = solve(problem);
        for (size_t i = 0; i < problem.keyframe_ids.size(); ++i) {
          if (problem.fixed[i]) continue;
          for (Keyframe& k : result.graph.keyframes) {
            if (k.id == problem.keyframe_ids[i]) {
              k.pose = problem.poses[i];
              break;
            }
          }
        }
        cur = result.graph.keyframes.back().pose;
        last_kf_pose = cur;
        result.solves.push_back(std::move(report));
      }
    }

    result.trajectory.push_back({frame.t, to_world_frame(cur)});
    t_prev = frame.t;
  }

  result.final_pivot = pivot_est;
  return result;
}

}  // namespace pivio
