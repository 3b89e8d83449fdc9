#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "pivio/errors.hpp"
#include "pivio/residuals.hpp"
#include "test_util.hpp"

using namespace pivio;
using testutil::test_rig;

namespace {

constexpr double kPi = std::numbers::pi;

Transform random_pose(std::mt19937& rng) {
  return Transform(exp_so3(testutil::random_rotvec(rng, 2.5)),
                   testutil::random_vec3(rng, 0.3));
}

// Central finite differences of a block residual wrt the right-multiplied
// twist of one pose; the independent oracle for the analytic Jacobians.
Eigen::Matrix<double, 3, 6> numeric_jacobian(const ResidualBlock& block,
                                             Transform pose_i, Transform pose_j,
                                             int which, const EvalContext& ctx,
                                             double h = 1e-6) {
  Eigen::Matrix<double, 3, 6> j = Eigen::Matrix<double, 3, 6>::Zero();
  for (int k = 0; k < 6; ++k) {
    Vec6 step = Vec6::Zero();
    step(k) = h;
    const Transform dp = exp_se3(Twist::from_vector(step));
    const Transform dm = exp_se3(Twist::from_vector(-step));
    Transform pi_p = pose_i, pi_m = pose_i, pj_p = pose_j, pj_m = pose_j;
    if (which == 0) {
      pi_p = pose_i * dp;
      pi_m = pose_i * dm;
    } else {
      pj_p = pose_j * dp;
      pj_m = pose_j * dm;
    }
    const BlockEval ep = evaluate_block(block, pi_p, &pj_p, ctx, false);
    const BlockEval em = evaluate_block(block, pi_m, &pj_m, ctx, false);
    REQUIRE(ep.active);
    REQUIRE(em.active);
    j.col(k) = (ep.residual - em.residual) / (2.0 * h);
  }
  return j;
}

double rel_err(const Eigen::Matrix<double, 3, 6>& a,
               const Eigen::Matrix<double, 3, 6>& b) {
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

TEST_SUITE_BEGIN("residuals");

TEST_CASE("r_pivot on and off the constrained manifold") {
  std::mt19937 rng(3);
  for (int i = 0; i < 50; ++i) {
    const PivotPose p{0.05 + 0.1 * i / 50.0, exp_so3(testutil::random_rotvec(rng, 3.0))};
    CHECK(r_pivot(expand_pivot(p)).norm() == 0.0);
  }
  const Transform t(Rotation::identity(), Vec3(0.1, 0.02, -0.01));
  CHECK(r_pivot(t).x() == 0.02);
  CHECK(r_pivot(t).y() == -0.01);
}

TEST_CASE("r_accel zero at truth, chord length under tilt") {
  WorldReferences refs;
  const Transform id = Transform::identity();
  CHECK(r_accel(id, refs.gravity, refs).norm() == 0.0);

  std::mt19937 rng(5);
  for (int i = 0; i < 100; ++i) {
    const Transform pose = random_pose(rng);
    const Vec3 meas = pose.rotation() * refs.gravity;
    CHECK(r_accel(pose, meas, refs).norm() < 1e-12);

    // perturb about an axis orthogonal to gravity
    const double tilt = 5.0 * kPi / 180.0;
    Vec3 axis = refs.gravity.cross(testutil::random_vec3(rng, 1.0));
    while (axis.norm() < 1e-6) axis = refs.gravity.cross(testutil::random_vec3(rng, 1.0));
    axis.normalize();
    const Transform perturbed(pose.rotation() * exp_so3(tilt * axis),
                              pose.translation());
    const double chord = 2.0 * 9.81 * std::sin(tilt / 2.0);
    CHECK(r_accel(perturbed, meas, refs).norm() == doctest::Approx(chord).epsilon(1e-9));
  }
}

TEST_CASE("r_mag mirrors r_accel at 48.6 uT") {
  WorldReferences refs;
  CHECK(std::abs(refs.magnetic_field.norm() - 48.6) < 1e-12);
  std::mt19937 rng(7);
  const Transform pose = random_pose(rng);
  const Vec3 meas = pose.rotation() * refs.magnetic_field;
  CHECK(r_mag(pose, meas, refs).norm() < 1e-12);

  const double tilt = 5.0 * kPi / 180.0;
  Vec3 axis = refs.magnetic_field.cross(Vec3(0.3, 1.0, -0.2)).normalized();
  const Transform perturbed(pose.rotation() * exp_so3(tilt * axis), pose.translation());
  const double chord = 2.0 * 48.6 * std::sin(tilt / 2.0);
  CHECK(r_mag(perturbed, meas, refs).norm() == doctest::Approx(chord).epsilon(1e-9));
}

TEST_CASE("r_reproj self consistency and behind-camera handling") {
  const StereoRig rig = test_rig();
  std::mt19937 rng(11);
  for (int lens = 0; lens < 2; ++lens) {
    for (int i = 0; i < 50; ++i) {
      const Transform pose = random_pose(rng);
      const Vec3 lm_anchor(0.01 * i - 0.25, 0.02, 0.12 + 0.001 * i);
      // place the landmark in front of the lens via the camera frame
      const Vec3 in_camera = rig.mount * Vec3(0.01, -0.02, 0.1 + 0.002 * i);
      const Vec3 in_lens = rig.lens_from_camera(lens) * in_camera;
      REQUIRE(in_lens.z() > 0.0);
      const PixelPoint u = project(in_lens, rig.intrinsics(lens));
      const auto r = r_reproj(pose, pose.inverse(), in_camera, u, rig, lens);
      REQUIRE(r.has_value());
      CHECK(r->norm() < 1e-9);
    }
  }

  // point behind the lens deactivates instead of throwing
  const Transform id = Transform::identity();
  const Vec3 behind = rig.mount * Vec3(-0.1, 0, -0.2);
  CHECK_FALSE(r_reproj(id, id, behind, PixelPoint{0, 0}, rig, 0).has_value());
}

TEST_CASE("r_gyro zero cases and first-order perturbation") {
  std::mt19937 rng(13);
  for (int i = 0; i < 50; ++i) {
    const Transform t1 = random_pose(rng);
    PreintegratedGyro g;
    g.delta = exp_so3(testutil::random_rotvec(rng, 1.0));
    // update rule: R2 (camera<-world) = delta^T * R1
    const Transform t2(Rotation::from_matrix_unchecked(
                           g.delta.matrix().transpose() * t1.rotation().matrix()),
                       t1.translation());
    CHECK(r_gyro(t1, t2, g).norm() < 1e-12);

    PreintegratedGyro ident;
    CHECK(r_gyro(t1, t1, ident).norm() < 1e-15);
  }

  // first order: |r| equals the perturbation magnitude, exact +eps at identity
  const Vec3 eps(1e-5, -2e-5, 1.5e-5);
  PreintegratedGyro ident;
  const Transform base = Transform::identity();
  const Transform pert(exp_so3(eps), Vec3::Zero());
  const Vec3 r = r_gyro(base, pert, ident);
  CHECK((r - eps).norm() < 1e-12);
  for (int i = 0; i < 20; ++i) {
    const Transform t1 = random_pose(rng);
    const Transform t2(t1.rotation() * exp_so3(eps), t1.translation());
    CHECK(std::abs(r_gyro(t1, t2, ident).norm() - eps.norm()) < 1e-12);
  }
}

TEST_CASE("huber values and smoothness at the knee") {
  CHECK(huber(0.0, 1.345) == 0.0);
  const double d = 0.7;
  CHECK(huber(d, d) == doctest::Approx(d * d / 2.0).epsilon(1e-15));
  CHECK(huber(3.0, 1.0) == doctest::Approx(2.5).epsilon(1e-15));

  const double h = 1e-6;
  const double left = (huber(d, d) - huber(d - h, d)) / h;
  const double right = (huber(d + h, d) - huber(d, d)) / h;
  CHECK(std::abs(left - right) < 1e-5);
  CHECK(std::abs(left - d) < 1e-5);  // derivative at the knee is delta
}

TEST_CASE("robust cost and weight conventions") {
  CHECK(robust_cost(Robustifier::identity, 2.0, 1.0) == 2.0);  // x^2/2
  CHECK(robust_cost(Robustifier::huber, 2.0, 1.0) == doctest::Approx(1.5));
  CHECK(robust_weight(Robustifier::identity, 5.0, 1.0) == 1.0);
  CHECK(robust_weight(Robustifier::huber, 0.5, 1.0) == 1.0);
  CHECK(robust_weight(Robustifier::huber, 4.0, 1.0) == doctest::Approx(0.25));
}

TEST_CASE("scale factor arithmetic") {
  CHECK(scale_factor(ResidualKind::pivot, {0.0, 1.0, 1, "m"}, 1.0) == 1.0);
  CHECK(scale_factor(ResidualKind::gyro, {0.0, 0.0051, 1, "rad"}, 0.4) ==
        doctest::Approx(5.601).epsilon(1e-3));
  CHECK(scale_factor(ResidualKind::reproj, {0.0, 9.3767, 120, "px"}, 0.6) ==
        doctest::Approx(1.633e-3).epsilon(1e-3));
  // positive homogeneity
  const StatsEntry e{0.0, 2.37, 7, "px"};
  CHECK(scale_factor(ResidualKind::reproj, e, 0.8) ==
        doctest::Approx(2.0 * scale_factor(ResidualKind::reproj, e, 0.4)));
  CHECK_THROWS_AS(scale_factor(ResidualKind::mag, {0.0, 0.0, 1, "uT"}, 1.0),
                  DegenerateStatisticError);
}

TEST_CASE("reference statistics arrive in SI units") {
  const ResidualStatistics s = ResidualStatistics::reference_defaults();
  CHECK(s.entry(ResidualKind::pivot).unit == "m");
  CHECK(s.entry(ResidualKind::pivot).variance == doctest::Approx(4.374e-5));
  CHECK(s.entry(ResidualKind::accel).variance == doctest::Approx(0.0405 * 96.2361));
  CHECK(s.entry(ResidualKind::reproj).variance == doctest::Approx(9.3767));
}

TEST_CASE("stats csv round trip") {
  const auto path = std::filesystem::temp_directory_path() / "pivio_stats_rt.csv";
  const ResidualStatistics s = ResidualStatistics::reference_defaults();
  write_residual_stats_csv(path, s);
  const ResidualStatistics back = read_residual_stats_csv(path);
  for (const ResidualKind k : kResidualKinds) {
    CHECK(back.entry(k).mean == s.entry(k).mean);
    CHECK(back.entry(k).variance == s.entry(k).variance);
    CHECK(back.entry(k).unit == s.entry(k).unit);
  }
  std::filesystem::remove(path);
}

TEST_CASE("analytic jacobians match finite differences for every kind") {
  const StereoRig rig = test_rig();
  EvalContext ctx;
  ctx.rig = &rig;
  std::mt19937 rng(17);

  int checked = 0;
  for (int i = 0; i < 300; ++i) {
    const Transform pose_i = random_pose(rng);
    const Transform pose_j = random_pose(rng);

    ResidualBlock pivot;
    pivot.kind = ResidualKind::pivot;
    ResidualBlock accel;
    accel.kind = ResidualKind::accel;
    accel.vector_meas = pose_i.rotation() * ctx.refs.gravity +
                        testutil::random_vec3(rng, 0.5);
    ResidualBlock mag;
    mag.kind = ResidualKind::mag;
    mag.vector_meas = pose_i.rotation() * ctx.refs.magnetic_field +
                      testutil::random_vec3(rng, 2.0);
    for (const ResidualBlock& b : {pivot, accel, mag}) {
      const BlockEval ev = evaluate_block(b, pose_i, nullptr, ctx, true);
      ResidualBlock copy = b;
      const auto fd = numeric_jacobian(copy, pose_i, Transform::identity(), 0, ctx);
      CHECK(rel_err(ev.j_i, fd) < 1e-5);
      ++checked;
    }

    ResidualBlock gyro;
    gyro.kind = ResidualKind::gyro;
    gyro.pose_j = 1;
    gyro.gyro_delta = exp_so3(testutil::random_rotvec(rng, 1.0));
    const BlockEval evg = evaluate_block(gyro, pose_i, &pose_j, ctx, true);
    CHECK(rel_err(evg.j_i, numeric_jacobian(gyro, pose_i, pose_j, 0, ctx)) < 1e-5);
    CHECK(rel_err(evg.j_j, numeric_jacobian(gyro, pose_i, pose_j, 1, ctx)) < 1e-5);
    checked += 2;

    // reprojection: build an observation that stays in front of the lens
    const Vec3 in_camera_at_anchor = rig.mount * Vec3(0.005, -0.003, 0.11);
    ResidualBlock reproj;
    reproj.kind = ResidualKind::reproj;
    reproj.pose_j = 1;
    reproj.lens = i % 2;
    reproj.landmark_in_anchor = in_camera_at_anchor;
    // observer close to anchor so the point stays visible
    const Transform obs(pose_j.rotation() * exp_so3(testutil::random_rotvec(rng, 0.05)),
                        pose_j.translation() + testutil::random_vec3(rng, 0.005));
    const Vec3 in_lens = rig.lens_from_camera(reproj.lens) *
                         (obs * (pose_j.inverse() * in_camera_at_anchor));
    if (in_lens.z() <= 0.01) continue;
    reproj.pixel = project(in_lens, rig.intrinsics(reproj.lens));
    reproj.pixel.u += 1.7;  // nonzero residual
    const BlockEval evr = evaluate_block(reproj, obs, &pose_j, ctx, true);
    REQUIRE(evr.active);
    CHECK(rel_err(evr.j_i, numeric_jacobian(reproj, obs, pose_j, 0, ctx)) < 1e-5);
    CHECK(rel_err(evr.j_j, numeric_jacobian(reproj, obs, pose_j, 1, ctx)) < 1e-5);
    checked += 2;
  }
  CHECK(checked > 1000);
}

TEST_CASE("pivot jacobian rotation block vanishes") {
  std::mt19937 rng(19);
  EvalContext ctx;
  ResidualBlock b;
  b.kind = ResidualKind::pivot;
  for (int i = 0; i < 20; ++i) {
    const Transform pose = random_pose(rng);
    const BlockEval ev = evaluate_block(b, pose, nullptr, ctx, true);
    CHECK(ev.j_i.block<3, 3>(0, 0).norm() == 0.0);
    const auto fd = numeric_jacobian(b, pose, Transform::identity(), 0, ctx);
    CHECK(fd.block<2, 3>(0, 0).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("gyro jacobian at zero residual and identity poses is +-I") {
  EvalContext ctx;
  ResidualBlock b;
  b.kind = ResidualKind::gyro;
  b.pose_j = 1;
  const Transform id = Transform::identity();
  const BlockEval ev = evaluate_block(b, id, &id, ctx, true);
  CHECK((ev.j_j.block<3, 3>(0, 0) - Mat3::Identity()).norm() < 1e-12);
  CHECK((ev.j_i.block<3, 3>(0, 0) + Mat3::Identity()).norm() < 1e-12);
}

TEST_CASE("residual log csv round trip") {
  ResidualLog log;
  append_record(log, 0.5, ResidualKind::pivot, Vec2(0.01, -0.02));
  append_record(log, 0.5, ResidualKind::gyro, Vec3(1e-4, 2e-4, -1e-4));
  const auto path = std::filesystem::temp_directory_path() / "pivio_rlog_rt.csv";
  write_residual_log_csv(path, log);
  const ResidualLog back = read_residual_log_csv(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].dim == 2);
  CHECK(back[0].values[1] == -0.02);
  CHECK(back[1].kind == ResidualKind::gyro);
  CHECK(back[1].values[2] == -1e-4);
  std::filesystem::remove(path);
}

TEST_SUITE_END();
