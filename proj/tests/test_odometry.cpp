#include <doctest.h>

#include <numbers>
#include <random>

#include "pivio/errors.hpp"
#include "pivio/eval.hpp"
#include "pivio/odometry.hpp"
#include "test_graph_util.hpp"
#include "test_util.hpp"

using namespace pivio;
using testutil::noiseless;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<PnpCorrespondence> make_correspondences(const Transform& pose,
                                                    const StereoRig& rig, int count,
                                                    std::mt19937& rng) {
  std::vector<PnpCorrespondence> out;
  const Transform lens_tf[2] = {rig.lens_from_camera(0), rig.lens_from_camera(1)};
  std::uniform_real_distribution<double> lat(-0.035, 0.035);
  std::uniform_real_distribution<double> dep(0.07, 0.16);
  const Transform inv = pose.inverse();
  int id = 0;
  while (static_cast<int>(out.size()) < count) {
    const Vec3 in_cam = rig.mount * Vec3(lat(rng), lat(rng), dep(rng));
    const Vec3 world = inv * in_cam;
    const int lens = static_cast<int>(out.size()) % 2;
    const Vec3 in_lens = lens_tf[lens] * in_cam;
    if (in_lens.z() < 0.02) continue;
    const PixelPoint px = project(in_lens, rig.intrinsics(lens));
    if (!rig.intrinsics(lens).contains(px.u, px.v)) continue;
    out.push_back({id++, lens, px, world});
  }
  return out;
}

Transform random_scope_pose(std::mt19937& rng) {
  return Transform(exp_so3(testutil::random_rotvec(rng, 2.0)),
                   Vec3(0.1 + 0.02 * testutil::random_vec3(rng, 1.0).x(), 0, 0),
                   Frame::camera, Frame::world);
}

}  // namespace

TEST_SUITE_BEGIN("odometry");

TEST_CASE("gyro pose update keeps the translation and rotates the orientation") {
  std::mt19937 rng(3);
  const Transform prev = random_scope_pose(rng);
  PreintegratedGyro ident;
  const Transform same = gyro_pose_update(prev, ident);
  CHECK((same.translation() - prev.translation()).norm() == 0.0);
  CHECK((same.rotation().matrix() - prev.rotation().matrix()).norm() == 0.0);

  PreintegratedGyro g;
  g.delta = exp_so3(Vec3(0.1, -0.2, 0.05));
  const Transform next = gyro_pose_update(prev, g);
  CHECK((next.translation() - prev.translation()).norm() == 0.0);
  const Mat3 expected = g.delta.matrix().transpose() * prev.rotation().matrix();
  CHECK((next.rotation().matrix() - expected).norm() == 0.0);
}

TEST_CASE("gyro-only propagation stays in the reduced space exactly") {
  Scenario s = noiseless(preset_scenario("pure-rotation"));
  s.duration = 3.0;
  const SimData data = generate(s);
  OdometryConfig cfg;
  cfg.variant = VariantConfig::from_name("V1");
  const RunOutcome run = run_on_scenario(data, cfg);
  const Transform center(Rotation::identity(), s.pivot, Frame::world, Frame::world);
  for (const TimedPose& tp : run.odo.trajectory) {
    CHECK(r_pivot(tp.pose * center).norm() == 0.0);
  }
  // noiseless pure rotation: the gyro path alone reproduces ground truth
  CHECK(run.summary.max_rot < 1e-5);
}

TEST_CASE("V1 misses insertion-depth changes while rotation stays correct") {
  Scenario s = noiseless(preset_scenario("inward-motion"));
  s.duration = 8.0;
  const SimData data = generate(s);
  OdometryConfig cfg;
  cfg.variant = VariantConfig::from_name("V1");
  const RunOutcome run = run_on_scenario(data, cfg);
  const double depth_change = std::abs(data.truth.sampler->depth_at(8.0 - 0.02) -
                                       data.truth.sampler->depth_at(0.0));
  CHECK(run.summary.max_rot < 1e-5);
  CHECK(run.summary.final_trans > 0.5 * depth_change);
}

TEST_CASE("advance_tracks ages, drops and validates") {
  TrackFrame prev;
  prev.t = 0.0;
  prev.entries = {{1, 0, {10, 10}, 4}, {1, 1, {12, 10}, 4}, {2, 0, {50, 50}, 0}};
  TrackFrameData incoming;
  incoming.t = 1.0 / 60.0;
  incoming.obs = {{1, 0, {11, 10}}, {1, 1, {13, 10}}, {3, 0, {99, 99}}};
  const auto known = [](int id) { return id != 3; };

  const TrackFrame next = advance_tracks(prev, incoming, known, 0.5);
  REQUIRE(next.entries.size() == 2);  // landmark 2 dropped, 3 unknown
  CHECK(next.entries[0].age == 5);
  CHECK(next.entries[1].age == 5);

  TrackFrameData gap;
  gap.t = 2.0;
  CHECK_THROWS_AS(advance_tracks(next, gap, known, 0.5), StreamError);

  TrackFrameData dup;
  dup.t = 2.0 / 60.0;
  dup.obs = {{1, 0, {1, 1}}, {1, 0, {2, 2}}};
  CHECK_THROWS_AS(advance_tracks(next, dup, known, 0.5), StreamError);
}

TEST_CASE("static scene with zero drift keeps pixels identical") {
  Scenario s = noiseless(preset_scenario("pure-rotation"));
  s.duration = 1.0;
  s.rate_amplitude = 0.0;
  const SimData data = generate(s);
  const auto all = [](int) { return true; };
  TrackFrame live;
  live = advance_tracks(live, data.tracks[0], all, 1.0);
  const TrackFrame after = advance_tracks(live, data.tracks[1], all, 1.0);
  REQUIRE(after.entries.size() == live.entries.size());
  for (size_t i = 0; i < after.entries.size(); ++i) {
    CHECK(after.entries[i].pixel.u == live.entries[i].pixel.u);
    CHECK(after.entries[i].age == 1);
  }
}

TEST_CASE("pnp recovers an exact pose from noiseless correspondences") {
  std::mt19937 rng(11);
  std::mt19937_64 ransac_rng(1);
  const StereoRig rig = default_rig();
  for (int trial = 0; trial < 10; ++trial) {
    const Transform truth = random_scope_pose(rng);
    const auto corr = make_correspondences(truth, rig, 40, rng);
    const Transform init = truth * exp_se3(Twist{testutil::random_rotvec(rng, 0.05),
                                                 testutil::random_vec3(rng, 0.01)});
    const PnpResult res = pnp_ransac(corr, init, rig, {}, ransac_rng);
    CHECK_FALSE(res.tracking_lost);
    CHECK(res.pose.rotation().angle_to(truth.rotation()) < 1e-8);
    CHECK((res.pose.translation() - truth.translation()).norm() < 1e-9);
  }
}

TEST_CASE("pnp survives 30 percent outliers with pixel noise") {
  std::mt19937 rng(13);
  std::mt19937_64 ransac_rng(2);
  const StereoRig rig = default_rig();
  std::normal_distribution<double> px_noise(0.0, 1.0);
  int good = 0;
  const int trials = 25;
  for (int trial = 0; trial < trials; ++trial) {
    const Transform truth = random_scope_pose(rng);
    auto corr = make_correspondences(truth, rig, 60, rng);
    std::uniform_real_distribution<double> u(0.0, 1920.0), v(0.0, 1080.0);
    for (size_t i = 0; i < corr.size(); ++i) {
      if (i % 10 < 3) {  // 30% outliers
        corr[i].pixel = {u(rng), v(rng)};
      } else {
        corr[i].pixel.u += px_noise(rng);
        corr[i].pixel.v += px_noise(rng);
      }
    }
    const PnpResult res = pnp_ransac(corr, truth, rig, {}, ransac_rng);
    const bool ok = res.pose.rotation().angle_to(truth.rotation()) < 0.5 * kPi / 180.0 &&
                    (res.pose.translation() - truth.translation()).norm() < 2e-3;
    good += ok;
    // outliers excluded from the inlier set
    for (const int idx : res.inliers) CHECK(idx % 10 >= 3);
  }
  CHECK(good >= static_cast<int>(0.9 * trials));
}

TEST_CASE("pnp needs at least 4 correspondences") {
  std::mt19937 rng(17);
  std::mt19937_64 ransac_rng(3);
  const StereoRig rig = default_rig();
  const Transform truth = random_scope_pose(rng);
  auto corr = make_correspondences(truth, rig, 3, rng);
  CHECK_THROWS_AS(pnp_ransac(corr, truth, rig, {}, ransac_rng), InsufficientDataError);
}

TEST_CASE("pnp flags tracking lost on garbage correspondences") {
  std::mt19937 rng(19);
  std::mt19937_64 ransac_rng(4);
  const StereoRig rig = default_rig();
  const Transform truth = random_scope_pose(rng);
  auto corr = make_correspondences(truth, rig, 30, rng);
  std::uniform_real_distribution<double> u(0.0, 1920.0), v(0.0, 1080.0);
  for (auto& c : corr) c.pixel = {u(rng), v(rng)};
  const PnpResult res = pnp_ransac(corr, truth * exp_se3(Twist{Vec3(0.3, 0, 0), Vec3()}),
                                   rig, {}, ransac_rng);
  CHECK(res.tracking_lost);
}

TEST_CASE("sanity check thresholds") {
  std::mt19937 rng(23);
  const Transform predicted = random_scope_pose(rng);
  CHECK(sanity_check(predicted, predicted, 5.0 * kPi / 180.0, 0.005) ==
        SanityVerdict::accept);

  const Transform rotated(predicted.rotation() * exp_so3(Vec3(0, 20.0 * kPi / 180.0, 0)),
                          predicted.translation());
  CHECK(sanity_check(rotated, predicted, 5.0 * kPi / 180.0, 0.005) ==
        SanityVerdict::reject_rotation);

  const Transform shifted(predicted.rotation(),
                          predicted.translation() + Vec3(0, 0.02, 0));
  CHECK(sanity_check(shifted, predicted, 5.0 * kPi / 180.0, 0.005) ==
        SanityVerdict::reject_off_axis);
}

TEST_CASE("keyframe decision basics") {
  OdometryConfig cfg;
  KeyframeState first;
  first.first = true;
  CHECK(keyframe_decision(first, cfg));

  KeyframeState healthy;
  healthy.tracked_count = 200;
  healthy.mean_track_age = 3.0;
  healthy.rotation_since_kf = 0.01;
  healthy.translation_since_kf = 0.0001;
  healthy.time_since_kf = 1.0;
  CHECK_FALSE(keyframe_decision(healthy, cfg));

  KeyframeState starved = healthy;
  starved.tracked_count = 10;
  CHECK(keyframe_decision(starved, cfg));

  KeyframeState rotated = healthy;
  rotated.rotation_since_kf = 20.0 * kPi / 180.0;
  CHECK(keyframe_decision(rotated, cfg));
}

TEST_CASE("init_landmarks anchors noiseless stereo pairs") {
  Scenario s = noiseless(preset_scenario("pure-rotation"));
  s.duration = 1.0;
  const SimData data = generate(s);
  const Transform center(Rotation::identity(), s.pivot, Frame::world, Frame::world);
  const Transform pose = data.truth.video_poses[0].pose * center;
  const auto none = [](int) { return false; };
  const auto lms = init_landmarks(data.tracks[0], data.rig, pose, 0, none, 1e-2);
  CHECK(lms.size() > 50);
  for (const Landmark& lm : lms) {
    const Vec3 truth_in_c =
        pose * (data.truth.landmarks[lm.id].position - s.pivot);
    CHECK((lm.position_in_anchor - truth_in_c).norm() < 1e-6);
    CHECK(lm.anchor_keyframe == 0);
  }

  SUBCASE("cross-matched pairs are rejected by the epipolar filter") {
    TrackFrameData crossed = data.tracks[0];
    // swap the right-lens pixels between consecutive landmark pairs
    std::vector<size_t> right_idx;
    for (size_t i = 0; i < crossed.obs.size(); ++i) {
      if (crossed.obs[i].lens == 1) right_idx.push_back(i);
    }
    int swapped = 0;
    for (size_t k = 0; k + 1 < right_idx.size(); k += 2) {
      std::swap(crossed.obs[right_idx[k]].pixel, crossed.obs[right_idx[k + 1]].pixel);
      swapped += 2;
    }
    const auto crossed_lms = init_landmarks(crossed, data.rig, pose, 0, none, 1e-2);
    // at least 95% of the swapped pairs must be filtered out
    CHECK(static_cast<int>(crossed_lms.size()) <=
          static_cast<int>(lms.size()) - static_cast<int>(0.95 * swapped));
  }

  SUBCASE("no pairs means no landmarks and no error") {
    TrackFrameData empty;
    empty.t = 0.0;
    CHECK(init_landmarks(empty, data.rig, pose, 0, none, 1e-2).empty());
  }
}

TEST_CASE("estimate_pivot recovers constructed pivots") {
  std::mt19937 rng(29);
  std::vector<Transform> poses;
  for (int i = 0; i < 12; ++i) {
    poses.push_back(expand_pivot({0.08 + 0.01 * i,
                                  exp_so3(testutil::random_rotvec(rng, 1.2))}));
  }
  const PivotEstimate est = estimate_pivot(poses);
  CHECK(est.point.norm() < 1e-9);  // pivot frame origin
  CHECK(est.confidence > 0.0);

  SUBCASE("two keyframes are rejected") {
    std::vector<Transform> two(poses.begin(), poses.begin() + 2);
    CHECK_THROWS_AS(estimate_pivot(two), IllConditionedError);
  }

  SUBCASE("parallel axes are rejected with a condition number") {
    std::vector<Transform> parallel(5, poses.front());
    try {
      estimate_pivot(parallel);
      CHECK(false);
    } catch (const IllConditionedError& e) {
      CHECK(std::string(e.what()).find("condition number") != std::string::npos);
    }
  }

  SUBCASE("millimeter jitter keeps the estimate within 5 mm") {
    std::vector<Transform> noisy;
    for (int i = 0; i < 20; ++i) {
      const Transform clean = expand_pivot(
          {0.09 + 0.002 * i, exp_so3(testutil::random_rotvec(rng, 1.2))});
      noisy.push_back(Transform(clean.rotation(),
                                clean.translation() +
                                    0.001 * testutil::random_vec3(rng, 1.0)));
    }
    CHECK(estimate_pivot(noisy).point.norm() < 5e-3);
  }
}

TEST_CASE("V3 tracks a noiseless scenario to numerical precision") {
  Scenario s = noiseless(preset_scenario("pure-rotation"));
  s.duration = 4.0;
  const SimData data = generate(s);
  OdometryConfig cfg;
  cfg.variant = VariantConfig::from_name("V3");
  const RunOutcome run = run_on_scenario(data, cfg);
  CHECK(run.summary.max_rot < 1e-5);
  CHECK(run.summary.max_trans < 1e-6);
  CHECK(run.odo.tracking_lost_frames == 0);
}

TEST_CASE("keyframe graph is well-formed") {
  Scenario s = preset_scenario("pure-rotation");
  s.duration = 5.0;
  const SimData data = generate(s);
  OdometryConfig cfg;
  cfg.variant = VariantConfig::from_name("V3");
  const RunOutcome run = run_on_scenario(data, cfg);
  const KeyframeGraph& g = run.odo.graph;
  REQUIRE(g.keyframes.size() >= 2);
  for (const auto& [id, lm] : g.landmarks) {
    CHECK(g.find(lm.anchor_keyframe) != nullptr);
  }
  for (size_t k = 1; k < g.keyframes.size(); ++k) {
    CHECK(g.keyframes[k].gyro_link.t_begin == doctest::Approx(g.keyframes[k - 1].t));
    CHECK(g.keyframes[k].gyro_link.t_end == doctest::Approx(g.keyframes[k].t));
  }
  // keyframe cadence on an active scenario stays within sane bounds
  for (size_t k = 1; k < g.keyframes.size(); ++k) {
    const double dt = g.keyframes[k].t - g.keyframes[k - 1].t;
    CHECK(dt >= 0.1 - 1e-9);
    CHECK(dt <= 1.0 + 1e-9);
  }
}

TEST_CASE("identical inputs and seed give bit-identical trajectories") {
  Scenario s = preset_scenario("fast-sweep-occlusion");
  s.duration = 4.0;
  const SimData data = generate(s);
  OdometryConfig cfg;
  cfg.variant = VariantConfig::from_name("V3");
  const RunOutcome a = run_on_scenario(data, cfg);
  const RunOutcome b = run_on_scenario(data, cfg);
  REQUIRE(a.odo.trajectory.size() == b.odo.trajectory.size());
  for (size_t i = 0; i < a.odo.trajectory.size(); ++i) {
    CHECK((a.odo.trajectory[i].pose.matrix() - b.odo.trajectory[i].pose.matrix())
              .norm() == 0.0);
  }
}

TEST_SUITE_END();
