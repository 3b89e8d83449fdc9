#pragma once

#include <random>

#include "pivio/camera.hpp"
#include "pivio/geometry.hpp"

namespace pivio::testutil {

inline Vec3 random_vec3(std::mt19937& rng, double scale) {
  std::uniform_real_distribution<double> d(-scale, scale);
  return Vec3(d(rng), d(rng), d(rng));
}

inline Vec3 random_rotvec(std::mt19937& rng, double max_angle) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 axis(n(rng), n(rng), n(rng));
  axis.normalize();
  return std::uniform_real_distribution<double>(0.0, max_angle)(rng)*axis;
}

// Endoscope-like stereo rig: 1080p lenses, ~4.5 mm baseline, lens z mapped
// onto the body x (viewing) axis by the mount.
inline StereoRig test_rig() {
  StereoRig rig;
  rig.left = {1000.0, 1005.0, 960.0, 540.0, -0.17, 0.03, 1920.0, 1080.0};
  rig.right = {998.0, 1002.0, 958.0, 542.0, -0.16, 0.028, 1920.0, 1080.0};
  rig.extrinsic = Transform(exp_so3(Vec3(0.002, -0.004, 0.001)),
                            Vec3(0.0045, 0.0002, -0.0001), Frame::lens0,
                            Frame::lens1);
  Mat3 axis_swap;
  axis_swap << 0, 0, 1, 1, 0, 0, 0, 1, 0;
  rig.mount = Transform(exp_so3(Vec3(0.02, -0.01, 0.015)) *
                            Rotation::from_matrix_unchecked(axis_swap),
                        Vec3(0.001, 0.002, -0.001), Frame::camera, Frame::lens0);
  return rig;
}

}  // namespace pivio::testutil
