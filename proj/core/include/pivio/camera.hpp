#pragma once

#include <filesystem>

#include "pivio/geometry.hpp"

namespace pivio {

// Pinhole with two-coefficient radial distortion on normalized coordinates.
struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;  // focal lengths, pixels
  double cx = 0.0, cy = 0.0;  // optical center, pixels
  double k1 = 0.0, k2 = 0.0;  // radial distortion
  double width = 0.0, height = 0.0;  // image size, pixels

  bool contains(double u, double v) const {
    return u >= 0.0 && v >= 0.0 && u < width && v < height;
  }
};

struct PixelPoint {
  double u = 0.0, v = 0.0;  // distorted image coordinates
};

struct StereoRig {
  CameraIntrinsics left;   // C0
  CameraIntrinsics right;  // C1
  Transform extrinsic;     // C0 <- C1
  Transform mount;         // C  <- C0

  const CameraIntrinsics& intrinsics(int lens) const { return lens == 0 ? left : right; }
  // C0 <- C or C1 <- C, the lens-side half of the projection function.
  Transform lens_from_camera(int lens) const;
};

// Pinhole projection followed by the radial polynomial; throws
// BehindCameraError for z <= 0.
PixelPoint project(const Vec3& x, const CameraIntrinsics& intr);

// d(pixel)/d(point) of project at x, 2x3.
Eigen::Matrix<double, 2, 3> project_jacobian(const Vec3& x, const CameraIntrinsics& intr);

// Unit bearing through the distorted pixel; iterative undistortion, throws
// NonConvergenceError after 20 steps.
Vec3 unproject(const PixelPoint& u, const CameraIntrinsics& intr);

// x0^T E x1 with E = hat(t) R from the C0<-C1 extrinsic. Zero for a true
// correspondence; callers reject |value| > d_th.
double epipolar_error(const Vec3& bearing0, const Vec3& bearing1, const StereoRig& rig);

// Linear least squares on the two ray equations, midpoint fallback; result
// in C0 coordinates. Throws DegenerateGeometryError for near-parallel rays.
Vec3 triangulate(const PixelPoint& u0, const PixelPoint& u1, const StereoRig& rig);

// key,value CSV; see write_calibration for the exact schema.
StereoRig parse_calibration(const std::filesystem::path& path);
void write_calibration(const std::filesystem::path& path, const StereoRig& rig);

}  // namespace pivio
