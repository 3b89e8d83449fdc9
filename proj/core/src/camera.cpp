#include "pivio/camera.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <sstream>

#include "pivio/errors.hpp"
#include "pivio/io.hpp"

namespace pivio {

namespace {

double distortion_factor(double r2, const CameraIntrinsics& intr) {
  return 1.0 + intr.k1 * r2 + intr.k2 * r2 * r2;
}

}  // namespace

Transform StereoRig::lens_from_camera(int lens) const {
  const Transform c0_from_c = mount.inverse();
  if (lens == 0) return c0_from_c;
  return extrinsic.inverse() * c0_from_c;
}

PixelPoint project(const Vec3& x, const CameraIntrinsics& intr) {
  if (!(x.z() > 0.0)) {
    std::ostringstream os;
    os << "point behind camera, z = " << x.z();
    throw BehindCameraError(os.str());
  }
  const double a = x.x() / x.z();
  const double b = x.y() / x.z();
  const double s = distortion_factor(a * a + b * b, intr);
  return {intr.fx * s * a + intr.cx, intr.fy * s * b + intr.cy};
}

Eigen::Matrix<double, 2, 3> project_jacobian(const Vec3& x, const CameraIntrinsics& intr) {
  const double z = x.z();
  const double a = x.x() / z;
  const double b = x.y() / z;
  const double r2 = a * a + b * b;
  const double s = distortion_factor(r2, intr);
  const double ds_dr2 = intr.k1 + 2.0 * intr.k2 * r2;

  // d(distorted normalized)/d(normalized)
  Mat2 jd;
  jd << s + 2.0 * ds_dr2 * a * a, 2.0 * ds_dr2 * a * b,
        2.0 * ds_dr2 * a * b, s + 2.0 * ds_dr2 * b * b;

  Eigen::Matrix<double, 2, 3> jn;
  jn << 1.0 / z, 0.0, -x.x() / (z * z),
        0.0, 1.0 / z, -x.y() / (z * z);

  Eigen::Matrix<double, 2, 3> j = jd * jn;
  j.row(0) *= intr.fx;
  j.row(1) *= intr.fy;
  return j;
}

Vec3 unproject(const PixelPoint& u, const CameraIntrinsics& intr) {
  const double ad = (u.u - intr.cx) / intr.fx;
  const double bd = (u.v - intr.cy) / intr.fy;
  // Newton on F(a,b) = s(r2) * (a,b) - (ad,bd); plain fixed point diverges
  // near the image corners for strong negative k1.
  double a = ad, b = bd;
  bool converged = false;
  for (int it = 0; it < 20; ++it) {
    const double r2 = a * a + b * b;
    const double s = distortion_factor(r2, intr);
    const double fa = s * a - ad;
    const double fb = s * b - bd;
    if (std::abs(fa) < 1e-12 && std::abs(fb) < 1e-12) {
      converged = true;
      break;
    }
    const double ds = intr.k1 + 2.0 * intr.k2 * r2;
    Mat2 j;
    j << s + 2.0 * ds * a * a, 2.0 * ds * a * b,
         2.0 * ds * a * b, s + 2.0 * ds * b * b;
    const double det = j(0, 0) * j(1, 1) - j(0, 1) * j(1, 0);
    if (std::abs(det) < 1e-14) break;
    a -= (j(1, 1) * fa - j(0, 1) * fb) / det;
    b -= (-j(1, 0) * fa + j(0, 0) * fb) / det;
  }
  if (!converged) {
    std::ostringstream os;
    os << "undistortion did not converge at pixel (" << u.u << ", " << u.v << ")";
    throw NonConvergenceError(os.str());
  }
  return Vec3(a, b, 1.0).normalized();
}

double epipolar_error(const Vec3& bearing0, const Vec3& bearing1, const StereoRig& rig) {
  // Unit baseline direction keeps the value baseline-independent, so one
  // threshold works across rigs.
  const Vec3 t = rig.extrinsic.translation();
  const double n = t.norm();
  const Mat3 e = hat(n > 0.0 ? Vec3(t / n) : t) * rig.extrinsic.rotation().matrix();
  return bearing0.dot(e * bearing1);
}

Vec3 triangulate(const PixelPoint& u0, const PixelPoint& u1, const StereoRig& rig) {
  const Vec3 b0 = unproject(u0, rig.left);
  const Vec3 d1 = rig.extrinsic.rotation() * unproject(u1, rig.right);
  const Vec3 o1 = rig.extrinsic.translation();

  const double cosang = std::min(1.0, std::abs(b0.dot(d1)));
  const double angle = std::acos(cosang);
  constexpr double kMinAngle = 0.1 * std::numbers::pi / 180.0;
  if (angle < kMinAngle) {
    std::ostringstream os;
    os << "rays nearly parallel, angle = " << angle * 180.0 / std::numbers::pi << " deg";
    throw DegenerateGeometryError(os.str());
  }

  // Sum of squared distances to the two rays: each unit-direction ray
  // contributes (I - dd^T).
  const Mat3 p0 = Mat3::Identity() - b0 * b0.transpose();
  const Mat3 p1 = Mat3::Identity() - d1 * d1.transpose();
  const Mat3 m = p0 + p1;
  const Vec3 rhs = p1 * o1;

  const Eigen::SelfAdjointEigenSolver<Mat3> eig(m);
  if (eig.eigenvalues()(0) > 1e-9 * eig.eigenvalues()(2)) {
    return m.ldlt().solve(rhs);
  }

  // Midpoint of the common perpendicular via the 2x2 closest-approach system.
  const double b0d1 = b0.dot(d1);
  Mat2 g;
  g << 1.0, -b0d1, -b0d1, 1.0;
  const Vec2 h(b0.dot(o1), -d1.dot(o1));
  const Vec2 sr = g.inverse() * h;
  return 0.5 * (sr(0) * b0 + (o1 + sr(1) * d1));
}

namespace {

constexpr const char* kScalarKeys[2][8] = {
    {"fx0", "fy0", "cx0", "cy0", "k1_0", "k2_0", "w0", "h0"},
    {"fx1", "fy1", "cx1", "cy1", "k1_1", "k2_1", "w1", "h1"},
};

Transform transform_from_cells(const std::vector<double>& v, Frame to, Frame from,
                               const std::filesystem::path& path, const std::string& key) {
  Mat3 r;
  r << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
  const Vec3 t(v[3], v[7], v[11]);
  try {
    return Transform(Rotation::from_matrix(r), t, to, from);
  } catch (const DegenerateGeometryError& e) {
    throw ParseError(path.string() + ": key \"" + key + "\": " + e.what());
  }
}

void append_transform_cells(std::ostringstream& os, const Transform& t) {
  const Mat3& r = t.rotation().matrix();
  const Vec3& tr = t.translation();
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) os << "," << format_double(r(row, col));
    os << "," << format_double(tr(row));
  }
}

}  // namespace

StereoRig parse_calibration(const std::filesystem::path& path) {
  const auto rows = read_csv_rows(path);

  std::map<std::string, std::pair<int, std::vector<double>>> table;
  for (const auto& row : rows) {
    if (row.cells.empty()) continue;
    const std::string& key = row.cells.front();
    std::vector<double> values;
    for (size_t i = 1; i < row.cells.size(); ++i) {
      values.push_back(parse_double_cell(row.cells[i], path, row.line, key));
    }
    table[key] = {row.line, std::move(values)};
  }

  const auto scalar = [&](const char* key) {
    const auto it = table.find(key);
    if (it == table.end() || it->second.second.size() != 1) {
      throw ParseError(path.string() + ": missing or malformed key \"" +
                       std::string(key) + "\"");
    }
    return it->second.second.front();
  };
  const auto transform12 = [&](const char* key, Frame to, Frame from) {
    const auto it = table.find(key);
    if (it == table.end() || it->second.second.size() != 12) {
      throw ParseError(path.string() + ": missing or malformed key \"" +
                       std::string(key) + "\" (expected 12 row-major values)");
    }
    return transform_from_cells(it->second.second, to, from, path, key);
  };

  StereoRig rig;
  CameraIntrinsics* cams[2] = {&rig.left, &rig.right};
  for (int lens = 0; lens < 2; ++lens) {
    CameraIntrinsics& c = *cams[lens];
    c.fx = scalar(kScalarKeys[lens][0]);
    c.fy = scalar(kScalarKeys[lens][1]);
    c.cx = scalar(kScalarKeys[lens][2]);
    c.cy = scalar(kScalarKeys[lens][3]);
    c.k1 = scalar(kScalarKeys[lens][4]);
    c.k2 = scalar(kScalarKeys[lens][5]);
    c.width = scalar(kScalarKeys[lens][6]);
    c.height = scalar(kScalarKeys[lens][7]);
    if (c.fx <= 0.0 || c.fy <= 0.0 || !c.contains(c.cx, c.cy)) {
      throw ParseError(path.string() + ": implausible intrinsics for lens " +
                       std::to_string(lens));
    }
  }
  rig.extrinsic = transform12("T_C0C1", Frame::lens0, Frame::lens1);
  rig.mount = transform12("T_CC0", Frame::camera, Frame::lens0);
  if (rig.extrinsic.translation().norm() <= 0.0) {
    throw ParseError(path.string() + ": zero stereo baseline");
  }
  return rig;
}

void write_calibration(const std::filesystem::path& path, const StereoRig& rig) {
  std::ostringstream os;
  os << "# pivio stereo calibration\n";
  const CameraIntrinsics* cams[2] = {&rig.left, &rig.right};
  for (int lens = 0; lens < 2; ++lens) {
    const CameraIntrinsics& c = *cams[lens];
    const double values[8] = {c.fx, c.fy, c.cx, c.cy, c.k1, c.k2, c.width, c.height};
    for (int i = 0; i < 8; ++i) {
      os << kScalarKeys[lens][i] << "," << format_double(values[i]) << "\n";
    }
  }
  os << "T_C0C1";
  append_transform_cells(os, rig.extrinsic);
  os << "\nT_CC0";
  append_transform_cells(os, rig.mount);
  os << "\n";
  write_text_file(path, os.str());
}

}  // namespace pivio
