#include "pivio/geometry.hpp"

#include <Eigen/Geometry>

#include <atomic>
#include <cmath>
#include <sstream>

#include "pivio/errors.hpp"

namespace pivio {

namespace {

// Rodrigues/Jacobian coefficients switch to second-order Taylor below this
// angle to avoid cancellation in (1-cos)/theta^2 style terms.
constexpr double kSmallAngle = 1e-6;

std::atomic<bool> g_frame_checks{
#ifdef NDEBUG
    false
#else
    true
#endif
};

void check_composable(const Transform& lhs, const Transform& rhs) {
  if (!frame_checks_enabled()) return;
  const Frame a = lhs.from_frame();
  const Frame b = rhs.to_frame();
  if (a != Frame::any && b != Frame::any && a != b) {
    std::ostringstream os;
    os << "frame mismatch in composition: (" << frame_name(lhs.to_frame())
       << "<-" << frame_name(a) << ") * (" << frame_name(b) << "<-"
       << frame_name(rhs.from_frame()) << ")";
    throw FrameError(os.str());
  }
}

}  // namespace

const char* frame_name(Frame f) {
  switch (f) {
    case Frame::any: return "any";
    case Frame::world: return "T";
    case Frame::camera: return "C";
    case Frame::lens0: return "C0";
    case Frame::lens1: return "C1";
  }
  return "?";
}

bool frame_checks_enabled() { return g_frame_checks.load(std::memory_order_relaxed); }
void set_frame_checks(bool on) { g_frame_checks.store(on, std::memory_order_relaxed); }

Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

Vec3 vee(const Mat3& m) { return Vec3(m(2, 1), m(0, 2), m(1, 0)); }

Rotation Rotation::from_matrix(const Mat3& m) {
  const double ortho = (m * m.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-6 || m.determinant() < 0.0) {
    std::ostringstream os;
    os << "matrix is not a rotation (|RR^T - I|_max = " << ortho
       << ", det = " << m.determinant() << ")";
    throw DegenerateGeometryError(os.str());
  }
  return Rotation(m, 0);
}

Rotation Rotation::from_matrix_unchecked(const Mat3& m) { return Rotation(m, 0); }

Rotation Rotation::renormalized() const {
  return Rotation(Eigen::Quaterniond(m_).normalized().toRotationMatrix(), 0);
}

double Rotation::angle_to(const Rotation& other) const {
  return log_so3(transposed() * other).norm();
}

Transform Transform::operator*(const Transform& rhs) const {
  check_composable(*this, rhs);
  return Transform(r_ * rhs.r_, r_ * rhs.t_ + t_, to_, rhs.from_);
}

Transform Transform::inverse() const {
  const Rotation rt = r_.transposed();
  return Transform(rt, -(rt * t_), from_, to_);
}

Mat4 Transform::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = r_.matrix();
  m.topRightCorner<3, 1>() = t_;
  return m;
}

Transform Transform::from_matrix(const Mat4& m, Frame to, Frame from) {
  return Transform(Rotation::from_matrix(m.topLeftCorner<3, 3>()),
                   m.topRightCorner<3, 1>(), to, from);
}

Rotation exp_so3(const Vec3& omega) {
  const double theta2 = omega.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a, b;  // R = I + a*hat + b*hat^2
  if (theta < kSmallAngle) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  const Mat3 k = hat(omega);
  return Rotation::from_matrix_unchecked(Mat3::Identity() + a * k + b * (k * k));
}

Vec3 log_so3(const Rotation& r, bool* at_pi) {
  if (at_pi) *at_pi = false;
  const Mat3& m = r.matrix();
  const Vec3 axis_sin = 0.5 * vee(m - m.transpose());  // sin(theta) * axis
  const double s = axis_sin.norm();
  const double c = 0.5 * (m.trace() - 1.0);
  const double theta = std::atan2(s, c);

  if (s < 1e-10) {
    if (c > 0.0) {
      // theta ~ 0; sin(theta)/theta ~ 1 to double precision here.
      return axis_sin;
    }
    // theta ~ pi exactly: axis from the symmetric part, largest component
    // chosen positive as the deterministic tie-break.
    if (at_pi) *at_pi = true;
    int i = 0;
    m.diagonal().maxCoeff(&i);
    Vec3 axis;
    axis[i] = std::sqrt(std::max(0.0, (1.0 + m(i, i)) * 0.5));
    const int j = (i + 1) % 3;
    const int k = (i + 2) % 3;
    axis[j] = (m(i, j) + m(j, i)) / (4.0 * axis[i]);
    axis[k] = (m(i, k) + m(k, i)) / (4.0 * axis[i]);
    return theta * axis.normalized();
  }
  if (c < 0.0 && s < 1e-6) {
    // Within ~1e-6 of pi: the antisymmetric part is too small to carry the
    // axis accurately, reuse the symmetric-part branch but keep the sign of
    // the antisymmetric part where it is meaningful.
    if (at_pi) *at_pi = true;
    int i = 0;
    m.diagonal().maxCoeff(&i);
    Vec3 axis;
    axis[i] = std::sqrt(std::max(0.0, (1.0 + m(i, i)) * 0.5));
    const int j = (i + 1) % 3;
    const int k = (i + 2) % 3;
    axis[j] = (m(i, j) + m(j, i)) / (4.0 * axis[i]);
    axis[k] = (m(i, k) + m(k, i)) / (4.0 * axis[i]);
    axis.normalize();
    if (axis.dot(axis_sin) < 0.0) axis = -axis;
    return theta * axis;
  }
  return (theta / s) * axis_sin;
}

Mat3 left_jacobian_so3(const Vec3& omega) {
  const double theta2 = omega.squaredNorm();
  const double theta = std::sqrt(theta2);
  double b, c;  // J_l = I + b*hat + c*hat^2
  if (theta < kSmallAngle) {
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  const Mat3 k = hat(omega);
  return Mat3::Identity() + b * k + c * (k * k);
}

Mat3 left_jacobian_inv_so3(const Vec3& omega) {
  const double theta2 = omega.squaredNorm();
  const double theta = std::sqrt(theta2);
  double d;  // J_l^-1 = I - hat/2 + d*hat^2
  if (theta < kSmallAngle) {
    d = 1.0 / 12.0 + theta2 / 720.0;
  } else {
    // 1/theta^2 - cot(theta/2)/(2*theta), written to stay stable up to pi.
    const double half = 0.5 * theta;
    d = 1.0 / theta2 - std::cos(half) / (2.0 * theta * std::sin(half));
  }
  const Mat3 k = hat(omega);
  return Mat3::Identity() - 0.5 * k + d * (k * k);
}

Mat3 right_jacobian_so3(const Vec3& omega) { return left_jacobian_so3(-omega); }

Mat3 right_jacobian_inv_so3(const Vec3& omega) {
  return left_jacobian_inv_so3(-omega);
}

Transform exp_se3(const Twist& xi) {
  return Transform(exp_so3(xi.omega), left_jacobian_so3(xi.omega) * xi.upsilon);
}

Twist log_se3(const Transform& t) {
  Twist xi;
  xi.omega = log_so3(t.rotation());
  xi.upsilon = left_jacobian_inv_so3(xi.omega) * t.translation();
  return xi;
}

Twist ominus(const Transform& t1, const Transform& t2) {
  if (frame_checks_enabled()) {
    const bool to_ok = t1.to_frame() == Frame::any || t2.to_frame() == Frame::any ||
                       t1.to_frame() == t2.to_frame();
    const bool from_ok = t1.from_frame() == Frame::any ||
                         t2.from_frame() == Frame::any ||
                         t1.from_frame() == t2.from_frame();
    if (!to_ok || !from_ok) {
      std::ostringstream os;
      os << "frame mismatch in ominus: (" << frame_name(t1.to_frame()) << "<-"
         << frame_name(t1.from_frame()) << ") vs (" << frame_name(t2.to_frame())
         << "<-" << frame_name(t2.from_frame()) << ")";
      throw FrameError(os.str());
    }
  }
  return log_se3(t1.inverse() * t2);
}

Transform expand_pivot(const PivotPose& p) {
  return Transform(p.rotation, Vec3(p.depth, 0.0, 0.0), Frame::camera,
                   Frame::world);
}

std::pair<PivotPose, Vec2> extract_pivot(const Transform& t) {
  PivotPose p{t.translation().x(), t.rotation()};
  return {p, Vec2(t.translation().y(), t.translation().z())};
}

}  // namespace pivio
