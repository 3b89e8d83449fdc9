#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <utility>

namespace pivio {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

// Coordinate frame labels used to tag transforms. `any` matches everything,
// so untagged transforms compose freely.
enum class Frame : std::uint8_t {
  any,
  world,        // T: the trocar/pivot-anchored world frame
  camera,       // C: the fused camera body frame
  lens0,        // C0: left lens
  lens1,        // C1: right lens
};

const char* frame_name(Frame f);

// Frame tags are always carried but only verified when checking is on.
// Defaults to on in debug builds, off otherwise.
bool frame_checks_enabled();
void set_frame_checks(bool on);

Mat3 hat(const Vec3& v);
Vec3 vee(const Mat3& m);

// 3x3 orthonormal matrix with determinant +1.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}

  // Validates orthonormality and determinant; throws DegenerateGeometryError.
  static Rotation from_matrix(const Mat3& m);
  // Caller guarantees orthonormality (internal fast path).
  static Rotation from_matrix_unchecked(const Mat3& m);

  static Rotation identity() { return Rotation(); }

  const Mat3& matrix() const { return m_; }
  Rotation transposed() const { return Rotation(m_.transpose(), 0); }
  Rotation inverse() const { return transposed(); }

  Rotation operator*(const Rotation& rhs) const { return Rotation(m_ * rhs.m_, 0); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

  // Snaps back onto SO(3) through the quaternion; call occasionally in long
  // composition chains.
  Rotation renormalized() const;

  double angle_to(const Rotation& other) const;

 private:
  Rotation(const Mat3& m, int) : m_(m) {}
  Mat3 m_;
};

// se(3) tangent element, ordered [omega, upsilon].
struct Twist {
  Vec3 omega = Vec3::Zero();    // rad
  Vec3 upsilon = Vec3::Zero();  // m

  Vec6 vector() const {
    Vec6 v;
    v << omega, upsilon;
    return v;
  }
  static Twist from_vector(const Vec6& v) { return {v.head<3>(), v.tail<3>()}; }
};

// Rigid transform with from/to frame annotation, e.g. (camera <- world).
class Transform {
 public:
  Transform() = default;
  Transform(const Rotation& rotation, const Vec3& translation,
            Frame to = Frame::any, Frame from = Frame::any)
      : r_(rotation), t_(translation), to_(to), from_(from) {}

  static Transform identity(Frame to = Frame::any, Frame from = Frame::any) {
    return Transform(Rotation::identity(), Vec3::Zero(), to, from);
  }

  const Rotation& rotation() const { return r_; }
  const Vec3& translation() const { return t_; }
  Frame to_frame() const { return to_; }
  Frame from_frame() const { return from_; }

  // (A<-B) * (B<-C) -> (A<-C); throws FrameError on a tag mismatch when
  // checking is enabled.
  Transform operator*(const Transform& rhs) const;
  Vec3 operator*(const Vec3& p) const { return r_ * p + t_; }

  Transform inverse() const;

  Mat4 matrix() const;
  static Transform from_matrix(const Mat4& m, Frame to = Frame::any,
                               Frame from = Frame::any);

  Transform retagged(Frame to, Frame from) const {
    return Transform(r_, t_, to, from);
  }

 private:
  Rotation r_;
  Vec3 t_ = Vec3::Zero();
  Frame to_ = Frame::any;
  Frame from_ = Frame::any;
};

// 4-DoF pivot decomposition: translation along x after a rotation about the
// pivot, T = Trans(depth * e_x) * Rot(rotation).
struct PivotPose {
  double depth = 0.0;  // t_x, meters
  Rotation rotation;
};

Rotation exp_so3(const Vec3& omega);
// Returns omega with norm <= pi. `at_pi`, when given, is set when the
// stable angle-pi extraction branch ran.
Vec3 log_so3(const Rotation& r, bool* at_pi = nullptr);

Mat3 left_jacobian_so3(const Vec3& omega);
Mat3 left_jacobian_inv_so3(const Vec3& omega);
Mat3 right_jacobian_so3(const Vec3& omega);
Mat3 right_jacobian_inv_so3(const Vec3& omega);

Transform exp_se3(const Twist& xi);
Twist log_se3(const Transform& t);

// Log(T1^-1 * T2), the tangent-space difference. Frame tags must agree.
Twist ominus(const Transform& t1, const Transform& t2);

Transform expand_pivot(const PivotPose& p);
// Decomposition plus the (t_y, t_z) components violating the constraint.
std::pair<PivotPose, Vec2> extract_pivot(const Transform& t);

}  // namespace pivio
