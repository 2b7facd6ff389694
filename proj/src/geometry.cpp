#include "geodepth/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace geodepth {

Rotation::Rotation(const Eigen::Quaterniond& q) : q_(q.normalized()) {
  // Canonical hemisphere keeps log() continuous.
  if (q_.w() < 0.0) q_.coeffs() *= -1.0;
}

Rotation Rotation::FromQuaternion(double w, double x, double y, double z) {
  const Eigen::Quaterniond q(w, x, y, z);
  if (q.norm() == 0.0) {
    throw std::invalid_argument("zero-norm quaternion");
  }
  return Rotation(q);
}

Rotation Rotation::FromMatrix(const Mat3& m) {
  return Rotation(Eigen::Quaterniond(m));
}

Rotation Rotation::FromAxisAngle(const Vec3& v) {
  const double theta = v.norm();
  const double half = 0.5 * theta;
  // sin(theta/2)/theta, Taylor-expanded near zero.
  const double k =
      theta > 1e-6 ? std::sin(half) / theta : 0.5 - theta * theta / 48.0;
  return Rotation(Eigen::Quaterniond(std::cos(half), k * v.x(), k * v.y(),
                                     k * v.z()));
}

Vec3 Rotation::log() const {
  const Vec3 xyz = q_.vec();
  const double s = xyz.norm();
  const double w = q_.w();
  if (s < 1e-12) return (2.0 / w) * xyz;
  const double theta = 2.0 * std::atan2(s, w);
  return (theta / s) * xyz;
}

double Rotation::angle() const {
  return 2.0 * std::atan2(q_.vec().norm(), std::abs(q_.w()));
}

Rotation Rotation::inverse() const { return Rotation(q_.conjugate()); }

Rotation Rotation::operator*(const Rotation& other) const {
  return Rotation(q_ * other.q_);
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation.matrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Pose compose(const Pose& a, const Pose& b) {
  return Pose{a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

Pose inverse(const Pose& p) {
  const Rotation r_inv = p.rotation.inverse();
  return Pose{r_inv, -(r_inv * p.translation)};
}

Pose relative_pose(const Pose& e_t, const Pose& e_s) {
  return compose(e_s, inverse(e_t));
}

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw std::invalid_argument("focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("image size must be positive");
  }
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw std::invalid_argument("principal point outside the image");
  }
}

Mat3 Intrinsics::matrix() const {
  Mat3 k = Mat3::Identity();
  k(0, 0) = fx;
  k(1, 1) = fy;
  k(0, 2) = cx;
  k(1, 2) = cy;
  return k;
}

Reprojection reproject(const Vec2& p_t, double depth, const Intrinsics& k,
                       const Pose& pose) {
  const Vec3 x = depth * k.backproject(p_t.x(), p_t.y());
  const Vec3 y = pose.apply(x);
  Reprojection out;
  out.depth = y.z();
  out.valid = y.z() > 0.0;
  if (out.valid) {
    out.pixel = {k.fx * y.x() / y.z() + k.cx, k.fy * y.y() / y.z() + k.cy};
  }
  return out;
}

Rotation axis_angle_to_rotation(const Vec3& v) {
  return Rotation::FromAxisAngle(v);
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),  //
      v.z(), 0.0, -v.x(),   //
      -v.y(), v.x(), 0.0;
  return m;
}

Vec3 vee(const Mat3& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

Mat3 left_jacobian(const Vec3& v) {
  const double theta = v.norm();
  const Mat3 k = skew(v);
  double a;
  double b;
  if (theta < 1e-5) {
    const double t2 = theta * theta;
    a = 0.5 - t2 / 24.0;
    b = 1.0 / 6.0 - t2 / 120.0;
  } else {
    const double t2 = theta * theta;
    a = (1.0 - std::cos(theta)) / t2;
    b = (theta - std::sin(theta)) / (t2 * theta);
  }
  return Mat3::Identity() + a * k + b * k * k;
}

}  // namespace geodepth
