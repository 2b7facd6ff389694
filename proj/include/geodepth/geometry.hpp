#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace geodepth {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Unit-quaternion rotation. Every constructor and composition renormalizes.
class Rotation {
 public:
  Rotation() : q_(Eigen::Quaterniond::Identity()) {}

  static Rotation Identity() { return Rotation(); }
  static Rotation FromQuaternion(double w, double x, double y, double z);
  static Rotation FromMatrix(const Mat3& m);
  /// Exponential map; well-behaved for arbitrarily small vectors.
  static Rotation FromAxisAngle(const Vec3& v);

  Mat3 matrix() const { return q_.toRotationMatrix(); }
  const Eigen::Quaterniond& quaternion() const { return q_; }

  /// Logarithm map, angle in [0, pi].
  Vec3 log() const;
  double angle() const;

  Rotation inverse() const;
  Rotation operator*(const Rotation& other) const;
  Vec3 operator*(const Vec3& v) const { return q_ * v; }

 private:
  explicit Rotation(const Eigen::Quaterniond& q);
  Eigen::Quaterniond q_;
};

/// Rigid transform x -> R x + t. Stored extrinsics are world-to-camera.
struct Pose {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();

  static Pose Identity() { return Pose{}; }
  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
  Mat4 matrix() const;
};

/// a after b: compose(a, b).apply(x) == a.apply(b.apply(x)).
Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);

/// Relative motion from target to source camera, E_s * E_t^-1, for
/// world-to-camera extrinsics e_t and e_s.
Pose relative_pose(const Pose& e_t, const Pose& e_s);

/// Pinhole camera. Pixel (x, y) refers to the pixel center at integer coords.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  /// Throws std::invalid_argument when fx, fy <= 0 or the principal point
  /// lies outside the image.
  void validate() const;

  /// K^-1 [x, y, 1]^T.
  Vec3 backproject(double x, double y) const {
    return {(x - cx) / fx, (y - cy) / fy, 1.0};
  }
  Mat3 matrix() const;
};

struct Reprojection {
  Vec2 pixel = Vec2::Zero();
  /// Depth of the point in the source camera.
  double depth = 0.0;
  /// False when the point lies on or behind the source image plane.
  bool valid = false;
};

/// Maps a target pixel with target depth into the source view:
/// p_s ~ K (R D K^-1 p_t + t).
Reprojection reproject(const Vec2& p_t, double depth, const Intrinsics& k,
                       const Pose& pose);

Rotation axis_angle_to_rotation(const Vec3& v);

Mat3 skew(const Vec3& v);
/// Inverse of skew().
Vec3 vee(const Mat3& m);

/// Left Jacobian of SO(3): exp(v + d) ~= exp(J_l(v) d) exp(v).
Mat3 left_jacobian(const Vec3& v);

}  // namespace geodepth
