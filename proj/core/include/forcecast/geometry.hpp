#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace forcecast {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Unit quaternion, scalar first (w, x, y, z), kept on the w >= 0 hemisphere.
///
/// Every factory normalizes and canonicalizes. `unchecked` keeps the raw
/// components so that ingested data can be validated by the conversions.
class Quaternion {
 public:
  Quaternion() = default;

  static Quaternion identity() { return {}; }
  /// Normalizes and canonicalizes; a zero quaternion becomes the identity.
  static Quaternion normalized(double w, double x, double y, double z);
  static Quaternion unchecked(double w, double x, double y, double z);
  static Quaternion from_axis_angle(const Vec3& axis, double angle);
  /// Rotation vector (axis * angle) to quaternion.
  static Quaternion from_rotation_vector(const Vec3& rv);

  double w() const { return w_; }
  double x() const { return x_; }
  double y() const { return y_; }
  double z() const { return z_; }
  Eigen::Vector4d coeffs() const { return {w_, x_, y_, z_}; }
  double norm() const;

  Quaternion conjugate() const;
  /// Hamilton product, canonicalized.
  Quaternion operator*(const Quaternion& rhs) const;
  /// Rotation vector of this rotation, angle in [0, pi].
  Vec3 to_rotation_vector() const;

  bool operator==(const Quaternion&) const = default;

 private:
  Quaternion(double w, double x, double y, double z) : w_(w), x_(x), y_(y), z_(z) {}

  double w_ = 1.0;
  double x_ = 0.0;
  double y_ = 0.0;
  double z_ = 0.0;
};

/// Throws InvalidQuaternionError when |q| deviates from 1 by more than 1e-6.
Mat3 quat_to_matrix(const Quaternion& q);
/// Throws InvalidRotationError when `m` is not a proper rotation within 1e-6.
Quaternion matrix_to_quat(const Mat3& m);

/// True when `m` is orthonormal with determinant +1 within `tol`.
bool is_rotation(const Mat3& m, double tol = 1e-6);

struct Pose;

/// Rotation + translation (meters). The rotation is validated on construction.
class RigidTransform {
 public:
  RigidTransform() = default;
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }
  static RigidTransform from_pose(const Pose& pose);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 apply(const Vec3& point) const { return rotation_ * point + translation_; }

 private:
  Mat3 rotation_ = Mat3::Identity();
  Vec3 translation_ = Vec3::Zero();
};

struct Pose {
  Vec3 position = Vec3::Zero();
  Quaternion orientation;

  static Pose from_transform(const RigidTransform& t);
};

RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& t);
/// Applies only the rotation part; free vectors ignore translation.
Vec3 rotate_vector(const RigidTransform& t, const Vec3& v);

/// Rotation vector of a rotation matrix (log map restricted to what callers need).
Vec3 rotation_vector(const Mat3& m);

/// Geodesic angle between two orientations, in radians.
double angular_distance(const Quaternion& a, const Quaternion& b);

}  // namespace forcecast
