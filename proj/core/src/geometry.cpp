#include "forcecast/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "forcecast/errors.hpp"

namespace forcecast {
namespace {

constexpr double kUnitTolerance = 1e-6;

void canonicalize(double& w, double& x, double& y, double& z) {
  bool flip = w < 0.0;
  if (w == 0.0) {
    // On the w = 0 great circle pick the sign making the first non-zero component positive.
    if (x != 0.0) {
      flip = x < 0.0;
    } else if (y != 0.0) {
      flip = y < 0.0;
    } else {
      flip = z < 0.0;
    }
  }
  if (flip) {
    w = -w;
    x = -x;
    y = -y;
    z = -z;
  }
}

}  // namespace

Quaternion Quaternion::normalized(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (!(n > 0.0) || !std::isfinite(n)) return identity();
  w /= n;
  x /= n;
  y /= n;
  z /= n;
  canonicalize(w, x, y, z);
  return {w, x, y, z};
}

Quaternion Quaternion::unchecked(double w, double x, double y, double z) { return {w, x, y, z}; }

Quaternion Quaternion::from_axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (n == 0.0) return identity();
  const Vec3 u = axis / n;
  const double s = std::sin(angle / 2.0);
  return normalized(std::cos(angle / 2.0), u.x() * s, u.y() * s, u.z() * s);
}

Quaternion Quaternion::from_rotation_vector(const Vec3& rv) {
  const double angle = rv.norm();
  if (angle < 1e-12) return normalized(1.0, rv.x() / 2.0, rv.y() / 2.0, rv.z() / 2.0);
  return from_axis_angle(rv, angle);
}

double Quaternion::norm() const { return std::sqrt(w_ * w_ + x_ * x_ + y_ * y_ + z_ * z_); }

Quaternion Quaternion::conjugate() const { return normalized(w_, -x_, -y_, -z_); }

Quaternion Quaternion::operator*(const Quaternion& r) const {
  return normalized(w_ * r.w_ - x_ * r.x_ - y_ * r.y_ - z_ * r.z_,
                    w_ * r.x_ + x_ * r.w_ + y_ * r.z_ - z_ * r.y_,
                    w_ * r.y_ - x_ * r.z_ + y_ * r.w_ + z_ * r.x_,
                    w_ * r.z_ + x_ * r.y_ - y_ * r.x_ + z_ * r.w_);
}

Vec3 Quaternion::to_rotation_vector() const {
  const Vec3 v(x_, y_, z_);
  const double s = v.norm();
  if (s < 1e-12) return 2.0 * v / std::max(w_, 1e-300);
  // w >= 0 keeps the angle in [0, pi].
  const double angle = 2.0 * std::atan2(s, w_);
  return v * (angle / s);
}

Mat3 quat_to_matrix(const Quaternion& q) {
  const double n = q.norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) > kUnitTolerance) {
    std::ostringstream os;
    os << "invalid quaternion: norm " << n << " is not within " << kUnitTolerance << " of 1";
    throw InvalidQuaternionError(os.str());
  }
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Mat3 m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return m;
}

bool is_rotation(const Mat3& m, double tol) {
  if (!m.allFinite()) return false;
  const double ortho = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(m.determinant() - 1.0) <= tol;
}

Quaternion matrix_to_quat(const Mat3& m) {
  if (!is_rotation(m, kUnitTolerance)) {
    throw InvalidRotationError("invalid rotation: matrix is not orthonormal with determinant +1");
  }
  // Shepperd: branch on the largest of (trace, diagonal) for conditioning.
  const double tr = m.trace();
  double w, x, y, z;
  if (tr >= m(0, 0) && tr >= m(1, 1) && tr >= m(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + tr);
    w = 0.25 * s;
    x = (m(2, 1) - m(1, 2)) / s;
    y = (m(0, 2) - m(2, 0)) / s;
    z = (m(1, 0) - m(0, 1)) / s;
  } else if (m(0, 0) >= m(1, 1) && m(0, 0) >= m(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2));
    w = (m(2, 1) - m(1, 2)) / s;
    x = 0.25 * s;
    y = (m(0, 1) + m(1, 0)) / s;
    z = (m(0, 2) + m(2, 0)) / s;
  } else if (m(1, 1) >= m(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2));
    w = (m(0, 2) - m(2, 0)) / s;
    x = (m(0, 1) + m(1, 0)) / s;
    y = 0.25 * s;
    z = (m(1, 2) + m(2, 1)) / s;
  } else {
    const double s = 2.0 * std::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1));
    w = (m(1, 0) - m(0, 1)) / s;
    x = (m(0, 2) + m(2, 0)) / s;
    y = (m(1, 2) + m(2, 1)) / s;
    z = 0.25 * s;
  }
  return Quaternion::normalized(w, x, y, z);
}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  if (!is_rotation(rotation_, kUnitTolerance)) {
    throw InvalidRotationError("rigid transform rotation is not orthonormal");
  }
  if (!translation_.allFinite()) throw DataError("rigid transform translation is not finite");
}

RigidTransform RigidTransform::from_pose(const Pose& pose) {
  return {quat_to_matrix(pose.orientation), pose.position};
}

Pose Pose::from_transform(const RigidTransform& t) {
  return {t.translation(), matrix_to_quat(t.rotation())};
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation()};
}

RigidTransform invert(const RigidTransform& t) {
  const Mat3 rt = t.rotation().transpose();
  return {rt, -(rt * t.translation())};
}

Vec3 rotate_vector(const RigidTransform& t, const Vec3& v) { return t.rotation() * v; }

Vec3 rotation_vector(const Mat3& m) {
  // Quaternion route is well conditioned near both 0 and pi.
  return matrix_to_quat(m).to_rotation_vector();
}

double angular_distance(const Quaternion& a, const Quaternion& b) {
  return (a.conjugate() * b).to_rotation_vector().norm();
}

}  // namespace forcecast
