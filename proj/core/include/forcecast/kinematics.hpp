#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "forcecast/geometry.hpp"

namespace forcecast {

/// Standard Denavit-Hartenberg joint: T = Rz(theta + offset) Tz(d) Tx(a) Rx(alpha).
/// All joints are revolute.
struct DhJoint {
  double a = 0.0;
  double alpha = 0.0;
  double d = 0.0;
  double theta_offset = 0.0;
  double min_angle = -3.14159265358979323846;
  double max_angle = 3.14159265358979323846;
};

using JointVector = std::vector<double>;
using Jacobian = Eigen::Matrix<double, 6, Eigen::Dynamic>;

/// Serial chain of 6 or 7 revolute joints on a base transform.
class KinematicChain {
 public:
  /// Throws ConfigError on a joint count other than 6/7 or on inverted limits.
  KinematicChain(std::vector<DhJoint> joints, RigidTransform base = RigidTransform::identity());

  std::size_t size() const { return joints_.size(); }
  const std::vector<DhJoint>& joints() const { return joints_; }
  const RigidTransform& base() const { return base_; }

  /// Upper bound on the distance from the base origin to the end effector.
  double reach() const;

  bool within_limits(const JointVector& q, double tol = 0.0) const;
  JointVector clamp_to_limits(JointVector q) const;

 private:
  std::vector<DhJoint> joints_;
  RigidTransform base_;
};

/// End-effector transform in the base frame. Throws on length mismatch or limit violation.
RigidTransform forward_transform(const KinematicChain& chain, const JointVector& q);
Pose forward(const KinematicChain& chain, const JointVector& q);

/// Geometric Jacobian: rows 0-2 linear velocity, rows 3-5 angular velocity (base frame).
Jacobian geometric_jacobian(const KinematicChain& chain, const JointVector& q);

struct IkOptions {
  double damping = 1e-3;
  int max_iterations = 200;
  double max_step = 0.2;
  double position_tolerance = 1e-6;
  double orientation_tolerance = 1e-6;
  /// Acceptance bounds for declaring success when the strict tolerances are not reached.
  double position_acceptance = 1e-3;
  double orientation_acceptance = 1e-3;
  /// Targets farther than reach() + margin from the base are rejected up front.
  double workspace_margin = 0.05;
};

/// 6-vector residual: [target position - current position; rotation vector of R_t R_c^T].
Eigen::Matrix<double, 6, 1> pose_residual(const Pose& target, const RigidTransform& current);

/// Damped least squares inverse kinematics seeded at `seed`.
///
/// The result respects joint limits and stays near the seed. Throws
/// UnreachablePoseError carrying the best residual on failure.
JointVector inverse(const KinematicChain& chain, const Pose& target, const JointVector& seed,
                    const IkOptions& options = {});

}  // namespace forcecast
