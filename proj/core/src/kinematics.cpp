#include "forcecast/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "forcecast/errors.hpp"

namespace forcecast {
namespace {

Eigen::Matrix4d dh_matrix(const DhJoint& j, double q) {
  const double th = q + j.theta_offset;
  const double ct = std::cos(th), st = std::sin(th);
  const double ca = std::cos(j.alpha), sa = std::sin(j.alpha);
  Eigen::Matrix4d t;
  t << ct, -st * ca, st * sa, j.a * ct,
       st, ct * ca, -ct * sa, j.a * st,
       0.0, sa, ca, j.d,
       0.0, 0.0, 0.0, 1.0;
  return t;
}

Eigen::Matrix4d to_homogeneous(const RigidTransform& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = t.rotation();
  m.topRightCorner<3, 1>() = t.translation();
  return m;
}

RigidTransform from_homogeneous(const Eigen::Matrix4d& m) {
  // Re-orthonormalize to shed accumulated round-off before validation.
  const Eigen::JacobiSVD<Mat3> svd(m.topLeftCorner<3, 3>(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  return {svd.matrixU() * svd.matrixV().transpose(), m.topRightCorner<3, 1>()};
}

void check_length(const KinematicChain& chain, const JointVector& q) {
  if (q.size() != chain.size()) {
    std::ostringstream os;
    os << "joint vector has " << q.size() << " entries, chain has " << chain.size() << " joints";
    throw ShapeError(os.str());
  }
}

// Frames 0..n: frame 0 is the base, frame i is after joint i.
std::vector<Eigen::Matrix4d> frame_chain(const KinematicChain& chain, const JointVector& q) {
  std::vector<Eigen::Matrix4d> frames;
  frames.reserve(chain.size() + 1);
  frames.push_back(to_homogeneous(chain.base()));
  for (std::size_t i = 0; i < chain.size(); ++i) {
    frames.push_back(frames.back() * dh_matrix(chain.joints()[i], q[i]));
  }
  return frames;
}

}  // namespace

KinematicChain::KinematicChain(std::vector<DhJoint> joints, RigidTransform base)
    : joints_(std::move(joints)), base_(std::move(base)) {
  if (joints_.size() != 6 && joints_.size() != 7) {
    throw ConfigError("kinematic chain must have 6 or 7 joints, got " + std::to_string(joints_.size()));
  }
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    if (!(joints_[i].min_angle < joints_[i].max_angle)) {
      throw ConfigError("joint " + std::to_string(i) + " has min limit >= max limit");
    }
  }
}

double KinematicChain::reach() const {
  double r = 0.0;
  for (const auto& j : joints_) r += std::hypot(j.a, j.d);
  return r;
}

bool KinematicChain::within_limits(const JointVector& q, double tol) const {
  if (q.size() != joints_.size()) return false;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] < joints_[i].min_angle - tol || q[i] > joints_[i].max_angle + tol) return false;
  }
  return true;
}

JointVector KinematicChain::clamp_to_limits(JointVector q) const {
  for (std::size_t i = 0; i < q.size() && i < joints_.size(); ++i) {
    q[i] = std::clamp(q[i], joints_[i].min_angle, joints_[i].max_angle);
  }
  return q;
}

RigidTransform forward_transform(const KinematicChain& chain, const JointVector& q) {
  check_length(chain, q);
  if (!chain.within_limits(q, 1e-12)) throw DataError("joint vector violates joint limits");
  return from_homogeneous(frame_chain(chain, q).back());
}

Pose forward(const KinematicChain& chain, const JointVector& q) {
  return Pose::from_transform(forward_transform(chain, q));
}

Jacobian geometric_jacobian(const KinematicChain& chain, const JointVector& q) {
  check_length(chain, q);
  const auto frames = frame_chain(chain, q);
  const Eigen::Vector3d pe = frames.back().topRightCorner<3, 1>();
  Jacobian jac(6, chain.size());
  for (std::size_t i = 0; i < chain.size(); ++i) {
    // Joint i rotates about the z axis of frame i (before its own DH transform).
    const Eigen::Vector3d z = frames[i].block<3, 1>(0, 2);
    const Eigen::Vector3d p = frames[i].topRightCorner<3, 1>();
    jac.block<3, 1>(0, i) = z.cross(pe - p);
    jac.block<3, 1>(3, i) = z;
  }
  return jac;
}

Eigen::Matrix<double, 6, 1> pose_residual(const Pose& target, const RigidTransform& current) {
  Eigen::Matrix<double, 6, 1> e;
  e.head<3>() = target.position - current.translation();
  e.tail<3>() = rotation_vector(quat_to_matrix(target.orientation) * current.rotation().transpose());
  return e;
}

JointVector inverse(const KinematicChain& chain, const Pose& target, const JointVector& seed,
                    const IkOptions& options) {
  check_length(chain, seed);
  if (!chain.within_limits(seed, 1e-12)) throw DataError("IK seed violates joint limits");

  const double distance = (target.position - chain.base().translation()).norm();
  if (distance > chain.reach() + options.workspace_margin) {
    std::ostringstream os;
    os << "unreachable pose: target is " << distance << " m from the base, reach is " << chain.reach() << " m";
    throw UnreachablePoseError(os.str(), distance - chain.reach(), 0.0);
  }

  JointVector q = seed;
  JointVector best = q;
  double best_pos = std::numeric_limits<double>::infinity();
  double best_rot = std::numeric_limits<double>::infinity();
  const Eigen::Index n = static_cast<Eigen::Index>(chain.size());

  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    const auto e = pose_residual(target, forward_transform(chain, q));
    const double pos_err = e.head<3>().norm();
    const double rot_err = e.tail<3>().norm();
    if (pos_err + rot_err < best_pos + best_rot) {
      best = q;
      best_pos = pos_err;
      best_rot = rot_err;
    }
    if (pos_err < options.position_tolerance && rot_err < options.orientation_tolerance) return q;
    if (iter == options.max_iterations) break;

    const Jacobian jac = geometric_jacobian(chain, q);
    const Eigen::Matrix<double, 6, 6> jjt =
        jac * jac.transpose() + options.damping * Eigen::Matrix<double, 6, 6>::Identity();
    Eigen::VectorXd dq = jac.transpose() * jjt.ldlt().solve(e);
    const double largest = dq.cwiseAbs().maxCoeff();
    if (largest > options.max_step) dq *= options.max_step / largest;
    for (Eigen::Index i = 0; i < n; ++i) q[i] += dq[i];
    q = chain.clamp_to_limits(std::move(q));
  }

  if (best_pos < options.position_acceptance && best_rot < options.orientation_acceptance) return best;
  std::ostringstream os;
  os << "unreachable pose: IK did not converge (position residual " << best_pos << " m, orientation residual "
     << best_rot << " rad)";
  throw UnreachablePoseError(os.str(), best_pos, best_rot);
}

}  // namespace forcecast
