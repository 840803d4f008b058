#include "forcecast/calibration.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "forcecast/errors.hpp"

namespace forcecast {
namespace {

Mat3 gravity_map(const Mat3& r, GravityMode mode) {
  return mode == GravityMode::kInverseRotation ? Mat3(r.transpose()) : r;
}

}  // namespace

void CalibrationParams::validate() const {
  if (!(attenuation > 0.0) || !std::isfinite(attenuation)) {
    throw ConfigError("calibration.attenuation must be a finite value > 0");
  }
  if (!gravity_comp.allFinite()) throw ConfigError("calibration.gravity_comp must be finite");
  if (!tool_bias.allFinite()) throw ConfigError("calibration.tool_bias must be finite");
}

Vec3 calibrate_force(const Vec3& raw, const RigidTransform& transform, const CalibrationParams& params) {
  const Mat3& r = transform.rotation();
  return params.attenuation *
         (r * raw - (gravity_map(r, params.gravity_mode) * params.gravity_comp + params.tool_bias));
}

Vec3 uncalibrate_force(const Vec3& force, const RigidTransform& transform, const CalibrationParams& params) {
  const Mat3& r = transform.rotation();
  const Vec3 rotated = force / params.attenuation +
                       gravity_map(r, params.gravity_mode) * params.gravity_comp + params.tool_bias;
  return r.transpose() * rotated;
}

BiasEstimate estimate_bias(const std::vector<std::pair<RigidTransform, Vec3>>& noload, GravityMode mode) {
  if (noload.size() < 6) {
    throw UnderdeterminedCalibrationError("bias estimation needs at least 6 no-load samples, got " +
                                          std::to_string(noload.size()));
  }
  std::vector<Quaternion> distinct;
  for (const auto& [t, raw] : noload) {
    const Quaternion q = matrix_to_quat(t.rotation());
    bool seen = false;
    for (const auto& d : distinct) seen = seen || angular_distance(d, q) < 1e-6;
    if (!seen) distinct.push_back(q);
  }
  if (distinct.size() < 3) {
    throw UnderdeterminedCalibrationError("bias estimation needs at least 3 distinct orientations, got " +
                                          std::to_string(distinct.size()));
  }

  // R F = M G0 + T0 for every sample, stacked as A [G0; T0] = b.
  const Eigen::Index rows = static_cast<Eigen::Index>(3 * noload.size());
  Eigen::MatrixXd a(rows, 6);
  Eigen::VectorXd b(rows);
  for (std::size_t i = 0; i < noload.size(); ++i) {
    const Mat3& r = noload[i].first.rotation();
    const Eigen::Index row = static_cast<Eigen::Index>(3 * i);
    a.block<3, 3>(row, 0) = gravity_map(r, mode);
    a.block<3, 3>(row, 3) = Mat3::Identity();
    b.segment<3>(row) = r * noload[i].second;
  }

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) < 1e-9 * sv(0)) {
    throw UnderdeterminedCalibrationError("orientation set does not determine gravity and tool bias (rank deficient)");
  }
  const Eigen::VectorXd x = svd.solve(b);

  BiasEstimate out;
  out.params.gravity_comp = x.head<3>();
  out.params.tool_bias = x.tail<3>();
  out.params.gravity_mode = mode;
  out.residual_rms = std::sqrt((a * x - b).squaredNorm() / static_cast<double>(rows));
  return out;
}

}  // namespace forcecast
