#pragma once

#include <utility>
#include <vector>

#include "forcecast/geometry.hpp"

namespace forcecast {

/// How the gravity term enters the calibration. `kInverseRotation` is
/// F = s (R F_fs - (R^-1 G0 + T0)); `kRotation` swaps R^-1 for R.
enum class GravityMode { kInverseRotation, kRotation };

struct CalibrationParams {
  double attenuation = 1.0;       ///< s, dimensionless, > 0
  Vec3 gravity_comp = Vec3::Zero();  ///< G0 (N), base frame
  Vec3 tool_bias = Vec3::Zero();     ///< T0 (N), tool frame
  GravityMode gravity_mode = GravityMode::kInverseRotation;

  /// Throws ConfigError when s <= 0 or a component is non-finite.
  void validate() const;
};

struct ForceSample {
  double timestamp = 0.0;
  Vec3 raw = Vec3::Zero();
  Vec3 calibrated = Vec3::Zero();
  bool has_calibrated = false;
};

/// Maps a raw sensor reading into the tool-tip frame: s (R raw - (R^-1 G0 + T0)).
Vec3 calibrate_force(const Vec3& raw, const RigidTransform& transform, const CalibrationParams& params);

/// Exact inverse of calibrate_force: the raw reading that calibrates to `force`.
Vec3 uncalibrate_force(const Vec3& force, const RigidTransform& transform, const CalibrationParams& params);

struct BiasEstimate {
  CalibrationParams params;  ///< G0 and T0 filled; s = 1
  double residual_rms = 0.0;
};

/// Least-squares (G0, T0) from readings taken under no external load.
///
/// Needs at least 6 samples spanning at least 3 distinct orientations;
/// throws UnderdeterminedCalibrationError otherwise.
BiasEstimate estimate_bias(const std::vector<std::pair<RigidTransform, Vec3>>& noload,
                           GravityMode mode = GravityMode::kInverseRotation);

}  // namespace forcecast
