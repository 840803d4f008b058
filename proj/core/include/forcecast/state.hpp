#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "forcecast/geometry.hpp"

namespace forcecast {

inline constexpr std::size_t kStateSize = 54;
using GeneralizedState = std::array<double, kStateSize>;

/// Named groups of the unified state vector.
enum class StateField {
  kEePosition,        // p_E
  kEeOrientation,     // o_E (w, x, y, z)
  kEeLinearVel,       // v_E
  kEeAngularVel,      // omega_E
  kRobotJoints,       // J_robot, zero padded to 7
  kRobotJointVel,     // dJ_robot
  kHapticPosition,    // p_H
  kHapticOrientation, // o_H
  kHapticLinearVel,   // v_H
  kHapticAngularVel,  // omega_H
  kHapticJoints,      // J_H, zero padded to 7
  kWrench,            // sensor force + torque
  kGripper,
};

inline constexpr std::array<StateField, 13> kAllStateFields = {
    StateField::kEePosition,       StateField::kEeOrientation,    StateField::kEeLinearVel,
    StateField::kEeAngularVel,     StateField::kRobotJoints,      StateField::kRobotJointVel,
    StateField::kHapticPosition,   StateField::kHapticOrientation, StateField::kHapticLinearVel,
    StateField::kHapticAngularVel, StateField::kHapticJoints,     StateField::kWrench,
    StateField::kGripper};

/// Half-open slot range [begin, end) in the 54-element vector.
struct SlotRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool contains(std::size_t slot) const { return slot >= begin && slot < end; }
  bool operator==(const SlotRange&) const = default;
};

/// Short external name used in manifests and CSV headers (e.g. "p_E", "J_robot").
std::string_view field_name(StateField field);
std::optional<StateField> parse_field(std::string_view name);

/// Canonical layout:
///   [0-2] p_E  [3-6] o_E  [7-9] v_E  [10-12] w_E  [13-19] J_robot  [20-26] dJ_robot
///   [27-29] p_H  [30-33] o_H  [34-36] v_H  [37-39] w_H  [40-46] J_H  [47-52] wrench  [53] gripper
SlotRange canonical_range(StateField field);

using StateLayout = std::map<StateField, SlotRange>;
StateLayout canonical_layout();

/// Throws ConfigError when ranges overlap or leave [0, 54).
void validate_layout(const StateLayout& layout);

/// One timestep of source robot state. Quaternions are scalar first.
struct RawState {
  double timestamp = 0.0;
  Vec3 ee_position = Vec3::Zero();
  Quaternion ee_orientation;
  std::vector<double> robot_joints;
  Vec3 haptic_position = Vec3::Zero();
  Quaternion haptic_orientation;
  std::vector<double> haptic_joints;
  std::optional<std::array<double, 6>> wrench;
  std::optional<double> gripper;

  /// Number of numeric elements carried (26 for a 6-joint robot + 6-joint haptic device).
  std::size_t element_count() const;
};

struct StateDerivatives {
  Vec3 ee_linear = Vec3::Zero();
  Vec3 ee_angular = Vec3::Zero();
  std::vector<double> robot_joint_rates;
  Vec3 haptic_linear = Vec3::Zero();
  Vec3 haptic_angular = Vec3::Zero();
};

struct TimedPose {
  double timestamp = 0.0;
  Vec3 position = Vec3::Zero();
  Quaternion orientation;
};

struct Twist {
  Vec3 linear = Vec3::Zero();
  Vec3 angular = Vec3::Zero();
};

/// Backward first-order differences; the first sample copies the second.
/// Angular rates come from the relative rotation q_{i-1}^-1 q_i as axis-angle / dt.
/// Throws DataError for fewer than 2 samples or non-increasing timestamps.
std::vector<Twist> compute_velocities(std::span<const TimedPose> poses);

/// Finite-difference derivatives between an earlier and a later sample.
StateDerivatives derivatives_between(const RawState& earlier, const RawState& later);

/// Writes every raw field and derivative into its mapped slot range. Fields
/// shorter than their range are zero padded; unmapped slots are 0.
/// Throws ShapeError when a present field is unmapped or longer than its range.
GeneralizedState generalize_state(const RawState& raw, const StateDerivatives& derivatives,
                                  const StateLayout& layout);

/// Per-slot standardization statistics.
struct Normalizer {
  GeneralizedState mean{};
  GeneralizedState stddev{};

  /// Throws DataError on an empty set. Constant slots keep their value as
  /// the mean and get stddev 1.
  static Normalizer fit(std::span<const GeneralizedState> states);

  GeneralizedState apply(const GeneralizedState& state) const;

  std::string to_json() const;
  static Normalizer from_json(const std::string& text);
  bool operator==(const Normalizer&) const = default;
};

}  // namespace forcecast
