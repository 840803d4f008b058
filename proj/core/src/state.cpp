#include "forcecast/state.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "forcecast/errors.hpp"

namespace forcecast {
namespace {

struct FieldInfo {
  StateField field;
  std::string_view name;
  SlotRange range;
};

constexpr std::array<FieldInfo, 13> kFieldTable = {{
    {StateField::kEePosition, "p_E", {0, 3}},
    {StateField::kEeOrientation, "o_E", {3, 7}},
    {StateField::kEeLinearVel, "v_E", {7, 10}},
    {StateField::kEeAngularVel, "w_E", {10, 13}},
    {StateField::kRobotJoints, "J_robot", {13, 20}},
    {StateField::kRobotJointVel, "dJ_robot", {20, 27}},
    {StateField::kHapticPosition, "p_H", {27, 30}},
    {StateField::kHapticOrientation, "o_H", {30, 34}},
    {StateField::kHapticLinearVel, "v_H", {34, 37}},
    {StateField::kHapticAngularVel, "w_H", {37, 40}},
    {StateField::kHapticJoints, "J_H", {40, 47}},
    {StateField::kWrench, "wrench", {47, 53}},
    {StateField::kGripper, "gripper", {53, 54}},
}};

const FieldInfo& info(StateField field) {
  for (const auto& f : kFieldTable) {
    if (f.field == field) return f;
  }
  throw ConfigError("unknown state field");
}

void write_values(GeneralizedState& out, const StateLayout& layout, StateField field, std::span<const double> values,
                  bool present) {
  const auto it = layout.find(field);
  if (it == layout.end()) {
    if (present) {
      throw ShapeError("state field '" + std::string(field_name(field)) + "' is present but not mapped by the layout");
    }
    return;
  }
  const SlotRange& r = it->second;
  if (values.size() > r.size()) {
    std::ostringstream os;
    os << "state field '" << field_name(field) << "' has " << values.size() << " values but its slot range holds "
       << r.size();
    throw ShapeError(os.str());
  }
  for (std::size_t i = 0; i < values.size(); ++i) out[r.begin + i] = values[i];
}

std::array<double, 3> arr(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
std::array<double, 4> arr(const Quaternion& q) { return {q.w(), q.x(), q.y(), q.z()}; }

}  // namespace

std::string_view field_name(StateField field) { return info(field).name; }

std::optional<StateField> parse_field(std::string_view name) {
  for (const auto& f : kFieldTable) {
    if (f.name == name) return f.field;
  }
  return std::nullopt;
}

SlotRange canonical_range(StateField field) { return info(field).range; }

StateLayout canonical_layout() {
  StateLayout layout;
  for (const auto& f : kFieldTable) layout[f.field] = f.range;
  return layout;
}

void validate_layout(const StateLayout& layout) {
  std::array<int, kStateSize> owner{};
  owner.fill(-1);
  for (const auto& [field, range] : layout) {
    if (range.begin >= range.end || range.end > kStateSize) {
      std::ostringstream os;
      os << "layout range for '" << field_name(field) << "' [" << range.begin << ", " << range.end
         << ") is empty or outside [0, 54)";
      throw ConfigError(os.str());
    }
    for (std::size_t s = range.begin; s < range.end; ++s) {
      if (owner[s] >= 0) {
        std::ostringstream os;
        os << "layout ranges overlap at slot " << s << " ('" << field_name(static_cast<StateField>(owner[s]))
           << "' and '" << field_name(field) << "')";
        throw ConfigError(os.str());
      }
      owner[s] = static_cast<int>(field);
    }
  }
}

std::size_t RawState::element_count() const {
  std::size_t n = 3 + 4 + robot_joints.size() + 3 + 4 + haptic_joints.size();
  if (wrench) n += 6;
  if (gripper) n += 1;
  return n;
}

std::vector<Twist> compute_velocities(std::span<const TimedPose> poses) {
  if (poses.size() < 2) throw DataError("velocity estimation needs at least 2 timestamps");
  std::vector<Twist> out(poses.size());
  for (std::size_t i = 1; i < poses.size(); ++i) {
    const double dt = poses[i].timestamp - poses[i - 1].timestamp;
    if (!(dt > 0.0)) {
      throw DataError("timestamps must be strictly increasing (duplicate or reversed at index " + std::to_string(i) +
                      ")");
    }
    out[i].linear = (poses[i].position - poses[i - 1].position) / dt;
    out[i].angular = (poses[i - 1].orientation.conjugate() * poses[i].orientation).to_rotation_vector() / dt;
  }
  out[0] = out[1];
  return out;
}

StateDerivatives derivatives_between(const RawState& earlier, const RawState& later) {
  const double dt = later.timestamp - earlier.timestamp;
  if (!(dt > 0.0)) throw DataError("derivative pair must have strictly increasing timestamps");
  StateDerivatives d;
  d.ee_linear = (later.ee_position - earlier.ee_position) / dt;
  d.ee_angular = (earlier.ee_orientation.conjugate() * later.ee_orientation).to_rotation_vector() / dt;
  d.haptic_linear = (later.haptic_position - earlier.haptic_position) / dt;
  d.haptic_angular = (earlier.haptic_orientation.conjugate() * later.haptic_orientation).to_rotation_vector() / dt;
  const std::size_t nj = std::min(earlier.robot_joints.size(), later.robot_joints.size());
  d.robot_joint_rates.resize(nj);
  for (std::size_t j = 0; j < nj; ++j) d.robot_joint_rates[j] = (later.robot_joints[j] - earlier.robot_joints[j]) / dt;
  return d;
}

GeneralizedState generalize_state(const RawState& raw, const StateDerivatives& d, const StateLayout& layout) {
  GeneralizedState out{};
  const auto pe = arr(raw.ee_position);
  const auto oe = arr(raw.ee_orientation);
  const auto ve = arr(d.ee_linear);
  const auto we = arr(d.ee_angular);
  const auto ph = arr(raw.haptic_position);
  const auto oh = arr(raw.haptic_orientation);
  const auto vh = arr(d.haptic_linear);
  const auto wh = arr(d.haptic_angular);
  write_values(out, layout, StateField::kEePosition, pe, false);
  write_values(out, layout, StateField::kEeOrientation, oe, false);
  write_values(out, layout, StateField::kEeLinearVel, ve, false);
  write_values(out, layout, StateField::kEeAngularVel, we, false);
  write_values(out, layout, StateField::kRobotJoints, raw.robot_joints, !raw.robot_joints.empty());
  write_values(out, layout, StateField::kRobotJointVel, d.robot_joint_rates, !d.robot_joint_rates.empty());
  write_values(out, layout, StateField::kHapticPosition, ph, false);
  write_values(out, layout, StateField::kHapticOrientation, oh, false);
  write_values(out, layout, StateField::kHapticLinearVel, vh, false);
  write_values(out, layout, StateField::kHapticAngularVel, wh, false);
  write_values(out, layout, StateField::kHapticJoints, raw.haptic_joints, !raw.haptic_joints.empty());
  if (raw.wrench) {
    write_values(out, layout, StateField::kWrench, *raw.wrench, true);
  }
  if (raw.gripper) {
    const std::array<double, 1> g = {*raw.gripper};
    write_values(out, layout, StateField::kGripper, g, true);
  }
  return out;
}

Normalizer Normalizer::fit(std::span<const GeneralizedState> states) {
  if (states.empty()) throw DataError("cannot fit a normalizer on an empty training set");
  Normalizer n;
  const double count = static_cast<double>(states.size());
  for (std::size_t s = 0; s < kStateSize; ++s) {
    double lo = states[0][s], hi = states[0][s];
    double sum = 0.0;
    for (const auto& st : states) {
      lo = std::min(lo, st[s]);
      hi = std::max(hi, st[s]);
      sum += st[s];
    }
    if (lo == hi) {
      n.mean[s] = lo;
      n.stddev[s] = 1.0;
      continue;
    }
    const double mean = sum / count;
    double ss = 0.0;
    for (const auto& st : states) ss += (st[s] - mean) * (st[s] - mean);
    const double sd = std::sqrt(ss / count);
    n.mean[s] = mean;
    n.stddev[s] = sd > 1e-12 ? sd : 1.0;
  }
  return n;
}

GeneralizedState Normalizer::apply(const GeneralizedState& state) const {
  GeneralizedState out;
  for (std::size_t s = 0; s < kStateSize; ++s) out[s] = (state[s] - mean[s]) / stddev[s];
  return out;
}

std::string Normalizer::to_json() const {
  nlohmann::json j;
  j["format"] = "forcecast-normalizer";
  j["version"] = 1;
  j["mean"] = mean;
  j["stddev"] = stddev;
  return j.dump(2) + "\n";
}

Normalizer Normalizer::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("normalizer parse error: ") + e.what());
  }
  Normalizer n;
  try {
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto sd = j.at("stddev").get<std::vector<double>>();
    if (mean.size() != kStateSize || sd.size() != kStateSize) throw DataError("normalizer must have 54 slots");
    std::copy(mean.begin(), mean.end(), n.mean.begin());
    std::copy(sd.begin(), sd.end(), n.stddev.begin());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("normalizer field error: ") + e.what());
  }
  return n;
}

}  // namespace forcecast
