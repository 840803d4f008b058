#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "forcecast/dataset.hpp"
#include "forcecast/image.hpp"
#include "forcecast/manifest.hpp"

namespace forcecast {

struct ContactParams {
  double surface_height = 0.0;  ///< z0 of the phantom plane in the base frame (m)
  double stiffness = 300.0;     ///< k (N/m)
  double damping = 5.0;         ///< c (N s / m)
  double friction = 0.3;        ///< Coulomb coefficient for lateral force
  double slip_velocity = 0.005; ///< tanh regularization of the friction direction (m/s)
  /// Optional stiffer inclusion below the surface: adds inclusion_stiffness * (delta - inclusion_depth)
  /// once the penetration passes inclusion_depth. Zero stiffness disables it.
  double inclusion_depth = 0.0;
  double inclusion_stiffness = 0.0;
};

/// Kelvin-Voigt normal force k delta + c delta_rate along +z when delta > 0, else zero.
/// Lateral force -mu |F_z| tanh(|v_t| / v_s) v_t / |v_t|.
Vec3 contact_force(double penetration, double penetration_rate, const Eigen::Vector2d& tangential_velocity,
                   const ContactParams& params);

/// Uniform cubic B-spline (C2) over control points spaced `knot_spacing` seconds apart.
/// Covers [0, (n - 3) * knot_spacing].
class BSplineTrajectory {
 public:
  BSplineTrajectory(std::vector<Eigen::Vector4d> control_points, double knot_spacing);
  double duration() const;
  /// Derivative order 0, 1 or 2 of (x, y, z, yaw).
  Eigen::Vector4d evaluate(double t, int derivative = 0) const;

 private:
  std::vector<Eigen::Vector4d> points_;
  double spacing_;
};

struct SynthConfig {
  std::uint64_t seed = 0;
  std::string name = "clip";
  ClipTags tags{"soft", "single", "center"};
  double duration = 20.0;
  double video_rate_hz = 30.0;
  double state_rate_hz = 200.0;
  ContactParams contact;
  /// Inertial term -m a added to the measured force; 0 gives pure contact forces.
  double tool_mass = 0.0;
  /// Gaussian noise on the raw sensor channel (N).
  double noise_sigma = 0.0;

  /// (x, y, z, yaw about base z) control points; yaw rotates the home orientation.
  std::vector<Eigen::Vector4d> control_points;
  double knot_spacing = 0.1;
  Quaternion tool_orientation;  ///< orientation at yaw 0

  std::vector<DhJoint> chain;
  RigidTransform chain_base;
  std::vector<double> home_joints;
  CalibrationParams calibration;
  CameraModel camera;

  /// Haptic command pose = scale * (p_E - anchor) + haptic_offset, same orientation.
  Vec3 haptic_anchor = Vec3::Zero();
  Vec3 haptic_offset = Vec3(0.0, 0.0, 0.1);
  double haptic_scale = 2.0;
  int haptic_joint_count = 6;

  /// Second sensor channel reported inside the state (wrench slots): a lagged, noisy force.
  bool with_wrench = false;
  double wrench_lag = 0.15;
  double wrench_noise = 0.05;
  bool with_gripper = false;

  /// Image appearance.
  Vec3 background_tint = Vec3(0.75, 0.45, 0.45);
  std::uint64_t texture_seed = 1;
  double tool_radius = 0.006;  ///< m
  double brightness_reference = 0.01;  ///< penetration (m) at full tool brightness

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// A generated clip: raw states, ground-truth and raw sensor forces, and a frame renderer.
struct SynthClip {
  std::string name;
  ClipTags tags;
  std::vector<RawState> states;
  std::vector<Vec3> ground_truth;
  std::vector<Vec3> raw_forces;
  std::vector<double> frame_times;
  /// Pixel position (u, v) and depth of the tool tip at each frame.
  std::vector<Eigen::Vector3d> tip_pixels;
  std::function<Image(std::size_t)> render;
  /// Background without the tool, for audits.
  std::shared_ptr<const Image> background;
};

/// Throws ConfigError when the config is invalid, the trajectory is unreachable,
/// or the tool leaves the central camera crop.
SynthClip generate_clip(const SynthConfig& config);

/// Planned palpation control points: hover, presses of random depth at least
/// `min_press_gap` seconds apart, slow lateral drift around `center`.
std::vector<Eigen::Vector4d> plan_palpation(std::uint64_t seed, const Vec3& center, double surface_height,
                                            double duration, double knot_spacing, double min_press_gap = 5.5);

struct SynthDataset {
  DatasetManifest manifest;
  std::vector<SynthClip> clips;

  /// In-memory dataset; frames render on demand.
  Dataset to_dataset() const;
};

struct SuiteOptions {
  double clip_duration = 20.0;
  int clips_per_material = 2;  ///< one "single" and one "double" structure clip each
  double tool_mass = 0.5;
  double noise_sigma = 0.0;
};

/// Dataset A: 6-joint chain, 26-element raw states. Dataset B: 7-joint chain with the
/// sensor wrench and gripper. Both carry soft/stiff materials and single/double structures.
std::array<SynthDataset, 2> make_benchmark_suite(std::uint64_t seed, const SuiteOptions& options = {});

/// Configs used by make_benchmark_suite, exposed for tests.
SynthConfig dataset_a_config(std::uint64_t seed, const std::string& material, double duration);
SynthConfig dataset_b_config(std::uint64_t seed, const std::string& material, double duration);

/// Writes clips (states.csv, forces.csv, frames/) and manifest.json under `dir`.
void write_dataset(const SynthDataset& dataset, const std::filesystem::path& dir, unsigned workers = 1);

}  // namespace forcecast
