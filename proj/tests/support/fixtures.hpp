#pragma once

// Small fixtures shared by the unit tests.

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "forcecast/dataset.hpp"
#include "forcecast/synth.hpp"

namespace forcecast::testing {

inline std::shared_ptr<DatasetManifest> plain_manifest(const std::string& name = "plain") {
  auto m = std::make_shared<DatasetManifest>();
  m->name = name;
  m->chain = dataset_a_config(0, "soft", 1.0).chain;
  return m;
}

/// Clip with states at `state_rate` over [0, duration] and frames at `frame_times`.
/// Poses move slowly so every derivative is well defined.
inline std::shared_ptr<Clip> timed_clip(const std::shared_ptr<const DatasetManifest>& manifest,
                                        const std::vector<double>& frame_times, double duration,
                                        double state_rate = 200.0, const std::string& id = "clip") {
  auto clip = std::make_shared<Clip>();
  clip->id = id;
  clip->manifest = manifest;
  const auto blank = std::make_shared<const Image>(320, 320);
  for (const double t : frame_times) clip->frames.push_back({t, FrameSource(blank)});
  const int n = static_cast<int>(std::lround(duration * state_rate)) + 1;
  for (int i = 0; i < n; ++i) {
    const double t = i / state_rate;
    RawState s;
    s.timestamp = t;
    s.ee_position = {0.1 * t, 0.02 * std::sin(t), 0.3};
    s.ee_orientation = Quaternion::from_axis_angle(Vec3::UnitZ(), 0.1 * t);
    s.robot_joints = {0.1 * t, -1.5, 1.5, -1.5, -1.5, 0.2 * t};
    s.haptic_position = 2.0 * s.ee_position;
    s.haptic_orientation = s.ee_orientation;
    s.haptic_joints = std::vector<double>(6, 0.05 * t);
    clip->raw_states.push_back(s);
    clip->forces.push_back(Vec3(t, 2 * t, 3 * t));
  }
  generalize_clip(*clip);
  return clip;
}

inline std::vector<double> frame_grid(int count, double rate = 30.0) {
  std::vector<double> t;
  for (int j = 0; j < count; ++j) t.push_back(j / rate);
  return t;
}

/// The two-dataset synthetic suite with short clips, converted in memory.
inline std::vector<Dataset> short_suite(std::uint64_t seed, double duration = 4.0, int clips_per_material = 2) {
  SuiteOptions options;
  options.clip_duration = duration;
  options.clips_per_material = clips_per_material;
  const auto suite = make_benchmark_suite(seed, options);
  return {suite[0].to_dataset(), suite[1].to_dataset()};
}

}  // namespace forcecast::testing
