#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "forcecast/image.hpp"
#include "forcecast/manifest.hpp"
#include "forcecast/state.hpp"

namespace forcecast {

inline constexpr std::size_t kWindowLength = 5;

/// Image handle: decoded in memory, a PNG on disk, or rendered on demand.
class FrameSource {
 public:
  FrameSource() = default;
  explicit FrameSource(std::shared_ptr<const Image> image) : source_(std::move(image)) {}
  explicit FrameSource(std::filesystem::path path) : source_(std::move(path)) {}
  explicit FrameSource(std::function<Image()> render) : source_(std::move(render)) {}

  Image load() const;

 private:
  std::variant<std::monostate, std::shared_ptr<const Image>, std::filesystem::path, std::function<Image()>> source_;
};

struct Frame {
  double timestamp = 0.0;
  FrameSource source;
};

/// One recording: frames, raw and generalized states, calibrated force labels.
/// `forces[i]` belongs to `raw_states[i]` (shared timestamps).
struct Clip {
  std::string id;
  ClipTags tags;
  std::vector<Frame> frames;
  std::vector<RawState> raw_states;
  std::vector<GeneralizedState> states;
  std::vector<Vec3> forces;
  std::shared_ptr<const DatasetManifest> manifest;

  /// Checks stream monotonicity and label/state pairing. Throws DataError.
  void validate() const;
};

/// Recomputes generalized states from raw states with the manifest layout.
void generalize_clip(Clip& clip);

/// A state inside a window together with the neighbouring raw sample its
/// derivatives were taken against, so the pair can be transformed and re-differenced.
struct WindowState {
  RawState state;
  RawState neighbor;
  bool neighbor_is_next = false;  ///< true only for the first sample of a clip
  GeneralizedState generalized{};

  StateDerivatives derivatives() const;
};

struct SampleWindow {
  std::shared_ptr<const Clip> clip;
  std::array<std::size_t, kWindowLength> frame_indices{};
  std::array<double, kWindowLength> frame_times{};
  std::array<WindowState, kWindowLength> states;
  Vec3 target = Vec3::Zero();
  /// Preprocessed (crop/zoom/resize, values in [0, 1]) frames once materialized, e.g. by augmentation.
  std::vector<ImageF> images;
  /// Set when kinematic augmentation could not re-solve the joints.
  bool flagged = false;
};

/// Sliding windows (stride 1) of 5 consecutive frames, each paired with the
/// nearest-timestamp state. Windows with a frame/state gap beyond half a frame
/// period, or a frame-to-frame gap beyond 1.5 periods, are dropped.
/// Throws DataError for clips with fewer than 5 frames.
std::vector<SampleWindow> build_windows(const std::shared_ptr<const Clip>& clip, std::size_t length = kWindowLength);

/// Frames of the window as crop/zoom/resized [0, 1] images (materialized or loaded from the clip).
std::vector<ImageF> window_images(const SampleWindow& window);

/// Reads `<clip>/states.csv`, `<clip>/forces.csv` (raw sensor forces, calibrated
/// on load against the end-effector orientation) and `<clip>/frames/%06d.png`.
/// An optional `<clip>/frames.csv` (frame,timestamp) overrides index / video rate timing.
Clip load_clip(const std::shared_ptr<const DatasetManifest>& manifest, std::size_t index);

/// Writes a clip in the on-disk layout. Raw sensor readings are given explicitly.
void save_clip(const std::filesystem::path& dir, const std::vector<RawState>& states,
               const std::vector<Vec3>& raw_forces, const std::vector<Image>& frames);
/// Same, with frames produced one at a time by `frame(i)`.
void save_clip(const std::filesystem::path& dir, const std::vector<RawState>& states,
               const std::vector<Vec3>& raw_forces, std::size_t frame_count,
               const std::function<Image(std::size_t)>& frame);

struct Dataset {
  std::shared_ptr<const DatasetManifest> manifest;
  std::vector<std::shared_ptr<const Clip>> clips;
};

/// Loads every clip of a manifest; `workers` > 1 decodes clips in parallel.
Dataset load_dataset(const DatasetManifest& manifest, unsigned workers = 1);

enum class TrainingMode { kRandom, kStiffness, kStructure };

std::string to_string(TrainingMode mode);
TrainingMode parse_training_mode(const std::string& text);

struct MixOptions {
  TrainingMode mode = TrainingMode::kRandom;
  std::uint64_t seed = 0;
  /// Structure isolation: train on this structure tag, test on the other.
  std::string train_structure = "double";
  std::string test_structure = "single";
};

struct DataSplit {
  std::vector<std::shared_ptr<const Clip>> train_clips;
  std::vector<std::shared_ptr<const Clip>> test_clips;
  std::vector<SampleWindow> train;
  std::vector<SampleWindow> test;
};

/// Partitions clips into train/test per training mode and builds windows.
///
/// Random: one seeded held-out clip per dataset. Stiffness: per dataset, train
/// on the first material (sorted) and hold out one clip of another material.
/// Structure: train on `train_structure` clips, hold out one `test_structure`
/// clip per dataset that has any. Throws ConfigError on empty partitions.
DataSplit mix_datasets(const std::vector<Dataset>& datasets, const MixOptions& options);

/// Seeded uniform interleaving of `count` training windows for one epoch.
std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, std::size_t epoch);

}  // namespace forcecast
