#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "forcecast/augment.hpp"
#include "forcecast/dataset.hpp"
#include "forcecast/nn/model.hpp"
#include "forcecast/state.hpp"

namespace forcecast {

/// State groups that can be zeroed: force sensor, robot position, robot joints, robot command.
enum class OcclusionGroup { kFS, kRP, kRQ, kRC };

std::string to_string(OcclusionGroup group);
OcclusionGroup parse_occlusion_group(const std::string& text);
/// FS [47, 53), RP [0, 3), RQ [13, 20), RC [27, 47).
SlotRange occlusion_range(OcclusionGroup group);

struct OcclusionMask {
  std::set<OcclusionGroup> groups;
  bool empty() const { return groups.empty(); }
  bool covers(std::size_t slot) const;
  bool operator==(const OcclusionMask&) const = default;
};

GeneralizedState occlude(const GeneralizedState& state, const OcclusionMask& mask);

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double l1 = 1e-5;
  int batch_size = 32;
  std::uint64_t seed = 0;
  TrainingMode mode = TrainingMode::kRandom;
  std::string train_structure = "double";
  std::string test_structure = "single";
  OcclusionMask occlusion;
  bool augment = true;
  AugmentationProbabilities augmentation;
  /// Stop after this many optimizer steps (0: no limit).
  int max_steps = 0;
  /// Evaluate train/test RMSE every this many epochs; the last epoch is always evaluated.
  int eval_interval = 1;
  /// Model size preset ("desk" or "tiny") and field overrides as JSON object text.
  std::string model_size = "desk";
  std::string model_overrides = "{}";
  /// Preprocessing threads; results do not depend on it.
  unsigned workers = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  std::string to_json() const;
  /// Unknown keys are rejected.
  static TrainConfig from_json(const std::string& text);
};

/// Preset for `variant` at the configured size with the overrides applied. The
/// initialization seed defaults to the config seed.
nn::ModelSpec build_model_spec(nn::Variant variant, const TrainConfig& config);

/// Mean over batch and axes of the squared error.
template <typename T>
nn::Tensor<T> mse_loss(const nn::Tensor<T>& prediction, const nn::Tensor<T>& target);
/// Sum of |w| over weight tensors (biases, norm affine terms and embeddings excluded).
template <typename T>
nn::Tensor<T> l1_penalty(const nn::ParamRegistry<T>& params);
template <typename T>
nn::Tensor<T> training_loss(const nn::Tensor<T>& prediction, const nn::Tensor<T>& target,
                            const nn::ParamRegistry<T>& params, double l1);

struct AdamOptions {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
class Adam {
 public:
  Adam(std::vector<nn::Tensor<T>> params, AdamOptions options);
  /// One bias-corrected update from the current gradients.
  void step();
  long steps() const { return t_; }

 private:
  std::vector<nn::Tensor<T>> params_;
  AdamOptions options_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

/// Normalizer over all 5 states of every window, after occlusion.
Normalizer fit_normalizer(const std::vector<SampleWindow>& windows, const OcclusionMask& mask);

/// Preprocessed frames at encoder input resolution (values in [0, 1]), keyed by clip,
/// frame and pooling factor. Shareable between builders, e.g. across training runs
/// on the same clips. Entries keep their clip alive. Thread safe.
class FrameCache {
 public:
  explicit FrameCache(std::size_t budget_bytes = std::size_t{1} << 30) : budget_(budget_bytes) {}
  ImageF get(const nn::ForceModel& model, const std::shared_ptr<const Clip>& clip, std::size_t frame);
  std::size_t size() const;

 private:
  struct Entry {
    std::shared_ptr<const Clip> clip;
    ImageF image;
  };
  std::size_t budget_;
  std::size_t bytes_ = 0;
  std::map<std::tuple<const Clip*, std::size_t, int>, Entry> entries_;
  mutable std::mutex mutex_;
};

/// Turns windows into model batches: augmentation, image preprocessing, occlusion,
/// normalization. Image augmentation runs on frames already pooled to the encoder
/// input size; state augmentation is exact.
class BatchBuilder {
 public:
  BatchBuilder(const nn::ForceModel& model, Normalizer normalizer, OcclusionMask mask, unsigned workers = 1,
               std::shared_ptr<FrameCache> cache = nullptr);
  /// `records` (same length as `windows`) are applied when given. Windows flagged by
  /// kinematic augmentation are left out; `kept` receives the indices that made it in.
  nn::ModelBatch build(const std::vector<const SampleWindow*>& windows,
                       const std::vector<AugmentationRecord>* records = nullptr,
                       std::vector<std::size_t>* kept = nullptr);
  const Normalizer& normalizer() const { return normalizer_; }
  const OcclusionMask& mask() const { return mask_; }

 private:
  const nn::ForceModel& model_;
  Normalizer normalizer_;
  OcclusionMask mask_;
  unsigned workers_;
  std::shared_ptr<FrameCache> cache_;
};

/// Eval-mode predictions (N) for each window.
std::vector<Vec3> predict(nn::ForceModel& model, BatchBuilder& builder, const std::vector<SampleWindow>& windows,
                          int batch_size = 32);

struct EpochStats {
  int epoch = 0;
  double train_rmse = 0.0;
  double test_rmse = 0.0;
  bool operator==(const EpochStats&) const = default;
};

struct TrainResult {
  std::vector<EpochStats> curve;
  Normalizer normalizer;
  long steps = 0;
  std::size_t skipped_windows = 0;  ///< flagged by augmentation
  std::vector<std::string> augmentation_log;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Trains in place. Deterministic for a fixed config. Throws DivergenceError when the
/// loss becomes non-finite and ConfigError on empty partitions.
TrainResult train_model(nn::ForceModel& model, const DataSplit& split, const TrainConfig& config,
                        const EpochCallback& on_epoch = {}, bool keep_augmentation_log = false,
                        std::shared_ptr<FrameCache> cache = nullptr);

/// `epoch,train_rmse,test_rmse` with a header row.
std::string loss_curve_csv(const std::vector<EpochStats>& curve);

}  // namespace forcecast
