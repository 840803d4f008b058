#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "forcecast/image.hpp"
#include "forcecast/nn/layers.hpp"
#include "forcecast/state.hpp"

namespace forcecast::nn {

enum class Variant { kFc, kCnn, kVit, kRcnn, kRvit };

std::string to_string(Variant variant);
/// Accepts fc, cnn, vit, rcnn, rvit (any case). Throws ConfigError otherwise.
Variant parse_variant(const std::string& text);

struct CnnConfig {
  std::vector<int> channels{16, 32, 64, 128};  ///< one stride-2 residual block per entry
  bool operator==(const CnnConfig&) const = default;
};

struct VitConfig {
  int patch = 16;
  int depth = 4;
  int heads = 4;
  int embed = 128;
  int mlp_dim = 256;
  bool operator==(const VitConfig&) const = default;
};

struct ModelSpec {
  Variant variant = Variant::kFc;
  /// Parameter-free average pooling applied to each 256x256 frame before the encoder.
  int image_pool = 1;
  CnnConfig cnn;
  VitConfig vit;
  std::vector<int> decoder{84, 180, 50, 3};
  int lstm_hidden = 128;
  int lstm_layers = 2;
  int latent = 128;
  std::uint64_t init_seed = 0;

  bool recurrent() const { return variant == Variant::kRcnn || variant == Variant::kRvit; }
  bool uses_cnn() const { return variant == Variant::kCnn || variant == Variant::kRcnn; }
  bool uses_vit() const { return variant == Variant::kVit || variant == Variant::kRvit; }
  /// Frames consumed per sample: 0 (FC), 1 (CNN/ViT) or 5 (recurrent).
  int frames_per_sample() const;
  /// Side of the square encoder input after pooling.
  int encoder_input_size() const;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  std::string to_json() const;
  static ModelSpec from_json(const std::string& text);

  /// "desk" keeps the defaults; "tiny" shrinks every part for quick CPU runs.
  static ModelSpec preset(Variant variant, const std::string& size = "desk");

  bool operator==(const ModelSpec&) const = default;
};

/// Inputs for a batch of windows.
struct ModelBatch {
  int size = 0;
  /// [size * frames_per_sample, 3, s, s], frames of a sample contiguous and in time order.
  Tensor<float> frames;
  /// [size, 5, 54] normalized generalized states.
  Tensor<float> states;
  /// [size, 3] force labels (N), filled by batch builders; unused by forward.
  Tensor<float> targets;
};

/// Encoder + decoder for one variant. Single-threaded; distinct instances are independent.
class ForceModel {
 public:
  explicit ForceModel(const ModelSpec& spec);
  ~ForceModel();
  ForceModel(const ForceModel&) = delete;
  ForceModel& operator=(const ForceModel&) = delete;

  const ModelSpec& spec() const;
  ParamRegistry<float>& parameters();
  const ParamRegistry<float>& parameters() const;

  /// Pools a preprocessed 256x256 frame to the encoder input size.
  ImageF prepare_frame(const ImageF& frame) const;

  /// [N, 3, s, s] -> [N, latent]. Throws ShapeError for other shapes or FC models.
  Tensor<float> encode(const Tensor<float>& frames, bool training);
  /// latents [B, 5, latent] and states [B, 5, 54] -> [B, 10, latent] (states zero padded).
  Tensor<float> make_sequence(const Tensor<float>& latents, const Tensor<float>& states) const;
  /// [B, 10, latent] -> [B, 3] through the stacked LSTM and the dense head.
  Tensor<float> decode_sequence(const Tensor<float>& sequence) const;
  /// [B, in] -> [B, 3] through the MLP decoder.
  Tensor<float> decode_features(const Tensor<float>& features, bool training);

  /// [B, 3] force prediction.
  Tensor<float> forward(const ModelBatch& batch, bool training);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace forcecast::nn
