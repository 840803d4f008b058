#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "forcecast/nn/ops.hpp"
#include "forcecast/nn/tensor.hpp"

namespace forcecast::nn {

/// Seeded source for initializers. Uses its own transforms of the raw engine
/// output so draws do not depend on the standard library's distributions.
class InitRng {
 public:
  explicit InitRng(std::uint64_t seed) : engine_(seed) {}
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Normal with stddev `sigma`, redrawn beyond two sigma.
  double truncated_normal(double sigma);

 private:
  std::mt19937_64 engine_;
};

/// L1 applies to kWeight only; buffers are not trained.
enum class ParamKind { kWeight, kBias, kNorm, kEmbedding, kBuffer };

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
  ParamKind kind = ParamKind::kWeight;
};

template <typename T>
class ParamRegistry {
 public:
  /// Throws ConfigError on a duplicate name.
  Tensor<T> add(const std::string& name, Shape shape, ParamKind kind, std::vector<T> values);

  const std::vector<NamedTensor<T>>& items() const { return items_; }
  std::vector<NamedTensor<T>>& items() { return items_; }
  std::vector<Tensor<T>> trainable() const;
  std::size_t trainable_count() const;
  void zero_grad();

 private:
  std::vector<NamedTensor<T>> items_;
};

template <typename T>
std::vector<T> kaiming_uniform(InitRng& rng, std::size_t count, int fan_in);

/// Dense layer, weight [in, out]: y = x W + b.
template <typename T>
struct Linear {
  Linear() = default;
  Linear(ParamRegistry<T>& reg, const std::string& name, int in, int out, InitRng& rng, bool with_bias = true);
  Tensor<T> forward(const Tensor<T>& x) const;

  int in = 0, out = 0;
  Tensor<T> weight, bias;
};

template <typename T>
struct Conv2d {
  Conv2d() = default;
  Conv2d(ParamRegistry<T>& reg, const std::string& name, int in_channels, int out_channels, int kernel, int stride,
         int padding, InitRng& rng, bool with_bias = false);
  Tensor<T> forward(const Tensor<T>& x) const;

  int stride = 1, padding = 0;
  Tensor<T> weight, bias;
};

template <typename T>
struct BatchNorm {
  BatchNorm() = default;
  BatchNorm(ParamRegistry<T>& reg, const std::string& name, int channels);
  Tensor<T> forward(const Tensor<T>& x, bool training);

  Tensor<T> gamma, beta, running_mean, running_var;
};

template <typename T>
struct LayerNorm {
  LayerNorm() = default;
  LayerNorm(ParamRegistry<T>& reg, const std::string& name, int dim);
  Tensor<T> forward(const Tensor<T>& x) const;

  Tensor<T> gamma, beta;
};

template <typename T>
struct MultiHeadAttention {
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamRegistry<T>& reg, const std::string& name, int dim, int heads, InitRng& rng);
  /// x [B, tokens, dim]. When `attention` is given it receives the [B * heads, tokens, tokens] weights.
  Tensor<T> forward(const Tensor<T>& x, Tensor<T>* attention = nullptr) const;

  int dim = 0, heads = 1;
  Linear<T> query, key, value, output;
};

/// Pre-norm block: x + attn(ln(x)), then x + mlp(ln(x)).
template <typename T>
struct TransformerBlock {
  TransformerBlock() = default;
  TransformerBlock(ParamRegistry<T>& reg, const std::string& name, int dim, int heads, int mlp_dim, InitRng& rng);
  Tensor<T> forward(const Tensor<T>& x, Tensor<T>* attention = nullptr) const;

  LayerNorm<T> norm1, norm2;
  MultiHeadAttention<T> attention;
  Linear<T> fc1, fc2;
};

/// [B, C, H, W] -> [B, (H/p)(W/p), dim]. Throws ShapeError when H or W is not divisible by p.
template <typename T>
struct PatchEmbed {
  PatchEmbed() = default;
  PatchEmbed(ParamRegistry<T>& reg, const std::string& name, int channels, int patch, int dim, InitRng& rng);
  Tensor<T> forward(const Tensor<T>& images) const;

  int channels = 3, patch = 16;
  Linear<T> projection;
};

/// Gate order i, f, g, o in the packed [*, 4H] weights.
template <typename T>
struct LstmCell {
  LstmCell() = default;
  LstmCell(ParamRegistry<T>& reg, const std::string& name, int in, int hidden, InitRng& rng);
  /// Returns (h', c').
  std::pair<Tensor<T>, Tensor<T>> step(const Tensor<T>& x, const Tensor<T>& h, const Tensor<T>& c) const;

  int in = 0, hidden = 0;
  Tensor<T> w_ih, w_hh, bias;
};

template <typename T>
struct Lstm {
  Lstm() = default;
  Lstm(ParamRegistry<T>& reg, const std::string& name, int in, int hidden, int layers, InitRng& rng);
  /// seq [B, steps, in] -> last hidden state of the top layer [B, hidden].
  Tensor<T> forward(const Tensor<T>& seq) const;

  std::vector<LstmCell<T>> cells;
};

/// relu(bn(conv3x3(relu(bn(conv3x3 s(x))))) + shortcut(x)); the shortcut is a
/// strided 1x1 conv + BN when the shape changes, identity otherwise.
template <typename T>
struct ResidualBlock {
  ResidualBlock() = default;
  ResidualBlock(ParamRegistry<T>& reg, const std::string& name, int in_channels, int out_channels, int stride,
                InitRng& rng);
  Tensor<T> forward(const Tensor<T>& x, bool training);

  Conv2d<T> conv1, conv2, projection;
  BatchNorm<T> bn1, bn2, projection_bn;
  bool has_projection = false;
};

/// Linear -> BN -> ReLU between layers, plain Linear at the end.
template <typename T>
struct MlpDecoder {
  MlpDecoder() = default;
  MlpDecoder(ParamRegistry<T>& reg, const std::string& name, int in, const std::vector<int>& channels, InitRng& rng);
  Tensor<T> forward(const Tensor<T>& x, bool training);

  int in = 0;
  std::vector<Linear<T>> layers;
  std::vector<BatchNorm<T>> norms;
};

}  // namespace forcecast::nn
