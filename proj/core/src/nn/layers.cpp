#include "forcecast/nn/layers.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "forcecast/errors.hpp"

namespace forcecast::nn {

double InitRng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double InitRng::normal() {
  // Box-Muller; u1 kept away from zero.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

double InitRng::truncated_normal(double sigma) {
  for (;;) {
    const double z = normal();
    if (std::abs(z) <= 2.0) return sigma * z;
  }
}

template <typename T>
Tensor<T> ParamRegistry<T>::add(const std::string& name, Shape shape, ParamKind kind, std::vector<T> values) {
  for (const auto& item : items_) {
    if (item.name == name) throw ConfigError("duplicate parameter name '" + name + "'");
  }
  Tensor<T> t(std::move(shape), std::move(values), kind != ParamKind::kBuffer);
  items_.push_back({name, t, kind});
  return t;
}

template <typename T>
std::vector<Tensor<T>> ParamRegistry<T>::trainable() const {
  std::vector<Tensor<T>> out;
  for (const auto& item : items_) {
    if (item.kind != ParamKind::kBuffer) out.push_back(item.tensor);
  }
  return out;
}

template <typename T>
std::size_t ParamRegistry<T>::trainable_count() const {
  std::size_t n = 0;
  for (const auto& item : items_) {
    if (item.kind != ParamKind::kBuffer) n += item.tensor.numel();
  }
  return n;
}

template <typename T>
void ParamRegistry<T>::zero_grad() {
  for (auto& item : items_) {
    if (item.kind != ParamKind::kBuffer) item.tensor.zero_grad();
  }
}

template <typename T>
std::vector<T> kaiming_uniform(InitRng& rng, std::size_t count, int fan_in) {
  const double bound = std::sqrt(6.0 / std::max(fan_in, 1));
  std::vector<T> v(count);
  for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
  return v;
}

namespace {

template <typename T>
std::vector<T> zeros(std::size_t n) {
  return std::vector<T>(n, T(0));
}

// [hidden, 4 * hidden] made of four orthogonal hidden x hidden blocks side by side.
template <typename T>
std::vector<T> orthogonal_blocks(InitRng& rng, int hidden) {
  const int h = hidden;
  std::vector<T> out(static_cast<std::size_t>(h) * 4 * h);
  for (int block = 0; block < 4; ++block) {
    Eigen::MatrixXd a(h, h);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < h; ++j) a(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().template triangularView<Eigen::Upper>();
    for (int j = 0; j < h; ++j) {
      if (r(j, j) < 0) q.col(j) *= -1.0;
    }
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < h; ++j) out[static_cast<std::size_t>(i) * 4 * h + block * h + j] = static_cast<T>(q(i, j));
  }
  return out;
}

}  // namespace

template <typename T>
Linear<T>::Linear(ParamRegistry<T>& reg, const std::string& name, int in_, int out_, InitRng& rng, bool with_bias)
    : in(in_), out(out_) {
  if (in < 1 || out < 1) throw ConfigError("layer '" + name + "' needs positive dimensions");
  weight = reg.add(name + ".weight", {in, out}, ParamKind::kWeight,
                   kaiming_uniform<T>(rng, static_cast<std::size_t>(in) * out, in));
  if (with_bias) bias = reg.add(name + ".bias", {out}, ParamKind::kBias, zeros<T>(static_cast<std::size_t>(out)));
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) const {
  if (x.rank() < 1 || x.dim(-1) != in) {
    throw ShapeError("linear layer expects last dimension " + std::to_string(in) + ", got " + shape_string(x.shape()));
  }
  Tensor<T> y = matmul(x, weight);
  return bias.defined() ? add(y, bias) : y;
}

template <typename T>
Conv2d<T>::Conv2d(ParamRegistry<T>& reg, const std::string& name, int in_channels, int out_channels, int kernel,
                  int stride_, int padding_, InitRng& rng, bool with_bias)
    : stride(stride_), padding(padding_) {
  const int fan_in = in_channels * kernel * kernel;
  weight = reg.add(name + ".weight", {out_channels, in_channels, kernel, kernel}, ParamKind::kWeight,
                   kaiming_uniform<T>(rng, static_cast<std::size_t>(out_channels) * fan_in, fan_in));
  if (with_bias) {
    bias = reg.add(name + ".bias", {out_channels}, ParamKind::kBias, zeros<T>(static_cast<std::size_t>(out_channels)));
  }
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) const {
  return conv2d(x, weight, bias, stride, padding);
}

template <typename T>
BatchNorm<T>::BatchNorm(ParamRegistry<T>& reg, const std::string& name, int channels) {
  const auto n = static_cast<std::size_t>(channels);
  gamma = reg.add(name + ".gamma", {channels}, ParamKind::kNorm, std::vector<T>(n, T(1)));
  beta = reg.add(name + ".beta", {channels}, ParamKind::kNorm, zeros<T>(n));
  running_mean = reg.add(name + ".running_mean", {channels}, ParamKind::kBuffer, zeros<T>(n));
  running_var = reg.add(name + ".running_var", {channels}, ParamKind::kBuffer, std::vector<T>(n, T(1)));
}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, bool training) {
  return batch_norm(x, gamma, beta, running_mean, running_var, training);
}

template <typename T>
LayerNorm<T>::LayerNorm(ParamRegistry<T>& reg, const std::string& name, int dim) {
  const auto n = static_cast<std::size_t>(dim);
  gamma = reg.add(name + ".gamma", {dim}, ParamKind::kNorm, std::vector<T>(n, T(1)));
  beta = reg.add(name + ".beta", {dim}, ParamKind::kNorm, zeros<T>(n));
}

template <typename T>
Tensor<T> LayerNorm<T>::forward(const Tensor<T>& x) const {
  return layer_norm(x, gamma, beta);
}

template <typename T>
MultiHeadAttention<T>::MultiHeadAttention(ParamRegistry<T>& reg, const std::string& name, int dim_, int heads_,
                                          InitRng& rng)
    : dim(dim_), heads(heads_) {
  if (heads < 1 || dim % heads != 0) {
    throw ConfigError("attention dim " + std::to_string(dim) + " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  query = Linear<T>(reg, name + ".query", dim, dim, rng);
  key = Linear<T>(reg, name + ".key", dim, dim, rng);
  value = Linear<T>(reg, name + ".value", dim, dim, rng);
  output = Linear<T>(reg, name + ".output", dim, dim, rng);
}

template <typename T>
Tensor<T> MultiHeadAttention<T>::forward(const Tensor<T>& x, Tensor<T>* attention) const {
  if (x.rank() != 3 || x.dim(2) != dim) {
    throw ShapeError("attention expects [B, tokens, " + std::to_string(dim) + "], got " + shape_string(x.shape()));
  }
  const int b = x.dim(0), n = x.dim(1), hd = dim / heads;
  auto split_heads = [&](const Tensor<T>& t) {
    return reshape(permute(reshape(t, {b, n, heads, hd}), {0, 2, 1, 3}), {b * heads, n, hd});
  };
  const Tensor<T> q = split_heads(query.forward(x));
  const Tensor<T> k = split_heads(key.forward(x));
  const Tensor<T> v = split_heads(value.forward(x));
  const Tensor<T> weights = softmax(scale(bmm(q, k, true), static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)))));
  if (attention) *attention = weights;
  const Tensor<T> mixed = reshape(permute(reshape(bmm(weights, v), {b, heads, n, hd}), {0, 2, 1, 3}), {b, n, dim});
  return output.forward(mixed);
}

template <typename T>
TransformerBlock<T>::TransformerBlock(ParamRegistry<T>& reg, const std::string& name, int dim, int heads, int mlp_dim,
                                      InitRng& rng)
    : norm1(reg, name + ".norm1", dim),
      norm2(reg, name + ".norm2", dim),
      attention(reg, name + ".attention", dim, heads, rng),
      fc1(reg, name + ".fc1", dim, mlp_dim, rng),
      fc2(reg, name + ".fc2", mlp_dim, dim, rng) {}

template <typename T>
Tensor<T> TransformerBlock<T>::forward(const Tensor<T>& x, Tensor<T>* attn) const {
  const Tensor<T> h = add(x, attention.forward(norm1.forward(x), attn));
  return add(h, fc2.forward(gelu(fc1.forward(norm2.forward(h)))));
}

template <typename T>
PatchEmbed<T>::PatchEmbed(ParamRegistry<T>& reg, const std::string& name, int channels_, int patch_, int dim,
                          InitRng& rng)
    : channels(channels_), patch(patch_), projection(reg, name + ".projection", channels_ * patch_ * patch_, dim, rng) {
  if (patch < 1) throw ConfigError("patch size must be positive");
}

template <typename T>
Tensor<T> PatchEmbed<T>::forward(const Tensor<T>& images) const {
  if (images.rank() != 4 || images.dim(1) != channels) {
    throw ShapeError("patch embedding expects [B, " + std::to_string(channels) + ", H, W], got " +
                     shape_string(images.shape()));
  }
  const int b = images.dim(0), h = images.dim(2), w = images.dim(3);
  if (h % patch != 0 || w % patch != 0) {
    throw ShapeError("image " + std::to_string(h) + "x" + std::to_string(w) + " is not divisible by patch size " +
                     std::to_string(patch));
  }
  const int gh = h / patch, gw = w / patch;
  const Tensor<T> grid = permute(reshape(images, {b, channels, gh, patch, gw, patch}), {0, 2, 4, 1, 3, 5});
  return projection.forward(reshape(grid, {b, gh * gw, channels * patch * patch}));
}

template <typename T>
LstmCell<T>::LstmCell(ParamRegistry<T>& reg, const std::string& name, int in_, int hidden_, InitRng& rng)
    : in(in_), hidden(hidden_) {
  const auto h4 = static_cast<std::size_t>(4 * hidden);
  w_ih = reg.add(name + ".w_ih", {in, 4 * hidden}, ParamKind::kWeight,
                 kaiming_uniform<T>(rng, static_cast<std::size_t>(in) * h4, in));
  w_hh = reg.add(name + ".w_hh", {hidden, 4 * hidden}, ParamKind::kWeight, orthogonal_blocks<T>(rng, hidden));
  bias = reg.add(name + ".bias", {4 * hidden}, ParamKind::kBias, zeros<T>(h4));
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> LstmCell<T>::step(const Tensor<T>& x, const Tensor<T>& h, const Tensor<T>& c) const {
  const Tensor<T> gates = add(add(matmul(x, w_ih), matmul(h, w_hh)), bias);
  const int hh = hidden;
  const Tensor<T> i = sigmoid(slice(gates, 1, 0, hh));
  const Tensor<T> f = sigmoid(slice(gates, 1, hh, 2 * hh));
  const Tensor<T> g = tanh(slice(gates, 1, 2 * hh, 3 * hh));
  const Tensor<T> o = sigmoid(slice(gates, 1, 3 * hh, 4 * hh));
  const Tensor<T> c_next = add(mul(f, c), mul(i, g));
  return {mul(o, tanh(c_next)), c_next};
}

template <typename T>
Lstm<T>::Lstm(ParamRegistry<T>& reg, const std::string& name, int in, int hidden, int layers, InitRng& rng) {
  if (layers < 1) throw ConfigError("LSTM needs at least one layer");
  for (int l = 0; l < layers; ++l) {
    cells.emplace_back(reg, name + ".layer" + std::to_string(l), l == 0 ? in : hidden, hidden, rng);
  }
}

template <typename T>
Tensor<T> Lstm<T>::forward(const Tensor<T>& seq) const {
  if (seq.rank() != 3 || seq.dim(2) != cells.front().in) {
    throw ShapeError("LSTM expects [B, steps, " + std::to_string(cells.front().in) + "], got " +
                     shape_string(seq.shape()));
  }
  const int b = seq.dim(0), steps = seq.dim(1);
  std::vector<Tensor<T>> inputs;
  for (int t = 0; t < steps; ++t) inputs.push_back(reshape(slice(seq, 1, t, t + 1), {b, seq.dim(2)}));
  Tensor<T> last;
  for (const auto& cell : cells) {
    Tensor<T> h = Tensor<T>::zeros({b, cell.hidden});
    Tensor<T> c = Tensor<T>::zeros({b, cell.hidden});
    std::vector<Tensor<T>> outputs;
    for (const auto& x : inputs) {
      std::tie(h, c) = cell.step(x, h, c);
      outputs.push_back(h);
    }
    inputs = std::move(outputs);
    last = h;
  }
  return last;
}

template <typename T>
ResidualBlock<T>::ResidualBlock(ParamRegistry<T>& reg, const std::string& name, int in_channels, int out_channels,
                                int stride, InitRng& rng)
    : conv1(reg, name + ".conv1", in_channels, out_channels, 3, stride, 1, rng),
      conv2(reg, name + ".conv2", out_channels, out_channels, 3, 1, 1, rng),
      bn1(reg, name + ".bn1", out_channels),
      bn2(reg, name + ".bn2", out_channels),
      has_projection(stride != 1 || in_channels != out_channels) {
  if (has_projection) {
    projection = Conv2d<T>(reg, name + ".projection", in_channels, out_channels, 1, stride, 0, rng);
    projection_bn = BatchNorm<T>(reg, name + ".projection_bn", out_channels);
  }
}

template <typename T>
Tensor<T> ResidualBlock<T>::forward(const Tensor<T>& x, bool training) {
  const Tensor<T> residual = bn2.forward(conv2.forward(relu(bn1.forward(conv1.forward(x), training))), training);
  const Tensor<T> shortcut = has_projection ? projection_bn.forward(projection.forward(x), training) : x;
  return relu(add(residual, shortcut));
}

template <typename T>
MlpDecoder<T>::MlpDecoder(ParamRegistry<T>& reg, const std::string& name, int in_, const std::vector<int>& channels,
                          InitRng& rng)
    : in(in_) {
  if (channels.empty()) throw ConfigError("decoder needs at least one layer");
  int width = in;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const std::string layer = name + ".fc" + std::to_string(i);
    layers.emplace_back(reg, layer, width, channels[i], rng);
    if (i + 1 < channels.size()) norms.emplace_back(reg, name + ".bn" + std::to_string(i), channels[i]);
    width = channels[i];
  }
}

template <typename T>
Tensor<T> MlpDecoder<T>::forward(const Tensor<T>& x, bool training) {
  if (x.rank() != 2 || x.dim(1) != in) {
    throw ShapeError("decoder expects [B, " + std::to_string(in) + "], got " + shape_string(x.shape()));
  }
  Tensor<T> h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward(h);
    if (i < norms.size()) h = relu(norms[i].forward(h, training));
  }
  return h;
}

#define FORCECAST_INSTANTIATE_LAYERS(T)                                 \
  template class ParamRegistry<T>;                                      \
  template std::vector<T> kaiming_uniform<T>(InitRng&, std::size_t, int); \
  template struct Linear<T>;                                            \
  template struct Conv2d<T>;                                            \
  template struct BatchNorm<T>;                                         \
  template struct LayerNorm<T>;                                         \
  template struct MultiHeadAttention<T>;                                \
  template struct TransformerBlock<T>;                                  \
  template struct PatchEmbed<T>;                                        \
  template struct LstmCell<T>;                                          \
  template struct Lstm<T>;                                              \
  template struct ResidualBlock<T>;                                     \
  template struct MlpDecoder<T>;

FORCECAST_INSTANTIATE_LAYERS(float)
FORCECAST_INSTANTIATE_LAYERS(double)

}  // namespace forcecast::nn
