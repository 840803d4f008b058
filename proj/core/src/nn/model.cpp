#include "forcecast/nn/model.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

#include <json.hpp>

#include "forcecast/dataset.hpp"
#include "forcecast/errors.hpp"

namespace forcecast::nn {

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::kFc:
      return "fc";
    case Variant::kCnn:
      return "cnn";
    case Variant::kVit:
      return "vit";
    case Variant::kRcnn:
      return "rcnn";
    case Variant::kRvit:
      return "rvit";
  }
  return "fc";
}

Variant parse_variant(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (const Variant v : {Variant::kFc, Variant::kCnn, Variant::kVit, Variant::kRcnn, Variant::kRvit}) {
    if (to_string(v) == t) return v;
  }
  throw ConfigError("unknown model '" + text + "' (expected fc, cnn, vit, rcnn or rvit)");
}

int ModelSpec::frames_per_sample() const {
  if (variant == Variant::kFc) return 0;
  return recurrent() ? static_cast<int>(kWindowLength) : 1;
}

int ModelSpec::encoder_input_size() const { return kModelImageSize / std::max(image_pool, 1); }

void ModelSpec::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("model." + field + ": " + why);
  };
  if (image_pool < 1 || kModelImageSize % image_pool != 0) fail("image_pool", "must divide 256");
  if (latent < 1) fail("latent", "must be positive");
  if (!recurrent()) {
    if (decoder.empty() || decoder.back() != 3) fail("decoder", "channel list must end in 3");
    for (const int c : decoder) {
      if (c < 1) fail("decoder", "channels must be positive");
    }
  } else {
    if (latent < static_cast<int>(kStateSize)) fail("latent", "recurrent models need latent >= 54 for state padding");
    if (lstm_hidden < 1) fail("lstm_hidden", "must be positive");
    if (lstm_layers < 1) fail("lstm_layers", "must be positive");
  }
  if (uses_cnn()) {
    if (cnn.channels.empty()) fail("cnn.channels", "needs at least one block");
    int side = encoder_input_size();
    for (const int c : cnn.channels) {
      if (c < 1) fail("cnn.channels", "must be positive");
      side = (side + 1) / 2;
    }
    if (side < 1) fail("cnn.channels", "too many stride-2 blocks for the input size");
  }
  if (uses_vit()) {
    if (vit.patch < 1 || encoder_input_size() % vit.patch != 0) {
      fail("vit.patch", "must divide the pooled image size " + std::to_string(encoder_input_size()));
    }
    if (vit.depth < 1) fail("vit.depth", "must be positive");
    if (vit.heads < 1 || vit.embed % vit.heads != 0) fail("vit.heads", "must divide vit.embed");
    if (vit.mlp_dim < 1) fail("vit.mlp_dim", "must be positive");
  }
}

std::string ModelSpec::to_json() const {
  nlohmann::json j;
  j["variant"] = to_string(variant);
  j["image_pool"] = image_pool;
  j["cnn"] = {{"channels", cnn.channels}};
  j["vit"] = {{"patch", vit.patch}, {"depth", vit.depth}, {"heads", vit.heads}, {"embed", vit.embed},
              {"mlp_dim", vit.mlp_dim}};
  j["decoder"] = decoder;
  j["lstm_hidden"] = lstm_hidden;
  j["lstm_layers"] = lstm_layers;
  j["latent"] = latent;
  j["init_seed"] = init_seed;
  return j.dump();
}

ModelSpec ModelSpec::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("model spec must be a JSON object");
  auto reject_unknown = [](const nlohmann::json& obj, const std::string& prefix,
                           std::initializer_list<const char*> known) {
    if (!obj.is_object()) throw ConfigError("model spec field '" + prefix + "' must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (std::none_of(known.begin(), known.end(), [&](const char* k) { return it.key() == k; })) {
        throw ConfigError("unknown model spec field '" + prefix + it.key() + "'");
      }
    }
  };
  reject_unknown(j, "", {"variant", "image_pool", "cnn", "vit", "decoder", "lstm_hidden", "lstm_layers", "latent",
                         "init_seed"});
  if (j.contains("cnn")) reject_unknown(j["cnn"], "cnn.", {"channels"});
  if (j.contains("vit")) reject_unknown(j["vit"], "vit.", {"patch", "depth", "heads", "embed", "mlp_dim"});
  ModelSpec s;
  try {
    if (j.contains("variant")) s.variant = parse_variant(j["variant"].get<std::string>());
    s.image_pool = j.value("image_pool", s.image_pool);
    if (j.contains("cnn")) s.cnn.channels = j["cnn"].value("channels", s.cnn.channels);
    if (j.contains("vit")) {
      const auto& v = j["vit"];
      s.vit.patch = v.value("patch", s.vit.patch);
      s.vit.depth = v.value("depth", s.vit.depth);
      s.vit.heads = v.value("heads", s.vit.heads);
      s.vit.embed = v.value("embed", s.vit.embed);
      s.vit.mlp_dim = v.value("mlp_dim", s.vit.mlp_dim);
    }
    s.decoder = j.value("decoder", s.decoder);
    s.lstm_hidden = j.value("lstm_hidden", s.lstm_hidden);
    s.lstm_layers = j.value("lstm_layers", s.lstm_layers);
    s.latent = j.value("latent", s.latent);
    s.init_seed = j.value("init_seed", s.init_seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model spec has a field of the wrong type: ") + e.what());
  }
  s.validate();
  return s;
}

ModelSpec ModelSpec::preset(Variant variant, const std::string& size) {
  ModelSpec s;
  s.variant = variant;
  if (size == "desk") return s;
  if (size != "tiny") throw ConfigError("unknown model size '" + size + "' (expected desk or tiny)");
  s.image_pool = 8;
  s.cnn.channels = {8, 16, 32};
  s.vit = {8, 1, 2, 32, 64};
  s.lstm_hidden = 32;
  s.latent = 64;
  return s;
}

struct ForceModel::Impl {
  ModelSpec spec;
  ParamRegistry<float> params;
  std::vector<ResidualBlock<float>> blocks;
  Linear<float> cnn_head;
  PatchEmbed<float> patch_embed;
  Tensor<float> cls_token, positions;
  std::vector<TransformerBlock<float>> transformer;
  LayerNorm<float> final_norm;
  std::optional<Linear<float>> vit_head;
  std::optional<MlpDecoder<float>> mlp;
  std::optional<Lstm<float>> lstm;
  Linear<float> lstm_head;
};

ForceModel::ForceModel(const ModelSpec& spec) : impl_(std::make_unique<Impl>()) {
  spec.validate();
  Impl& m = *impl_;
  m.spec = spec;
  InitRng rng(spec.init_seed);
  auto& reg = m.params;

  if (spec.uses_cnn()) {
    int in = 3;
    for (std::size_t i = 0; i < spec.cnn.channels.size(); ++i) {
      m.blocks.emplace_back(reg, "encoder.block" + std::to_string(i), in, spec.cnn.channels[i], 2, rng);
      in = spec.cnn.channels[i];
    }
    m.cnn_head = Linear<float>(reg, "encoder.head", in, spec.latent, rng);
  }
  if (spec.uses_vit()) {
    const auto& v = spec.vit;
    const int grid = spec.encoder_input_size() / v.patch;
    const int tokens = grid * grid + 1;
    m.patch_embed = PatchEmbed<float>(reg, "encoder.patch_embed", 3, v.patch, v.embed, rng);
    std::vector<float> cls(static_cast<std::size_t>(v.embed)), pos(static_cast<std::size_t>(tokens) * v.embed);
    for (auto& x : cls) x = static_cast<float>(rng.truncated_normal(0.02));
    for (auto& x : pos) x = static_cast<float>(rng.truncated_normal(0.02));
    m.cls_token = reg.add("encoder.cls_token", {1, v.embed}, ParamKind::kEmbedding, std::move(cls));
    m.positions = reg.add("encoder.positions", {tokens, v.embed}, ParamKind::kEmbedding, std::move(pos));
    for (int i = 0; i < v.depth; ++i) {
      m.transformer.emplace_back(reg, "encoder.block" + std::to_string(i), v.embed, v.heads, v.mlp_dim, rng);
    }
    m.final_norm = LayerNorm<float>(reg, "encoder.norm", v.embed);
    if (v.embed != spec.latent) m.vit_head.emplace(reg, "encoder.head", v.embed, spec.latent, rng);
  }
  if (spec.recurrent()) {
    m.lstm.emplace(reg, "decoder.lstm", spec.latent, spec.lstm_hidden, spec.lstm_layers, rng);
    m.lstm_head = Linear<float>(reg, "decoder.head", spec.lstm_hidden, 3, rng);
  } else {
    const int in = static_cast<int>(kStateSize) + (spec.variant == Variant::kFc ? 0 : spec.latent);
    m.mlp.emplace(reg, "decoder.mlp", in, spec.decoder, rng);
  }
}

ForceModel::~ForceModel() = default;

const ModelSpec& ForceModel::spec() const { return impl_->spec; }
ParamRegistry<float>& ForceModel::parameters() { return impl_->params; }
const ParamRegistry<float>& ForceModel::parameters() const { return impl_->params; }

ImageF ForceModel::prepare_frame(const ImageF& frame) const {
  if (frame.width != kModelImageSize || frame.height != kModelImageSize || frame.channels != 3) {
    throw ShapeError("model frames must be 3x256x256, got " + std::to_string(frame.channels) + "x" +
                     std::to_string(frame.height) + "x" + std::to_string(frame.width));
  }
  return average_pool(frame, impl_->spec.image_pool);
}

Tensor<float> ForceModel::encode(const Tensor<float>& frames, bool training) {
  Impl& m = *impl_;
  const int s = m.spec.encoder_input_size();
  if (frames.rank() != 4 || frames.dim(1) != 3 || frames.dim(2) != s || frames.dim(3) != s) {
    throw ShapeError("encoder expects [N, 3, " + std::to_string(s) + ", " + std::to_string(s) + "], got " +
                     shape_string(frames.shape()));
  }
  if (m.spec.uses_cnn()) {
    Tensor<float> h = frames;
    for (auto& block : m.blocks) h = block.forward(h, training);
    return m.cnn_head.forward(global_avg_pool(h));
  }
  if (m.spec.uses_vit()) {
    const int n = frames.dim(0), e = m.spec.vit.embed;
    const Tensor<float> patches = m.patch_embed.forward(frames);
    const Tensor<float> cls = add(Tensor<float>::zeros({n, 1, e}), m.cls_token);
    Tensor<float> h = add(concat<float>({cls, patches}, 1), m.positions);
    for (const auto& block : m.transformer) h = block.forward(h);
    h = reshape(slice(m.final_norm.forward(h), 1, 0, 1), {n, e});
    return m.vit_head ? m.vit_head->forward(h) : h;
  }
  throw ShapeError("the FC model has no image encoder");
}

Tensor<float> ForceModel::make_sequence(const Tensor<float>& latents, const Tensor<float>& states) const {
  const int latent = impl_->spec.latent;
  const int w = static_cast<int>(kWindowLength);
  if (latents.rank() != 3 || latents.dim(1) != w || latents.dim(2) != latent) {
    throw ShapeError("sequence latents must be [B, 5, " + std::to_string(latent) + "], got " +
                     shape_string(latents.shape()));
  }
  if (states.rank() != 3 || states.dim(0) != latents.dim(0) || states.dim(1) != w ||
      states.dim(2) != static_cast<int>(kStateSize)) {
    throw ShapeError("sequence states must be [B, 5, 54], got " + shape_string(states.shape()));
  }
  const int b = latents.dim(0);
  Tensor<float> padded = states;
  if (latent > static_cast<int>(kStateSize)) {
    padded = concat<float>({states, Tensor<float>::zeros({b, w, latent - static_cast<int>(kStateSize)})}, 2);
  }
  return concat<float>({latents, padded}, 1);
}

Tensor<float> ForceModel::decode_sequence(const Tensor<float>& sequence) const {
  const Impl& m = *impl_;
  if (!m.lstm) throw ShapeError("model '" + to_string(m.spec.variant) + "' has no recurrent decoder");
  if (sequence.rank() != 3 || sequence.dim(1) != 2 * static_cast<int>(kWindowLength)) {
    throw ShapeError("recurrent decoder expects temporal length 10, got " + shape_string(sequence.shape()));
  }
  return m.lstm_head.forward(m.lstm->forward(sequence));
}

Tensor<float> ForceModel::decode_features(const Tensor<float>& features, bool training) {
  if (!impl_->mlp) throw ShapeError("model '" + to_string(impl_->spec.variant) + "' has no MLP decoder");
  return impl_->mlp->forward(features, training);
}

Tensor<float> ForceModel::forward(const ModelBatch& batch, bool training) {
  const ModelSpec& spec = impl_->spec;
  const int b = batch.size;
  const int w = static_cast<int>(kWindowLength);
  if (!batch.states.defined() || batch.states.rank() != 3 || batch.states.dim(0) != b || batch.states.dim(1) != w ||
      batch.states.dim(2) != static_cast<int>(kStateSize)) {
    throw ShapeError("batch states must be [" + std::to_string(b) + ", 5, 54]");
  }
  const int fps = spec.frames_per_sample();
  if (fps > 0 && (!batch.frames.defined() || batch.frames.dim(0) != b * fps)) {
    throw ShapeError("model '" + to_string(spec.variant) + "' needs " + std::to_string(fps) +
                     " frame(s) per sample");
  }
  const Tensor<float> last_state = reshape(slice(batch.states, 1, w - 1, w), {b, static_cast<int>(kStateSize)});
  switch (spec.variant) {
    case Variant::kFc:
      return decode_features(last_state, training);
    case Variant::kCnn:
    case Variant::kVit:
      return decode_features(concat<float>({encode(batch.frames, training), last_state}, 1), training);
    case Variant::kRcnn:
    case Variant::kRvit: {
      const Tensor<float> latents = reshape(encode(batch.frames, training), {b, w, spec.latent});
      return decode_sequence(make_sequence(latents, batch.states));
    }
  }
  throw ShapeError("unknown model variant");
}

}  // namespace forcecast::nn
