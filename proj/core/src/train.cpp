#include "forcecast/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "forcecast/errors.hpp"
#include "forcecast/eval.hpp"
#include "forcecast/nn/ops.hpp"

namespace forcecast {
namespace {

std::uint64_t window_seed(std::uint64_t seed, std::uint64_t epoch, std::uint64_t index) {
  std::uint64_t z = seed ^ (0x9E3779B97F4A7C15ULL * (epoch + 1)) ^ (0xD1B54A32D192ED03ULL * (index + 1));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

template <typename F>
void parallel_for(std::size_t n, unsigned workers, F&& body) {
  const unsigned threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = next++; i < n; i = next++) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

std::string to_string(OcclusionGroup group) {
  switch (group) {
    case OcclusionGroup::kFS:
      return "FS";
    case OcclusionGroup::kRP:
      return "RP";
    case OcclusionGroup::kRQ:
      return "RQ";
    case OcclusionGroup::kRC:
      return "RC";
  }
  return "FS";
}

OcclusionGroup parse_occlusion_group(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (const auto g : {OcclusionGroup::kFS, OcclusionGroup::kRP, OcclusionGroup::kRQ, OcclusionGroup::kRC}) {
    if (to_string(g) == t) return g;
  }
  throw ConfigError("unknown occlusion group '" + text + "' (expected FS, RP, RQ or RC)");
}

SlotRange occlusion_range(OcclusionGroup group) {
  switch (group) {
    case OcclusionGroup::kFS:
      return {47, 53};
    case OcclusionGroup::kRP:
      return {0, 3};
    case OcclusionGroup::kRQ:
      return {13, 20};
    case OcclusionGroup::kRC:
      return {27, 47};
  }
  return {0, 0};
}

bool OcclusionMask::covers(std::size_t slot) const {
  return std::any_of(groups.begin(), groups.end(), [&](OcclusionGroup g) { return occlusion_range(g).contains(slot); });
}

GeneralizedState occlude(const GeneralizedState& state, const OcclusionMask& mask) {
  GeneralizedState out = state;
  for (const auto g : mask.groups) {
    const SlotRange r = occlusion_range(g);
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(r.begin), out.begin() + static_cast<std::ptrdiff_t>(r.end), 0.0);
  }
  return out;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) { throw ConfigError(field + ": " + why); };
  if (epochs < 1) fail("epochs", "must be at least 1");
  if (!(learning_rate > 0.0)) fail("learning_rate", "must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("betas", "beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("betas", "beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) fail("epsilon", "must be positive");
  if (!(l1 >= 0.0)) fail("l1", "must be non-negative");
  if (batch_size < 1) fail("batch_size", "must be at least 1");
  if (max_steps < 0) fail("max_steps", "must be non-negative");
  if (eval_interval < 1) fail("eval_interval", "must be at least 1");
  if (!(augmentation.kinematic >= 0.0 && augmentation.kinematic <= 1.0)) {
    fail("augmentation.kinematic", "must be a probability");
  }
  if (!(augmentation.photometric >= 0.0 && augmentation.photometric <= 1.0)) {
    fail("augmentation.photometric", "must be a probability");
  }
  if (model_size != "desk" && model_size != "tiny") fail("model.size", "must be desk or tiny");
}

std::string TrainConfig::to_json() const {
  nlohmann::json j;
  j["epochs"] = epochs;
  j["learning_rate"] = learning_rate;
  j["betas"] = {beta1, beta2};
  j["epsilon"] = epsilon;
  j["l1"] = l1;
  j["batch_size"] = batch_size;
  j["seed"] = seed;
  j["mode"] = to_string(mode);
  j["train_structure"] = train_structure;
  j["test_structure"] = test_structure;
  std::vector<std::string> occ;
  for (const auto g : occlusion.groups) occ.push_back(to_string(g));
  j["occlusion"] = occ;
  j["augmentation"] = {{"enabled", augment},
                       {"kinematic", augmentation.kinematic},
                       {"photometric", augmentation.photometric}};
  j["max_steps"] = max_steps;
  j["eval_interval"] = eval_interval;
  nlohmann::json model = nlohmann::json::parse(model_overrides);
  model["size"] = model_size;
  j["model"] = model;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("training config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  TrainConfig c;
  std::string key;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      key = it.key();
      const auto& v = it.value();
      if (key == "epochs") {
        c.epochs = v.get<int>();
      } else if (key == "learning_rate") {
        c.learning_rate = v.get<double>();
      } else if (key == "betas") {
        if (!v.is_array() || v.size() != 2) throw ConfigError("betas: expected [beta1, beta2]");
        c.beta1 = v[0].get<double>();
        c.beta2 = v[1].get<double>();
      } else if (key == "epsilon") {
        c.epsilon = v.get<double>();
      } else if (key == "l1") {
        c.l1 = v.get<double>();
      } else if (key == "batch_size") {
        c.batch_size = v.get<int>();
      } else if (key == "seed") {
        c.seed = v.get<std::uint64_t>();
      } else if (key == "mode") {
        c.mode = parse_training_mode(v.get<std::string>());
      } else if (key == "train_structure") {
        c.train_structure = v.get<std::string>();
      } else if (key == "test_structure") {
        c.test_structure = v.get<std::string>();
      } else if (key == "occlusion") {
        for (const auto& g : v) c.occlusion.groups.insert(parse_occlusion_group(g.get<std::string>()));
      } else if (key == "augmentation") {
        for (auto a = v.begin(); a != v.end(); ++a) {
          key = "augmentation." + a.key();
          if (a.key() == "enabled") {
            c.augment = a.value().get<bool>();
          } else if (a.key() == "kinematic") {
            c.augmentation.kinematic = a.value().get<double>();
          } else if (a.key() == "photometric") {
            c.augmentation.photometric = a.value().get<double>();
          } else {
            throw ConfigError("unknown training config field '" + key + "'");
          }
        }
      } else if (key == "max_steps") {
        c.max_steps = v.get<int>();
      } else if (key == "eval_interval") {
        c.eval_interval = v.get<int>();
      } else if (key == "model") {
        if (!v.is_object()) throw ConfigError("model: expected an object");
        nlohmann::json overrides = v;
        if (overrides.contains("size")) {
          c.model_size = overrides["size"].get<std::string>();
          overrides.erase("size");
        }
        c.model_overrides = overrides.dump();
        // Surface unknown or ill-typed model fields now rather than at model construction.
        nlohmann::json probe = nlohmann::json::parse(nn::ModelSpec::preset(nn::Variant::kCnn, c.model_size).to_json());
        probe.merge_patch(overrides);
        nn::ModelSpec::from_json(probe.dump());
      } else {
        throw ConfigError("unknown training config field '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(key + ": wrong type (" + e.what() + ")");
  }
  c.validate();
  return c;
}

nn::ModelSpec build_model_spec(nn::Variant variant, const TrainConfig& config) {
  nlohmann::json base = nlohmann::json::parse(nn::ModelSpec::preset(variant, config.model_size).to_json());
  const nlohmann::json overrides = nlohmann::json::parse(config.model_overrides);
  if (overrides.contains("variant")) throw ConfigError("model.variant: set the model with --model, not the config");
  base["init_seed"] = config.seed;  // an explicit model.init_seed still wins
  base.merge_patch(overrides);
  return nn::ModelSpec::from_json(base.dump());
}

template <typename T>
nn::Tensor<T> mse_loss(const nn::Tensor<T>& prediction, const nn::Tensor<T>& target) {
  if (prediction.shape() != target.shape()) {
    throw ShapeError("loss: prediction " + nn::shape_string(prediction.shape()) + " vs target " +
                     nn::shape_string(target.shape()));
  }
  return nn::mean(nn::square(nn::sub(prediction, target)));
}

template <typename T>
nn::Tensor<T> l1_penalty(const nn::ParamRegistry<T>& params) {
  std::vector<nn::Tensor<T>> sums;
  for (const auto& item : params.items()) {
    if (item.kind == nn::ParamKind::kWeight) sums.push_back(nn::sum(nn::abs(item.tensor)));
  }
  if (sums.empty()) return nn::Tensor<T>::scalar(T(0));
  nn::Tensor<T> total = sums[0];
  for (std::size_t i = 1; i < sums.size(); ++i) total = nn::add(total, sums[i]);
  return total;
}

template <typename T>
nn::Tensor<T> training_loss(const nn::Tensor<T>& prediction, const nn::Tensor<T>& target,
                            const nn::ParamRegistry<T>& params, double l1) {
  nn::Tensor<T> loss = mse_loss(prediction, target);
  if (l1 > 0.0) loss = nn::add(loss, nn::scale(l1_penalty(params), static_cast<T>(l1)));
  return loss;
}

template <typename T>
Adam<T>::Adam(std::vector<nn::Tensor<T>> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

template <typename T>
void Adam<T>::step() {
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    if (!p.has_grad()) continue;
    auto& values = p.data();
    const auto& g = p.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      const double mhat = m[i] / c1, vhat = v[i] / c2;
      values[i] = static_cast<T>(values[i] - options_.learning_rate * mhat / (std::sqrt(vhat) + options_.epsilon));
    }
  }
}

Normalizer fit_normalizer(const std::vector<SampleWindow>& windows, const OcclusionMask& mask) {
  std::vector<GeneralizedState> states;
  states.reserve(windows.size() * kWindowLength);
  for (const auto& w : windows) {
    for (const auto& s : w.states) states.push_back(occlude(s.generalized, mask));
  }
  return Normalizer::fit(states);
}

ImageF FrameCache::get(const nn::ForceModel& model, const std::shared_ptr<const Clip>& clip, std::size_t frame) {
  const auto key = std::make_tuple(clip.get(), frame, model.spec().image_pool);
  {
    std::lock_guard lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second.image;
  }
  ImageF prepared = model.prepare_frame(crop_zoom_resize(clip->frames.at(frame).source.load(), clip->manifest->image_zoom));
  const std::size_t bytes = prepared.data.size() * sizeof(float);
  std::lock_guard lock(mutex_);
  if (bytes_ + bytes > budget_) entries_.clear(), bytes_ = 0;
  if (entries_.emplace(key, Entry{clip, prepared}).second) bytes_ += bytes;
  return prepared;
}

std::size_t FrameCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

BatchBuilder::BatchBuilder(const nn::ForceModel& model, Normalizer normalizer, OcclusionMask mask, unsigned workers,
                           std::shared_ptr<FrameCache> cache)
    : model_(model),
      normalizer_(std::move(normalizer)),
      mask_(std::move(mask)),
      workers_(workers),
      cache_(cache ? std::move(cache) : std::make_shared<FrameCache>()) {}

nn::ModelBatch BatchBuilder::build(const std::vector<const SampleWindow*>& windows,
                                   const std::vector<AugmentationRecord>* records, std::vector<std::size_t>* kept) {
  if (records && records->size() != windows.size()) throw ConfigError("one augmentation record per window expected");
  const int fps = model_.spec().frames_per_sample();
  const int side = model_.spec().encoder_input_size();
  const std::size_t frame_size = static_cast<std::size_t>(3) * side * side;
  const std::size_t first_frame = kWindowLength - static_cast<std::size_t>(std::max(fps, 1));
  const std::size_t n = windows.size();

  auto record = [&](std::size_t i) -> const AugmentationRecord* {
    if (!records) return nullptr;
    const AugmentationRecord& r = (*records)[i];
    return r.kinematic || r.photometric ? &r : nullptr;
  };
  std::vector<SampleWindow> moved(n);
  std::vector<char> has_moved(n, 0);
  std::vector<ImageF> images(n * static_cast<std::size_t>(fps));
  parallel_for(n, workers_, [&](std::size_t i) {
    const SampleWindow& w = *windows[i];
    const AugmentationRecord* r = record(i);
    if (r && r->kinematic) {
      moved[i] = apply_kinematic_states({r->kind, r->theta, w.clip->manifest->camera.extrinsic}, w,
                                        w.clip->manifest->kinematic_chain());
      has_moved[i] = 1;
      if (moved[i].flagged) return;
    }
    for (int f = 0; f < fps; ++f) {
      ImageF img = cache_->get(model_, w.clip, w.frame_indices[first_frame + static_cast<std::size_t>(f)]);
      if (r) img = augment_image(*r, img);
      images[i * static_cast<std::size_t>(fps) + static_cast<std::size_t>(f)] = normalize_imagenet(std::move(img));
    }
  });

  std::vector<std::size_t> included;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(has_moved[i] && moved[i].flagged)) included.push_back(i);
  }
  const int b = static_cast<int>(included.size());
  std::vector<float> states(static_cast<std::size_t>(b) * kWindowLength * kStateSize);
  std::vector<float> frames(static_cast<std::size_t>(b) * fps * frame_size);
  std::vector<float> targets(static_cast<std::size_t>(b) * 3);
  for (std::size_t row = 0; row < included.size(); ++row) {
    const std::size_t i = included[row];
    const SampleWindow& w = has_moved[i] ? moved[i] : *windows[i];
    for (int a = 0; a < 3; ++a) targets[row * 3 + static_cast<std::size_t>(a)] = static_cast<float>(w.target[a]);
    for (std::size_t k = 0; k < kWindowLength; ++k) {
      const GeneralizedState s = normalizer_.apply(occlude(w.states[k].generalized, mask_));
      float* dst = states.data() + (row * kWindowLength + k) * kStateSize;
      for (std::size_t j = 0; j < kStateSize; ++j) dst[j] = static_cast<float>(s[j]);
    }
    for (int f = 0; f < fps; ++f) {
      const ImageF& img = images[i * static_cast<std::size_t>(fps) + static_cast<std::size_t>(f)];
      std::copy(img.data.begin(), img.data.end(),
                frames.begin() + static_cast<std::ptrdiff_t>((row * static_cast<std::size_t>(fps) + f) * frame_size));
    }
  }
  nn::ModelBatch batch;
  batch.size = b;
  batch.states = nn::Tensor<float>({b, static_cast<int>(kWindowLength), static_cast<int>(kStateSize)}, std::move(states));
  if (fps > 0) batch.frames = nn::Tensor<float>({b * fps, 3, side, side}, std::move(frames));
  batch.targets = nn::Tensor<float>({b, 3}, std::move(targets));
  if (kept) *kept = std::move(included);
  return batch;
}

std::vector<Vec3> predict(nn::ForceModel& model, BatchBuilder& builder, const std::vector<SampleWindow>& windows,
                          int batch_size) {
  nn::NoGradGuard guard;
  std::vector<Vec3> out;
  out.reserve(windows.size());
  for (std::size_t start = 0; start < windows.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(windows.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<const SampleWindow*> chunk;
    for (std::size_t i = start; i < end; ++i) chunk.push_back(&windows[i]);
    const nn::Tensor<float> y = model.forward(builder.build(chunk), false);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      out.emplace_back(y.data()[3 * i], y.data()[3 * i + 1], y.data()[3 * i + 2]);
    }
  }
  return out;
}

TrainResult train_model(nn::ForceModel& model, const DataSplit& split, const TrainConfig& config,
                        const EpochCallback& on_epoch, bool keep_augmentation_log,
                        std::shared_ptr<FrameCache> cache) {
  config.validate();
  if (split.train.empty()) throw ConfigError("empty train partition: no training windows");
  if (split.test.empty()) throw ConfigError("empty test partition: no test windows");

  TrainResult result;
  result.normalizer = fit_normalizer(split.train, config.occlusion);
  BatchBuilder builder(model, result.normalizer, config.occlusion, config.workers, std::move(cache));
  Adam<float> adam(model.parameters().trainable(),
                   {config.learning_rate, config.beta1, config.beta2, config.epsilon});

  std::vector<Vec3> train_targets, test_targets;
  for (const auto& w : split.train) train_targets.push_back(w.target);
  for (const auto& w : split.test) test_targets.push_back(w.target);

  const std::size_t n = split.train.size();
  bool stop = false;
  for (int epoch = 1; epoch <= config.epochs && !stop; ++epoch) {
    const auto order = epoch_order(n, config.seed, static_cast<std::size_t>(epoch));
    for (std::size_t start = 0; start < n && !stop; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(config.batch_size));
      std::vector<const SampleWindow*> chunk;
      std::vector<AugmentationRecord> records;
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t idx = order[i];
        AugmentationRecord rec;
        if (config.augment) {
          std::mt19937_64 rng(window_seed(config.seed, static_cast<std::uint64_t>(epoch), idx));
          rec = sample_augmentation(rng, config.augmentation);
        }
        chunk.push_back(&split.train[idx]);
        records.push_back(rec);
      }
      std::vector<std::size_t> kept;
      const nn::ModelBatch batch = builder.build(chunk, config.augment ? &records : nullptr, &kept);
      result.skipped_windows += chunk.size() - kept.size();
      if (kept.empty()) continue;
      if (keep_augmentation_log) {
        for (const auto i : kept) result.augmentation_log.push_back(records[i].to_json());
      }

      model.parameters().zero_grad();
      const nn::Tensor<float> loss = training_loss(model.forward(batch, true), batch.targets, model.parameters(), config.l1);
      if (!std::isfinite(loss.item())) {
        throw DivergenceError("training diverged: loss is " + std::to_string(loss.item()) + " at epoch " +
                              std::to_string(epoch) + ", step " + std::to_string(adam.steps() + 1));
      }
      loss.backward();
      adam.step();
      if (config.max_steps > 0 && adam.steps() >= config.max_steps) stop = true;
    }

    const bool last = stop || epoch == config.epochs;
    if (epoch % config.eval_interval == 0 || last) {
      EpochStats stats;
      stats.epoch = epoch;
      stats.train_rmse = rmse(predict(model, builder, split.train), train_targets);
      stats.test_rmse = rmse(predict(model, builder, split.test), test_targets);
      if (!std::isfinite(stats.train_rmse) || !std::isfinite(stats.test_rmse)) {
        throw DivergenceError("training diverged: non-finite RMSE after epoch " + std::to_string(epoch));
      }
      result.curve.push_back(stats);
      if (on_epoch) on_epoch(stats);
    }
  }
  result.steps = adam.steps();
  return result;
}

std::string loss_curve_csv(const std::vector<EpochStats>& curve) {
  std::ostringstream out;
  out << "epoch,train_rmse,test_rmse\n";
  char buf[96];
  for (const auto& s : curve) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", s.epoch, s.train_rmse, s.test_rmse);
    out << buf;
  }
  return out.str();
}

template nn::Tensor<float> mse_loss(const nn::Tensor<float>&, const nn::Tensor<float>&);
template nn::Tensor<double> mse_loss(const nn::Tensor<double>&, const nn::Tensor<double>&);
template nn::Tensor<float> l1_penalty(const nn::ParamRegistry<float>&);
template nn::Tensor<double> l1_penalty(const nn::ParamRegistry<double>&);
template nn::Tensor<float> training_loss(const nn::Tensor<float>&, const nn::Tensor<float>&,
                                         const nn::ParamRegistry<float>&, double);
template nn::Tensor<double> training_loss(const nn::Tensor<double>&, const nn::Tensor<double>&,
                                          const nn::ParamRegistry<double>&, double);
template class Adam<float>;
template class Adam<double>;

}  // namespace forcecast
