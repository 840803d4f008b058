// Acceptance run: one PASS/FAIL line per criterion, with wall time against its budget.
//
//   forcecast_acceptance            all criteria
//   forcecast_acceptance 3 6        only criteria 3 and 6
//
// Exit status is nonzero when any selected criterion fails or overruns its budget.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "cli.hpp"
#include "fixtures.hpp"
#include "forcecast/augment.hpp"
#include "forcecast/calibration.hpp"
#include "forcecast/errors.hpp"
#include "forcecast/eval.hpp"
#include "forcecast/synth.hpp"
#include "forcecast/train.hpp"
#include "gradcheck.hpp"

namespace {

using namespace forcecast;
namespace fs = std::filesystem;
using nn::ForceModel;
using nn::ModelSpec;
using nn::Shape;
using nn::Variant;
using TensorF = nn::Tensor<float>;

std::string format(const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  return buf;
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  double budget_seconds;
  std::function<Verdict()> run;
};

// Collects failed sub-checks so a verdict can name all of them.
class Problems {
 public:
  void need(bool ok, const std::string& what) {
    if (!ok) list_.push_back(what);
  }
  bool empty() const { return list_.empty(); }
  std::string summary() const {
    std::string s;
    for (std::size_t i = 0; i < list_.size() && i < 6; ++i) s += (i ? "; " : "") + list_[i];
    if (list_.size() > 6) s += format("; ... (%zu in total)", list_.size());
    return s;
  }

 private:
  std::vector<std::string> list_;
};

const std::vector<Variant> kVariants = {Variant::kFc, Variant::kCnn, Variant::kVit, Variant::kRcnn, Variant::kRvit};

// ---------------------------------------------------------------------------
// 1. decoder dimensions, temporal length, window size

Verdict shapes() {
  Problems p;
  p.need(kWindowLength == 5, "window length is not 5");
  const int k = static_cast<int>(kStateSize);
  for (const char* size : {"desk", "tiny"}) {
    for (const Variant v : kVariants) {
      const ModelSpec s = ModelSpec::preset(v, size);
      ForceModel m(s);
      const std::string tag = to_string(v) + "/" + size;
      p.need(s.frames_per_sample() == (v == Variant::kFc ? 0 : (s.recurrent() ? 5 : 1)), tag + " frames per sample");

      std::map<std::string, Shape> shape;
      std::size_t decoder_params = 0;
      for (const auto& item : m.parameters().items()) {
        if (item.name.rfind("decoder.", 0) != 0) continue;
        shape[item.name] = item.tensor.shape();
        if (item.kind != nn::ParamKind::kBuffer) decoder_params += item.tensor.numel();
      }

      if (!s.recurrent()) {
        const std::vector<int> dims{v == Variant::kFc ? k : s.latent + k, 84, 180, 50, 3};
        std::size_t expected = 0;
        for (int i = 0; i < 4; ++i) {
          const std::string name = "decoder.mlp.fc" + std::to_string(i) + ".weight";
          p.need(shape[name] == Shape{dims[i], dims[i + 1]}, tag + " " + name);
          expected += static_cast<std::size_t>(dims[i]) * dims[i + 1] + dims[i + 1];
          if (i < 3) expected += 2u * dims[i + 1];  // batch-norm scale and shift
        }
        p.need(shape.size() == 4 + 4 + 3 * 4, tag + " unexpected decoder tensors");
        p.need(decoder_params == expected, tag + format(" decoder has %zu parameters, want %zu", decoder_params, expected));
        p.need(m.decode_features(TensorF::zeros({2, dims[0]}), false).shape() == Shape{2, 3}, tag + " decoder output");
      } else {
        const std::size_t h = s.lstm_hidden;
        std::size_t expected = 0, in = s.latent;
        for (int l = 0; l < s.lstm_layers; ++l) {
          expected += in * 4 * h + h * 4 * h + 4 * h;
          in = h;
        }
        expected += h * 3 + 3;
        p.need(decoder_params == expected, tag + format(" decoder has %zu parameters, want %zu", decoder_params, expected));
        const TensorF seq = m.make_sequence(TensorF::zeros({2, 5, s.latent}), TensorF::zeros({2, 5, k}));
        p.need(seq.shape() == Shape{2, 10, s.latent}, tag + " sequence is not 10 steps");
        p.need(m.decode_sequence(seq).shape() == Shape{2, 3}, tag + " recurrent output");
        for (const int t : {9, 11}) {
          bool rejected = false;
          try {
            m.decode_sequence(TensorF::zeros({2, t, s.latent}));
          } catch (const ShapeError&) {
            rejected = true;
          }
          p.need(rejected, tag + format(" accepts a %d-step sequence", t));
        }
      }
    }
  }
  if (!p.empty()) return {false, p.summary()};
  return {true, "5 variants x 2 sizes: decoder dims, parameter counts, 10-step sequences, 5-frame windows"};
}

// ---------------------------------------------------------------------------
// 2. gradient checks

Verdict gradients() {
  Problems p;
  double worst = 0.0;
  std::string worst_layer;
  std::size_t layers = 0, all_kinks = 0, all_checked = 0;
  for (const auto& check : testing::layer_checks()) {
    double layer_worst = 0.0;
    std::size_t kinks = 0, checked = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) layer_worst = std::max(layer_worst, check.run(seed, kinks, checked));
    p.need(layer_worst < 1e-4, check.name + format(" relative error %.2e", layer_worst));
    p.need(kinks < 0.05 * static_cast<double>(checked), check.name + format(" screened %zu of %zu", kinks, checked));
    if (layer_worst > worst) {
      worst = layer_worst;
      worst_layer = check.name;
    }
    all_kinks += kinks;
    all_checked += checked;
    ++layers;
  }
  const std::string detail = format("%zu layers x 20 instances, worst relative error %.2e (%s), %zu of %zu elements "
                                    "screened at ReLU hinges",
                                    layers, worst, worst_layer.c_str(), all_kinks, all_checked);
  if (!p.empty()) return {false, p.summary() + " | " + detail};
  return {true, detail};
}

// ---------------------------------------------------------------------------
// 3. calibration recovery

Quaternion random_orientation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Quaternion::normalized(n(rng), n(rng), n(rng), n(rng));
}

RigidTransform tool_transform(const RawState& s) { return RigidTransform::from_pose({s.ee_position, s.ee_orientation}); }

SynthConfig calibration_config(std::uint64_t seed, double duration) {
  const std::string material = seed % 4 < 2 ? "soft" : "stiff";
  SynthConfig cfg = seed % 2 ? dataset_b_config(seed, material, duration) : dataset_a_config(seed, material, duration);
  cfg.tool_mass = 0.5;
  return cfg;
}

Verdict calibration() {
  Problems p;

  double noiseless = 0.0;
  std::size_t samples = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const SynthConfig cfg = calibration_config(seed, 4.0);
    const SynthClip clip = generate_clip(cfg);
    for (std::size_t i = 0; i < clip.states.size(); ++i, ++samples) {
      const Vec3 f = calibrate_force(clip.raw_forces[i], tool_transform(clip.states[i]), cfg.calibration);
      noiseless = std::max(noiseless, (f - clip.ground_truth[i]).cwiseAbs().maxCoeff());
    }
  }
  p.need(noiseless < 1e-9, format("noiseless error %.2e", noiseless));

  // Noisy runs: G0 and T0 are re-estimated from 60 noisy no-load readings at random
  // orientations, then the noisy clip is calibrated with the estimate.
  constexpr double kSigma = 0.01;
  double worst_known = 0.0, worst_estimated = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SynthConfig cfg = calibration_config(1000 + seed, 2.0);
    cfg.noise_sigma = kSigma;
    const SynthClip clip = generate_clip(cfg);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, kSigma);
    std::vector<std::pair<RigidTransform, Vec3>> noload;
    for (int i = 0; i < 60; ++i) {
      const RigidTransform tf = RigidTransform::from_pose({Vec3::Zero(), random_orientation(rng)});
      noload.emplace_back(tf, uncalibrate_force(Vec3::Zero(), tf, cfg.calibration) + Vec3(noise(rng), noise(rng), noise(rng)));
    }
    CalibrationParams estimated = estimate_bias(noload, cfg.calibration.gravity_mode).params;
    estimated.attenuation = cfg.calibration.attenuation;

    Vec3 se_known = Vec3::Zero(), se_estimated = Vec3::Zero();
    for (std::size_t i = 0; i < clip.states.size(); ++i) {
      const RigidTransform tf = tool_transform(clip.states[i]);
      se_known += (calibrate_force(clip.raw_forces[i], tf, cfg.calibration) - clip.ground_truth[i]).cwiseAbs2();
      se_estimated += (calibrate_force(clip.raw_forces[i], tf, estimated) - clip.ground_truth[i]).cwiseAbs2();
    }
    const double n = static_cast<double>(clip.states.size());
    worst_known = std::max(worst_known, (se_known / n).cwiseSqrt().maxCoeff());
    worst_estimated = std::max(worst_estimated, (se_estimated / n).cwiseSqrt().maxCoeff());
  }
  p.need(worst_known < 0.02, format("noisy per-component RMSE %.4f N", worst_known));
  p.need(worst_estimated < 0.02, format("noisy per-component RMSE with estimated bias %.4f N", worst_estimated));

  const std::string detail = format("noiseless max error %.1e N over %zu samples; sigma 0.01 N, worst per-component "
                                    "RMSE over 100 seeds %.4f N (known bias) / %.4f N (estimated bias)",
                                    noiseless, samples, worst_known, worst_estimated);
  if (!p.empty()) return {false, p.summary() + " | " + detail};
  return {true, detail};
}

// ---------------------------------------------------------------------------
// 4. kinematic augmentation invariants

KinematicAugmentation make_aug(const SampleWindow& w, KinematicKind kind, double theta = 0.0) {
  KinematicAugmentation a;
  a.kind = kind;
  a.theta = theta;
  a.camera_extrinsic = w.clip->manifest->camera.extrinsic;
  return a;
}

// Largest pose difference (m or rad) between matching states of two windows.
double pose_gap(const SampleWindow& a, const SampleWindow& b) {
  double gap = 0.0;
  for (std::size_t k = 0; k < kWindowLength; ++k) {
    const RawState &x = a.states[k].state, &y = b.states[k].state;
    gap = std::max({gap, (x.ee_position - y.ee_position).norm(), angular_distance(x.ee_orientation, y.ee_orientation),
                    (x.haptic_position - y.haptic_position).norm(),
                    angular_distance(x.haptic_orientation, y.haptic_orientation),
                    (a.states[k].neighbor.ee_position - b.states[k].neighbor.ee_position).norm()});
  }
  return gap;
}

Verdict augmentation() {
  Problems p;
  const auto data = testing::short_suite(8, 4.0, 1);
  std::vector<SampleWindow> windows;
  for (const auto& d : data) {
    for (const auto& c : d.clips) {
      auto w = build_windows(c);
      windows.insert(windows.end(), w.begin(), w.end());
    }
  }

  std::size_t flip_windows = 0;
  double flip_gap = 0.0;
  for (const KinematicKind kind : {KinematicKind::kHorizontalFlip, KinematicKind::kVerticalFlip}) {
    for (std::size_t i = 0; i < windows.size(); i += windows.size() / 8) {
      const SampleWindow& w = windows[i];
      const KinematicChain chain = w.clip->manifest->kinematic_chain();
      const auto aug = make_aug(w, kind);
      const SampleWindow twice = apply_kinematic(aug, apply_kinematic(aug, w, chain), chain);
      const auto original = window_images(w);
      for (std::size_t k = 0; k < kWindowLength; ++k) {
        p.need(twice.images[k] == original[k], format("double %s changed frame %zu of window %zu", to_string(kind).c_str(), k, i));
      }
      flip_gap = std::max(flip_gap, pose_gap(twice, w));
      ++flip_windows;
    }
  }
  p.need(flip_gap < 1e-6, format("double flip pose error %.2e", flip_gap));

  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> theta(-kMaxRotationRad, kMaxRotationRad);
  double rotation_gap = 0.0;
  for (std::size_t i = 0; i < windows.size(); i += 5) {
    const SampleWindow& w = windows[i];
    const KinematicChain chain = w.clip->manifest->kinematic_chain();
    const double t = theta(rng);
    const SampleWindow there = apply_kinematic_states(make_aug(w, KinematicKind::kRotation, t), w, chain);
    const SampleWindow back = apply_kinematic_states(make_aug(w, KinematicKind::kRotation, -t), there, chain);
    rotation_gap = std::max(rotation_gap, pose_gap(back, w));
  }
  p.need(rotation_gap < 1e-6, format("rotation round trip pose error %.2e", rotation_gap));

  // IK re-solve: every unflagged augmented window must reproduce its transformed pose.
  std::size_t checked = 0, flagged = 0;
  double ik_position = 0.0, ik_angle = 0.0;
  for (std::size_t i = 0; checked < 600 && i < 4 * windows.size(); ++i) {
    const SampleWindow& w = windows[(i * 7) % windows.size()];
    const KinematicChain chain = w.clip->manifest->kinematic_chain();
    const auto kind = static_cast<KinematicKind>(i % 3);
    const SampleWindow out = apply_kinematic_states(make_aug(w, kind, theta(rng)), w, chain);
    if (out.flagged) {
      ++flagged;
      continue;
    }
    for (std::size_t k = 0; k < kWindowLength; ++k) {
      const RawState& s = out.states[k].state;
      const Pose fk = forward(chain, s.robot_joints);
      ik_position = std::max(ik_position, (fk.position - s.ee_position).norm());
      ik_angle = std::max(ik_angle, angular_distance(fk.orientation, s.ee_orientation));
    }
    ++checked;
  }
  p.need(checked >= 500, format("only %zu augmented windows solved", checked));
  p.need(ik_position < 1e-3 && ik_angle < 1e-3, format("FK/IK mismatch %.2e m, %.2e rad", ik_position, ik_angle));

  const std::string detail =
      format("%zu double flips: frames bit-exact, pose error %.1e; rotation round trip %.1e; IK on %zu windows "
             "(%zu flagged): %.1e m / %.1e rad",
             flip_windows, flip_gap, rotation_gap, checked, flagged, ik_position, ik_angle);
  if (!p.empty()) return {false, p.summary() + " | " + detail};
  return {true, detail};
}

// ---------------------------------------------------------------------------
// 5. mixed normalization statistics and zero padding

Verdict normalization() {
  Problems p;
  const auto data = testing::short_suite(21, 4.0, 2);
  MixOptions mix;
  mix.seed = 3;
  const DataSplit split = mix_datasets(data, mix);
  const Normalizer fitted = fit_normalizer(split.train, {});

  // Brute force over the concatenation, in extended precision, two passes.
  std::vector<const GeneralizedState*> all;
  for (const auto& w : split.train) {
    for (const auto& s : w.states) all.push_back(&s.generalized);
  }
  double mean_gap = 0.0, std_gap = 0.0;
  for (std::size_t slot = 0; slot < kStateSize; ++slot) {
    long double sum = 0.0L;
    bool constant = true;
    for (const auto* s : all) {
      sum += (*s)[slot];
      constant = constant && (*s)[slot] == (*all.front())[slot];
    }
    const long double mean = sum / all.size();
    long double ss = 0.0L;
    for (const auto* s : all) ss += ((*s)[slot] - mean) * ((*s)[slot] - mean);
    long double sd = std::sqrt(ss / all.size());
    if (constant || sd <= 1e-12L) sd = 1.0L;
    const long double expected_mean = constant ? (*all.front())[slot] : mean;
    mean_gap = std::max(mean_gap, static_cast<double>(std::abs(fitted.mean[slot] - expected_mean)));
    std_gap = std::max(std_gap, static_cast<double>(std::abs(fitted.stddev[slot] - sd)));
  }
  p.need(mean_gap <= 1e-9 && std_gap <= 1e-9, format("statistics differ by %.2e (mean) / %.2e (std)", mean_gap, std_gap));

  // Slots a dataset has no value for (missing joints, absent wrench or gripper) must be
  // exactly zero before normalization.
  std::size_t padded = 0, nonzero = 0, states = 0;
  for (const auto& d : data) {
    const StateLayout& layout = d.manifest->layout;
    auto scan = [&](const RawState& raw, const GeneralizedState& g) {
      ++states;
      const std::map<StateField, std::size_t> carried{
          {StateField::kRobotJoints, raw.robot_joints.size()},
          {StateField::kRobotJointVel, raw.robot_joints.size()},
          {StateField::kHapticJoints, raw.haptic_joints.size()},
          {StateField::kWrench, raw.wrench ? 6u : 0u},
          {StateField::kGripper, raw.gripper ? 1u : 0u}};
      for (const auto& [field, count] : carried) {
        const auto it = layout.find(field);
        if (it == layout.end()) continue;
        for (std::size_t s = it->second.begin + count; s < it->second.end; ++s) {
          ++padded;
          nonzero += g[s] != 0.0;
        }
      }
    };
    for (const auto& c : d.clips) {
      for (std::size_t i = 0; i < c->states.size(); ++i) scan(c->raw_states[i], c->states[i]);
    }
    for (const auto* part : {&split.train, &split.test}) {
      for (const auto& w : *part) {
        if (w.clip->manifest != d.manifest) continue;
        for (const auto& s : w.states) scan(s.state, s.generalized);
      }
    }
  }
  p.need(padded > 0, "no padded slots found, the padding check is vacuous");
  p.need(nonzero == 0, format("%zu padded values are not zero", nonzero));

  const std::string detail = format("%zu training states from 2 datasets: mean gap %.1e, std gap %.1e; %zu padded "
                                    "values over %zu states, all exactly zero",
                                    all.size(), mean_gap, std_gap, padded, states);
  if (!p.empty()) return {false, p.summary() + " | " + detail};
  return {true, detail};
}

// ---------------------------------------------------------------------------
// 6. peaks on an analytic sinusoid

Verdict sinusoid_peaks() {
  Problems p;
  constexpr double kRate = 30.0, kPeriod = 10.0, kDuration = 60.0;
  const std::size_t n = static_cast<std::size_t>(kRate * kDuration);
  std::size_t trials = 0, matched = 0;
  for (const double phase : {0.0, 0.4, 1.3, 2.2, 3.0, 4.5, 5.9}) {
    std::vector<double> series(n);
    for (std::size_t i = 0; i < n; ++i) series[i] = std::sin(2 * std::numbers::pi * (i / kRate) / kPeriod + phase);

    // Extrema where the argument is pi/2 + k pi, as fractional sample indices.
    std::vector<double> analytic;
    for (int k = -2; k < 20; ++k) {
      const double x = ((std::numbers::pi / 2 + k * std::numbers::pi - phase) * kPeriod / (2 * std::numbers::pi)) * kRate;
      if (x >= 1.0 && x <= static_cast<double>(n) - 2.0) analytic.push_back(x);
    }
    const auto peaks = find_peaks(series);
    ++trials;
    const std::string tag = format("phase %.1f", phase);
    p.need(peaks.size() == analytic.size(), tag + format(": %zu peaks, want %zu", peaks.size(), analytic.size()));
    for (std::size_t j = 0; j < peaks.size() && j < analytic.size(); ++j) {
      const bool near = std::abs(static_cast<double>(peaks[j]) - analytic[j]) <= 1.0;
      p.need(near, tag + format(": peak %zu at %zu, analytic %.2f", j, peaks[j], analytic[j]));
      matched += near;
    }
    for (std::size_t j = 1; j < peaks.size(); ++j) {
      p.need(peaks[j] - peaks[j - 1] >= kPeakSeparation, tag + format(": peaks %zu apart", peaks[j] - peaks[j - 1]));
    }
  }
  const std::string detail =
      format("sin(2 pi t / 10 s) at 30 Hz for 60 s, %zu phases: %zu extrema within 1 sample, separation >= %zu",
             trials, matched, kPeakSeparation);
  if (!p.empty()) return {false, p.summary() + " | " + detail};
  return {true, detail};
}

// ---------------------------------------------------------------------------
// 7. tiny recurrent model fits 200 windows

struct TargetReached {};

Verdict tiny_fit() {
  const auto suite = make_benchmark_suite(1);
  const Dataset ds = suite[0].to_dataset();
  DataSplit split;
  const auto first = build_windows(ds.clips[0]);
  for (std::size_t i = 0; i < first.size() && split.train.size() < 200; i += 2) split.train.push_back(first[i]);
  const auto second = build_windows(ds.clips[1]);
  split.test.assign(second.begin(), second.begin() + 50);

  TrainConfig config;
  config.model_size = "tiny";
  config.augment = false;
  config.batch_size = 32;
  config.max_steps = 2000;
  config.epochs = 1000000;
  config.eval_interval = 2;
  ForceModel model(build_model_spec(Variant::kRcnn, config));

  const int steps_per_epoch = static_cast<int>((split.train.size() + config.batch_size - 1) / config.batch_size);
  std::vector<EpochStats> curve;
  try {
    train_model(model, split, config, [&](const EpochStats& s) {
      curve.push_back(s);
      if (s.train_rmse < 0.05) throw TargetReached{};
    });
  } catch (const TargetReached&) {
  }
  if (curve.empty()) return {false, "no evaluation points"};
  const EpochStats& last = curve.back();
  const int steps = std::min(last.epoch * steps_per_epoch, config.max_steps);
  const std::string detail = format("rcnn/tiny, %zu windows, MSE+L1, Adam lr 2e-4: train RMSE %.4f N after %d steps "
                                    "(first evaluation %.4f N)",
                                    split.train.size(), last.train_rmse, steps, curve.front().train_rmse);
  return {last.train_rmse < 0.05 && steps <= 2000, detail};
}

// ---------------------------------------------------------------------------
// 8. recurrent decoders against their single-frame counterparts on the held-out clips

std::vector<ClipSeries> series_of(const std::vector<SampleWindow>& windows, const std::vector<Vec3>& prediction) {
  std::vector<ClipSeries> clips;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (clips.empty() || clips.back().id != windows[i].clip->id) {
      clips.emplace_back();
      clips.back().id = windows[i].clip->id;
    }
    clips.back().timestamps.push_back(windows[i].frame_times.back());
    clips.back().prediction.push_back(prediction[i]);
    clips.back().truth.push_back(windows[i].target);
  }
  return clips;
}

Verdict recurrent_advantage() {
  constexpr int kSteps = 800;
  const auto suite = make_benchmark_suite(1);
  const std::vector<Dataset> data{suite[0].to_dataset(), suite[1].to_dataset()};
  MixOptions mix;
  mix.seed = 0;
  const DataSplit split = mix_datasets(data, mix);
  auto cache = std::make_shared<FrameCache>();

  int cnn_wins = 0, vit_wins = 0;
  std::string table;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::map<Variant, double> peak;
    for (const Variant v : {Variant::kCnn, Variant::kRcnn, Variant::kVit, Variant::kRvit}) {
      TrainConfig config;
      config.model_size = "tiny";
      config.seed = seed;
      config.max_steps = kSteps;
      config.epochs = 1000000;
      config.eval_interval = 1000000;
      ForceModel model(build_model_spec(v, config));
      const TrainResult result = train_model(model, split, config, {}, false, cache);
      BatchBuilder builder(model, result.normalizer, config.occlusion, 1, cache);
      const EvalReport report = make_report(series_of(split.test, predict(model, builder, split.test)));
      peak[v] = report.peak_rmse.value_or(std::numeric_limits<double>::infinity());
    }
    cnn_wins += peak[Variant::kRcnn] < peak[Variant::kCnn];
    vit_wins += peak[Variant::kRvit] < peak[Variant::kVit];
    table += format("%sseed %llu cnn %.3f rcnn %.3f vit %.3f rvit %.3f", seed ? "; " : "",
                    static_cast<unsigned long long>(seed), peak[Variant::kCnn], peak[Variant::kRcnn],
                    peak[Variant::kVit], peak[Variant::kRvit]);
    std::printf("    criterion 8 %s\n", table.substr(table.rfind("seed")).c_str());
    std::fflush(stdout);
  }
  const std::string detail = format("peak RMSE (N), tiny models, %d steps, %zu test windows: RCNN < CNN in %d/5, "
                                    "RViT < ViT in %d/5 seeds",
                                    kSteps, split.test.size(), cnn_wins, vit_wins);
  return {cnn_wins >= 4 && vit_wins >= 4, detail};
}

// ---------------------------------------------------------------------------
// 9. latency with equal encoders

nn::ModelBatch random_batch(const ModelSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  const int s = spec.encoder_input_size(), frames = spec.frames_per_sample();
  std::vector<float> f(static_cast<std::size_t>(frames) * 3 * s * s), st(5 * kStateSize);
  for (auto& v : f) v = u(rng);
  for (auto& v : st) v = u(rng);
  nn::ModelBatch b;
  b.size = 1;
  b.frames = TensorF({frames, 3, s, s}, std::move(f));
  b.states = TensorF({1, 5, static_cast<int>(kStateSize)}, std::move(st));
  return b;
}

Verdict latency() {
  Problems p;
  std::string detail = "desk presets, batch 1:";
  const std::vector<std::pair<Variant, Variant>> pairs{{Variant::kCnn, Variant::kRcnn}, {Variant::kVit, Variant::kRvit}};
  for (const auto& [plain, recurrent] : pairs) {
    const ModelSpec a = ModelSpec::preset(plain), b = ModelSpec::preset(recurrent);
    p.need(a.cnn == b.cnn && a.vit == b.vit && a.latent == b.latent && a.image_pool == b.image_pool,
           to_string(plain) + " and " + to_string(recurrent) + " encoders differ");
    ForceModel ma(a), mb(b);
    const LatencyResult la = latency_bench(ma, random_batch(a, 1), 60, 3);
    const LatencyResult lb = latency_bench(mb, random_batch(b, 1), 60, 3);
    p.need(lb.hz < la.hz, format("%s %.1f Hz is not below %s %.1f Hz", to_string(recurrent).c_str(), lb.hz,
                                 to_string(plain).c_str(), la.hz));
    detail += format(" %s %.1f Hz vs %s %.1f Hz;", to_string(plain).c_str(), la.hz, to_string(recurrent).c_str(), lb.hz);
  }
  detail.pop_back();
  if (!p.empty()) return {false, p.summary() + " | " + detail};
  return {true, detail};
}

// ---------------------------------------------------------------------------
// 10. end-to-end determinism through the command line

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// synth -> harmonize -> train -> eval under `root`. Returns an error message or "".
std::string pipeline(const fs::path& root) {
  auto run = [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return code == 0 ? std::string() : args[0] + format(" exited %d: ", code) + err.str();
  };
  std::ofstream(root / "train.json")
      << R"({"epochs": 3, "max_steps": 30, "batch_size": 16, "seed": 5, "model": {"size": "tiny"}})";
  const std::string r = root.string();
  for (const auto& args : std::vector<std::vector<std::string>>{
           {"synth", "--out", r + "/suite", "--seed", "7", "--suite", "--duration", "4", "--clips-per-material", "1"},
           {"harmonize", "--manifest", r + "/suite/A/manifest.json", "--manifest", r + "/suite/B/manifest.json",
            "--out", r + "/mixed", "--seed", "0"},
           {"train", "--model", "rcnn", "--config", r + "/train.json", "--data", r + "/mixed", "--out",
            r + "/rcnn.ckpt"},
           {"eval", "--ckpt", r + "/rcnn.ckpt", "--data", r + "/mixed", "--report", r + "/report", "--latency-n",
            "0"}}) {
    if (auto e = run(args); !e.empty()) return e;
  }
  return {};
}

Verdict determinism() {
  const fs::path base = fs::temp_directory_path() / format("forcecast_acceptance_%d", static_cast<int>(getpid()));
  fs::remove_all(base);
  Problems p;
  std::vector<std::map<std::string, std::string>> artifacts;
  for (const char* name : {"one", "two"}) {
    const fs::path root = base / name;
    fs::create_directories(root);
    const std::string error = pipeline(root);
    p.need(error.empty(), std::string(name) + ": " + error);
    if (!error.empty()) break;
    artifacts.push_back({{"loss curve", slurp(root / "rcnn.ckpt.loss.csv")},
                         {"checkpoint", slurp(root / "rcnn.ckpt")},
                         {"normalizer", slurp(root / "rcnn.ckpt.normalizer.json")},
                         {"report", slurp(root / "report/report.json")},
                         {"predictions", slurp(root / "report/force.csv")}});
  }
  std::string detail;
  if (artifacts.size() == 2) {
    for (const auto& [what, bytes] : artifacts[0]) {
      p.need(!bytes.empty(), what + " missing");
      p.need(bytes == artifacts[1].at(what), what + " differs between runs");
    }
    const std::string& curve = artifacts[0].at("loss curve");
    detail = format("two seeded runs (rcnn/tiny, 30 steps): %zu-byte checkpoints identical, loss curves identical "
                    "(%zu rows), reports identical",
                    artifacts[0].at("checkpoint").size(),
                    static_cast<std::size_t>(std::count(curve.begin(), curve.end(), '\n')) - 1);
  }
  fs::remove_all(base);
  if (!p.empty()) return {false, p.summary()};
  return {true, detail};
}

std::vector<Criterion> criteria() {
  return {
      {1, "decoder dims, temporal length 10, 5-frame windows", 1.0, shapes},
      {2, "central finite-difference gradient checks", 60.0, gradients},
      {3, "force calibration recovery", 10.0, calibration},
      {4, "kinematic augmentation invariants", 60.0, augmentation},
      {5, "mixed normalization statistics and zero padding", 10.0, normalization},
      {6, "sinusoid peak detection", 1.0, sinusoid_peaks},
      {7, "tiny RCNN fits 200 windows", 300.0, tiny_fit},
      {8, "recurrent models beat single-frame models on peak RMSE", 1800.0, recurrent_advantage},
      {9, "recurrent models run at lower Hz", 120.0, latency},
      {10, "seeded pipeline is reproducible", 300.0, determinism},
  };
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int run = 0, failed = 0;
  for (const auto& c : criteria()) {
    if (!only.empty() && !only.count(c.id)) continue;
    ++run;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = elapsed <= c.budget_seconds;
    const bool pass = v.pass && in_time;
    failed += !pass;
    std::printf("%s criterion %d: %s (%.2f s of %.0f s%s)\n    %s\n", pass ? "PASS" : "FAIL", c.id, c.title.c_str(),
                elapsed, c.budget_seconds, in_time ? "" : ", over budget", v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", run - failed, run);
  return failed == 0 ? 0 : 1;
}
