#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>

#include "forcecast/dataset.hpp"
#include "forcecast/errors.hpp"
#include "forcecast/eval.hpp"
#include "forcecast/nn/checkpoint.hpp"
#include "forcecast/synth.hpp"
#include "forcecast/train.hpp"

namespace forcecast::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt(double v, const char* spec = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

unsigned default_workers() {
  const char* env = std::getenv("FORCECAST_WORKERS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1 || n > 1024) throw ConfigError(std::string("FORCECAST_WORKERS: invalid value '") + env + "'");
  return static_cast<unsigned>(n);
}

/// Output paths must not exist unless --overwrite is given, in which case they are removed.
void claim_output(const fs::path& path, bool overwrite, const std::string& flag) {
  if (!fs::exists(path)) return;
  if (!overwrite) throw ConfigError(flag + ": '" + path.string() + "' exists (pass --overwrite to replace it)");
  fs::remove_all(path);
}

void require_file(const fs::path& path, const std::string& flag) {
  if (!fs::is_regular_file(path)) throw ConfigError(flag + ": no such file '" + path.string() + "'");
}

void require_dir(const fs::path& path, const std::string& flag) {
  if (!fs::is_directory(path)) throw ConfigError(flag + ": no such directory '" + path.string() + "'");
}

/// Manifests behind a data directory: a harmonized directory, a single dataset,
/// or a suite directory with one dataset per subdirectory.
std::vector<fs::path> resolve_manifests(const fs::path& dir) {
  if (fs::is_regular_file(dir / "harmonized.json")) {
    const json j = json::parse(read_text_file(dir / "harmonized.json"));
    std::vector<fs::path> out;
    for (const auto& p : j.at("manifests")) out.emplace_back(p.get<std::string>());
    return out;
  }
  if (fs::is_regular_file(dir / "manifest.json")) return {dir / "manifest.json"};
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::is_regular_file(entry.path() / "manifest.json")) {
      out.push_back(entry.path() / "manifest.json");
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw DataError("--data: no harmonized.json or manifest.json under '" + dir.string() + "'");
  return out;
}

std::vector<Dataset> load_all(const std::vector<fs::path>& manifests, unsigned workers) {
  std::vector<Dataset> out;
  for (const auto& m : manifests) out.push_back(load_dataset(load_manifest(m), workers));
  return out;
}

MixOptions mix_options(const TrainConfig& c) {
  MixOptions o;
  o.mode = c.mode;
  o.seed = c.seed;
  o.train_structure = c.train_structure;
  o.test_structure = c.test_structure;
  return o;
}

std::vector<std::string> clip_ids(const std::vector<std::shared_ptr<const Clip>>& clips) {
  std::vector<std::string> ids;
  for (const auto& c : clips) ids.push_back(c->id);
  return ids;
}

std::string states_csv(const Clip& clip) {
  std::ostringstream os;
  os << "timestamp";
  for (std::size_t s = 0; s < kStateSize; ++s) os << ",s" << s;
  os << '\n';
  for (std::size_t i = 0; i < clip.states.size(); ++i) {
    os << fmt(clip.raw_states[i].timestamp);
    for (const double v : clip.states[i]) os << ',' << fmt(v);
    os << '\n';
  }
  return os.str();
}

/// Test-clip predictions in window order, one series per clip.
std::vector<ClipSeries> predict_series(nn::ForceModel& model, BatchBuilder& builder,
                                       const std::vector<SampleWindow>& windows, int batch_size) {
  const std::vector<Vec3> pred = predict(model, builder, windows, batch_size);
  std::vector<ClipSeries> out;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (out.empty() || out.back().id != windows[i].clip->id) {
      out.push_back({});
      out.back().id = windows[i].clip->id;
    }
    out.back().timestamps.push_back(windows[i].frame_times.back());
    out.back().prediction.push_back(pred[i]);
    out.back().truth.push_back(windows[i].target);
  }
  return out;
}

/// One-window batch for latency runs: a real test window when available, else zeros.
nn::ModelBatch latency_batch(const nn::ForceModel& model, BatchBuilder* builder, const std::vector<SampleWindow>& windows) {
  if (builder != nullptr && !windows.empty()) return builder->build({&windows.front()});
  const nn::ModelSpec& spec = model.spec();
  nn::ModelBatch b;
  b.size = 1;
  const int fps = spec.frames_per_sample();
  const int side = kModelImageSize / spec.image_pool;
  if (fps > 0) b.frames = nn::Tensor<float>::zeros({fps, 3, side, side});
  b.states = nn::Tensor<float>::zeros({1, static_cast<int>(kWindowLength), static_cast<int>(kStateSize)});
  b.targets = nn::Tensor<float>::zeros({1, 3});
  return b;
}

struct Common {
  bool overwrite = false;
  unsigned workers = 1;
};

int cmd_synth(std::ostream& out, const Common& common, const fs::path& dir, std::uint64_t seed, bool suite,
              const SuiteOptions& options) {
  claim_output(dir, common.overwrite, "--out");
  const auto datasets = make_benchmark_suite(seed, options);
  if (suite) {
    for (const auto& ds : datasets) {
      write_dataset(ds, dir / ds.manifest.name, common.workers);
      out << "wrote dataset " << ds.manifest.name << " (" << ds.clips.size() << " clips) to "
          << (dir / ds.manifest.name).string() << '\n';
    }
  } else {
    write_dataset(datasets[0], dir, common.workers);
    out << "wrote dataset " << datasets[0].manifest.name << " (" << datasets[0].clips.size() << " clips) to "
        << dir.string() << '\n';
  }
  return 0;
}

int cmd_harmonize(std::ostream& out, const Common& common, const std::vector<fs::path>& manifests,
                  const fs::path& dir, const MixOptions& mix) {
  for (const auto& m : manifests) require_file(m, "--manifest");
  claim_output(dir, common.overwrite, "--out");
  std::vector<Dataset> datasets;
  for (const auto& m : manifests) datasets.push_back(load_dataset(load_manifest(m), common.workers));
  const DataSplit split = mix_datasets(datasets, mix);
  const Normalizer normalizer = fit_normalizer(split.train, {});

  fs::create_directories(dir);
  json h;
  h["manifests"] = json::array();
  for (const auto& m : manifests) h["manifests"].push_back(fs::absolute(m).lexically_normal().string());
  h["mode"] = to_string(mix.mode);
  h["seed"] = mix.seed;
  h["train_clips"] = clip_ids(split.train_clips);
  h["test_clips"] = clip_ids(split.test_clips);
  h["train_windows"] = split.train.size();
  h["test_windows"] = split.test.size();
  write_text_file(dir / "harmonized.json", h.dump(2) + "\n");
  write_text_file(dir / "normalizer.json", normalizer.to_json());
  for (const auto& ds : datasets) {
    for (const auto& clip : ds.clips) {
      const fs::path path = dir / "states" / (clip->id + ".csv");
      fs::create_directories(path.parent_path());
      write_text_file(path, states_csv(*clip));
    }
  }
  out << "harmonized " << manifests.size() << " datasets: " << split.train.size() << " train windows, "
      << split.test.size() << " test windows\n";
  return 0;
}

int cmd_train(std::ostream& out, const Common& common, const std::string& model_name, const fs::path& config_path,
              const fs::path& data, const fs::path& ckpt, std::optional<std::uint64_t> seed) {
  const nn::Variant variant = nn::parse_variant(model_name);
  require_file(config_path, "--config");
  require_dir(data, "--data");
  TrainConfig config = TrainConfig::from_json(read_text_file(config_path));
  if (seed) config.seed = *seed;
  config.workers = common.workers;
  config.validate();
  const fs::path loss_path = ckpt.string() + ".loss.csv";
  const fs::path norm_path = ckpt.string() + ".normalizer.json";
  for (const auto& p : {ckpt, loss_path, norm_path}) claim_output(p, common.overwrite, "--out");

  const auto datasets = load_all(resolve_manifests(data), common.workers);
  const DataSplit split = mix_datasets(datasets, mix_options(config));
  nn::ForceModel model(build_model_spec(variant, config));
  out << "training " << model_name << " on " << split.train.size() << " windows, testing on " << split.test.size()
      << '\n';
  const TrainResult result = train_model(model, split, config, [&](const EpochStats& s) {
    out << "epoch " << s.epoch << " train_rmse " << fmt(s.train_rmse, "%.5f") << " test_rmse "
        << fmt(s.test_rmse, "%.5f") << '\n';
  });

  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  nn::save_checkpoint(ckpt, nn::make_checkpoint(model, result.normalizer, config.to_json()));
  write_text_file(loss_path, loss_curve_csv(result.curve));
  write_text_file(norm_path, result.normalizer.to_json());
  out << "steps " << result.steps << ", skipped windows " << result.skipped_windows << "\ncheckpoint "
      << ckpt.string() << '\n';
  return 0;
}

int cmd_eval(std::ostream& out, const Common& common, const fs::path& ckpt_path, const fs::path& data,
             const fs::path& report_dir, std::size_t latency_n, const std::string& axes) {
  require_file(ckpt_path, "--ckpt");
  require_dir(data, "--data");
  EvalOptions options;
  options.peak_axes = {false, false, false};
  for (const char c : axes) {
    if (c < 'x' || c > 'z') throw ConfigError("--peak-axes: expected letters from 'xyz', got '" + axes + "'");
    options.peak_axes[c - 'x'] = true;
  }
  claim_output(report_dir, common.overwrite, "--report");

  const nn::Checkpoint ckpt = nn::load_checkpoint(ckpt_path);
  auto model = nn::instantiate(ckpt);
  TrainConfig config = TrainConfig::from_json(ckpt.train_config);
  const auto datasets = load_all(resolve_manifests(data), common.workers);
  const DataSplit split = mix_datasets(datasets, mix_options(config));
  BatchBuilder builder(*model, ckpt.normalizer, config.occlusion, common.workers);
  EvalReport report = make_report(predict_series(*model, builder, split.test, config.batch_size), options);
  if (latency_n > 0) report.latency = latency_bench(*model, latency_batch(*model, &builder, split.test), latency_n);

  fs::create_directories(report_dir);
  write_text_file(report_dir / "report.json", report.to_json());
  write_text_file(report_dir / "force.csv", report.force_csv());
  write_text_file(report_dir / "rmse.csv", report.rmse_csv());
  out << "rmse " << fmt(report.rmse_total, "%.5f") << " N (x " << fmt(report.rmse_axis.x(), "%.5f") << ", y "
      << fmt(report.rmse_axis.y(), "%.5f") << ", z " << fmt(report.rmse_axis.z(), "%.5f") << ")\n"
      << "relative error " << fmt(report.relative_error, "%.3f") << " %\n"
      << "peak rmse " << (report.peak_rmse ? fmt(*report.peak_rmse, "%.5f") + " N" : std::string("n/a")) << '\n';
  if (report.latency) out << "latency " << fmt(report.latency->mean_seconds, "%.6f") << " s (" << fmt(report.latency->hz, "%.1f") << " Hz)\n";
  out << "report " << report_dir.string() << '\n';
  return 0;
}

int cmd_bench(std::ostream& out, const std::vector<fs::path>& ckpts, std::size_t n) {
  for (const auto& p : ckpts) require_file(p, "--ckpt");
  out << "model\tpasses\tmean_s\thz\n";
  for (const auto& p : ckpts) {
    const nn::Checkpoint ckpt = nn::load_checkpoint(p);
    auto model = nn::instantiate(ckpt);
    const LatencyResult r = latency_bench(*model, latency_batch(*model, nullptr, {}), n);
    out << nn::to_string(model->spec().variant) << '\t' << r.passes << '\t' << fmt(r.mean_seconds, "%.6f") << '\t'
        << fmt(r.hz, "%.2f") << '\n';
  }
  return 0;
}

int cmd_inspect(std::ostream& out, const Common& common, const fs::path& data, std::size_t index,
                const std::optional<fs::path>& dump_dir) {
  require_dir(data, "--data");
  if (dump_dir) claim_output(*dump_dir, common.overwrite, "--out");
  const auto datasets = load_all(resolve_manifests(data), common.workers);
  std::vector<SampleWindow> windows;
  for (const auto& ds : datasets) {
    for (const auto& clip : ds.clips) {
      auto w = build_windows(clip);
      windows.insert(windows.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
    }
  }
  if (index >= windows.size()) {
    throw ConfigError("--window: index " + std::to_string(index) + " out of range (" + std::to_string(windows.size()) +
                      " windows)");
  }
  const SampleWindow& w = windows[index];
  out << "clip " << w.clip->id << " (" << w.clip->tags.material << ", " << w.clip->tags.structure << ")\n";
  out << "frames";
  for (std::size_t k = 0; k < kWindowLength; ++k) out << ' ' << w.frame_indices[k] << '@' << fmt(w.frame_times[k], "%.4f");
  out << "\ntarget " << fmt(w.target.x(), "%.6f") << ' ' << fmt(w.target.y(), "%.6f") << ' '
      << fmt(w.target.z(), "%.6f") << "\n";

  std::ostringstream table;
  table << "slot,field";
  for (std::size_t k = 0; k < kWindowLength; ++k) table << ",t" << k;
  table << '\n';
  const StateLayout& layout = w.clip->manifest->layout;
  for (std::size_t s = 0; s < kStateSize; ++s) {
    std::string field = "-";
    for (const auto& [f, range] : layout) {
      if (range.contains(s)) field = std::string(field_name(f)) + "." + std::to_string(s - range.begin);
    }
    table << s << ',' << field;
    for (std::size_t k = 0; k < kWindowLength; ++k) table << ',' << fmt(w.states[k].generalized[s], "%.6g");
    table << '\n';
  }
  out << table.str();

  if (dump_dir) {
    fs::create_directories(*dump_dir);
    const auto images = window_images(w);
    for (std::size_t k = 0; k < images.size(); ++k) {
      write_png(*dump_dir / ("frame_" + std::to_string(k) + ".png"), to_uint8(images[k]));
    }
    write_text_file(*dump_dir / "states.csv", table.str());
    out << "dumped window to " << dump_dir->string() << '\n';
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"forcecast: vision and robot-state force estimation toolkit"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  Common common;
  std::optional<unsigned> workers;
  auto add_common = [&](CLI::App* sub) {
    sub->add_flag("--overwrite", common.overwrite, "Replace existing outputs");
    sub->add_option("--workers", workers, "Preprocessing threads (default: FORCECAST_WORKERS or 1)")
        ->check(CLI::Range(1u, 1024u));
  };

  // synth
  fs::path synth_out;
  std::uint64_t synth_seed = 0;
  bool synth_suite = false;
  SuiteOptions suite_options;
  auto* synth = app.add_subcommand("synth", "Generate synthetic palpation datasets");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Generator seed")->required();
  synth->add_flag("--suite", synth_suite, "Write both datasets (A and B) as subdirectories");
  synth->add_option("--duration", suite_options.clip_duration, "Clip length in seconds")->check(CLI::PositiveNumber);
  synth->add_option("--clips-per-material", suite_options.clips_per_material, "Clips per material")
      ->check(CLI::Range(1, 64));
  synth->add_option("--tool-mass", suite_options.tool_mass, "Tool mass for the inertial force term (kg)")
      ->check(CLI::NonNegativeNumber);
  synth->add_option("--noise", suite_options.noise_sigma, "Sensor noise sigma (N)")->check(CLI::NonNegativeNumber);
  add_common(synth);

  // harmonize
  std::vector<fs::path> manifests;
  fs::path harmonize_out;
  MixOptions mix;
  std::string mix_mode = "rand";
  auto* harmonize = app.add_subcommand("harmonize", "Merge datasets into the unified state schema");
  harmonize->add_option("--manifest", manifests, "Dataset manifest (repeatable)")->required();
  harmonize->add_option("--out", harmonize_out, "Output directory")->required();
  harmonize->add_option("--seed", mix.seed, "Held-out clip selection seed");
  harmonize->add_option("--mode", mix_mode, "Training mode: rand, stiff or struc");
  add_common(harmonize);

  // train
  std::string model_name;
  fs::path config_path, train_data, ckpt_out;
  std::optional<std::uint64_t> train_seed;
  auto* train = app.add_subcommand("train", "Train a force estimation model");
  train->add_option("--model", model_name, "fc, cnn, vit, rcnn or rvit")->required();
  train->add_option("--config", config_path, "Training config (JSON)")->required();
  train->add_option("--data", train_data, "Harmonized or dataset directory")->required();
  train->add_option("--out", ckpt_out, "Checkpoint path")->required();
  train->add_option("--seed", train_seed, "Overrides the config seed");
  add_common(train);

  // eval
  fs::path eval_ckpt, eval_data, report_dir;
  std::size_t latency_n = 100;
  std::string peak_axes = "x";
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on its held-out clips");
  eval->add_option("--ckpt", eval_ckpt, "Checkpoint path")->required();
  eval->add_option("--data", eval_data, "Harmonized or dataset directory")->required();
  eval->add_option("--report", report_dir, "Report output directory")->required();
  eval->add_option("--latency-n", latency_n, "Timed forward passes (0 skips the latency run)");
  eval->add_option("--peak-axes", peak_axes, "Axes used for peak isolation, e.g. x or xyz");
  add_common(eval);

  // bench
  std::vector<fs::path> bench_ckpts;
  std::size_t bench_n = 1000;
  auto* bench = app.add_subcommand("bench", "Forward-pass latency table");
  bench->add_option("--ckpt", bench_ckpts, "Checkpoint path (repeatable)")->required();
  bench->add_option("--n", bench_n, "Timed passes")->check(CLI::Range(std::size_t{1}, std::size_t{1000000}));

  // inspect
  std::size_t window_index = 0;
  fs::path inspect_data;
  std::optional<fs::path> inspect_out;
  auto* inspect = app.add_subcommand("inspect", "Print one sample window");
  inspect->add_option("--window", window_index, "Window index over all clips")->required();
  inspect->add_option("--data", inspect_data, "Harmonized or dataset directory")->required();
  inspect->add_option("--out", inspect_out, "Also write frames and the state table here");
  add_common(inspect);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::kConfig);
  }

  try {
    common.workers = workers ? *workers : default_workers();
    if (synth->parsed()) return cmd_synth(out, common, synth_out, synth_seed, synth_suite, suite_options);
    if (harmonize->parsed()) {
      mix.mode = parse_training_mode(mix_mode);
      return cmd_harmonize(out, common, manifests, harmonize_out, mix);
    }
    if (train->parsed()) return cmd_train(out, common, model_name, config_path, train_data, ckpt_out, train_seed);
    if (eval->parsed()) return cmd_eval(out, common, eval_ckpt, eval_data, report_dir, latency_n, peak_axes);
    if (bench->parsed()) return cmd_bench(out, bench_ckpts, bench_n);
    if (inspect->parsed()) return cmd_inspect(out, common, inspect_data, window_index, inspect_out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const json::exception& e) {
    err << "error: malformed JSON: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::kData);
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::kData);
  }
  return static_cast<int>(ErrorKind::kConfig);
}

}  // namespace forcecast::cli
