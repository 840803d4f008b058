#include "forcecast/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "forcecast/errors.hpp"

namespace forcecast {
namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, delim)) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  return out;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + " is empty");
  table.header = split(line, ',');
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line, ',');
    if (cells.size() != table.header.size()) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(table.header.size()) + " columns, got " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (end == c.c_str() || *end != '\0') {
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": '" + c + "' is not a number");
      }
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Column groups of states.csv: "p_E.0", "p_E.1", ... ; "gripper" is a bare scalar.
struct ColumnGroup {
  std::string name;
  std::vector<std::size_t> columns;
};

std::vector<ColumnGroup> group_columns(const std::vector<std::string>& header, const std::filesystem::path& path) {
  std::vector<ColumnGroup> groups;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const auto& h = header[c];
    const auto dot = h.find('.');
    const std::string name = h.substr(0, dot);
    std::size_t idx = 0;
    if (dot != std::string::npos) idx = static_cast<std::size_t>(std::stoul(h.substr(dot + 1)));
    auto it = std::find_if(groups.begin(), groups.end(), [&](const ColumnGroup& g) { return g.name == name; });
    if (it == groups.end()) {
      groups.push_back({name, {}});
      it = groups.end() - 1;
    }
    if (idx != it->columns.size()) throw DataError(path.string() + ": column '" + h + "' is out of order");
    it->columns.push_back(c);
  }
  return groups;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::size_t nearest_index(const std::vector<RawState>& states, double t) {
  const auto it = std::lower_bound(states.begin(), states.end(), t,
                                   [](const RawState& s, double value) { return s.timestamp < value; });
  if (it == states.begin()) return 0;
  if (it == states.end()) return states.size() - 1;
  const std::size_t hi = static_cast<std::size_t>(it - states.begin());
  return (t - states[hi - 1].timestamp) <= (states[hi].timestamp - t) ? hi - 1 : hi;
}

}  // namespace

Image FrameSource::load() const {
  if (const auto* p = std::get_if<std::shared_ptr<const Image>>(&source_)) return **p;
  if (const auto* p = std::get_if<std::filesystem::path>(&source_)) return read_png(*p);
  if (const auto* f = std::get_if<std::function<Image()>>(&source_)) return (*f)();
  throw DataError("frame has no image source");
}

void Clip::validate() const {
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (!(frames[i].timestamp > frames[i - 1].timestamp)) {
      throw DataError("clip '" + id + "': frame timestamps are not strictly increasing at " + std::to_string(i));
    }
  }
  for (std::size_t i = 1; i < raw_states.size(); ++i) {
    if (!(raw_states[i].timestamp > raw_states[i - 1].timestamp)) {
      throw DataError("clip '" + id + "': state timestamps are not strictly increasing at " + std::to_string(i));
    }
  }
  if (forces.size() != raw_states.size()) {
    throw DataError("clip '" + id + "': " + std::to_string(forces.size()) + " force labels for " +
                    std::to_string(raw_states.size()) + " states");
  }
  if (!states.empty() && states.size() != raw_states.size()) {
    throw DataError("clip '" + id + "': generalized and raw state counts differ");
  }
}

void generalize_clip(Clip& clip) {
  if (!clip.manifest) throw ConfigError("clip '" + clip.id + "' has no manifest");
  if (clip.raw_states.size() < 2) throw DataError("clip '" + clip.id + "' needs at least 2 states");
  clip.states.resize(clip.raw_states.size());
  for (std::size_t i = 0; i < clip.raw_states.size(); ++i) {
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = i == 0 ? 1 : i;
    clip.states[i] = generalize_state(clip.raw_states[i], derivatives_between(clip.raw_states[a], clip.raw_states[b]),
                                      clip.manifest->layout);
  }
}

StateDerivatives WindowState::derivatives() const {
  return neighbor_is_next ? derivatives_between(state, neighbor) : derivatives_between(neighbor, state);
}

std::vector<SampleWindow> build_windows(const std::shared_ptr<const Clip>& clip, std::size_t length) {
  if (length != kWindowLength) throw ConfigError("windows hold exactly 5 frames");
  if (clip->frames.size() < length) {
    throw DataError("clip '" + clip->id + "' has " + std::to_string(clip->frames.size()) +
                    " frames; a window needs 5");
  }
  if (clip->raw_states.size() < 2 || clip->states.size() != clip->raw_states.size()) {
    throw DataError("clip '" + clip->id + "' has no generalized states");
  }
  const double period = 1.0 / clip->manifest->video_rate_hz;
  const std::size_t nf = clip->frames.size();
  std::vector<std::size_t> nearest(nf);
  std::vector<bool> frame_ok(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    nearest[f] = nearest_index(clip->raw_states, clip->frames[f].timestamp);
    frame_ok[f] = std::abs(clip->raw_states[nearest[f]].timestamp - clip->frames[f].timestamp) <= 0.5 * period + 1e-9;
  }

  std::vector<SampleWindow> windows;
  for (std::size_t start = 0; start + length <= nf; ++start) {
    bool ok = true;
    for (std::size_t k = 0; k < length && ok; ++k) {
      ok = frame_ok[start + k];
      if (ok && k > 0) {
        ok = clip->frames[start + k].timestamp - clip->frames[start + k - 1].timestamp <= 1.5 * period + 1e-9;
      }
    }
    if (!ok) continue;
    SampleWindow w;
    w.clip = clip;
    for (std::size_t k = 0; k < length; ++k) {
      const std::size_t f = start + k;
      const std::size_t s = nearest[f];
      w.frame_indices[k] = f;
      w.frame_times[k] = clip->frames[f].timestamp;
      WindowState& ws = w.states[k];
      ws.state = clip->raw_states[s];
      ws.neighbor_is_next = s == 0;
      ws.neighbor = clip->raw_states[s == 0 ? 1 : s - 1];
      ws.generalized = clip->states[s];
    }
    w.target = clip->forces[nearest[start + length - 1]];
    windows.push_back(std::move(w));
  }
  return windows;
}

std::vector<ImageF> window_images(const SampleWindow& window) {
  if (!window.images.empty()) return window.images;
  std::vector<ImageF> out;
  out.reserve(kWindowLength);
  for (const std::size_t f : window.frame_indices) {
    out.push_back(crop_zoom_resize(window.clip->frames.at(f).source.load(), window.clip->manifest->image_zoom));
  }
  return out;
}

Clip load_clip(const std::shared_ptr<const DatasetManifest>& manifest, std::size_t index) {
  const std::filesystem::path dir = manifest->clip_dir(index);
  Clip clip;
  clip.id = manifest->name + "/" + manifest->clips.at(index).path;
  clip.tags = manifest->clips[index].tags;
  clip.manifest = manifest;

  const CsvTable states = read_csv(dir / "states.csv");
  if (states.header.empty() || states.header[0] != "timestamp") {
    throw DataError((dir / "states.csv").string() + ": first column must be 'timestamp'");
  }
  const auto groups = group_columns(states.header, dir / "states.csv");
  for (const auto& row : states.rows) {
    RawState s;
    s.timestamp = row[0];
    for (const auto& g : groups) {
      std::vector<double> v;
      for (const auto c : g.columns) v.push_back(row[c]);
      auto need = [&](std::size_t n) {
        if (v.size() != n) {
          throw DataError((dir / "states.csv").string() + ": field '" + g.name + "' needs " + std::to_string(n) +
                          " columns");
        }
      };
      if (g.name == "p_E") {
        need(3);
        s.ee_position = Vec3(v[0], v[1], v[2]);
      } else if (g.name == "o_E") {
        need(4);
        s.ee_orientation = Quaternion::normalized(v[0], v[1], v[2], v[3]);
      } else if (g.name == "J_robot") {
        s.robot_joints = v;
      } else if (g.name == "p_H") {
        need(3);
        s.haptic_position = Vec3(v[0], v[1], v[2]);
      } else if (g.name == "o_H") {
        need(4);
        s.haptic_orientation = Quaternion::normalized(v[0], v[1], v[2], v[3]);
      } else if (g.name == "J_H") {
        s.haptic_joints = v;
      } else if (g.name == "wrench") {
        need(6);
        std::array<double, 6> w;
        std::copy(v.begin(), v.end(), w.begin());
        s.wrench = w;
      } else if (g.name == "gripper") {
        need(1);
        s.gripper = v[0];
      } else {
        throw DataError((dir / "states.csv").string() + ": unknown state column group '" + g.name + "'");
      }
    }
    clip.raw_states.push_back(std::move(s));
  }

  const CsvTable forces = read_csv(dir / "forces.csv");
  if (forces.header.size() != 4 || forces.header[0] != "timestamp") {
    throw DataError((dir / "forces.csv").string() + ": expected columns timestamp,fx,fy,fz");
  }
  if (forces.rows.size() != clip.raw_states.size()) {
    throw DataError((dir / "forces.csv").string() + ": force and state row counts differ");
  }
  for (std::size_t i = 0; i < forces.rows.size(); ++i) {
    const auto& row = forces.rows[i];
    const RawState& s = clip.raw_states[i];
    if (std::abs(row[0] - s.timestamp) > 1e-9) {
      throw DataError((dir / "forces.csv").string() + ": row " + std::to_string(i + 1) +
                      " has no matching state timestamp");
    }
    const RigidTransform t(quat_to_matrix(s.ee_orientation), s.ee_position);
    clip.forces.push_back(calibrate_force(Vec3(row[1], row[2], row[3]), t, manifest->calibration));
  }

  std::vector<double> frame_times;
  if (std::filesystem::exists(dir / "frames.csv")) {
    for (const auto& row : read_csv(dir / "frames.csv").rows) frame_times.push_back(row.at(1));
  }
  std::vector<std::filesystem::path> pngs;
  if (std::filesystem::is_directory(dir / "frames")) {
    for (const auto& e : std::filesystem::directory_iterator(dir / "frames")) {
      if (e.path().extension() == ".png") pngs.push_back(e.path());
    }
  }
  std::sort(pngs.begin(), pngs.end());
  if (!frame_times.empty() && frame_times.size() != pngs.size()) {
    throw DataError((dir / "frames.csv").string() + ": timestamp count does not match frame count");
  }
  for (std::size_t i = 0; i < pngs.size(); ++i) {
    const double t = frame_times.empty() ? static_cast<double>(i) / manifest->video_rate_hz : frame_times[i];
    clip.frames.push_back({t, FrameSource(pngs[i])});
  }

  clip.validate();
  generalize_clip(clip);
  return clip;
}

void save_clip(const std::filesystem::path& dir, const std::vector<RawState>& states,
               const std::vector<Vec3>& raw_forces, const std::vector<Image>& frames) {
  save_clip(dir, states, raw_forces, frames.size(), [&](std::size_t i) { return frames[i]; });
}

void save_clip(const std::filesystem::path& dir, const std::vector<RawState>& states,
               const std::vector<Vec3>& raw_forces, std::size_t frame_count,
               const std::function<Image(std::size_t)>& frame) {
  if (states.empty()) throw DataError("cannot save a clip without states");
  if (raw_forces.size() != states.size()) throw DataError("force and state counts differ");
  std::filesystem::create_directories(dir / "frames");

  const RawState& first = states.front();
  std::ostringstream header;
  header << "timestamp";
  auto cols = [&](const char* name, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) header << ',' << name << '.' << i;
  };
  cols("p_E", 3);
  cols("o_E", 4);
  cols("J_robot", first.robot_joints.size());
  cols("p_H", 3);
  cols("o_H", 4);
  cols("J_H", first.haptic_joints.size());
  if (first.wrench) cols("wrench", 6);
  if (first.gripper) header << ",gripper";

  std::ostringstream body;
  body << header.str() << '\n';
  for (const auto& s : states) {
    body << fmt_double(s.timestamp);
    auto put = [&](double v) { body << ',' << fmt_double(v); };
    for (int i = 0; i < 3; ++i) put(s.ee_position[i]);
    for (const double v : s.ee_orientation.coeffs()) put(v);
    for (const double v : s.robot_joints) put(v);
    for (int i = 0; i < 3; ++i) put(s.haptic_position[i]);
    for (const double v : s.haptic_orientation.coeffs()) put(v);
    for (const double v : s.haptic_joints) put(v);
    if (first.wrench) {
      for (const double v : s.wrench.value()) put(v);
    }
    if (first.gripper) put(s.gripper.value());
    body << '\n';
  }
  write_text_file(dir / "states.csv", body.str());

  std::ostringstream forces;
  forces << "timestamp,fx,fy,fz\n";
  for (std::size_t i = 0; i < states.size(); ++i) {
    forces << fmt_double(states[i].timestamp) << ',' << fmt_double(raw_forces[i].x()) << ','
           << fmt_double(raw_forces[i].y()) << ',' << fmt_double(raw_forces[i].z()) << '\n';
  }
  write_text_file(dir / "forces.csv", forces.str());

  for (std::size_t i = 0; i < frame_count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.png", i);
    write_png(dir / "frames" / name, frame(i));
  }
}

Dataset load_dataset(const DatasetManifest& manifest, unsigned workers) {
  Dataset ds;
  ds.manifest = std::make_shared<const DatasetManifest>(manifest);
  const std::size_t n = manifest.clips.size();
  std::vector<std::shared_ptr<const Clip>> clips(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        clips[i] = std::make_shared<const Clip>(load_clip(ds.manifest, i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  ds.clips = std::move(clips);
  return ds;
}

std::string to_string(TrainingMode mode) {
  switch (mode) {
    case TrainingMode::kRandom:
      return "rand";
    case TrainingMode::kStiffness:
      return "stiff";
    case TrainingMode::kStructure:
      return "struc";
  }
  return "rand";
}

TrainingMode parse_training_mode(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (t == "rand" || t == "random") return TrainingMode::kRandom;
  if (t == "stiff" || t == "stiffness") return TrainingMode::kStiffness;
  if (t == "struc" || t == "structure") return TrainingMode::kStructure;
  throw ConfigError("unknown training mode '" + text + "' (expected rand, stiff or struc)");
}

DataSplit mix_datasets(const std::vector<Dataset>& datasets, const MixOptions& options) {
  if (datasets.empty()) throw ConfigError("mixing needs at least one dataset");
  DataSplit split;
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    const auto& clips = datasets[d].clips;
    const std::string& name = datasets[d].manifest->name;
    std::mt19937_64 rng(mix_seed(options.seed, d));
    auto pick = [&](const std::vector<std::size_t>& candidates) { return candidates[rng() % candidates.size()]; };

    std::vector<std::size_t> train_idx, test_candidates;
    switch (options.mode) {
      case TrainingMode::kRandom: {
        if (clips.size() < 2) {
          throw ConfigError("dataset '" + name + "' has a single clip; it cannot provide both train and test data");
        }
        for (std::size_t i = 0; i < clips.size(); ++i) test_candidates.push_back(i);
        const std::size_t held = pick(test_candidates);
        for (std::size_t i = 0; i < clips.size(); ++i) {
          if (i != held) train_idx.push_back(i);
        }
        test_candidates = {held};
        break;
      }
      case TrainingMode::kStiffness: {
        std::set<std::string> materials;
        for (const auto& c : clips) materials.insert(c->tags.material);
        const std::string train_material = materials.empty() ? std::string() : *materials.begin();
        for (std::size_t i = 0; i < clips.size(); ++i) {
          (clips[i]->tags.material == train_material ? train_idx : test_candidates).push_back(i);
        }
        break;
      }
      case TrainingMode::kStructure: {
        for (std::size_t i = 0; i < clips.size(); ++i) {
          if (clips[i]->tags.structure == options.train_structure) train_idx.push_back(i);
          if (clips[i]->tags.structure == options.test_structure) test_candidates.push_back(i);
        }
        break;
      }
    }
    for (const auto i : train_idx) split.train_clips.push_back(clips[i]);
    if (!test_candidates.empty()) split.test_clips.push_back(clips[pick(test_candidates)]);
  }
  if (split.train_clips.empty()) {
    throw ConfigError("empty train partition for mode '" + to_string(options.mode) + "'");
  }
  if (split.test_clips.empty()) {
    throw ConfigError("empty test partition for mode '" + to_string(options.mode) + "'");
  }
  for (const auto& c : split.train_clips) {
    auto w = build_windows(c);
    std::move(w.begin(), w.end(), std::back_inserter(split.train));
  }
  for (const auto& c : split.test_clips) {
    auto w = build_windows(c);
    std::move(w.begin(), w.end(), std::back_inserter(split.test));
  }
  return split;
}

std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  std::mt19937_64 rng(mix_seed(seed, 0x5eedULL + epoch));
  for (std::size_t i = count; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

}  // namespace forcecast
