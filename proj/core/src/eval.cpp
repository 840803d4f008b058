#include "forcecast/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "forcecast/errors.hpp"

namespace forcecast {
namespace {

void check_pair(const std::vector<Vec3>& prediction, const std::vector<Vec3>& truth) {
  if (prediction.size() != truth.size()) {
    throw DataError("prediction has " + std::to_string(prediction.size()) + " samples, ground truth " +
                    std::to_string(truth.size()));
  }
  if (truth.empty()) throw DataError("metrics need at least one sample");
}

// Candidate extrema of `x` with their prominence (maxima only; call on -x for minima).
void local_maxima(const std::vector<double>& x, std::vector<std::pair<double, std::size_t>>& out) {
  const std::size_t n = x.size();
  std::size_t i = 1;
  while (i + 1 < n) {
    if (x[i - 1] < x[i]) {
      std::size_t ahead = i + 1;
      while (ahead + 1 < n && x[ahead] == x[i]) ++ahead;
      if (x[ahead] < x[i]) {
        const std::size_t left = i, right = ahead - 1;
        const std::size_t peak = (left + right) / 2;
        const double v = x[peak];
        double left_min = v;
        for (std::size_t k = left; k-- > 0;) {
          if (x[k] > v) break;
          left_min = std::min(left_min, x[k]);
        }
        double right_min = v;
        for (std::size_t k = right + 1; k < n; ++k) {
          if (x[k] > v) break;
          right_min = std::min(right_min, x[k]);
        }
        out.emplace_back(v - std::max(left_min, right_min), peak);
        i = ahead;
        continue;
      }
    }
    ++i;
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double rmse(const std::vector<Vec3>& prediction, const std::vector<Vec3>& truth) {
  check_pair(prediction, truth);
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) s += (prediction[i] - truth[i]).squaredNorm();
  return std::sqrt(s / static_cast<double>(truth.size()));
}

Vec3 rmse_per_axis(const std::vector<Vec3>& prediction, const std::vector<Vec3>& truth) {
  check_pair(prediction, truth);
  Vec3 s = Vec3::Zero();
  for (std::size_t i = 0; i < truth.size(); ++i) s += (prediction[i] - truth[i]).cwiseAbs2();
  return (s / static_cast<double>(truth.size())).cwiseSqrt();
}

std::vector<double> rmse_over_time(const std::vector<Vec3>& prediction, const std::vector<Vec3>& truth,
                                   std::size_t window) {
  check_pair(prediction, truth);
  if (window < 1) throw ConfigError("RMSE window must be at least 1 sample");
  if (window > truth.size()) {
    throw DataError("RMSE window of " + std::to_string(window) + " exceeds the " + std::to_string(truth.size()) +
                    " samples");
  }
  std::vector<double> err(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) err[i] = (prediction[i] - truth[i]).squaredNorm();
  std::vector<double> out;
  out.reserve(truth.size() - window + 1);
  for (std::size_t start = 0; start + window <= truth.size(); ++start) {
    double s = 0.0;
    for (std::size_t k = start; k < start + window; ++k) s += err[k];
    out.push_back(std::sqrt(s / static_cast<double>(window)));
  }
  return out;
}

double relative_error(const std::vector<Vec3>& prediction, const std::vector<Vec3>& truth) {
  check_pair(prediction, truth);
  double lo = truth[0].norm(), hi = lo;
  for (const auto& t : truth) {
    lo = std::min(lo, t.norm());
    hi = std::max(hi, t.norm());
  }
  if (!(hi - lo > 0.0)) throw DataError("relative error is undefined: ground-truth force range is zero");
  return 100.0 * rmse(prediction, truth) / (hi - lo);
}

std::vector<std::size_t> find_peaks(const std::vector<double>& series, std::size_t min_separation) {
  std::vector<std::pair<double, std::size_t>> candidates;
  local_maxima(series, candidates);
  std::vector<double> negated(series.size());
  std::transform(series.begin(), series.end(), negated.begin(), [](double v) { return -v; });
  local_maxima(negated, candidates);
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::size_t> kept;
  for (const auto& [prominence, index] : candidates) {
    const bool clear = std::all_of(kept.begin(), kept.end(), [&](std::size_t k) {
      const std::size_t d = k > index ? k - index : index - k;
      return d >= min_separation;
    });
    if (clear) kept.push_back(index);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

std::optional<double> peak_rmse(const std::vector<Vec3>& prediction, const std::vector<Vec3>& truth,
                                const std::vector<std::size_t>& peaks) {
  if (prediction.size() != truth.size()) throw DataError("prediction and ground truth lengths differ");
  if (peaks.empty()) return std::nullopt;
  double s = 0.0;
  for (const auto i : peaks) {
    if (i >= truth.size()) throw DataError("peak index " + std::to_string(i) + " is out of range");
    s += (prediction[i] - truth[i]).squaredNorm();
  }
  return std::sqrt(s / static_cast<double>(peaks.size()));
}

LatencyResult latency_bench(const std::function<void()>& pass, std::size_t n, std::size_t warmup) {
  if (n < 1) throw ConfigError("latency benchmark needs at least one pass");
  for (std::size_t i = 0; i < warmup; ++i) pass();
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < n; ++i) pass();
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  LatencyResult r;
  r.passes = n;
  r.mean_seconds = elapsed.count() / static_cast<double>(n);
  r.hz = 1.0 / r.mean_seconds;
  return r;
}

LatencyResult latency_bench(nn::ForceModel& model, const nn::ModelBatch& input, std::size_t n, std::size_t warmup) {
  nn::NoGradGuard guard;
  return latency_bench([&] { (void)model.forward(input, false); }, n, warmup);
}

EvalReport make_report(std::vector<ClipSeries> clips, const EvalOptions& options) {
  EvalReport r;
  std::vector<Vec3> pred, truth;
  std::vector<Vec3> peak_pred, peak_truth;
  for (const auto& c : clips) {
    check_pair(c.prediction, c.truth);
    pred.insert(pred.end(), c.prediction.begin(), c.prediction.end());
    truth.insert(truth.end(), c.truth.begin(), c.truth.end());
    ClipPeaks cp;
    cp.id = c.id;
    std::set<std::size_t> chosen;
    for (int a = 0; a < 3; ++a) {
      if (!options.peak_axes[static_cast<std::size_t>(a)]) continue;
      std::vector<double> axis(c.truth.size());
      for (std::size_t i = 0; i < c.truth.size(); ++i) axis[i] = c.truth[i][a];
      cp.per_axis[static_cast<std::size_t>(a)] = find_peaks(axis, options.min_separation);
      chosen.insert(cp.per_axis[static_cast<std::size_t>(a)].begin(), cp.per_axis[static_cast<std::size_t>(a)].end());
    }
    for (const auto i : chosen) {
      peak_pred.push_back(c.prediction[i]);
      peak_truth.push_back(c.truth[i]);
    }
    r.peaks.push_back(std::move(cp));
  }
  check_pair(pred, truth);
  r.samples = truth.size();
  r.rmse_axis = rmse_per_axis(pred, truth);
  r.rmse_total = rmse(pred, truth);
  r.relative_error = relative_error(pred, truth);
  r.rmse_window = std::min(options.rmse_window, truth.size());
  r.rmse_series = rmse_over_time(pred, truth, r.rmse_window);
  std::vector<std::size_t> all(peak_truth.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  r.peak_rmse = peak_rmse(peak_pred, peak_truth, all);
  r.series = std::move(clips);
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["rmse"] = {{"x", rmse_axis.x()}, {"y", rmse_axis.y()}, {"z", rmse_axis.z()}, {"total", rmse_total}};
  j["relative_error_percent"] = relative_error;
  j["samples"] = samples;
  j["rmse_window"] = rmse_window;
  j["rmse_over_time"] = rmse_series;
  nlohmann::json peaks_json = nlohmann::json::array();
  for (const auto& p : peaks) {
    peaks_json.push_back({{"clip", p.id}, {"x", p.per_axis[0]}, {"y", p.per_axis[1]}, {"z", p.per_axis[2]}});
  }
  j["peaks"] = peaks_json;
  j["peak_rmse"] = peak_rmse ? nlohmann::json(*peak_rmse) : nlohmann::json(nullptr);
  if (latency) {
    j["latency"] = {{"mean_seconds", latency->mean_seconds}, {"hz", latency->hz}, {"passes", latency->passes}};
  } else {
    j["latency"] = nullptr;
  }
  return j.dump(2) + "\n";
}

std::string EvalReport::force_csv() const {
  std::ostringstream out;
  out << "clip,timestamp,gt_x,gt_y,gt_z,pred_x,pred_y,pred_z\n";
  for (const auto& c : series) {
    for (std::size_t i = 0; i < c.truth.size(); ++i) {
      out << c.id << ',' << fmt(i < c.timestamps.size() ? c.timestamps[i] : static_cast<double>(i));
      for (int a = 0; a < 3; ++a) out << ',' << fmt(c.truth[i][a]);
      for (int a = 0; a < 3; ++a) out << ',' << fmt(c.prediction[i][a]);
      out << '\n';
    }
  }
  return out.str();
}

std::string EvalReport::rmse_csv() const {
  std::ostringstream out;
  out << "index,rmse\n";
  for (std::size_t i = 0; i < rmse_series.size(); ++i) out << i << ',' << fmt(rmse_series[i]) << '\n';
  return out.str();
}

}  // namespace forcecast
