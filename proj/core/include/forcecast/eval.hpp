#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "forcecast/geometry.hpp"
#include "forcecast/nn/model.hpp"

namespace forcecast {

/// sqrt(mean over samples of |pred - gt|^2). Throws DataError on length mismatch or empty input.
double rmse(const std::vector<Vec3>& prediction, const std::vector<Vec3>& truth);
/// Per-axis RMSE.
Vec3 rmse_per_axis(const std::vector<Vec3>& prediction, const std::vector<Vec3>& truth);
/// RMSE over each run of `window` consecutive samples, stride 1 (n - window + 1 values).
std::vector<double> rmse_over_time(const std::vector<Vec3>& prediction, const std::vector<Vec3>& truth,
                                   std::size_t window);
/// 100 * rmse / (max |gt| - min |gt|). Throws DataError when the magnitude range is zero.
double relative_error(const std::vector<Vec3>& prediction, const std::vector<Vec3>& truth);

inline constexpr std::size_t kPeakSeparation = 150;

/// Interior local maxima and minima (plateaus report their middle sample), kept
/// greedily by descending prominence (earlier index on ties) when at least
/// `min_separation` samples from every kept peak. Returned in increasing order.
std::vector<std::size_t> find_peaks(const std::vector<double>& series, std::size_t min_separation = kPeakSeparation);

/// RMSE restricted to `peaks`; empty when there are none. Throws DataError for out-of-range indices.
std::optional<double> peak_rmse(const std::vector<Vec3>& prediction, const std::vector<Vec3>& truth,
                                const std::vector<std::size_t>& peaks);

struct LatencyResult {
  double mean_seconds = 0.0;
  double hz = 0.0;
  std::size_t passes = 0;
};

/// Times `pass` n times after `warmup` untimed calls.
LatencyResult latency_bench(const std::function<void()>& pass, std::size_t n = 1000, std::size_t warmup = 10);
/// Eval-mode forward passes of one prepared batch, without graph recording.
LatencyResult latency_bench(nn::ForceModel& model, const nn::ModelBatch& input, std::size_t n = 1000,
                            std::size_t warmup = 10);

/// Predictions and labels of one test clip in window order.
struct ClipSeries {
  std::string id;
  std::vector<double> timestamps;
  std::vector<Vec3> prediction;
  std::vector<Vec3> truth;
};

struct EvalOptions {
  std::array<bool, 3> peak_axes{true, false, false};
  std::size_t min_separation = kPeakSeparation;
  std::size_t rmse_window = 30;
};

struct ClipPeaks {
  std::string id;
  std::array<std::vector<std::size_t>, 3> per_axis;  ///< indices into the clip series
};

struct EvalReport {
  Vec3 rmse_axis = Vec3::Zero();
  double rmse_total = 0.0;
  double relative_error = 0.0;
  std::size_t samples = 0;
  std::size_t rmse_window = 0;
  std::vector<double> rmse_series;
  std::vector<ClipPeaks> peaks;
  std::optional<double> peak_rmse;
  std::optional<LatencyResult> latency;
  std::vector<ClipSeries> series;

  std::string to_json() const;
  /// clip,timestamp,gt_x,gt_y,gt_z,pred_x,pred_y,pred_z
  std::string force_csv() const;
  /// index,rmse
  std::string rmse_csv() const;
};

/// Peaks are found per clip on the selected ground-truth axes; the peak RMSE uses the
/// union of those samples over all clips. Other metrics use the concatenated series.
EvalReport make_report(std::vector<ClipSeries> clips, const EvalOptions& options = {});

}  // namespace forcecast
