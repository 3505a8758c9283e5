#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "negadapt/trainer.hpp"

namespace negadapt::evalkit {

struct Pair {
  double truth = 0.0;
  double estimate = 0.0;
};

// Mean absolute deviation of the final-iteration estimate.
double l1_metric(std::span<const Pair> pairs);

// Determination coefficient as reported: residual sum over the spread of the
// estimates around the training-set prediction mean.
double r2_metric(std::span<const Pair> pairs, double train_pred_mean);

// Conventional variant with the true-value variance in the denominator.
double r2_metric_conventional(std::span<const Pair> pairs);

struct RunMetrics {
  std::string model_id;
  int n = 0;
  double l1 = 0.0;
  double r2 = 0.0;
  double r2_conventional = 0.0;
  double train_pred_mean = 0.0;
  std::vector<Pair> pairs;
};

// Evaluates a checkpoint on a test dataset; estimates are clamped to the
// physical range before entering the metrics.
RunMetrics evaluate_checkpoint(const trainer::Checkpoint& checkpoint, const trainer::Dataset& test,
                               const std::string& model_id);

// A model is kept only if its l1 beats every accepted model trained on
// fewer iterations; models sharing an iteration count do not gate each other.
std::vector<RunMetrics> success_filter(std::span<const RunMetrics> models);

struct ColumnStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single model
  double best = 0.0;    // min for l1, max for r2
};

struct Aggregate {
  int count = 0;
  ColumnStats l1;
  ColumnStats r2;
};

Aggregate aggregate(std::span<const RunMetrics> models);

// Parenthesized last-digit uncertainty: (0.0225, 0.0004) -> "0.0225(04)".
std::string format_uncertainty(double mean, double stddev, int decimals = 4);

struct Histogram2D {
  static constexpr int kBins = 50;
  std::vector<std::int64_t> counts{std::vector<std::int64_t>(kBins * kBins, 0)};
  std::int64_t total = 0;

  std::int64_t& at(int truth_bin, int estimate_bin) {
    return counts[static_cast<std::size_t>(truth_bin) * kBins + estimate_bin];
  }
  std::int64_t at(int truth_bin, int estimate_bin) const {
    return counts[static_cast<std::size_t>(truth_bin) * kBins + estimate_bin];
  }
};

// 50x50 left-closed uniform bins over [0, 0.5] per axis; exact 0.5 lands in
// the last bin. Uses the first sample_size pairs.
Histogram2D histogram2d(std::span<const Pair> pairs, std::int64_t sample_size = 4096);

// CSV bodies (files are written through io::atomic_write_text).
std::string metrics_csv(std::span<const RunMetrics> models);
std::string histogram_csv(const Histogram2D& hist);
// Paper-style layout: n, l1 mean(std), l1 best, r2 mean(std), r2 best.
std::string table_csv(const std::vector<std::pair<int, Aggregate>>& rows);

}  // namespace negadapt::evalkit
