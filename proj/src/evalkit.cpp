#include "negadapt/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "negadapt/errors.hpp"

namespace negadapt::evalkit {

double l1_metric(std::span<const Pair> pairs) {
  if (pairs.empty()) throw EmptySetError("l1_metric: empty pair set");
  double acc = 0.0;
  for (const Pair& p : pairs) acc += std::abs(p.estimate - p.truth);
  return acc / static_cast<double>(pairs.size());
}

double r2_metric(std::span<const Pair> pairs, double train_pred_mean) {
  if (pairs.empty()) throw EmptySetError("r2_metric: empty pair set");
  double residual = 0.0;
  double spread = 0.0;
  for (const Pair& p : pairs) {
    residual += (p.estimate - p.truth) * (p.estimate - p.truth);
    spread += (p.estimate - train_pred_mean) * (p.estimate - train_pred_mean);
  }
  if (spread <= 0.0) {
    throw DegenerateDenominatorError("r2_metric: estimates have no spread around the mean");
  }
  return 1.0 - residual / spread;
}

double r2_metric_conventional(std::span<const Pair> pairs) {
  if (pairs.empty()) throw EmptySetError("r2_metric_conventional: empty pair set");
  double truth_mean = 0.0;
  for (const Pair& p : pairs) truth_mean += p.truth;
  truth_mean /= static_cast<double>(pairs.size());
  double residual = 0.0;
  double spread = 0.0;
  for (const Pair& p : pairs) {
    residual += (p.estimate - p.truth) * (p.estimate - p.truth);
    spread += (p.truth - truth_mean) * (p.truth - truth_mean);
  }
  if (spread <= 0.0) {
    throw DegenerateDenominatorError("r2_metric_conventional: constant true values");
  }
  return 1.0 - residual / spread;
}

RunMetrics evaluate_checkpoint(const trainer::Checkpoint& checkpoint, const trainer::Dataset& test,
                               const std::string& model_id) {
  if (test.system != checkpoint.config.system) {
    throw ConfigError("evaluate_checkpoint: dataset system differs from the checkpoint");
  }
  std::vector<policynet::BasisEntry> basis_storage;
  const std::vector<policynet::BasisEntry>* basis = nullptr;
  if (checkpoint.config.mode == policynet::RolloutMode::Fixed) {
    basis_storage = checkpoint.config.basis_list_path.empty()
                        ? policynet::default_basis_list(checkpoint.config.system)
                        : policynet::load_basis_list(checkpoint.config.basis_list_path,
                                                     checkpoint.config.system);
    basis = &basis_storage;
  }

  RunMetrics metrics;
  metrics.model_id = model_id;
  metrics.n = checkpoint.config.iterations;
  metrics.train_pred_mean = checkpoint.train_pred_mean;
  metrics.pairs.reserve(static_cast<std::size_t>(test.size()));

  constexpr std::int64_t kChunk = 256;
  for (std::int64_t begin = 0; begin < test.size(); begin += kChunk) {
    const std::int64_t end = std::min(test.size(), begin + kChunk);
    std::vector<const qstate::EffectiveOperator*> ops;
    ops.reserve(static_cast<std::size_t>(end - begin));
    for (std::int64_t i = begin; i < end; ++i) ops.push_back(&test.ops[static_cast<std::size_t>(i)]);
    const auto records = policynet::run_rollout(checkpoint.params, ops,
                                                checkpoint.config.iterations,
                                                checkpoint.config.mode, basis);
    for (std::int64_t i = begin; i < end; ++i) {
      const auto& rec = records[static_cast<std::size_t>(i - begin)];
      metrics.pairs.push_back(Pair{test.targets[static_cast<std::size_t>(i)],
                                   policynet::clamp_estimate(rec.estimates.back())});
    }
  }

  metrics.l1 = l1_metric(metrics.pairs);
  try {
    metrics.r2 = r2_metric(metrics.pairs, metrics.train_pred_mean);
  } catch (const DegenerateDenominatorError&) {
    // Constant predictors (e.g. untrained models clamped to zero) have no
    // meaningful determination coefficient.
    metrics.r2 = std::numeric_limits<double>::quiet_NaN();
  }
  try {
    metrics.r2_conventional = r2_metric_conventional(metrics.pairs);
  } catch (const DegenerateDenominatorError&) {
    metrics.r2_conventional = std::numeric_limits<double>::quiet_NaN();
  }
  return metrics;
}

std::vector<RunMetrics> success_filter(std::span<const RunMetrics> models) {
  std::vector<std::size_t> order(models.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return models[a].n < models[b].n; });

  std::vector<RunMetrics> accepted;
  for (const std::size_t idx : order) {
    const RunMetrics& candidate = models[idx];
    bool keep = true;
    for (const RunMetrics& prior : accepted) {
      if (prior.n < candidate.n && candidate.l1 >= prior.l1) {
        keep = false;
        break;
      }
    }
    if (keep) accepted.push_back(candidate);
  }
  return accepted;
}

Aggregate aggregate(std::span<const RunMetrics> models) {
  if (models.empty()) throw EmptySetError("aggregate: no models");
  Aggregate agg;
  agg.count = static_cast<int>(models.size());
  double l1_sum = 0.0;
  double r2_sum = 0.0;
  agg.l1.best = models.front().l1;
  agg.r2.best = models.front().r2;
  for (const RunMetrics& m : models) {
    l1_sum += m.l1;
    r2_sum += m.r2;
    agg.l1.best = std::min(agg.l1.best, m.l1);
    agg.r2.best = std::max(agg.r2.best, m.r2);
  }
  agg.l1.mean = l1_sum / agg.count;
  agg.r2.mean = r2_sum / agg.count;
  if (agg.count > 1) {
    double l1_var = 0.0;
    double r2_var = 0.0;
    for (const RunMetrics& m : models) {
      l1_var += (m.l1 - agg.l1.mean) * (m.l1 - agg.l1.mean);
      r2_var += (m.r2 - agg.r2.mean) * (m.r2 - agg.r2.mean);
    }
    agg.l1.stddev = std::sqrt(l1_var / (agg.count - 1));
    agg.r2.stddev = std::sqrt(r2_var / (agg.count - 1));
  }
  return agg;
}

std::string format_uncertainty(double mean, double stddev, int decimals) {
  const double unit = std::pow(10.0, decimals);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f(%02lld)", decimals, mean,
                static_cast<long long>(std::llround(stddev * unit)));
  return buf;
}

Histogram2D histogram2d(std::span<const Pair> pairs, std::int64_t sample_size) {
  if (static_cast<std::int64_t>(pairs.size()) < sample_size) {
    throw InsufficientSamplesError("histogram2d: fewer pairs than the sample size");
  }
  const auto bin_of = [](double v) {
    const double clipped = std::clamp(v, 0.0, 0.5);
    const int bin = static_cast<int>(clipped / 0.5 * Histogram2D::kBins);
    return std::min(bin, Histogram2D::kBins - 1);
  };
  Histogram2D hist;
  for (std::int64_t i = 0; i < sample_size; ++i) {
    const Pair& p = pairs[static_cast<std::size_t>(i)];
    hist.at(bin_of(p.truth), bin_of(p.estimate)) += 1;
    hist.total += 1;
  }
  return hist;
}

std::string metrics_csv(std::span<const RunMetrics> models) {
  std::string out = "model_id,n,l1,r2,r2_conventional,train_pred_mean,test_size\n";
  char buf[256];
  for (const RunMetrics& m : models) {
    std::snprintf(buf, sizeof(buf), "%s,%d,%.10f,%.10f,%.10f,%.10f,%zu\n", m.model_id.c_str(),
                  m.n, m.l1, m.r2, m.r2_conventional, m.train_pred_mean, m.pairs.size());
    out += buf;
  }
  return out;
}

std::string histogram_csv(const Histogram2D& hist) {
  // Row t = true-negativity bin, column e = estimated bin; 50 x 50 grid.
  std::string out;
  out.reserve(16 * Histogram2D::kBins * Histogram2D::kBins);
  for (int t = 0; t < Histogram2D::kBins; ++t) {
    for (int e = 0; e < Histogram2D::kBins; ++e) {
      out += std::to_string(hist.at(t, e));
      out += (e + 1 == Histogram2D::kBins) ? '\n' : ',';
    }
  }
  return out;
}

std::string table_csv(const std::vector<std::pair<int, Aggregate>>& rows) {
  std::string out = "n,l1_mean,l1_best,r2_mean,r2_best\n";
  char buf[256];
  for (const auto& [n, agg] : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%.4f,%s,%.4f\n", n,
                  format_uncertainty(agg.l1.mean, agg.l1.stddev).c_str(), agg.l1.best,
                  format_uncertainty(agg.r2.mean, agg.r2.stddev).c_str(), agg.r2.best);
    out += buf;
  }
  return out;
}

}  // namespace negadapt::evalkit
