#include "negadapt/evalkit.hpp"

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "negadapt/errors.hpp"
#include "test_support.hpp"

using namespace negadapt;
using namespace negadapt::evalkit;

namespace {

std::vector<Pair> noisy_pairs(Philox& rng, int count, double noise) {
  std::vector<Pair> pairs;
  pairs.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double truth = 0.5 * rng.next_double();
    const double est = std::clamp(truth + noise * rng.next_gaussian(), 0.0, 0.5);
    pairs.push_back({truth, est});
  }
  return pairs;
}

RunMetrics metrics_stub(const std::string& id, int n, double l1, double r2 = 0.9) {
  RunMetrics m;
  m.model_id = id;
  m.n = n;
  m.l1 = l1;
  m.r2 = r2;
  return m;
}

}  // namespace

TEST_CASE("l1 metric arithmetic") {
  CHECK(l1_metric(std::vector<Pair>{{0.2, 0.2}, {0.4, 0.4}}) == 0.0);
  CHECK(l1_metric(std::vector<Pair>{{0.0, 0.1}, {0.0, 0.3}}) == doctest::Approx(0.2));
  CHECK_THROWS_AS(l1_metric(std::vector<Pair>{}), EmptySetError);
}

TEST_CASE("r2 of a perfect nondegenerate predictor is one") {
  const std::vector<Pair> pairs{{0.1, 0.1}, {0.2, 0.2}, {0.4, 0.4}};
  CHECK(r2_metric(pairs, 0.2) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r2_metric_conventional(pairs) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("r2 rejects a constant predictor") {
  const std::vector<Pair> pairs{{0.1, 0.25}, {0.3, 0.25}, {0.5, 0.25}};
  CHECK_THROWS_AS(r2_metric(pairs, 0.25), DegenerateDenominatorError);
  // The conventional flag degenerates on constant true values instead.
  const std::vector<Pair> flat_truth{{0.2, 0.1}, {0.2, 0.3}};
  CHECK_THROWS_AS(r2_metric_conventional(flat_truth), DegenerateDenominatorError);
}

TEST_CASE("literal and conventional r2 differ once the reference mean shifts") {
  Philox rng(700);
  const auto pairs = noisy_pairs(rng, 200, 0.02);
  const double literal = r2_metric(pairs, 0.1);
  const double conventional = r2_metric_conventional(pairs);
  CHECK(literal != conventional);
  CHECK(conventional <= 1.0);
}

TEST_CASE("success filter keeps only models beating every smaller-n acceptance") {
  SUBCASE("worse larger-n candidate is discarded") {
    const std::vector<RunMetrics> models{metrics_stub("a", 3, 0.040), metrics_stub("b", 4, 0.045)};
    const auto accepted = success_filter(models);
    REQUIRE(accepted.size() == 1);
    CHECK(accepted.front().model_id == "a");
  }
  SUBCASE("strictly decreasing l1 keeps everything") {
    const std::vector<RunMetrics> models{metrics_stub("a", 2, 0.09), metrics_stub("b", 3, 0.04),
                                         metrics_stub("c", 5, 0.02)};
    CHECK(success_filter(models).size() == 3);
  }
  SUBCASE("a single model is vacuously accepted") {
    const std::vector<RunMetrics> models{metrics_stub("only", 7, 0.5)};
    CHECK(success_filter(models).size() == 1);
  }
  SUBCASE("models sharing n do not gate each other") {
    const std::vector<RunMetrics> models{metrics_stub("a", 3, 0.040), metrics_stub("b", 3, 0.050),
                                         metrics_stub("c", 4, 0.045)};
    const auto accepted = success_filter(models);
    REQUIRE(accepted.size() == 2);
    CHECK(accepted[0].model_id == "a");
    CHECK(accepted[1].model_id == "b");
  }
}

TEST_CASE("aggregate statistics") {
  SUBCASE("single model collapses to itself") {
    const std::vector<RunMetrics> models{metrics_stub("a", 5, 0.02, 0.97)};
    const Aggregate agg = aggregate(models);
    CHECK(agg.l1.mean == 0.02);
    CHECK(agg.l1.best == 0.02);
    CHECK(agg.l1.stddev == 0.0);
    CHECK(agg.r2.best == 0.97);
  }
  SUBCASE("two models") {
    const std::vector<RunMetrics> models{metrics_stub("a", 5, 0.01, 0.99),
                                         metrics_stub("b", 5, 0.03, 0.95)};
    const Aggregate agg = aggregate(models);
    CHECK(agg.l1.mean == doctest::Approx(0.02));
    CHECK(agg.l1.best == 0.01);
    CHECK(agg.r2.best == 0.99);
    CHECK(agg.l1.stddev == doctest::Approx(std::sqrt(2.0) * 0.01));
  }
  SUBCASE("permutation invariance") {
    std::vector<RunMetrics> models{metrics_stub("a", 5, 0.01), metrics_stub("b", 5, 0.02),
                                   metrics_stub("c", 5, 0.07)};
    const Aggregate fwd = aggregate(models);
    std::reverse(models.begin(), models.end());
    const Aggregate rev = aggregate(models);
    CHECK(fwd.l1.mean == rev.l1.mean);
    CHECK(fwd.l1.stddev == rev.l1.stddev);
    CHECK(fwd.l1.best == rev.l1.best);
  }
  CHECK_THROWS_AS(aggregate(std::vector<RunMetrics>{}), EmptySetError);
}

TEST_CASE("parenthesized uncertainty formatting") {
  CHECK(format_uncertainty(0.0225, 0.0004) == "0.0225(04)");
  CHECK(format_uncertainty(0.0900, 0.0003) == "0.0900(03)");
  CHECK(format_uncertainty(0.5952, 0.0067) == "0.5952(67)");
  CHECK(format_uncertainty(0.0146, 0.0016) == "0.0146(16)");
  CHECK(format_uncertainty(0.0225, 0.0) == "0.0225(00)");
}

TEST_CASE("histogram binning") {
  SUBCASE("perfect predictor fills only the diagonal") {
    Philox rng(701);
    std::vector<Pair> pairs;
    for (int i = 0; i < 4096; ++i) {
      const double v = 0.5 * rng.next_double();
      pairs.push_back({v, v});
    }
    const Histogram2D hist = histogram2d(pairs);
    CHECK(hist.total == 4096);
    for (int t = 0; t < Histogram2D::kBins; ++t) {
      for (int e = 0; e < Histogram2D::kBins; ++e) {
        if (t != e) CHECK(hist.at(t, e) == 0);
      }
    }
  }
  SUBCASE("separable states accumulate in the first true-axis bin") {
    std::vector<Pair> pairs(4096, Pair{0.0, 0.01});
    const Histogram2D hist = histogram2d(pairs);
    CHECK(hist.at(0, 1) == 4096);
    for (int t = 1; t < Histogram2D::kBins; ++t) {
      for (int e = 0; e < Histogram2D::kBins; ++e) CHECK(hist.at(t, e) == 0);
    }
  }
  SUBCASE("the value 0.5 lands in the last bin") {
    std::vector<Pair> pairs(4096, Pair{0.5, 0.5});
    const Histogram2D hist = histogram2d(pairs);
    CHECK(hist.at(Histogram2D::kBins - 1, Histogram2D::kBins - 1) == 4096);
  }
  SUBCASE("insufficient samples are rejected") {
    const std::vector<Pair> pairs(100, Pair{0.1, 0.1});
    CHECK_THROWS_AS(histogram2d(pairs, 4096), InsufficientSamplesError);
  }
}

TEST_CASE("off-band histogram mass respects the Markov bound") {
  Philox rng(702);
  const auto pairs = noisy_pairs(rng, 4096, 0.05);
  const double l1 = l1_metric(pairs);
  const Histogram2D hist = histogram2d(pairs);
  // Bins at least 11 apart guarantee |estimate - truth| > 0.1.
  std::int64_t off_band = 0;
  for (int t = 0; t < Histogram2D::kBins; ++t) {
    for (int e = 0; e < Histogram2D::kBins; ++e) {
      if (std::abs(t - e) >= 11) off_band += hist.at(t, e);
    }
  }
  CHECK(static_cast<double>(off_band) / static_cast<double>(hist.total) <= l1 / 0.1 + 1e-12);
}

TEST_CASE("l1 squared never exceeds the last loss on identical pairs") {
  Philox rng(703);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pairs = noisy_pairs(rng, 128, 0.03);
    const double l1 = l1_metric(pairs);
    double mse = 0.0;
    for (const Pair& p : pairs) mse += (p.estimate - p.truth) * (p.estimate - p.truth);
    mse /= static_cast<double>(pairs.size());
    CHECK(l1 * l1 <= mse + 1e-15);
  }
}

TEST_CASE("checkpoint evaluation produces clamped in-range metrics") {
  trainer::RunConfig config;
  config.system = qstate::SystemKind::QubitQubit;
  config.mode = policynet::RolloutMode::Adaptive;
  config.loss = trainer::LossKind::Last;
  config.iterations = 2;
  config.train_size = 64;
  config.val_size = 32;
  config.test_size = 64;
  config.patience = 1;
  config.max_epochs = 1;
  config.seeds = {31, 32};
  const trainer::Checkpoint checkpoint = trainer::train(config);
  const trainer::Dataset test =
      trainer::build_dataset(config.system, config.seeds.data + 2, config.test_size);
  const RunMetrics metrics = evaluate_checkpoint(checkpoint, test, "m0");
  CHECK(metrics.n == 2);
  CHECK(metrics.pairs.size() == 64);
  CHECK(metrics.l1 >= 0.0);
  CHECK(metrics.l1 <= 0.5);
  for (const Pair& p : metrics.pairs) {
    CHECK(p.estimate >= 0.0);
    CHECK(p.estimate <= 0.5);
  }
}

TEST_CASE("csv emitters produce the documented layouts") {
  const std::vector<RunMetrics> models{metrics_stub("m0", 5, 0.0145, 0.9871)};
  const std::string metrics = metrics_csv(models);
  CHECK(metrics.find("model_id,n,l1,r2") == 0);
  CHECK(metrics.find("m0,5,") != std::string::npos);

  const Aggregate agg = aggregate(models);
  const std::string table = table_csv({{5, agg}});
  CHECK(table.find("n,l1_mean,l1_best,r2_mean,r2_best") == 0);
  CHECK(table.find("5,0.0145(00),0.0145,0.9871(00),0.9871") != std::string::npos);

  Histogram2D hist;
  hist.at(0, 0) = 3;
  hist.total = 3;
  const std::string grid = histogram_csv(hist);
  CHECK(grid.substr(0, 4) == "3,0,");
  CHECK(std::count(grid.begin(), grid.end(), '\n') == Histogram2D::kBins);
}
