#include "negadapt/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "negadapt/errors.hpp"
#include "test_support.hpp"

using namespace negadapt;
using namespace negadapt::trainer;
using policynet::RolloutMode;
using policynet::RolloutRecord;

namespace {

RolloutRecord record_with_estimates(std::vector<double> estimates) {
  RolloutRecord rec;
  rec.estimates = std::move(estimates);
  rec.probabilities.assign(rec.estimates.size(), 0.0);
  return rec;
}

RunConfig tiny_config() {
  RunConfig config;
  config.system = qstate::SystemKind::QubitQubit;
  config.mode = RolloutMode::Adaptive;
  config.loss = LossKind::Greedy;
  config.iterations = 2;
  config.train_size = 128;
  config.val_size = 64;
  config.test_size = 64;
  config.batch_start = 32;
  config.batch_max = 64;
  config.patience = 2;
  config.max_epochs = 3;
  config.seeds = {11, 21};
  return config;
}

}  // namespace

TEST_CASE("greedy loss arithmetic") {
  SUBCASE("single state, two iterations") {
    const std::vector<RolloutRecord> records{record_with_estimates({0.2, 0.1})};
    const std::vector<double> targets{0.0};
    CHECK(loss_greedy(records, targets) == doctest::Approx(0.025).epsilon(1e-12));
  }
  SUBCASE("two states, one iteration") {
    const std::vector<RolloutRecord> records{record_with_estimates({0.1}),
                                             record_with_estimates({0.3})};
    const std::vector<double> targets{0.0, 0.0};
    CHECK(loss_greedy(records, targets) == doctest::Approx(0.05).epsilon(1e-12));
  }
  SUBCASE("perfect predictions vanish") {
    const std::vector<RolloutRecord> records{record_with_estimates({0.25, 0.25})};
    const std::vector<double> targets{0.25};
    CHECK(loss_greedy(records, targets) == 0.0);
  }
}

TEST_CASE("last loss arithmetic") {
  SUBCASE("only the final iteration enters") {
    const std::vector<RolloutRecord> records{record_with_estimates({5.0, 0.1})};
    const std::vector<double> targets{0.0};
    CHECK(loss_last(records, targets) == doctest::Approx(0.01).epsilon(1e-12));
  }
  SUBCASE("coincides with greedy for one iteration") {
    const std::vector<RolloutRecord> records{record_with_estimates({0.17}),
                                             record_with_estimates({0.42})};
    const std::vector<double> targets{0.3, 0.1};
    CHECK(loss_last(records, targets) == loss_greedy(records, targets));
  }
}

TEST_CASE("loss functions validate alignment") {
  const std::vector<RolloutRecord> records{record_with_estimates({0.1})};
  const std::vector<double> two_targets{0.0, 0.0};
  CHECK_THROWS_AS(loss_greedy(records, two_targets), LengthMismatchError);
  CHECK_THROWS_AS(loss_last(std::vector<RolloutRecord>{}, std::vector<double>{}),
                  LengthMismatchError);
}

TEST_CASE("greedy loss equals the mean of per-iteration last-style losses") {
  Philox rng(500);
  const int batch = 7;
  const int n = 4;
  std::vector<RolloutRecord> records;
  std::vector<double> targets;
  for (int s = 0; s < batch; ++s) {
    std::vector<double> est(static_cast<std::size_t>(n));
    for (auto& v : est) v = rng.next_double();
    records.push_back(record_with_estimates(std::move(est)));
    targets.push_back(rng.next_double() * 0.5);
  }
  double mean_of_last = 0.0;
  for (int i = 0; i < n; ++i) {
    double per_iter = 0.0;
    for (int s = 0; s < batch; ++s) {
      const double e = records[static_cast<std::size_t>(s)].estimates[static_cast<std::size_t>(i)] -
                       targets[static_cast<std::size_t>(s)];
      per_iter += e * e;
    }
    mean_of_last += per_iter / batch;
  }
  mean_of_last /= n;
  CHECK(std::abs(loss_greedy(records, targets) - mean_of_last) < 1e-12);
}

TEST_CASE("config validation") {
  RunConfig config = tiny_config();
  CHECK_NOTHROW(config.validate());
  config.iterations = 1;
  CHECK_THROWS_AS(config.validate(), BadIterationCountError);
  config = tiny_config();
  config.iterations = 11;
  CHECK_THROWS_AS(config.validate(), BadIterationCountError);
  config = tiny_config();
  config.batch_max = 8;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = tiny_config();
  config.learning_rate = 0.0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
}

TEST_CASE("dataset builder is deterministic and labeled") {
  const Dataset a = build_dataset(qstate::SystemKind::QubitQubit, 5, 16);
  const Dataset b = build_dataset(qstate::SystemKind::QubitQubit, 5, 16);
  REQUIRE(a.size() == 16);
  CHECK(a.targets == b.targets);
  for (std::int64_t i = 0; i < a.size(); ++i) {
    CHECK(a.targets[static_cast<std::size_t>(i)] >= 0.0);
    CHECK(a.targets[static_cast<std::size_t>(i)] <= 0.5);
  }
  CHECK(a.ops.front().mat.data() == b.ops.front().mat.data());
}

TEST_CASE("evaluate_loss agrees with the pure loss on rollout records") {
  const Dataset data = build_dataset(qstate::SystemKind::QubitQubit, 9, 40);
  RunConfig config = tiny_config();
  config.iterations = 3;
  const policynet::ModelParams params = policynet::init_params(config.system, 3);

  std::vector<const qstate::EffectiveOperator*> ops;
  for (const auto& op : data.ops) ops.push_back(&op);
  const auto records =
      policynet::run_rollout(params, ops, config.iterations, config.mode, nullptr);

  config.loss = LossKind::Greedy;
  CHECK(std::abs(evaluate_loss(params, data, config, nullptr) -
                 loss_greedy(records, data.targets)) < 1e-15);
  config.loss = LossKind::Last;
  CHECK(std::abs(evaluate_loss(params, data, config, nullptr) -
                 loss_last(records, data.targets)) < 1e-15);
}

TEST_CASE("desk-scale smoke training beats the initialized model") {
  RunConfig config;
  config.system = qstate::SystemKind::QubitQubit;
  config.mode = RolloutMode::Adaptive;
  config.loss = LossKind::Greedy;
  config.iterations = 3;
  config.train_size = 1 << 10;
  config.val_size = 1 << 8;
  config.test_size = 1 << 8;
  config.batch_start = 32;
  config.batch_max = 64;
  config.patience = 3;
  config.max_epochs = 8;
  config.seeds = {1, 2};

  const Checkpoint result = train(config);
  REQUIRE(result.history.size() >= 2);
  const double initial = result.history.front().val_loss;
  CHECK(result.best_val_loss < initial);
  CHECK(result.best_epoch >= 1);
  CHECK(result.train_pred_mean >= 0.0);
  CHECK(result.train_pred_mean <= 0.5);

  // The snapshot reproduces its recorded validation loss.
  CHECK(std::abs(evaluate_loss(result.params, build_dataset(config.system, config.seeds.data + 1,
                                                            config.val_size),
                               config, nullptr) -
                 result.best_val_loss) < 1e-12);

  // Best checkpoint is the minimum over all epoch evaluations.
  double min_seen = result.history.front().val_loss;
  for (const auto& stat : result.history) min_seen = std::min(min_seen, stat.val_loss);
  CHECK(result.best_val_loss == doctest::Approx(min_seen).epsilon(1e-15));
}

TEST_CASE("identical configs and seeds give identical checkpoints") {
  const RunConfig config = tiny_config();
  const Checkpoint a = train(config);
  const Checkpoint b = train(config);
  const auto named_a = a.params.named_tensors();
  const auto named_b = b.params.named_tensors();
  for (std::size_t i = 0; i < named_a.size(); ++i) {
    CHECK(named_a[i].second->data == named_b[i].second->data);
  }
  CHECK(a.best_val_loss == b.best_val_loss);
  CHECK(a.history.size() == b.history.size());
}

TEST_CASE("fixed mode rejects short basis lists before any epoch") {
  const std::string path = "short_basis_tmp.json";
  {
    std::ofstream out(path);
    out << R"([{"x": [1,0,0,0], "y": [1,0,0,0]}, {"x": [0,0,1,0], "y": [0,0,1,0]}])";
  }
  RunConfig config = tiny_config();
  config.mode = RolloutMode::Fixed;
  config.iterations = 5;
  config.basis_list_path = path;
  CHECK_THROWS_AS(train(config), BasisListTooShortError);
  std::remove(path.c_str());
}

TEST_CASE("batch sizes follow the doubling schedule") {
  RunConfig config = tiny_config();
  config.train_size = 256;
  config.val_size = 64;
  config.patience = 1;
  config.batch_start = 32;
  config.batch_max = 128;
  config.max_epochs = 60;
  const Checkpoint result = train(config);

  int previous = config.batch_start;
  for (const auto& stat : result.history) {
    CHECK(stat.batch_size >= previous);
    CHECK((stat.batch_size == 32 || stat.batch_size == 64 || stat.batch_size == 128));
    // Doubling never skips a size.
    CHECK(stat.batch_size <= previous * 2);
    previous = stat.batch_size;
  }
}

TEST_CASE("max_epochs zero returns the initialized model") {
  RunConfig config = tiny_config();
  config.max_epochs = 0;
  const Checkpoint result = train(config);
  CHECK(result.best_epoch == 0);
  CHECK(result.history.size() == 1);
  const policynet::ModelParams fresh = policynet::init_params(config.system, config.seeds.model);
  CHECK(result.params.lstm_wx.data == fresh.lstm_wx.data);
}

TEST_CASE("train_series uses distinct model seeds and parallel equals serial") {
  RunConfig config = tiny_config();
  config.max_epochs = 2;
  const auto serial = train_series(config, 2, 1);
  const auto parallel = train_series(config, 2, 2);
  REQUIRE(serial.size() == 2);
  REQUIRE(parallel.size() == 2);
  CHECK(serial[0].params.lstm_wx.data != serial[1].params.lstm_wx.data);
  for (int r = 0; r < 2; ++r) {
    CHECK(serial[static_cast<std::size_t>(r)].params.lstm_wx.data ==
          parallel[static_cast<std::size_t>(r)].params.lstm_wx.data);
    CHECK(serial[static_cast<std::size_t>(r)].best_val_loss ==
          parallel[static_cast<std::size_t>(r)].best_val_loss);
    CHECK(serial[static_cast<std::size_t>(r)].config.seeds.model ==
          config.seeds.model + static_cast<std::uint64_t>(r));
  }
}
