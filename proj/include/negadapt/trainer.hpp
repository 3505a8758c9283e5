#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "negadapt/policynet.hpp"
#include "negadapt/qstate.hpp"

namespace negadapt::trainer {

enum class LossKind { Greedy, Last };

LossKind loss_from_string(const std::string& name);
std::string to_string(LossKind kind);

struct Seeds {
  std::uint64_t data = 1;
  std::uint64_t model = 1;
};

// Full-scale defaults; desk-scale runs override the set sizes and schedule.
struct RunConfig {
  qstate::SystemKind system = qstate::SystemKind::QubitQubit;
  policynet::RolloutMode mode = policynet::RolloutMode::Adaptive;
  LossKind loss = LossKind::Last;
  int iterations = 5;
  std::int64_t train_size = 1 << 18;
  std::int64_t val_size = 1 << 16;
  std::int64_t test_size = 1 << 16;
  double learning_rate = 1e-3;
  int batch_start = 32;
  int batch_max = 512;
  int patience = 10;
  // Safety cap on top of the batch-doubling termination rule; 0 trains the
  // initialized model only (epoch-0 checkpoint).
  int max_epochs = 1000;
  Seeds seeds;
  std::string basis_list_path;  // fixed mode; empty selects the built-in list
  bool deterministic = false;

  void validate() const;
};

// Precomputed per-state measurement operators and negativity targets; the
// density matrices themselves are not retained.
struct Dataset {
  qstate::SystemKind system = qstate::SystemKind::QubitQubit;
  std::uint64_t seed = 0;
  std::vector<qstate::EffectiveOperator> ops;
  std::vector<double> targets;

  std::int64_t size() const { return static_cast<std::int64_t>(ops.size()); }
};

Dataset build_dataset(qstate::SystemKind system, std::uint64_t seed, std::int64_t count);

// Mean squared error over every iteration of every record (greedy) or over
// the final iteration only (last).
double loss_greedy(std::span<const policynet::RolloutRecord> records,
                   std::span<const double> targets);
double loss_last(std::span<const policynet::RolloutRecord> records,
                 std::span<const double> targets);

struct EpochStat {
  int epoch = 0;
  int batch_size = 0;
  double val_loss = 0.0;
  bool improved = false;
};

struct Checkpoint {
  policynet::ModelParams params;  // best-validation snapshot
  RunConfig config;
  double best_val_loss = 0.0;
  int best_epoch = 0;
  // <N_hat_n> over the training set with the snapshot parameters, clamped to
  // the physical range; feeds the reported determination coefficient.
  double train_pred_mean = 0.0;
  std::vector<EpochStat> history;
};

using EpochLogger = std::function<void(const EpochStat&)>;

// Loss of `params` over a whole dataset, evaluated forward-only in fixed
// chunk order (deterministic reduction).
double evaluate_loss(const policynet::ModelParams& params, const Dataset& data,
                     const RunConfig& config, const std::vector<policynet::BasisEntry>* basis);

// Mini-batch Adam training with validation-driven batch doubling: a stall of
// `patience` epochs doubles the batch size (capped at batch_max, patience
// reset); a stall at batch_max terminates. Returns the best-validation
// checkpoint. Gradients carry a safety clip at global norm 100.
Checkpoint train(const RunConfig& config, const EpochLogger& log = nullptr);

// Independent repeats with model seeds (seeds.model + r) and shared data
// seeds; runs up to max_parallel repeats concurrently (1 when the config is
// deterministic).
std::vector<Checkpoint> train_series(const RunConfig& config, int repeats, int max_parallel,
                                     const EpochLogger& log = nullptr);

// Worker cap from NEGADAPT_THREADS, defaulting to the hardware concurrency.
int worker_cap();

}  // namespace negadapt::trainer
