#include "negadapt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "negadapt/adgrad.hpp"
#include "negadapt/errors.hpp"
#include "negadapt/rng.hpp"

namespace negadapt::trainer {

using adgrad::Tape;
using adgrad::Tensor;
using adgrad::Var;
using policynet::BasisEntry;
using policynet::ModelParams;
using policynet::ParamVars;
using policynet::RolloutMode;

LossKind loss_from_string(const std::string& name) {
  if (name == "greedy") return LossKind::Greedy;
  if (name == "last") return LossKind::Last;
  throw ConfigError("unknown loss '" + name + "' (expected greedy or last)");
}

std::string to_string(LossKind kind) { return kind == LossKind::Greedy ? "greedy" : "last"; }

void RunConfig::validate() const {
  if (iterations < 2) throw BadIterationCountError("config: iterations must be >= 2");
  if (iterations > qstate::max_iterations(system)) {
    throw BadIterationCountError("config: iterations exceed the system limit");
  }
  if (train_size < 1 || val_size < 1 || test_size < 1) {
    throw ConfigError("config: dataset sizes must be positive");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("config: learning rate must be positive");
  if (batch_start < 1 || batch_max < batch_start) {
    throw ConfigError("config: need 1 <= batch_start <= batch_max");
  }
  if (patience < 1) throw ConfigError("config: patience must be >= 1");
  if (max_epochs < 0) throw ConfigError("config: max_epochs must be >= 0");
}

Dataset build_dataset(qstate::SystemKind system, std::uint64_t seed, std::int64_t count) {
  Dataset data;
  data.system = system;
  data.seed = seed;
  data.ops.reserve(static_cast<std::size_t>(count));
  data.targets.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    qstate::LabeledState state =
        qstate::make_labeled_state(system, seed, static_cast<std::uint64_t>(i));
    data.ops.push_back(qstate::build_effective_operator(state.rho));
    data.targets.push_back(state.negativity);
  }
  return data;
}

namespace {

void check_aligned(std::span<const policynet::RolloutRecord> records,
                   std::span<const double> targets) {
  if (records.empty() || records.size() != targets.size()) {
    throw LengthMismatchError("loss: records and targets must align and be nonempty");
  }
}

}  // namespace

double loss_greedy(std::span<const policynet::RolloutRecord> records,
                   std::span<const double> targets) {
  check_aligned(records, targets);
  const std::size_t n = records.front().estimates.size();
  double acc = 0.0;
  for (std::size_t s = 0; s < records.size(); ++s) {
    if (records[s].estimates.size() != n) {
      throw LengthMismatchError("loss: ragged iteration counts");
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double e = records[s].estimates[i] - targets[s];
      acc += e * e;
    }
  }
  return acc / (static_cast<double>(n) * static_cast<double>(records.size()));
}

double loss_last(std::span<const policynet::RolloutRecord> records,
                 std::span<const double> targets) {
  check_aligned(records, targets);
  double acc = 0.0;
  for (std::size_t s = 0; s < records.size(); ++s) {
    const double e = records[s].estimates.back() - targets[s];
    acc += e * e;
  }
  return acc / static_cast<double>(records.size());
}

namespace {

constexpr double kClipNorm = 100.0;
constexpr double kImprovementSlack = 1e-7;
constexpr std::int64_t kEvalChunk = 256;
// Stream tags keep shuffle draws disjoint from weight-init draws.
constexpr std::uint64_t kShuffleStreamBase = 1ull << 32;

const std::vector<BasisEntry>* resolve_basis(const RunConfig& config,
                                             std::vector<BasisEntry>& storage) {
  if (config.mode != RolloutMode::Fixed) return nullptr;
  storage = config.basis_list_path.empty()
                ? policynet::default_basis_list(config.system)
                : policynet::load_basis_list(config.basis_list_path, config.system);
  if (static_cast<int>(storage.size()) < config.iterations) {
    throw BasisListTooShortError("basis list shorter than the iteration count");
  }
  return &storage;
}

// Squared-error sums of one forward chunk, accumulated into (greedy, last).
struct LossAccumulator {
  double greedy_sq = 0.0;
  double last_sq = 0.0;
  std::int64_t count = 0;
};

void accumulate_chunk(const ModelParams& params, const Dataset& data, std::int64_t begin,
                      std::int64_t end, int iterations, RolloutMode mode,
                      const std::vector<BasisEntry>* basis, LossAccumulator& acc) {
  Tape tape;
  const ParamVars vars = policynet::leaf_params(tape, params, false);
  std::vector<const qstate::EffectiveOperator*> ops;
  ops.reserve(static_cast<std::size_t>(end - begin));
  for (std::int64_t i = begin; i < end; ++i) {
    ops.push_back(&data.ops[static_cast<std::size_t>(i)]);
  }
  const policynet::RolloutGraph graph =
      policynet::rollout_graph(tape, vars, params.system, ops, iterations, mode, basis);
  for (std::int64_t i = begin; i < end; ++i) {
    const double target = data.targets[static_cast<std::size_t>(i)];
    const int row = static_cast<int>(i - begin);
    for (int it = 0; it < iterations; ++it) {
      const double e = tape.value(graph.estimates[static_cast<std::size_t>(it)]).at(row, 0) - target;
      acc.greedy_sq += e * e;
      if (it == iterations - 1) acc.last_sq += e * e;
    }
  }
  acc.count += end - begin;
}

}  // namespace

double evaluate_loss(const ModelParams& params, const Dataset& data, const RunConfig& config,
                     const std::vector<BasisEntry>* basis) {
  LossAccumulator acc;
  for (std::int64_t begin = 0; begin < data.size(); begin += kEvalChunk) {
    const std::int64_t end = std::min(data.size(), begin + kEvalChunk);
    accumulate_chunk(params, data, begin, end, config.iterations, config.mode, basis, acc);
  }
  if (acc.count == 0) throw EmptySetError("evaluate_loss: empty dataset");
  if (config.loss == LossKind::Greedy) {
    return acc.greedy_sq / (static_cast<double>(config.iterations) * static_cast<double>(acc.count));
  }
  return acc.last_sq / static_cast<double>(acc.count);
}

namespace {

// Mean clamped final-iteration prediction over a dataset.
double prediction_mean(const ModelParams& params, const Dataset& data, const RunConfig& config,
                       const std::vector<BasisEntry>* basis) {
  double acc = 0.0;
  for (std::int64_t begin = 0; begin < data.size(); begin += kEvalChunk) {
    const std::int64_t end = std::min(data.size(), begin + kEvalChunk);
    Tape tape;
    const ParamVars vars = policynet::leaf_params(tape, params, false);
    std::vector<const qstate::EffectiveOperator*> ops;
    for (std::int64_t i = begin; i < end; ++i) ops.push_back(&data.ops[static_cast<std::size_t>(i)]);
    const policynet::RolloutGraph graph = policynet::rollout_graph(
        tape, vars, params.system, ops, config.iterations, config.mode, basis);
    const Tensor& last = tape.value(graph.estimates.back());
    for (int row = 0; row < last.rows; ++row) {
      acc += policynet::clamp_estimate(last.at(row, 0));
    }
  }
  return acc / static_cast<double>(data.size());
}

void shuffle_indices(std::vector<std::int64_t>& indices, std::uint64_t model_seed, int epoch) {
  Philox rng(model_seed, kShuffleStreamBase + static_cast<std::uint64_t>(epoch));
  for (std::size_t i = indices.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
    std::swap(indices[i - 1], indices[j]);
  }
}

}  // namespace

Checkpoint train(const RunConfig& config, const EpochLogger& log) {
  config.validate();
  std::vector<BasisEntry> basis_storage;
  const std::vector<BasisEntry>* basis = resolve_basis(config, basis_storage);

  const Dataset train_set = build_dataset(config.system, config.seeds.data, config.train_size);
  const Dataset val_set = build_dataset(config.system, config.seeds.data + 1, config.val_size);

  ModelParams params = policynet::init_params(config.system, config.seeds.model);
  std::vector<Tensor*> param_tensors = params.tensors();
  adgrad::AdamState adam = adgrad::make_adam(param_tensors, config.learning_rate);

  Checkpoint best;
  best.config = config;
  best.params = params;
  best.best_val_loss = evaluate_loss(params, val_set, config, basis);
  best.best_epoch = 0;
  best.history.push_back({0, config.batch_start, best.best_val_loss, true});
  if (log) log(best.history.back());

  std::vector<std::int64_t> indices(static_cast<std::size_t>(train_set.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = static_cast<std::int64_t>(i);

  int batch_size = config.batch_start;
  int stall = 0;
  Tensor targets_chunk;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle_indices(indices, config.seeds.model, epoch);

    for (std::int64_t begin = 0; begin < train_set.size(); begin += batch_size) {
      const std::int64_t end = std::min<std::int64_t>(train_set.size(), begin + batch_size);
      const int rows = static_cast<int>(end - begin);

      Tape tape;
      const ParamVars vars = policynet::leaf_params(tape, params, true);
      std::vector<const qstate::EffectiveOperator*> ops;
      ops.reserve(static_cast<std::size_t>(rows));
      targets_chunk = Tensor(rows, 1);
      for (int r = 0; r < rows; ++r) {
        const std::int64_t idx = indices[static_cast<std::size_t>(begin + r)];
        ops.push_back(&train_set.ops[static_cast<std::size_t>(idx)]);
        targets_chunk.at(r, 0) = train_set.targets[static_cast<std::size_t>(idx)];
      }
      const policynet::RolloutGraph graph = policynet::rollout_graph(
          tape, vars, config.system, ops, config.iterations, config.mode, basis);

      const Var target_var = tape.leaf(targets_chunk);
      Var loss;
      if (config.loss == LossKind::Greedy) {
        std::vector<Var> errors;
        errors.reserve(graph.estimates.size());
        for (const Var est : graph.estimates) errors.push_back(tape.sub(est, target_var));
        loss = tape.mean_square(tape.concat_cols(errors));
      } else {
        loss = tape.mean_square(tape.sub(graph.estimates.back(), target_var));
      }
      tape.backward(loss);

      std::vector<Tensor> grads;
      grads.reserve(vars.ordered.size());
      for (const Var v : vars.ordered) grads.push_back(tape.grad(v));
      std::vector<Tensor*> grad_ptrs;
      for (auto& g : grads) grad_ptrs.push_back(&g);
      adgrad::clip_global_norm(grad_ptrs, kClipNorm);
      std::vector<const Tensor*> grad_view(grad_ptrs.begin(), grad_ptrs.end());
      adgrad::adam_step(adam, param_tensors, grad_view);
    }

    const double val_loss = evaluate_loss(params, val_set, config, basis);
    const bool improved = val_loss < best.best_val_loss - kImprovementSlack;
    if (improved) {
      best.params = params;
      best.best_val_loss = val_loss;
      best.best_epoch = epoch;
      stall = 0;
    } else {
      ++stall;
    }
    best.history.push_back({epoch, batch_size, val_loss, improved});
    if (log) log(best.history.back());

    if (stall >= config.patience) {
      if (batch_size >= config.batch_max) break;
      batch_size = std::min(batch_size * 2, config.batch_max);
      stall = 0;
    }
  }

  best.train_pred_mean = prediction_mean(best.params, train_set, config, basis);
  return best;
}

std::vector<Checkpoint> train_series(const RunConfig& config, int repeats, int max_parallel,
                                     const EpochLogger& log) {
  if (repeats < 1) throw ConfigError("train_series: repeats must be >= 1");
  config.validate();
  const int parallel = config.deterministic ? 1 : std::max(1, max_parallel);

  std::vector<Checkpoint> results(static_cast<std::size_t>(repeats));
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(repeats));
  for (int wave = 0; wave < repeats; wave += parallel) {
    const int count = std::min(parallel, repeats - wave);
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(count));
    for (int r = 0; r < count; ++r) {
      const int repeat = wave + r;
      workers.emplace_back([&, repeat]() {
        try {
          RunConfig local = config;
          local.seeds.model = config.seeds.model + static_cast<std::uint64_t>(repeat);
          results[static_cast<std::size_t>(repeat)] = train(local, log);
        } catch (...) {
          failures[static_cast<std::size_t>(repeat)] = std::current_exception();
        }
      });
    }
    for (auto& w : workers) w.join();
  }
  for (const auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }
  return results;
}

int worker_cap() {
  if (const char* env = std::getenv("NEGADAPT_THREADS")) {
    const int parsed = std::atoi(env);
    if (parsed >= 1) return parsed;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace negadapt::trainer
