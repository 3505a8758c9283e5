#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "negadapt/adgrad.hpp"
#include "negadapt/qstate.hpp"

namespace negadapt::policynet {

inline constexpr int kHiddenSize = 128;
inline constexpr int kHeadWidth = 256;

// LSTM trunk with two fully connected heads. Gate order inside the packed
// 4H-wide tensors is (input, forget, cell, output). Weights are stored
// (fan_in x fan_out) so a batch forward is one row-major matmul.
struct ModelParams {
  qstate::SystemKind system = qstate::SystemKind::QubitQubit;
  adgrad::Tensor lstm_wx;  // input_dim x 4H
  adgrad::Tensor lstm_wh;  // H x 4H
  adgrad::Tensor lstm_b;   // 1 x 4H
  adgrad::Tensor neg_w1;   // H x 256
  adgrad::Tensor neg_b1;   // 1 x 256
  adgrad::Tensor neg_w2;   // 256 x 1
  adgrad::Tensor neg_b2;   // 1 x 1
  adgrad::Tensor prop_w1;  // H x 256
  adgrad::Tensor prop_b1;  // 1 x 256
  adgrad::Tensor prop_w2;  // 256 x proposal_dim
  adgrad::Tensor prop_b2;  // 1 x proposal_dim

  int local_dim() const { return qstate::local_dim(system); }
  // Raw parameter count of one projector: interleaved (re, im) amplitudes.
  int param_dim() const { return 2 * local_dim(); }
  // Per-iteration features: [P_i, decoded x_i, decoded y_i].
  int input_dim() const { return 1 + 2 * param_dim(); }
  // Raw parameters of the proposed (x, y) pair for the next iteration.
  int proposal_dim() const { return 2 * param_dim(); }

  std::vector<std::pair<std::string, adgrad::Tensor*>> named_tensors();
  std::vector<std::pair<std::string, const adgrad::Tensor*>> named_tensors() const;
  std::vector<adgrad::Tensor*> tensors();
};

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights from Philox(seed),
// drawn tensor by tensor in named order, row-major. Biases zero except the
// forget-gate slice, set to one.
ModelParams init_params(qstate::SystemKind system, std::uint64_t seed);

// Estimates leave the network unclamped during training; evaluation clips
// them to the physical range.
double clamp_estimate(double value);

struct BasisEntry {
  std::vector<double> x;  // raw projector parameters, 2 * local_dim reals
  std::vector<double> y;
};

// Built-in non-adaptive measurement sequence. For qubits: ordered pairs of
// Pauli eigenstates; for qutrits: canonical kets and balanced superpositions.
// Entry k seeds iteration k+1; entry 0 is the fixed |0><0| first setting.
std::vector<BasisEntry> default_basis_list(qstate::SystemKind system);

// JSON file: [{"x": [...], "y": [...]}, ...] with 2*local_dim reals each.
std::vector<BasisEntry> load_basis_list(const std::string& path, qstate::SystemKind system);

enum class RolloutMode { Adaptive, Fixed };

RolloutMode mode_from_string(const std::string& name);
std::string to_string(RolloutMode mode);

// Parameter leaves registered on a tape, in named_tensors order.
struct ParamVars {
  adgrad::Var lstm_wx, lstm_wh, lstm_b;
  adgrad::Var neg_w1, neg_b1, neg_w2, neg_b2;
  adgrad::Var prop_w1, prop_b1, prop_w2, prop_b2;
  std::vector<adgrad::Var> ordered;
};

ParamVars leaf_params(adgrad::Tape& tape, const ModelParams& params, bool requires_grad);

struct StepResult {
  adgrad::Var hidden;
  adgrad::Var cell;
  adgrad::Var estimate;  // B x 1
  adgrad::Var proposal;  // B x proposal_dim; invalid when not requested
};

// One recurrent update plus both heads on the new hidden state.
StepResult step(adgrad::Tape& tape, const ParamVars& params, int input_dim, adgrad::Var hidden,
                adgrad::Var cell, adgrad::Var input, bool want_proposal);

// Differentiable n-iteration rollout over a batch of effective operators.
// Iteration 1 measures the fixed |0><0| pair; iterations 2..n use the
// proposal head (adaptive) or basis entries (fixed).
struct RolloutGraph {
  std::vector<adgrad::Var> estimates;      // n vars, B x 1
  std::vector<adgrad::Var> probabilities;  // n vars, B x 1
  std::vector<adgrad::Tensor> x_used;      // raw parameters measured, B x param_dim
  std::vector<adgrad::Tensor> y_used;
};

RolloutGraph rollout_graph(adgrad::Tape& tape, const ParamVars& params,
                           qstate::SystemKind system,
                           const std::vector<const qstate::EffectiveOperator*>& states, int n,
                           RolloutMode mode, const std::vector<BasisEntry>* basis);

// Per-state view of a forward-only rollout.
struct RolloutRecord {
  std::vector<double> probabilities;        // n
  std::vector<double> estimates;            // n, unclamped
  std::vector<std::vector<double>> x_raw;   // n x param_dim
  std::vector<std::vector<double>> y_raw;
};

std::vector<RolloutRecord> run_rollout(const ModelParams& params,
                                       const std::vector<const qstate::EffectiveOperator*>& states,
                                       int n, RolloutMode mode,
                                       const std::vector<BasisEntry>* basis);

}  // namespace negadapt::policynet
