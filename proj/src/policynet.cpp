#include "negadapt/policynet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "negadapt/errors.hpp"
#include "negadapt/rng.hpp"

namespace negadapt::policynet {

using adgrad::Tape;
using adgrad::Tensor;
using adgrad::Var;

std::vector<std::pair<std::string, adgrad::Tensor*>> ModelParams::named_tensors() {
  return {
      {"lstm.wx", &lstm_wx}, {"lstm.wh", &lstm_wh}, {"lstm.b", &lstm_b},
      {"neg.w1", &neg_w1},   {"neg.b1", &neg_b1},   {"neg.w2", &neg_w2},
      {"neg.b2", &neg_b2},   {"prop.w1", &prop_w1}, {"prop.b1", &prop_b1},
      {"prop.w2", &prop_w2}, {"prop.b2", &prop_b2},
  };
}

std::vector<std::pair<std::string, const adgrad::Tensor*>> ModelParams::named_tensors() const {
  auto mutable_named = const_cast<ModelParams*>(this)->named_tensors();
  std::vector<std::pair<std::string, const adgrad::Tensor*>> out;
  out.reserve(mutable_named.size());
  for (auto& [name, tensor] : mutable_named) out.emplace_back(name, tensor);
  return out;
}

std::vector<adgrad::Tensor*> ModelParams::tensors() {
  std::vector<adgrad::Tensor*> out;
  for (auto& [name, tensor] : named_tensors()) out.push_back(tensor);
  return out;
}

ModelParams init_params(qstate::SystemKind system, std::uint64_t seed) {
  ModelParams p;
  p.system = system;
  const int in = p.input_dim();
  const int h = kHiddenSize;
  const int w = kHeadWidth;
  p.lstm_wx = Tensor(in, 4 * h);
  p.lstm_wh = Tensor(h, 4 * h);
  p.lstm_b = Tensor(1, 4 * h);
  p.neg_w1 = Tensor(h, w);
  p.neg_b1 = Tensor(1, w);
  p.neg_w2 = Tensor(w, 1);
  p.neg_b2 = Tensor(1, 1);
  p.prop_w1 = Tensor(h, w);
  p.prop_b1 = Tensor(1, w);
  p.prop_w2 = Tensor(w, p.proposal_dim());
  p.prop_b2 = Tensor(1, p.proposal_dim());

  Philox rng(seed);
  for (auto& [name, tensor] : p.named_tensors()) {
    if (name.find(".b") != std::string::npos) continue;  // biases stay zero
    const double bound = 1.0 / std::sqrt(static_cast<double>(tensor->rows));
    for (auto& v : tensor->data) v = (2.0 * rng.next_double() - 1.0) * bound;
  }
  // Forget-gate bias starts open.
  for (int j = h; j < 2 * h; ++j) p.lstm_b.data[static_cast<std::size_t>(j)] = 1.0;
  return p;
}

double clamp_estimate(double value) { return std::clamp(value, 0.0, 0.5); }

namespace {

std::vector<double> ket_qubit(double re0, double im0, double re1, double im1) {
  return {re0, im0, re1, im1};
}

}  // namespace

std::vector<BasisEntry> default_basis_list(qstate::SystemKind system) {
  std::vector<BasisEntry> list;
  if (system == qstate::SystemKind::QubitQubit) {
    const double s = 1.0 / std::sqrt(2.0);
    const auto k0 = ket_qubit(1, 0, 0, 0);
    const auto k1 = ket_qubit(0, 0, 1, 0);
    const auto plus = ket_qubit(s, 0, s, 0);
    const auto plus_i = ket_qubit(s, 0, 0, s);
    const int pairs[10][2] = {{0, 0}, {2, 2}, {3, 3}, {0, 2}, {2, 0},
                              {0, 3}, {3, 0}, {2, 3}, {3, 2}, {1, 1}};
    const std::vector<std::vector<double>> kets{k0, k1, plus, plus_i};
    for (const auto& [a, b] : pairs) {
      list.push_back({kets[static_cast<std::size_t>(a)], kets[static_cast<std::size_t>(b)]});
    }
    return list;
  }

  // Qutrit kets: canonical basis plus the three balanced Fourier
  // superpositions f_k = (1, w^k, w^2k)/sqrt(3), w = exp(2 pi i / 3).
  const double t = 1.0 / std::sqrt(3.0);
  std::vector<std::vector<double>> kets;
  for (int k = 0; k < 3; ++k) {
    std::vector<double> ket(6, 0.0);
    ket[static_cast<std::size_t>(2 * k)] = 1.0;
    kets.push_back(ket);
  }
  for (int k = 0; k < 3; ++k) {
    std::vector<double> ket(6);
    for (int j = 0; j < 3; ++j) {
      const double phase = 2.0 * M_PI * k * j / 3.0;
      ket[static_cast<std::size_t>(2 * j)] = t * std::cos(phase);
      ket[static_cast<std::size_t>(2 * j + 1)] = t * std::sin(phase);
    }
    kets.push_back(ket);
  }
  const int pairs[21][2] = {{0, 0}, {3, 3}, {4, 4}, {0, 3}, {3, 0}, {1, 1}, {5, 5},
                            {0, 4}, {4, 0}, {2, 2}, {1, 3}, {3, 1}, {1, 4}, {4, 1},
                            {2, 3}, {3, 2}, {2, 4}, {4, 2}, {0, 5}, {5, 0}, {5, 3}};
  for (const auto& [a, b] : pairs) {
    list.push_back({kets[static_cast<std::size_t>(a)], kets[static_cast<std::size_t>(b)]});
  }
  return list;
}

std::vector<BasisEntry> load_basis_list(const std::string& path, qstate::SystemKind system) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open basis list '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("basis list '" + path + "' is not valid JSON: " + e.what());
  }
  if (!doc.is_array()) throw ConfigError("basis list must be a JSON array");
  const std::size_t want = static_cast<std::size_t>(2 * qstate::local_dim(system));
  std::vector<BasisEntry> list;
  for (const auto& item : doc) {
    BasisEntry entry;
    try {
      entry.x = item.at("x").get<std::vector<double>>();
      entry.y = item.at("y").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("basis entry malformed: ") + e.what());
    }
    if (entry.x.size() != want || entry.y.size() != want) {
      throw ConfigError("basis entry length must be 2*local_dim reals");
    }
    list.push_back(std::move(entry));
  }
  return list;
}

RolloutMode mode_from_string(const std::string& name) {
  if (name == "adaptive") return RolloutMode::Adaptive;
  if (name == "fixed") return RolloutMode::Fixed;
  throw ConfigError("unknown mode '" + name + "' (expected adaptive or fixed)");
}

std::string to_string(RolloutMode mode) {
  return mode == RolloutMode::Adaptive ? "adaptive" : "fixed";
}

ParamVars leaf_params(Tape& tape, const ModelParams& params, bool requires_grad) {
  ParamVars v;
  const auto named = params.named_tensors();
  std::vector<Var*> slots{&v.lstm_wx, &v.lstm_wh, &v.lstm_b, &v.neg_w1, &v.neg_b1, &v.neg_w2,
                          &v.neg_b2,  &v.prop_w1, &v.prop_b1, &v.prop_w2, &v.prop_b2};
  for (std::size_t i = 0; i < named.size(); ++i) {
    *slots[i] = tape.leaf(*named[i].second, requires_grad);
    v.ordered.push_back(*slots[i]);
  }
  return v;
}

StepResult step(Tape& tape, const ParamVars& params, int input_dim, Var hidden, Var cell,
                Var input, bool want_proposal) {
  const int h = kHiddenSize;
  if (tape.value(input).cols != input_dim) {
    throw ShapeMismatchError("step: input feature width mismatch");
  }
  const Var gates = tape.add(
      tape.add(tape.matmul(input, params.lstm_wx), tape.matmul(hidden, params.lstm_wh)),
      params.lstm_b);
  const Var gate_i = tape.sigmoid(tape.slice_cols(gates, 0, h));
  const Var gate_f = tape.sigmoid(tape.slice_cols(gates, h, 2 * h));
  const Var gate_g = tape.tanh(tape.slice_cols(gates, 2 * h, 3 * h));
  const Var gate_o = tape.sigmoid(tape.slice_cols(gates, 3 * h, 4 * h));
  const Var cell_next = tape.add(tape.hadamard(gate_f, cell), tape.hadamard(gate_i, gate_g));
  const Var hidden_next = tape.hadamard(gate_o, tape.tanh(cell_next));

  const Var neg_hidden = tape.relu(tape.add(tape.matmul(hidden_next, params.neg_w1), params.neg_b1));
  const Var estimate = tape.add(tape.matmul(neg_hidden, params.neg_w2), params.neg_b2);

  StepResult out;
  out.hidden = hidden_next;
  out.cell = cell_next;
  out.estimate = estimate;
  if (want_proposal) {
    const Var prop_hidden =
        tape.relu(tape.add(tape.matmul(hidden_next, params.prop_w1), params.prop_b1));
    out.proposal = tape.add(tape.matmul(prop_hidden, params.prop_w2), params.prop_b2);
  }
  return out;
}

namespace {

Tensor tile_entry(const std::vector<double>& entry, int batch) {
  Tensor t(batch, static_cast<int>(entry.size()));
  for (int i = 0; i < batch; ++i) {
    std::copy(entry.begin(), entry.end(),
              t.data.begin() + static_cast<std::size_t>(i) * entry.size());
  }
  return t;
}

}  // namespace

RolloutGraph rollout_graph(Tape& tape, const ParamVars& params, qstate::SystemKind system,
                           const std::vector<const qstate::EffectiveOperator*>& states, int n,
                           RolloutMode mode, const std::vector<BasisEntry>* basis) {
  if (n < 2) {
    throw BadIterationCountError("rollout needs n >= 2 iterations");
  }
  if (n > qstate::max_iterations(system)) {
    throw BadIterationCountError("rollout exceeds the independent-measurement limit for this system");
  }
  if (states.empty()) throw ShapeMismatchError("rollout: empty state batch");
  for (const auto* s : states) {
    if (s->system != system) throw ShapeMismatchError("rollout: state/system mismatch");
  }
  if (mode == RolloutMode::Fixed) {
    if (basis == nullptr || static_cast<int>(basis->size()) < n) {
      throw BasisListTooShortError("fixed mode needs a basis list with at least n entries");
    }
  }

  const int batch = static_cast<int>(states.size());
  const int pd = 2 * qstate::local_dim(system);
  const int in_dim = 1 + 2 * pd;

  RolloutGraph out;
  Var hidden = tape.leaf(Tensor(batch, kHiddenSize));
  Var cell = tape.leaf(Tensor(batch, kHiddenSize));

  std::vector<double> canonical(static_cast<std::size_t>(pd), 0.0);
  canonical[0] = 1.0;
  Var x_raw = tape.leaf(tile_entry(canonical, batch));
  Var y_raw = tape.leaf(tile_entry(canonical, batch));

  for (int iter = 1; iter <= n; ++iter) {
    out.x_used.push_back(tape.value(x_raw));
    out.y_used.push_back(tape.value(y_raw));
    const Var prob = tape.measure_prob(x_raw, y_raw, states);
    const Var x_dec = tape.complex_normalize(x_raw);
    const Var y_dec = tape.complex_normalize(y_raw);
    const std::vector<Var> features{prob, x_dec, y_dec};
    const Var input = tape.concat_cols(features);

    const bool want_proposal = (mode == RolloutMode::Adaptive) && iter < n;
    const StepResult s = step(tape, params, in_dim, hidden, cell, input, want_proposal);
    hidden = s.hidden;
    cell = s.cell;
    out.estimates.push_back(s.estimate);
    out.probabilities.push_back(prob);

    if (iter < n) {
      if (mode == RolloutMode::Adaptive) {
        x_raw = tape.slice_cols(s.proposal, 0, pd);
        y_raw = tape.slice_cols(s.proposal, pd, 2 * pd);
      } else {
        const BasisEntry& entry = (*basis)[static_cast<std::size_t>(iter)];
        x_raw = tape.leaf(tile_entry(entry.x, batch));
        y_raw = tape.leaf(tile_entry(entry.y, batch));
      }
    }
  }
  return out;
}

std::vector<RolloutRecord> run_rollout(const ModelParams& params,
                                       const std::vector<const qstate::EffectiveOperator*>& states,
                                       int n, RolloutMode mode,
                                       const std::vector<BasisEntry>* basis) {
  Tape tape;
  const ParamVars vars = leaf_params(tape, params, false);
  const RolloutGraph graph = rollout_graph(tape, vars, params.system, states, n, mode, basis);

  const int batch = static_cast<int>(states.size());
  const int pd = 2 * qstate::local_dim(params.system);
  std::vector<RolloutRecord> records(static_cast<std::size_t>(batch));
  for (int b = 0; b < batch; ++b) {
    auto& rec = records[static_cast<std::size_t>(b)];
    rec.probabilities.resize(static_cast<std::size_t>(n));
    rec.estimates.resize(static_cast<std::size_t>(n));
    rec.x_raw.assign(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(pd)));
    rec.y_raw.assign(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(pd)));
    for (int i = 0; i < n; ++i) {
      rec.probabilities[static_cast<std::size_t>(i)] =
          tape.value(graph.probabilities[static_cast<std::size_t>(i)]).at(b, 0);
      rec.estimates[static_cast<std::size_t>(i)] =
          tape.value(graph.estimates[static_cast<std::size_t>(i)]).at(b, 0);
      for (int j = 0; j < pd; ++j) {
        rec.x_raw[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
            graph.x_used[static_cast<std::size_t>(i)].at(b, j);
        rec.y_raw[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
            graph.y_used[static_cast<std::size_t>(i)].at(b, j);
      }
    }
  }
  return records;
}

}  // namespace negadapt::policynet
