#include "negadapt/adgrad.hpp"

#include <cmath>
#include <cstring>

#include "negadapt/errors.hpp"

namespace negadapt::adgrad {

namespace {

// C(MxN) += A(MxK) @ B(KxN); the j-loop vectorizes and every output element
// accumulates in a fixed order, so results are bitwise reproducible.
void matmul_acc(const double* a, const double* b, double* c, int m, int k_dim, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k_dim;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int k = 0; k < k_dim; ++k) {
      const double av = arow[k];
      const double* brow = b + static_cast<std::size_t>(k) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void transpose_into(const Tensor& src, std::vector<double>& dst) {
  dst.resize(src.numel());
  for (int i = 0; i < src.rows; ++i) {
    for (int j = 0; j < src.cols; ++j) {
      dst[static_cast<std::size_t>(j) * src.rows + i] = src.at(i, j);
    }
  }
}

}  // namespace

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  has_grads_ = false;
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::check(Var v) const {
  if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw Error("tape: variable does not belong to this tape");
  }
}

const Tensor& Tape::value(Var v) const {
  check(v);
  return nodes_[static_cast<std::size_t>(v.id)].value;
}

const Tensor& Tape::grad(Var v) const {
  check(v);
  if (!has_grads_) throw Error("tape: backward has not run");
  return grads_[static_cast<std::size_t>(v.id)];
}

void Tape::reset() {
  nodes_.clear();
  grads_.clear();
  has_grads_ = false;
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.kind = OpKind::Leaf;
  n.value = std::move(value);
  n.needs_grad = requires_grad;
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  check(a);
  check(b);
  const Tensor& ta = val(a.id);
  const Tensor& tb = val(b.id);
  if (ta.cols != tb.rows) throw ShapeMismatchError("matmul: inner dimensions differ");
  Node n;
  n.kind = OpKind::MatMul;
  n.a = a.id;
  n.b = b.id;
  n.value = Tensor(ta.rows, tb.cols);
  matmul_acc(ta.data.data(), tb.data.data(), n.value.data.data(), ta.rows, ta.cols, tb.cols);
  n.needs_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  check(a);
  check(b);
  const Tensor& ta = val(a.id);
  const Tensor& tb = val(b.id);
  Node n;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = needs(a.id) || needs(b.id);
  if (ta.same_shape(tb)) {
    n.kind = OpKind::Add;
    n.value = ta;
    for (std::size_t i = 0; i < tb.numel(); ++i) n.value.data[i] += tb.data[i];
  } else if (tb.rows == 1 && tb.cols == ta.cols) {
    n.kind = OpKind::AddRow;
    n.value = ta;
    for (int i = 0; i < ta.rows; ++i) {
      double* row = n.value.data.data() + static_cast<std::size_t>(i) * ta.cols;
      for (int j = 0; j < ta.cols; ++j) row[j] += tb.data[j];
    }
  } else {
    throw ShapeMismatchError("add: incompatible shapes");
  }
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  check(a);
  check(b);
  const Tensor& ta = val(a.id);
  const Tensor& tb = val(b.id);
  if (!ta.same_shape(tb)) throw ShapeMismatchError("sub: incompatible shapes");
  Node n;
  n.kind = OpKind::Sub;
  n.a = a.id;
  n.b = b.id;
  n.value = ta;
  for (std::size_t i = 0; i < tb.numel(); ++i) n.value.data[i] -= tb.data[i];
  n.needs_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::hadamard(Var a, Var b) {
  check(a);
  check(b);
  const Tensor& ta = val(a.id);
  const Tensor& tb = val(b.id);
  if (!ta.same_shape(tb)) throw ShapeMismatchError("hadamard: incompatible shapes");
  Node n;
  n.kind = OpKind::Hadamard;
  n.a = a.id;
  n.b = b.id;
  n.value = ta;
  for (std::size_t i = 0; i < tb.numel(); ++i) n.value.data[i] *= tb.data[i];
  n.needs_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeMismatchError("concat: no inputs");
  int total_cols = 0;
  const int rows = val(parts.front().id).rows;
  for (Var p : parts) {
    check(p);
    if (val(p.id).rows != rows) throw ShapeMismatchError("concat: row counts differ");
    total_cols += val(p.id).cols;
  }
  Node n;
  n.kind = OpKind::ConcatCols;
  n.value = Tensor(rows, total_cols);
  int offset = 0;
  for (Var p : parts) {
    const Tensor& t = val(p.id);
    for (int i = 0; i < rows; ++i) {
      std::memcpy(n.value.data.data() + static_cast<std::size_t>(i) * total_cols + offset,
                  t.data.data() + static_cast<std::size_t>(i) * t.cols,
                  sizeof(double) * static_cast<std::size_t>(t.cols));
    }
    offset += t.cols;
    n.srcs.push_back(p.id);
    n.needs_grad = n.needs_grad || needs(p.id);
  }
  return push(std::move(n));
}

Var Tape::slice_cols(Var a, int begin, int end) {
  check(a);
  const Tensor& ta = val(a.id);
  if (begin < 0 || end > ta.cols || begin >= end) {
    throw ShapeMismatchError("slice: bad column range");
  }
  Node n;
  n.kind = OpKind::SliceCols;
  n.a = a.id;
  n.begin = begin;
  n.end = end;
  n.value = Tensor(ta.rows, end - begin);
  for (int i = 0; i < ta.rows; ++i) {
    std::memcpy(n.value.data.data() + static_cast<std::size_t>(i) * (end - begin),
                ta.data.data() + static_cast<std::size_t>(i) * ta.cols + begin,
                sizeof(double) * static_cast<std::size_t>(end - begin));
  }
  n.needs_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  check(a);
  Node n;
  n.kind = OpKind::Sigmoid;
  n.a = a.id;
  n.value = val(a.id);
  for (auto& x : n.value.data) x = 1.0 / (1.0 + std::exp(-x));
  n.needs_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  check(a);
  Node n;
  n.kind = OpKind::Tanh;
  n.a = a.id;
  n.value = val(a.id);
  for (auto& x : n.value.data) x = std::tanh(x);
  n.needs_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  check(a);
  Node n;
  n.kind = OpKind::Relu;
  n.a = a.id;
  n.value = val(a.id);
  for (auto& x : n.value.data) x = x > 0.0 ? x : 0.0;
  n.needs_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::scale(Var a, double factor) {
  check(a);
  Node n;
  n.kind = OpKind::Scale;
  n.a = a.id;
  n.factor = factor;
  n.value = val(a.id);
  for (auto& x : n.value.data) x *= factor;
  n.needs_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::mean_square(Var a) {
  check(a);
  const Tensor& ta = val(a.id);
  if (ta.numel() == 0) throw ShapeMismatchError("mean_square: empty input");
  Node n;
  n.kind = OpKind::MeanSquare;
  n.a = a.id;
  double acc = 0.0;
  for (double x : ta.data) acc += x * x;
  n.value = Tensor::scalar(acc / static_cast<double>(ta.numel()));
  n.needs_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::complex_normalize(Var a) {
  check(a);
  const Tensor& ta = val(a.id);
  if (ta.cols % 2 != 0) throw ShapeMismatchError("complex_normalize: odd column count");
  Node n;
  n.kind = OpKind::ComplexNormalize;
  n.a = a.id;
  n.value = ta;
  n.aux.resize(static_cast<std::size_t>(ta.rows));
  for (int i = 0; i < ta.rows; ++i) {
    double* row = n.value.data.data() + static_cast<std::size_t>(i) * ta.cols;
    double norm_sq = 0.0;
    for (int j = 0; j < ta.cols; ++j) norm_sq += row[j] * row[j];
    const double norm = std::sqrt(norm_sq);
    if (norm < 1e-12) {
      for (int j = 0; j < ta.cols; ++j) row[j] = 0.0;
      row[0] = 1.0;
      n.aux[static_cast<std::size_t>(i)] = 0.0;
    } else {
      for (int j = 0; j < ta.cols; ++j) row[j] /= norm;
      n.aux[static_cast<std::size_t>(i)] = norm;
    }
  }
  n.needs_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::measure_prob(Var x_raw, Var y_raw, std::vector<const qstate::EffectiveOperator*> ops) {
  check(x_raw);
  check(y_raw);
  const Tensor& tx = val(x_raw.id);
  const Tensor& ty = val(y_raw.id);
  if (tx.rows != ty.rows || static_cast<std::size_t>(tx.rows) != ops.size()) {
    throw ShapeMismatchError("measure_prob: batch sizes differ");
  }
  Node n;
  n.kind = OpKind::MeasureProb;
  n.a = x_raw.id;
  n.b = y_raw.id;
  n.value = Tensor(tx.rows, 1);
  for (int i = 0; i < tx.rows; ++i) {
    const std::span<const double> xr{tx.data.data() + static_cast<std::size_t>(i) * tx.cols,
                                     static_cast<std::size_t>(tx.cols)};
    const std::span<const double> yr{ty.data.data() + static_cast<std::size_t>(i) * ty.cols,
                                     static_cast<std::size_t>(ty.cols)};
    n.value.at(i, 0) = qstate::collective_probability(*ops[static_cast<std::size_t>(i)], xr, yr);
  }
  n.ops = std::move(ops);
  n.needs_grad = needs(x_raw.id) || needs(y_raw.id);
  return push(std::move(n));
}

void Tape::backward(Var loss) {
  check(loss);
  const Tensor& lval = val(loss.id);
  if (lval.rows != 1 || lval.cols != 1) throw NotScalarError("backward: loss must be 1x1");

  grads_.assign(nodes_.size(), Tensor());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    grads_[i] = Tensor(nodes_[i].value.rows, nodes_[i].value.cols);
  }
  grads_[static_cast<std::size_t>(loss.id)].data[0] = 1.0;

  std::vector<double> scratch;
  for (int id = loss.id; id >= 0; --id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || n.kind == OpKind::Leaf) continue;
    const Tensor& g = grads_[static_cast<std::size_t>(id)];
    switch (n.kind) {
      case OpKind::MatMul: {
        const Tensor& ta = val(n.a);
        const Tensor& tb = val(n.b);
        if (needs(n.a)) {
          transpose_into(tb, scratch);  // N x K -> here tb is KxN, scratch is NxK
          matmul_acc(g.data.data(), scratch.data(), grads_[static_cast<std::size_t>(n.a)].data.data(),
                     g.rows, g.cols, tb.rows);
        }
        if (needs(n.b)) {
          transpose_into(ta, scratch);  // K x M
          matmul_acc(scratch.data(), g.data.data(), grads_[static_cast<std::size_t>(n.b)].data.data(),
                     ta.cols, ta.rows, g.cols);
        }
        break;
      }
      case OpKind::Add: {
        if (needs(n.a)) {
          auto& da = grads_[static_cast<std::size_t>(n.a)].data;
          for (std::size_t i = 0; i < da.size(); ++i) da[i] += g.data[i];
        }
        if (needs(n.b)) {
          auto& db = grads_[static_cast<std::size_t>(n.b)].data;
          for (std::size_t i = 0; i < db.size(); ++i) db[i] += g.data[i];
        }
        break;
      }
      case OpKind::AddRow: {
        if (needs(n.a)) {
          auto& da = grads_[static_cast<std::size_t>(n.a)].data;
          for (std::size_t i = 0; i < da.size(); ++i) da[i] += g.data[i];
        }
        if (needs(n.b)) {
          Tensor& db = grads_[static_cast<std::size_t>(n.b)];
          for (int i = 0; i < g.rows; ++i) {
            const double* grow = g.data.data() + static_cast<std::size_t>(i) * g.cols;
            for (int j = 0; j < g.cols; ++j) db.data[static_cast<std::size_t>(j)] += grow[j];
          }
        }
        break;
      }
      case OpKind::Sub: {
        if (needs(n.a)) {
          auto& da = grads_[static_cast<std::size_t>(n.a)].data;
          for (std::size_t i = 0; i < da.size(); ++i) da[i] += g.data[i];
        }
        if (needs(n.b)) {
          auto& db = grads_[static_cast<std::size_t>(n.b)].data;
          for (std::size_t i = 0; i < db.size(); ++i) db[i] -= g.data[i];
        }
        break;
      }
      case OpKind::Hadamard: {
        const Tensor& ta = val(n.a);
        const Tensor& tb = val(n.b);
        if (needs(n.a)) {
          auto& da = grads_[static_cast<std::size_t>(n.a)].data;
          for (std::size_t i = 0; i < da.size(); ++i) da[i] += g.data[i] * tb.data[i];
        }
        if (needs(n.b)) {
          auto& db = grads_[static_cast<std::size_t>(n.b)].data;
          for (std::size_t i = 0; i < db.size(); ++i) db[i] += g.data[i] * ta.data[i];
        }
        break;
      }
      case OpKind::ConcatCols: {
        int offset = 0;
        for (int src : n.srcs) {
          const Tensor& ts = val(src);
          if (needs(src)) {
            Tensor& ds = grads_[static_cast<std::size_t>(src)];
            for (int i = 0; i < ts.rows; ++i) {
              const double* grow =
                  g.data.data() + static_cast<std::size_t>(i) * g.cols + offset;
              double* drow = ds.data.data() + static_cast<std::size_t>(i) * ts.cols;
              for (int j = 0; j < ts.cols; ++j) drow[j] += grow[j];
            }
          }
          offset += ts.cols;
        }
        break;
      }
      case OpKind::SliceCols: {
        if (needs(n.a)) {
          Tensor& da = grads_[static_cast<std::size_t>(n.a)];
          for (int i = 0; i < g.rows; ++i) {
            const double* grow = g.data.data() + static_cast<std::size_t>(i) * g.cols;
            double* drow = da.data.data() + static_cast<std::size_t>(i) * da.cols + n.begin;
            for (int j = 0; j < g.cols; ++j) drow[j] += grow[j];
          }
        }
        break;
      }
      case OpKind::Sigmoid: {
        auto& da = grads_[static_cast<std::size_t>(n.a)].data;
        for (std::size_t i = 0; i < da.size(); ++i) {
          const double s = n.value.data[i];
          da[i] += g.data[i] * s * (1.0 - s);
        }
        break;
      }
      case OpKind::Tanh: {
        auto& da = grads_[static_cast<std::size_t>(n.a)].data;
        for (std::size_t i = 0; i < da.size(); ++i) {
          const double t = n.value.data[i];
          da[i] += g.data[i] * (1.0 - t * t);
        }
        break;
      }
      case OpKind::Relu: {
        const Tensor& ta = val(n.a);
        auto& da = grads_[static_cast<std::size_t>(n.a)].data;
        for (std::size_t i = 0; i < da.size(); ++i) {
          if (ta.data[i] > 0.0) da[i] += g.data[i];
        }
        break;
      }
      case OpKind::Scale: {
        auto& da = grads_[static_cast<std::size_t>(n.a)].data;
        for (std::size_t i = 0; i < da.size(); ++i) da[i] += g.data[i] * n.factor;
        break;
      }
      case OpKind::MeanSquare: {
        const Tensor& ta = val(n.a);
        auto& da = grads_[static_cast<std::size_t>(n.a)].data;
        const double s = 2.0 * g.data[0] / static_cast<double>(ta.numel());
        for (std::size_t i = 0; i < da.size(); ++i) da[i] += s * ta.data[i];
        break;
      }
      case OpKind::ComplexNormalize: {
        const Tensor& out = n.value;
        auto& da = grads_[static_cast<std::size_t>(n.a)];
        for (int i = 0; i < out.rows; ++i) {
          const double norm = n.aux[static_cast<std::size_t>(i)];
          if (norm == 0.0) continue;
          const double* grow = g.data.data() + static_cast<std::size_t>(i) * g.cols;
          const double* orow = out.data.data() + static_cast<std::size_t>(i) * out.cols;
          double dot = 0.0;
          for (int j = 0; j < out.cols; ++j) dot += grow[j] * orow[j];
          double* drow = da.data.data() + static_cast<std::size_t>(i) * da.cols;
          for (int j = 0; j < out.cols; ++j) drow[j] += (grow[j] - dot * orow[j]) / norm;
        }
        break;
      }
      case OpKind::MeasureProb: {
        const Tensor& tx = val(n.a);
        const Tensor& ty = val(n.b);
        Tensor& dx = grads_[static_cast<std::size_t>(n.a)];
        Tensor& dy = grads_[static_cast<std::size_t>(n.b)];
        std::vector<double> gx(static_cast<std::size_t>(tx.cols));
        std::vector<double> gy(static_cast<std::size_t>(ty.cols));
        for (int i = 0; i < tx.rows; ++i) {
          const double go = g.at(i, 0);
          if (go == 0.0) continue;
          const std::span<const double> xr{tx.data.data() + static_cast<std::size_t>(i) * tx.cols,
                                           static_cast<std::size_t>(tx.cols)};
          const std::span<const double> yr{ty.data.data() + static_cast<std::size_t>(i) * ty.cols,
                                           static_cast<std::size_t>(ty.cols)};
          qstate::probability_gradient(*n.ops[static_cast<std::size_t>(i)], xr, yr, gx, gy);
          if (needs(n.a)) {
            double* drow = dx.data.data() + static_cast<std::size_t>(i) * dx.cols;
            for (int j = 0; j < tx.cols; ++j) drow[j] += go * gx[static_cast<std::size_t>(j)];
          }
          if (needs(n.b)) {
            double* drow = dy.data.data() + static_cast<std::size_t>(i) * dy.cols;
            for (int j = 0; j < ty.cols; ++j) drow[j] += go * gy[static_cast<std::size_t>(j)];
          }
        }
        break;
      }
      case OpKind::Leaf:
        break;
    }
  }
  has_grads_ = true;
}

AdamState make_adam(std::span<Tensor* const> params, double lr) {
  AdamState state;
  state.lr = lr;
  state.m.reserve(params.size());
  state.v.reserve(params.size());
  for (const Tensor* p : params) {
    state.m.emplace_back(p->rows, p->cols);
    state.v.emplace_back(p->rows, p->cols);
  }
  return state;
}

void adam_step(AdamState& state, std::span<Tensor* const> params,
               std::span<const Tensor* const> grads) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ShapeMismatchError("adam_step: parameter/gradient list mismatch");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& theta = *params[p];
    const Tensor& g = *grads[p];
    if (!theta.same_shape(g) || !theta.same_shape(state.m[p])) {
      throw ShapeMismatchError("adam_step: tensor shape mismatch");
    }
    for (std::size_t i = 0; i < theta.numel(); ++i) {
      const double gi = g.data[i];
      state.m[p].data[i] = state.beta1 * state.m[p].data[i] + (1.0 - state.beta1) * gi;
      state.v[p].data[i] = state.beta2 * state.v[p].data[i] + (1.0 - state.beta2) * gi * gi;
      const double mhat = state.m[p].data[i] / bc1;
      const double vhat = state.v[p].data[i] / bc2;
      theta.data[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

double global_norm(std::span<const Tensor* const> grads) {
  double acc = 0.0;
  for (const Tensor* g : grads) {
    for (double v : g->data) acc += v * v;
  }
  return std::sqrt(acc);
}

double clip_global_norm(std::span<Tensor* const> grads, double max_norm) {
  std::vector<const Tensor*> view(grads.begin(), grads.end());
  const double norm = global_norm(view);
  if (norm <= max_norm || norm == 0.0) return 1.0;
  const double factor = max_norm / norm;
  for (Tensor* g : grads) {
    for (double& v : g->data) v *= factor;
  }
  return factor;
}

}  // namespace negadapt::adgrad
