#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "negadapt/qstate.hpp"

namespace negadapt::adgrad {

// Dense 2-D real tensor, row-major, 64-bit accumulation everywhere.
// Scalars are 1x1, row vectors 1xN; batches sit in the row dimension.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  static Tensor zeros(int r, int c) { return Tensor(r, c); }
  static Tensor scalar(double v) {
    Tensor t(1, 1);
    t.data[0] = v;
    return t;
  }

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t numel() const { return data.size(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Nodes are recorded in evaluation order; backward walks
// them once in reverse, accumulating by sum over all paths. A tape instance
// is single-threaded; independent tapes over shared read-only parameter
// tensors may run concurrently.
class Tape {
 public:
  Var leaf(Tensor value, bool requires_grad = false);

  Var matmul(Var a, Var b);
  // Elementwise when shapes match; broadcasts b across rows when b is 1 x cols.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var concat_cols(std::span<const Var> parts);
  Var slice_cols(Var a, int begin, int end);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var scale(Var a, double factor);
  // Mean of squared entries; the loss reduction.
  Var mean_square(Var a);
  // Row-wise (re, im)-interleaved complex normalization; rows of norm < 1e-12
  // map to the canonical |0> encoding and receive zero gradient.
  Var complex_normalize(Var a);
  // One differentiable node wrapping the collective-measurement probability:
  // row r of the output is P(ops[r], x_raw[r], y_raw[r]). The effective
  // operators are borrowed and must outlive the tape.
  Var measure_prob(Var x_raw, Var y_raw,
                   std::vector<const qstate::EffectiveOperator*> ops);

  const Tensor& value(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // Gradients of a scalar loss for every recorded node; NotScalar otherwise.
  void backward(Var loss);
  const Tensor& grad(Var v) const;

  void reset();

 private:
  enum class OpKind {
    Leaf,
    MatMul,
    Add,
    AddRow,
    Sub,
    Hadamard,
    ConcatCols,
    SliceCols,
    Sigmoid,
    Tanh,
    Relu,
    Scale,
    MeanSquare,
    ComplexNormalize,
    MeasureProb,
  };

  struct Node {
    OpKind kind = OpKind::Leaf;
    int a = -1;
    int b = -1;
    std::vector<int> srcs;
    int begin = 0;
    int end = 0;
    double factor = 1.0;
    Tensor value;
    std::vector<double> aux;
    std::vector<const qstate::EffectiveOperator*> ops;
    bool needs_grad = false;
  };

  Var push(Node node);
  const Tensor& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool needs(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  void check(Var v) const;

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  bool has_grads_ = false;
};

// Adam with bias correction; moments are kept per parameter tensor in the
// order the parameter list was registered.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

AdamState make_adam(std::span<Tensor* const> params, double lr);
void adam_step(AdamState& state, std::span<Tensor* const> params,
               std::span<const Tensor* const> grads);

double global_norm(std::span<const Tensor* const> grads);
// Rescales so the global norm does not exceed max_norm; returns the factor.
double clip_global_norm(std::span<Tensor* const> grads, double max_norm);

}  // namespace negadapt::adgrad
