#pragma once

#include <complex>
#include <vector>

namespace negadapt::numkit {

using cplx = std::complex<double>;

// Dense complex matrix, row-major. Dimensions here stay small (<= 36), so
// storage is a flat vector and all operations are straightforward loops.
class CMatrix {
 public:
  CMatrix() = default;
  CMatrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols) {}

  static CMatrix identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  cplx& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  const cplx& operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  std::vector<cplx>& data() { return data_; }
  const std::vector<cplx>& data() const { return data_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<cplx> data_;
};

CMatrix mul(const CMatrix& a, const CMatrix& b);
CMatrix add(const CMatrix& a, const CMatrix& b);
CMatrix sub(const CMatrix& a, const CMatrix& b);
CMatrix scale(const CMatrix& a, cplx factor);
CMatrix kron(const CMatrix& a, const CMatrix& b);
CMatrix adjoint(const CMatrix& a);
CMatrix transpose(const CMatrix& a);
cplx trace(const CMatrix& a);

double max_abs_diff(const CMatrix& a, const CMatrix& b);
double hermiticity_error(const CMatrix& a);
double frobenius_norm(const CMatrix& a);
bool all_finite(const CMatrix& a);

struct EigResult {
  std::vector<double> values;  // ascending
  CMatrix vectors;             // column k pairs with values[k]
};

// Hermitian eigensolver via cyclic complex Jacobi rotations. Input must be
// Hermitian within 1e-10 (max entry of |m - m^dagger|); throws NonHermitian
// otherwise, NoConvergence if the sweep cap (100) is reached.
std::vector<double> eig_hermitian(const CMatrix& m);
EigResult eig_hermitian_full(const CMatrix& m);

}  // namespace negadapt::numkit
