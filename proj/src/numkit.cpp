#include "negadapt/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "negadapt/errors.hpp"

namespace negadapt::numkit {

namespace {

void require_same_shape(const CMatrix& a, const CMatrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatchError(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

CMatrix CMatrix::identity(int n) {
  CMatrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

CMatrix mul(const CMatrix& a, const CMatrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionMismatchError("mul: inner dimensions differ");
  }
  CMatrix c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int k = 0; k < a.cols(); ++k) {
      const cplx av = a(i, k);
      if (av == cplx{}) continue;
      for (int j = 0; j < b.cols(); ++j) {
        c(i, j) += av * b(k, j);
      }
    }
  }
  return c;
}

CMatrix add(const CMatrix& a, const CMatrix& b) {
  require_same_shape(a, b, "add");
  CMatrix c = a;
  for (std::size_t i = 0; i < c.data().size(); ++i) c.data()[i] += b.data()[i];
  return c;
}

CMatrix sub(const CMatrix& a, const CMatrix& b) {
  require_same_shape(a, b, "sub");
  CMatrix c = a;
  for (std::size_t i = 0; i < c.data().size(); ++i) c.data()[i] -= b.data()[i];
  return c;
}

CMatrix scale(const CMatrix& a, cplx factor) {
  CMatrix c = a;
  for (auto& v : c.data()) v *= factor;
  return c;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix c(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      const cplx av = a(i, j);
      if (av == cplx{}) continue;
      for (int k = 0; k < b.rows(); ++k) {
        for (int l = 0; l < b.cols(); ++l) {
          c(i * b.rows() + k, j * b.cols() + l) = av * b(k, l);
        }
      }
    }
  }
  return c;
}

CMatrix adjoint(const CMatrix& a) {
  CMatrix c(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      c(j, i) = std::conj(a(i, j));
    }
  }
  return c;
}

CMatrix transpose(const CMatrix& a) {
  CMatrix c(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      c(j, i) = a(i, j);
    }
  }
  return c;
}

cplx trace(const CMatrix& a) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatchError("trace: matrix not square");
  }
  cplx t = 0.0;
  for (int i = 0; i < a.rows(); ++i) t += a(i, i);
  return t;
}

double max_abs_diff(const CMatrix& a, const CMatrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  }
  return m;
}

double hermiticity_error(const CMatrix& a) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatchError("hermiticity_error: matrix not square");
  }
  double m = 0.0;
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      m = std::max(m, std::abs(a(i, j) - std::conj(a(j, i))));
    }
  }
  return m;
}

double frobenius_norm(const CMatrix& a) {
  double s = 0.0;
  for (const auto& v : a.data()) s += std::norm(v);
  return std::sqrt(s);
}

bool all_finite(const CMatrix& a) {
  for (const auto& v : a.data()) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return true;
}

namespace {

double off_diagonal_norm(const CMatrix& a) {
  double s = 0.0;
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      if (i != j) s += std::norm(a(i, j));
    }
  }
  return std::sqrt(s);
}

}  // namespace

EigResult eig_hermitian_full(const CMatrix& m) {
  if (m.rows() != m.cols()) {
    throw DimensionMismatchError("eig_hermitian: matrix not square");
  }
  if (!all_finite(m)) {
    throw NumericError("eig_hermitian: non-finite entries");
  }
  if (hermiticity_error(m) > 1e-10) {
    throw NonHermitianError("eig_hermitian: input exceeds Hermiticity tolerance 1e-10");
  }

  const int n = m.rows();
  // Symmetrize to remove the sub-tolerance asymmetry before rotating.
  CMatrix a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      a(i, j) = 0.5 * (m(i, j) + std::conj(m(j, i)));
    }
  }
  CMatrix v = CMatrix::identity(n);

  constexpr int kMaxSweeps = 100;
  const double tol = 1e-12 * std::max(1.0, frobenius_norm(a));

  bool converged = (n <= 1) || off_diagonal_norm(a) <= tol;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const cplx apq = a(p, q);
        const double mag = std::abs(apq);
        if (mag < 1e-300) continue;

        // Phase factor reduces the 2x2 block to a real symmetric problem.
        const cplx phase = apq / mag;
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        const double tau = (aqq - app) / (2.0 * mag);
        const double t = (tau >= 0.0 ? -1.0 : 1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        // Unitary block: column p <- c*p + conj(phase)*s*q,
        //                column q <- -s*p + conj(phase)*c*q.
        const cplx ep = std::conj(phase);
        for (int k = 0; k < n; ++k) {
          const cplx akp = a(k, p);
          const cplx akq = a(k, q);
          a(k, p) = c * akp + ep * s * akq;
          a(k, q) = -s * akp + ep * c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const cplx apk = a(p, k);
          const cplx aqk = a(q, k);
          a(p, k) = c * apk + phase * s * aqk;
          a(q, k) = -s * apk + phase * c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const cplx vkp = v(k, p);
          const cplx vkq = v(k, q);
          v(k, p) = c * vkp + ep * s * vkq;
          v(k, q) = -s * vkp + ep * c * vkq;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
      }
    }
    converged = off_diagonal_norm(a) <= tol;
  }
  if (!converged) {
    throw NoConvergenceError("eig_hermitian: Jacobi sweeps did not converge");
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return a(x, x).real() < a(y, y).real(); });

  EigResult result;
  result.values.resize(n);
  result.vectors = CMatrix(n, n);
  for (int k = 0; k < n; ++k) {
    result.values[k] = a(order[k], order[k]).real();
    for (int r = 0; r < n; ++r) {
      result.vectors(r, k) = v(r, order[k]);
    }
  }
  return result;
}

std::vector<double> eig_hermitian(const CMatrix& m) {
  return eig_hermitian_full(m).values;
}

}  // namespace negadapt::numkit
