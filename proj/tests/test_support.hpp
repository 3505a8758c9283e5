#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "negadapt/numkit.hpp"
#include "negadapt/qstate.hpp"
#include "negadapt/rng.hpp"

namespace testsup {

using negadapt::Philox;
using negadapt::numkit::CMatrix;
using negadapt::numkit::cplx;

inline CMatrix random_cmatrix(Philox& rng, int rows, int cols) {
  CMatrix m(rows, cols);
  for (auto& v : m.data()) {
    v = cplx{rng.next_gaussian(), rng.next_gaussian()};
  }
  return m;
}

inline CMatrix random_hermitian(Philox& rng, int n) {
  CMatrix g = random_cmatrix(rng, n, n);
  return negadapt::numkit::scale(negadapt::numkit::add(g, negadapt::numkit::adjoint(g)), 0.5);
}

inline CMatrix pauli_z() {
  CMatrix m(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = -1.0;
  return m;
}

inline CMatrix singlet_density() {
  const double inv = 1.0 / std::sqrt(2.0);
  std::vector<cplx> psi{0.0, inv, -inv, 0.0};
  CMatrix m(4, 4);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      m(i, j) = psi[i] * std::conj(psi[j]);
    }
  }
  return m;
}

// p |Psi-><Psi-| + (1-p) I/4; negativity max(0, (3p-1)/4).
inline negadapt::qstate::DensityMatrix werner_state(double p) {
  using namespace negadapt::numkit;
  CMatrix m = add(scale(singlet_density(), p), scale(CMatrix::identity(4), (1.0 - p) / 4.0));
  return {negadapt::qstate::SystemKind::QubitQubit, std::move(m)};
}

// Raw projector parameters (interleaved re/im) for a basis ket |k>.
inline std::vector<double> basis_ket_params(int dim, int k) {
  std::vector<double> raw(2 * dim, 0.0);
  raw[2 * k] = 1.0;
  return raw;
}

inline std::vector<double> random_params(Philox& rng, int dim) {
  std::vector<double> raw(2 * dim);
  for (auto& v : raw) v = rng.next_gaussian();
  return raw;
}

// Random full-rank density matrix on dimension d (test-local Ginibre).
inline CMatrix random_density(Philox& rng, int d) {
  using namespace negadapt::numkit;
  CMatrix g = random_cmatrix(rng, d, d);
  CMatrix rho = mul(g, adjoint(g));
  const double tr = trace(rho).real();
  return scale(rho, 1.0 / tr);
}

}  // namespace testsup
