#include "negadapt/qstate.hpp"

#include <algorithm>
#include <cmath>

#include "negadapt/errors.hpp"
#include "negadapt/rng.hpp"

namespace negadapt::qstate {

SystemKind system_from_string(const std::string& name) {
  if (name == "qubit-qubit") return SystemKind::QubitQubit;
  if (name == "qubit-qutrit") return SystemKind::QubitQutrit;
  throw ConfigError("unknown system '" + name + "' (expected qubit-qubit or qubit-qutrit)");
}

std::string to_string(SystemKind kind) {
  return kind == SystemKind::QubitQubit ? "qubit-qubit" : "qubit-qutrit";
}

DensityMatrix make_density_matrix(SystemKind system, CMatrix mat) {
  const int d = total_dim(system);
  if (mat.rows() != d || mat.cols() != d) {
    throw DimensionMismatchError("density matrix has wrong dimension for system");
  }
  if (!numkit::all_finite(mat)) {
    throw NumericError("density matrix has non-finite entries");
  }
  if (numkit::hermiticity_error(mat) > 1e-10) {
    throw NonHermitianError("density matrix is not Hermitian within 1e-10");
  }
  if (std::abs(numkit::trace(mat) - cplx{1.0, 0.0}) > 1e-10) {
    throw NumericError("density matrix trace differs from 1 beyond 1e-10");
  }
  const auto eigs = numkit::eig_hermitian(mat);
  if (eigs.front() < -1e-10) {
    throw NumericError("density matrix has eigenvalue below -1e-10");
  }
  return DensityMatrix{system, std::move(mat)};
}

DensityMatrix random_density_matrix(SystemKind system, std::uint64_t seed, std::uint64_t stream) {
  const int d = total_dim(system);
  Philox rng(seed, stream);
  CMatrix g(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const double re = rng.next_gaussian();
      const double im = rng.next_gaussian();
      g(i, j) = cplx{re, im};
    }
  }
  CMatrix rho(d, d);
  double tr = 0.0;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      cplx v = 0.0;
      for (int k = 0; k < d; ++k) v += g(i, k) * std::conj(g(j, k));
      rho(i, j) = v;
    }
    tr += rho(i, i).real();
  }
  for (auto& v : rho.data()) v /= tr;
  // Exact symmetrization keeps downstream Hermiticity checks noise-free.
  for (int i = 0; i < d; ++i) {
    rho(i, i) = cplx{rho(i, i).real(), 0.0};
    for (int j = i + 1; j < d; ++j) {
      const cplx m = 0.5 * (rho(i, j) + std::conj(rho(j, i)));
      rho(i, j) = m;
      rho(j, i) = std::conj(m);
    }
  }
  return DensityMatrix{system, std::move(rho)};
}

CMatrix partial_transpose(const DensityMatrix& rho) {
  const int da = bell_subsystem_dim(rho.system);
  const int db = local_dim(rho.system);
  CMatrix out(da * db, da * db);
  for (int a = 0; a < da; ++a) {
    for (int b = 0; b < db; ++b) {
      for (int ap = 0; ap < da; ++ap) {
        for (int bp = 0; bp < db; ++bp) {
          out(a * db + b, ap * db + bp) = rho.mat(a * db + bp, ap * db + b);
        }
      }
    }
  }
  return out;
}

double negativity(const DensityMatrix& rho) {
  const auto eigs = numkit::eig_hermitian(partial_transpose(rho));
  double s = 0.0;
  for (double v : eigs) {
    if (v < 0.0) s += v;
  }
  return std::abs(s);
}

CMatrix swap_subsystems(const CMatrix& m, int dim_a, int dim_b) {
  const int d = dim_a * dim_b;
  if (m.rows() != d || m.cols() != d) {
    throw DimensionMismatchError("swap_subsystems: dimension mismatch");
  }
  CMatrix out(d, d);
  for (int a = 0; a < dim_a; ++a) {
    for (int b = 0; b < dim_b; ++b) {
      for (int ap = 0; ap < dim_a; ++ap) {
        for (int bp = 0; bp < dim_b; ++bp) {
          out(b * dim_a + a, bp * dim_a + ap) = m(a * dim_b + b, ap * dim_b + bp);
        }
      }
    }
  }
  return out;
}

CMatrix swap_matrix(int dim_a, int dim_b) {
  const int d = dim_a * dim_b;
  CMatrix w(d, d);
  for (int a = 0; a < dim_a; ++a) {
    for (int b = 0; b < dim_b; ++b) {
      w(b * dim_a + a, a * dim_b + b) = 1.0;
    }
  }
  return w;
}

CMatrix build_two_copy(const DensityMatrix& rho) {
  const int da = bell_subsystem_dim(rho.system);
  const int db = local_dim(rho.system);
  return numkit::kron(swap_subsystems(rho.mat, da, db), rho.mat);
}

CMatrix bell_projector() {
  // |Psi-> = (|01> - |10>)/sqrt(2)
  const double inv = 1.0 / std::sqrt(2.0);
  std::vector<cplx> psi{0.0, inv, -inv, 0.0};
  CMatrix p(4, 4);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      p(i, j) = psi[i] * std::conj(psi[j]);
    }
  }
  return p;
}

EffectiveOperator build_effective_operator(const DensityMatrix& rho) {
  const int da = bell_subsystem_dim(rho.system);
  const int db = local_dim(rho.system);
  const CMatrix omega = build_two_copy(rho);
  const double inv = 1.0 / std::sqrt(2.0);
  // Singlet amplitudes Psi_ab over the two Bell-projected qubit slots.
  std::vector<cplx> psi(da * da, 0.0);
  psi[0 * da + 1] = inv;
  psi[1 * da + 0] = -inv;

  // Omega row index layout: ((i * da + a) * da + b) * db + j for (B1,A1,A2,B2).
  const auto omega_index = [da, db](int i, int a, int b, int j) {
    return ((i * da + a) * da + b) * db + j;
  };

  CMatrix m(db * db, db * db);
  for (int i = 0; i < db; ++i) {
    for (int j = 0; j < db; ++j) {
      for (int ip = 0; ip < db; ++ip) {
        for (int jp = 0; jp < db; ++jp) {
          cplx acc = 0.0;
          for (int a = 0; a < da; ++a) {
            for (int b = 0; b < da; ++b) {
              const cplx left = std::conj(psi[a * da + b]);
              if (left == cplx{}) continue;
              for (int ap = 0; ap < da; ++ap) {
                for (int bp = 0; bp < da; ++bp) {
                  const cplx right = psi[ap * da + bp];
                  if (right == cplx{}) continue;
                  acc += left * omega(omega_index(i, a, b, j), omega_index(ip, ap, bp, jp)) * right;
                }
              }
            }
          }
          m(i * db + j, ip * db + jp) = acc;
        }
      }
    }
  }
  return EffectiveOperator{rho.system, std::move(m)};
}

std::vector<cplx> decode_projector(std::span<const double> raw, int dim) {
  if (raw.size() != static_cast<std::size_t>(2 * dim)) {
    throw DimensionMismatchError("projector parameters must hold 2*dim reals");
  }
  std::vector<cplx> v(dim);
  double norm_sq = 0.0;
  for (int k = 0; k < dim; ++k) {
    v[k] = cplx{raw[2 * k], raw[2 * k + 1]};
    norm_sq += std::norm(v[k]);
  }
  const double norm = std::sqrt(norm_sq);
  if (norm < 1e-12) {
    std::fill(v.begin(), v.end(), cplx{});
    v[0] = 1.0;
    return v;
  }
  for (auto& c : v) c /= norm;
  return v;
}

double collective_probability(const EffectiveOperator& m, std::span<const double> x_raw,
                              std::span<const double> y_raw) {
  const int dl = local_dim(m.system);
  const auto x = decode_projector(x_raw, dl);
  const auto y = decode_projector(y_raw, dl);
  cplx p = 0.0;
  for (int i = 0; i < dl; ++i) {
    for (int j = 0; j < dl; ++j) {
      const cplx zl = std::conj(x[i] * y[j]);
      for (int ip = 0; ip < dl; ++ip) {
        for (int jp = 0; jp < dl; ++jp) {
          p += zl * m.mat(i * dl + j, ip * dl + jp) * (x[ip] * y[jp]);
        }
      }
    }
  }
  return std::clamp(p.real(), 0.0, 1.0);
}

double collective_probability_dense(const DensityMatrix& rho, std::span<const double> x_raw,
                                    std::span<const double> y_raw) {
  const int dl = local_dim(rho.system);
  const auto x = decode_projector(x_raw, dl);
  const auto y = decode_projector(y_raw, dl);
  CMatrix px(dl, dl);
  CMatrix py(dl, dl);
  for (int i = 0; i < dl; ++i) {
    for (int j = 0; j < dl; ++j) {
      px(i, j) = x[i] * std::conj(x[j]);
      py(i, j) = y[i] * std::conj(y[j]);
    }
  }
  const CMatrix projector = numkit::kron(px, numkit::kron(bell_projector(), py));
  const CMatrix omega = build_two_copy(rho);
  const cplx p = numkit::trace(numkit::mul(omega, projector));
  return std::clamp(p.real(), 0.0, 1.0);
}

namespace {

struct DecodedWithNorm {
  std::vector<cplx> unit;
  double norm = 0.0;  // 0 marks the degenerate |0> fallback
};

DecodedWithNorm decode_with_norm(std::span<const double> raw, int dim) {
  DecodedWithNorm out;
  out.unit.resize(dim);
  double norm_sq = 0.0;
  for (int k = 0; k < dim; ++k) {
    out.unit[k] = cplx{raw[2 * k], raw[2 * k + 1]};
    norm_sq += std::norm(out.unit[k]);
  }
  const double norm = std::sqrt(norm_sq);
  if (norm < 1e-12) {
    std::fill(out.unit.begin(), out.unit.end(), cplx{});
    out.unit[0] = 1.0;
    out.norm = 0.0;
    return out;
  }
  for (auto& c : out.unit) c /= norm;
  out.norm = norm;
  return out;
}

}  // namespace

void probability_gradient(const EffectiveOperator& m, std::span<const double> x_raw,
                          std::span<const double> y_raw, std::span<double> dx_out,
                          std::span<double> dy_out) {
  const int dl = local_dim(m.system);
  if (x_raw.size() != static_cast<std::size_t>(2 * dl) ||
      y_raw.size() != static_cast<std::size_t>(2 * dl) || dx_out.size() != x_raw.size() ||
      dy_out.size() != y_raw.size()) {
    throw DimensionMismatchError("probability_gradient: parameter length must be 2*local_dim");
  }
  const auto x = decode_with_norm(x_raw, dl);
  const auto y = decode_with_norm(y_raw, dl);

  // mz = M (x (x) y)
  std::vector<cplx> mz(dl * dl, 0.0);
  for (int i = 0; i < dl; ++i) {
    for (int j = 0; j < dl; ++j) {
      cplx acc = 0.0;
      for (int ip = 0; ip < dl; ++ip) {
        for (int jp = 0; jp < dl; ++jp) {
          acc += m.mat(i * dl + j, ip * dl + jp) * (x.unit[ip] * y.unit[jp]);
        }
      }
      mz[i * dl + j] = acc;
    }
  }

  // Wirtinger gradients on the unit sphere: g_x[i] = sum_j conj(y_j) mz[i,j].
  std::vector<cplx> gx(dl, 0.0), gy(dl, 0.0);
  for (int i = 0; i < dl; ++i) {
    for (int j = 0; j < dl; ++j) {
      gx[i] += std::conj(y.unit[j]) * mz[i * dl + j];
      gy[j] += std::conj(x.unit[i]) * mz[i * dl + j];
    }
  }

  const auto emit = [dl](const DecodedWithNorm& d, const std::vector<cplx>& g,
                         std::span<double> out) {
    if (d.norm == 0.0) {
      std::fill(out.begin(), out.end(), 0.0);
      return;
    }
    double radial = 0.0;
    for (int k = 0; k < dl; ++k) radial += (std::conj(g[k]) * d.unit[k]).real();
    const double scale = 2.0 / d.norm;
    for (int k = 0; k < dl; ++k) {
      out[2 * k] = scale * (g[k].real() - radial * d.unit[k].real());
      out[2 * k + 1] = scale * (g[k].imag() - radial * d.unit[k].imag());
    }
  };
  emit(x, gx, dx_out);
  emit(y, gy, dy_out);
}

LabeledState make_labeled_state(SystemKind system, std::uint64_t seed, std::uint64_t index) {
  DensityMatrix rho = random_density_matrix(system, seed, index);
  const double neg = negativity(rho);
  return LabeledState{std::move(rho), neg, index};
}

}  // namespace negadapt::qstate
