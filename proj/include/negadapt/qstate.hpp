#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "negadapt/numkit.hpp"

namespace negadapt::qstate {

using numkit::cplx;
using numkit::CMatrix;

// Bipartite system A (x) B. The nonlocal Bell projection always acts on the
// qubit subsystem A of each copy; the local projectors act on B.
enum class SystemKind { QubitQubit, QubitQutrit };

constexpr int bell_subsystem_dim(SystemKind) { return 2; }
constexpr int local_dim(SystemKind k) { return k == SystemKind::QubitQubit ? 2 : 3; }
constexpr int total_dim(SystemKind k) { return 2 * local_dim(k); }
constexpr int two_copy_dim(SystemKind k) { return total_dim(k) * total_dim(k); }

// Most independent collective measurement settings for each system.
constexpr int max_iterations(SystemKind k) { return k == SystemKind::QubitQubit ? 10 : 21; }

SystemKind system_from_string(const std::string& name);
std::string to_string(SystemKind kind);

struct DensityMatrix {
  SystemKind system;
  CMatrix mat;  // total_dim x total_dim, index (a, b) -> a * local_dim + b
};

// Validates Hermiticity (1e-10), unit trace (1e-10) and positivity (-1e-10).
DensityMatrix make_density_matrix(SystemKind system, CMatrix mat);

// Ginibre induced measure with square G (Hilbert-Schmidt measure):
// G has i.i.d. standard complex Gaussian entries, rho = G G^dagger / Tr.
// Entries are drawn row-major, real part first, from Philox stream
// (seed, stream). Identical (seed, stream) gives a bitwise identical state.
DensityMatrix random_density_matrix(SystemKind system, std::uint64_t seed,
                                    std::uint64_t stream = 0);

// Transpose of the second (local) subsystem index.
CMatrix partial_transpose(const DensityMatrix& rho);

// |sum of negative eigenvalues of rho^Gamma|; in [0, 0.5] for these systems.
double negativity(const DensityMatrix& rho);

// Reorders a bipartite operator from (A, B) to (B, A) index convention.
CMatrix swap_subsystems(const CMatrix& m, int dim_a, int dim_b);

// Permutation matrix W with W (|a> (x) |b>) = |b> (x) |a>.
CMatrix swap_matrix(int dim_a, int dim_b);

// Omega = rho_BA (x) rho_AB, subsystem order (B1, A1, A2, B2), so the Bell
// projection acts on the two adjacent middle qubit slots.
CMatrix build_two_copy(const DensityMatrix& rho);

// Rank-1 projector onto the singlet (|01> - |10>)/sqrt(2).
CMatrix bell_projector();

struct EffectiveOperator {
  SystemKind system;
  CMatrix mat;  // local_dim^2 x local_dim^2, index (i, j) -> i * local_dim + j
};

// Contraction of Omega with the Bell projector:
// M[(i,j),(i',j')] = sum_{a,b,a',b'} conj(Psi_ab) Omega[(i,a,b,j),(i',a',b',j')] Psi_a'b',
// so that the collective probability is (x (x) y)^dagger M (x (x) y).
EffectiveOperator build_effective_operator(const DensityMatrix& rho);

// Raw projector parameters: 2 * local_dim reals, interleaved (re, im).
// Normalized to a unit complex vector; a raw vector of norm below 1e-12
// decodes to the canonical |0>.
std::vector<cplx> decode_projector(std::span<const double> raw, int dim);

// Fast path: P = (x (x) y)^dagger M (x (x) y), clipped to [0, 1].
double collective_probability(const EffectiveOperator& m, std::span<const double> x_raw,
                              std::span<const double> y_raw);

// Reference path: the full trace Tr[Omega (Pi_x (x) Pi_Bell (x) Pi_y)].
double collective_probability_dense(const DensityMatrix& rho, std::span<const double> x_raw,
                                    std::span<const double> y_raw);

// Exact gradient of the fast-path probability with respect to the raw
// parameters, including the normalization Jacobian. Outputs must have the
// same length as the inputs. Zero-norm raw vectors get a zero gradient.
void probability_gradient(const EffectiveOperator& m, std::span<const double> x_raw,
                          std::span<const double> y_raw, std::span<double> dx_out,
                          std::span<double> dy_out);

struct LabeledState {
  DensityMatrix rho;
  double negativity = 0.0;
  std::uint64_t seed_tag = 0;
};

// State `index` of the dataset identified by `seed`: an independent Philox
// stream per index, so regeneration is order-free.
LabeledState make_labeled_state(SystemKind system, std::uint64_t seed, std::uint64_t index);

}  // namespace negadapt::qstate
