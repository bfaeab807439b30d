#pragma once

#include <cstddef>
#include <vector>

#include "ksr/dense.hpp"
#include "ksr/factor.hpp"
#include "ksr/precond.hpp"

namespace ksr {

// Approximate Krylov decomposition op U[:, 0..k-2] = U Hbar + Rres with
// U orthonormal and U^T Rres = 0.
struct KrylovDecomposition {
  DenseColumnBlock U;     // n x k, orthonormal columns
  DenseColumnBlock Hbar;  // k x (k-1)
  DenseColumnBlock Rres;  // n x (k-1)
  std::size_t rank_dropped = 0;  // columns removed from a rank-deficient input

  std::size_t k() const { return U.cols(); }
};

struct KSConfig {
  std::size_t J = 2;        // max cycles
  std::size_t m = 0;        // cycle length (expansion target)
  std::size_t k = 0;        // retained dimension
  double conv_tol = 2e-8;
  EigenOrder ordering = EigenOrder::SmallestMagnitudeFirst;
  // Route the first cycle's orthogonalization through the pre-mixing basis;
  // algebraically equivalent to the plain path.
  bool first_cycle_shortcut = false;
};

// Auxiliary output of the initialization, needed for the first-cycle
// shortcut and for diagnostics.
struct InitDetail {
  DenseColumnBlock Utilde;  // thin-QR basis of the input block
  DenseColumnBlock Vk;      // right singular vectors, cyclically permuted
  Vector omega;             // singular values of the raw residual, descending
  double rtilde_fro = 0.0;  // Frobenius norm of the raw residual
};

// Thin QR + Rayleigh quotient + residual SVD; expels the largest singular
// direction of the residual into the trailing basis column so the returned
// residual norm is minimal over all Krylov decompositions with this range.
KrylovDecomposition min_backward_error_decomposition(const PrecondOperator& op,
                                                     const DenseColumnBlock& Wtilde,
                                                     double* flops = nullptr,
                                                     InitDetail* detail = nullptr);

struct CycleResult {
  KrylovDecomposition d;
  Vector ritz_values;            // retained, in selection order
  Vector column_residual_norms;  // per retained Schur vector
  double residual_norm = 0.0;    // ||Rres||_F after truncation
  bool invariant = false;        // happy breakdown: subspace exactly invariant
};

struct FirstCycleBasis {
  const DenseColumnBlock* Utilde = nullptr;
  const DenseColumnBlock* Vk = nullptr;
};

// One extend-correct-truncate cycle: m-k+1 Arnoldi steps with full
// orthogonalization, residual-corrected Rayleigh quotient, ordered real Schur
// truncation to k-1 retained vectors (k when a 2x2 block straddles the cut).
CycleResult ks_cycle(const PrecondOperator& op, const KrylovDecomposition& d,
                     const KSConfig& cfg, double* flops = nullptr,
                     const FirstCycleBasis* shortcut = nullptr);

struct WarmstartResult {
  DenseColumnBlock U;  // final orthonormal block, usable as a recycle basis
  KrylovDecomposition d;
  std::size_t cycles_used = 0;
  Vector residual_norms;                  // per cycle, after truncation
  std::vector<Vector> ritz_per_cycle;
  std::vector<Vector> column_residuals_per_cycle;
  double flops = 0.0;                     // instrumented dense-algebra count
};

WarmstartResult warmstart_krylov_schur(const PrecondOperator& op,
                                       const DenseColumnBlock& Wtilde,
                                       const KSConfig& cfg);

struct FlopAudit {
  double init_flops = 0.0;   // 8 n k^2
  double cycle_flops = 0.0;  // 2 n (m^2 - k^2 + 2 m k)
};

FlopAudit flop_audit(const KSConfig& cfg, std::size_t n);

// Residual norm per leading column: || op U e_j - U (Hbar e_j) || combining
// the stored residual block with the trailing-column coupling.
Vector decomposition_column_residuals(const KrylovDecomposition& d);

}  // namespace ksr
