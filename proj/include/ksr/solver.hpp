#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "ksr/dense.hpp"
#include "ksr/precond.hpp"

namespace ksr {

// Recycle space (W, C, Rfac) with op(W) = C Rfac and C orthonormal.
struct RecycleSpace {
  DenseColumnBlock W, C;
  DenseColumnBlock Rfac;  // k x k upper triangular

  std::size_t k() const { return W.cols(); }
  bool empty() const { return k() == 0; }
};

// Builds the triple from a basis by applying the operator and a thin QR;
// rank-deficient bases are truncated to their numerical rank.
RecycleSpace make_recycle_space(const PrecondOperator& op,
                                const DenseColumnBlock& W);

// Residual check of the recycle-space relation, ||op(W) - C Rfac||_F.
double recycle_space_residual(const PrecondOperator& op,
                              const RecycleSpace& rs);

struct SolverOptions {
  double tol = 1e-8;
  std::size_t maxit = 1000;
  std::size_t k_next = 0;
  // Lanczos vectors retained for the recycle-space update; iterations beyond
  // the window contribute to the solve but not to the extraction.
  std::size_t window = 400;
  // Convergence reference: the unprojected initial residual by default.
  bool tol_relative_to_projected = false;
  // Test mode: sample the true residual every 10 iterations.
  bool sample_true_residual = false;
  // Re-orthogonalize each new basis vector against the retained window; keeps
  // the extraction basis accurate on long runs at O(n * window) per iteration.
  bool full_reorthogonalize = false;
};

struct SolveReport {
  std::size_t iterations = 0;
  Vector residual_history;  // estimated ||r_j||, starting at ||r_0||
  std::vector<std::pair<std::size_t, double>> sampled_true_residuals;
  double true_final_residual = 0.0;
  std::size_t matvecs = 0;
  double flops_estimate = 0.0;
  double wall_time = 0.0;
  bool converged = false;
  bool breakdown = false;
  std::size_t reorthogonalizations = 0;
  bool recycle_update_skipped = false;
};

// Retained augmented-Lanczos data: op V_j = C B_j + V_{j+1} T, with T the
// tridiagonal built from (alpha, beta).
struct LanczosHistory {
  DenseColumnBlock V;          // n x (j+1) retained basis
  DenseColumnBlock B;          // k x j projections C^T op v_i
  std::vector<double> alpha;   // j diagonal entries
  std::vector<double> beta;    // j subdiagonal entries
  std::size_t j = 0;           // retained column count
};

struct RminresResult {
  Vector u;
  RecycleSpace next;
  SolveReport report;
  LanczosHistory history;
};

// u0' = u0 + W Rfac^{-1} C^T r0 and r0' = (I - C C^T) r0.
std::pair<Vector, Vector> project_initial_guess(const RecycleSpace& rs,
                                                const Vector& u0,
                                                const Vector& r0);

std::pair<Vector, SolveReport> minres(const PrecondOperator& op,
                                      const Vector& f, const Vector& u0,
                                      double tol, std::size_t maxit);

RminresResult rminres(const PrecondOperator& op, const Vector& f,
                      const Vector& u0, const RecycleSpace& rs,
                      const SolverOptions& opt);

// Harmonic-Ritz extraction over span{W, V_j} targeting the smallest
// eigenvalues, assembled from the small matrices only (no operator products).
RecycleSpace update_recycle_space(const RecycleSpace& rs,
                                  const LanczosHistory& hist,
                                  std::size_t k_next, SolveReport* report);

}  // namespace ksr
