#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ksr/sparse.hpp"

namespace ksr {

// Lower-triangular CSR factor; the diagonal is the last entry of each row.
struct LowerTriangular {
  std::size_t n = 0;
  std::vector<std::size_t> row_offsets{0};
  std::vector<std::size_t> col_indices;
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }
};

Vector lower_solve(const LowerTriangular& L, std::span<const double> b);
Vector lower_transpose_solve(const LowerTriangular& L,
                             std::span<const double> b);

enum class ICKind { IC0, ICT };

struct ICFactor {
  LowerTriangular L;
  ICKind kind = ICKind::IC0;
  double droptol = 0.0;
  double shift = 0.0;  // diagonal shift applied after breakdown retries
};

// Reverse Cuthill-McKee ordering as perm[new] = old.  Components are visited
// in ascending min-id order; the identity is returned if it would not help.
std::vector<std::size_t> rcm(const SparseSymMatrix& K);

ICFactor ic0(const SparseSymMatrix& K);
ICFactor ict(const SparseSymMatrix& K, double droptol);

// Split-preconditioned operator x -> L^{-1} K L^{-T} x; plain K x without a
// factor.  Symmetric by construction, which is the contract MINRES needs.
struct PrecondOperator {
  const SparseSymMatrix* K = nullptr;
  const ICFactor* factor = nullptr;

  std::size_t n() const { return K->n(); }
  double flops_per_apply() const;
  mutable unsigned long long applies = 0;
};

Vector precond_apply(const PrecondOperator& op, std::span<const double> x);

}  // namespace ksr
