#pragma once

#include <cstddef>
#include <vector>

#include "ksr/dense.hpp"

namespace ksr {

struct GivensRotation {
    double c = 1.0;
    double s = 0.0;
    std::size_t index = 0;  // acts on rows (index, index+1)
};

/// Rotation zeroing b in (a, b); returned (c, s) satisfy c^2 + s^2 = 1.
GivensRotation make_givens(double a, double b, std::size_t index);

struct ThinQR {
    DenseColumnBlock Q;       // rows x cols, orthonormal columns
    DenseColumnBlock R;       // cols x cols, upper triangular, nonnegative diagonal
    std::size_t rank = 0;     // numerical rank from the diagonal of R
    bool full_rank = true;    // false when a diagonal fell below 1e-12 * ||A||_F
};

/// Unblocked Householder QR with explicit thin Q. Requires rows >= cols.
ThinQR thin_qr(const DenseColumnBlock& A);

struct ThinSVD {
    DenseColumnBlock Phi;   // rows x cols, orthonormal columns
    Vector Omega;           // singular values, nonincreasing
    DenseColumnBlock Psi;   // cols x cols, orthogonal
};

/// One-sided Jacobi SVD. Requires rows >= cols.
ThinSVD thin_svd(const DenseColumnBlock& A);

enum class EigenOrder { SmallestMagnitudeFirst, SmallestRealFirst };

struct SchurResult {
    DenseColumnBlock X;      // orthogonal m x m
    DenseColumnBlock Gamma;  // quasi-upper-triangular m x m
    /// Largest truncation index <= requested that does not split a 2x2 block;
    /// filled by admissible_truncation().
};

/// Ordered real Schur decomposition H = X Gamma X^T with the (block)
/// diagonal eigenvalues sorted by `order`. Symmetric fast path via Jacobi
/// sweeps; general path via Hessenberg QR iteration plus Sylvester-based
/// block reordering.
SchurResult real_schur_ordered(const DenseColumnBlock& H, EigenOrder order);

/// Largest index t <= want such that Gamma(t, t-1) == 0 (no 2x2 block split).
std::size_t admissible_truncation(const DenseColumnBlock& Gamma, std::size_t want);

/// Symmetric eigendecomposition by cyclic Jacobi; eigenvalues ascending.
/// Returns (V, lambda) with A = V diag(lambda) V^T.
struct SymEig {
    DenseColumnBlock V;
    Vector lambda;
};
SymEig jacobi_eig(const DenseColumnBlock& A);

/// Cosines of the principal angles between range(A) and range(B),
/// nonincreasing, clipped to [0, 1]. Rank-deficient inputs are reduced to
/// their numerical range first.
Vector principal_angles(const DenseColumnBlock& A, const DenseColumnBlock& B);

// Triangular solves with the R factor of a thin QR (upper triangular).
Vector upper_tri_solve(const DenseColumnBlock& R, std::span<const double> b);
Vector upper_tri_transpose_solve(const DenseColumnBlock& R, std::span<const double> b);

}  // namespace ksr
