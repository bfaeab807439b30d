#include "ksr/factor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ksr {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

}  // namespace

GivensRotation make_givens(double a, double b, std::size_t index) {
    GivensRotation g;
    g.index = index;
    if (b == 0.0) {
        g.c = (a >= 0.0 || a == 0.0) ? 1.0 : -1.0;
        g.s = 0.0;
    } else {
        const double r = std::hypot(a, b);
        g.c = a / r;
        g.s = b / r;
    }
    return g;
}

ThinQR thin_qr(const DenseColumnBlock& A) {
    const std::size_t n = A.rows(), m = A.cols();
    if (n < m) throw std::invalid_argument("thin_qr: rows < cols");
    DenseColumnBlock W = A;  // reflectors accumulate in place
    DenseColumnBlock R(m, m);
    std::vector<double> beta(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        // Householder vector for column j below row j.
        double sigma = 0.0;
        for (std::size_t i = j + 1; i < n; ++i) sigma += W(i, j) * W(i, j);
        const double alpha = W(j, j);
        double v0 = 1.0;
        if (sigma == 0.0) {
            beta[j] = 0.0;
        } else {
            const double mu = std::sqrt(alpha * alpha + sigma);
            v0 = (alpha <= 0.0) ? alpha - mu : -sigma / (alpha + mu);
            beta[j] = 2.0 * v0 * v0 / (sigma + v0 * v0);
        }
        // Normalize so v(j) = 1; store tail in W(j+1: , j).
        if (v0 != 0.0)
            for (std::size_t i = j + 1; i < n; ++i) W(i, j) /= v0;
        const double rjj = (sigma == 0.0) ? alpha : std::sqrt(alpha * alpha + sigma);
        // Apply reflector to trailing columns.
        for (std::size_t k = j + 1; k < m; ++k) {
            double s = W(j, k);
            for (std::size_t i = j + 1; i < n; ++i) s += W(i, j) * W(i, k);
            s *= beta[j];
            W(j, k) -= s;
            for (std::size_t i = j + 1; i < n; ++i) W(i, k) -= s * W(i, j);
        }
        W(j, j) = rjj;
    }
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i <= j; ++i) R(i, j) = W(i, j);
    // Form thin Q by applying reflectors to the leading m columns of I.
    DenseColumnBlock Q(n, m);
    for (std::size_t j = 0; j < m; ++j) Q(j, j) = 1.0;
    for (std::size_t j = m; j-- > 0;) {
        if (beta[j] == 0.0) continue;
        for (std::size_t k = 0; k < m; ++k) {
            double s = Q(j, k);
            for (std::size_t i = j + 1; i < n; ++i) s += W(i, j) * Q(i, k);
            s *= beta[j];
            Q(j, k) -= s;
            for (std::size_t i = j + 1; i < n; ++i) Q(i, k) -= s * W(i, j);
        }
    }
    // Nonnegative diagonal of R.
    for (std::size_t j = 0; j < m; ++j) {
        if (R(j, j) < 0.0) {
            for (std::size_t k = j; k < m; ++k) R(j, k) = -R(j, k);
            for (std::size_t i = 0; i < n; ++i) Q(i, j) = -Q(i, j);
        }
    }
    ThinQR out{std::move(Q), std::move(R), m, true};
    const double tol = 1e-12 * A.frobenius_norm();
    out.rank = 0;
    for (std::size_t j = 0; j < m; ++j)
        if (std::abs(out.R(j, j)) >= tol) ++out.rank;
    out.full_rank = (out.rank == m);
    return out;
}

ThinSVD thin_svd(const DenseColumnBlock& A) {
    const std::size_t n = A.rows(), m = A.cols();
    if (n < m) throw std::invalid_argument("thin_svd: rows < cols");
    DenseColumnBlock B = A;
    DenseColumnBlock V = DenseColumnBlock::identity(m);
    const double normA = A.frobenius_norm();
    const double tol = kEps * std::max(1.0, normA);
    for (int sweep = 0; sweep < 60; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < m; ++p) {
            for (std::size_t q = p + 1; q < m; ++q) {
                double app = dot(B.col(p), B.col(p));
                double aqq = dot(B.col(q), B.col(q));
                double apq = dot(B.col(p), B.col(q));
                if (std::abs(apq) <= tol * tol ||
                    std::abs(apq) <= 1e-16 * std::sqrt(app * aqq))
                    continue;
                rotated = true;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0.0)
                                     ? 1.0 / (zeta + std::sqrt(1.0 + zeta * zeta))
                                     : -1.0 / (-zeta + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                auto bp = B.col(p), bq = B.col(q);
                for (std::size_t i = 0; i < n; ++i) {
                    const double x = bp[i], y = bq[i];
                    bp[i] = c * x - s * y;
                    bq[i] = s * x + c * y;
                }
                auto vp = V.col(p), vq = V.col(q);
                for (std::size_t i = 0; i < m; ++i) {
                    const double x = vp[i], y = vq[i];
                    vp[i] = c * x - s * y;
                    vq[i] = s * x + c * y;
                }
            }
        }
        if (!rotated) break;
    }
    Vector omega(m);
    for (std::size_t j = 0; j < m; ++j) omega[j] = norm2(B.col(j));
    // Sort descending.
    std::vector<std::size_t> ord(m);
    std::iota(ord.begin(), ord.end(), 0u);
    std::stable_sort(ord.begin(), ord.end(),
                     [&](std::size_t a, std::size_t b) { return omega[a] > omega[b]; });
    ThinSVD out;
    out.Phi = DenseColumnBlock(n, m);
    out.Psi = DenseColumnBlock(m, m);
    out.Omega.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        const std::size_t src = ord[j];
        out.Omega[j] = omega[src];
        out.Psi.set_col(j, V.col(src));
        if (omega[src] > tol) {
            auto dst = out.Phi.col(j);
            auto b = B.col(src);
            for (std::size_t i = 0; i < n; ++i) dst[i] = b[i] / omega[src];
        }
    }
    // Complete orthonormal columns of Phi for (near-)zero singular values.
    for (std::size_t j = 0; j < m; ++j) {
        if (out.Omega[j] > tol) continue;
        for (std::size_t cand = 0; cand < n; ++cand) {
            Vector e(n, 0.0);
            e[cand] = 1.0;
            for (std::size_t k = 0; k < m; ++k) {
                if (k == j && out.Omega[j] <= tol && norm2(out.Phi.col(k)) == 0.0) continue;
                const double proj = dot(out.Phi.col(k), e);
                for (std::size_t i = 0; i < n; ++i) e[i] -= proj * out.Phi(i, k);
            }
            const double nrm = norm2(e);
            if (nrm > 0.5) {
                for (double& v : e) v /= nrm;
                out.Phi.set_col(j, e);
                break;
            }
        }
    }
    return out;
}

SymEig jacobi_eig(const DenseColumnBlock& A) {
    const std::size_t n = A.rows();
    if (n != A.cols()) throw std::invalid_argument("jacobi_eig: not square");
    DenseColumnBlock S = A;
    DenseColumnBlock V = DenseColumnBlock::identity(n);
    const double normA = std::max(A.frobenius_norm(), kEps);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += S(p, q) * S(p, q);
        if (std::sqrt(off) <= 1e-15 * normA) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = S(p, q);
                if (std::abs(apq) <= 1e-18 * normA) continue;
                const double theta = (S(q, q) - S(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0)
                                     ? 1.0 / (theta + std::sqrt(1.0 + theta * theta))
                                     : -1.0 / (-theta + std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < n; ++i) {
                    const double x = S(i, p), y = S(i, q);
                    S(i, p) = c * x - s * y;
                    S(i, q) = s * x + c * y;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double x = S(p, i), y = S(q, i);
                    S(p, i) = c * x - s * y;
                    S(q, i) = s * x + c * y;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double x = V(i, p), y = V(i, q);
                    V(i, p) = c * x - s * y;
                    V(i, q) = s * x + c * y;
                }
            }
        }
    }
    SymEig out;
    Vector lam(n);
    for (std::size_t i = 0; i < n; ++i) lam[i] = S(i, i);
    std::vector<std::size_t> ord(n);
    std::iota(ord.begin(), ord.end(), 0u);
    std::stable_sort(ord.begin(), ord.end(),
                     [&](std::size_t a, std::size_t b) { return lam[a] < lam[b]; });
    out.V = DenseColumnBlock(n, n);
    out.lambda.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        out.lambda[j] = lam[ord[j]];
        out.V.set_col(j, V.col(ord[j]));
    }
    return out;
}

namespace {

// ---- general (mildly nonsymmetric) real Schur path ----

void hessenberg_reduce(DenseColumnBlock& H, DenseColumnBlock& Q) {
    const std::size_t n = H.rows();
    Q = DenseColumnBlock::identity(n);
    for (std::size_t j = 0; j + 2 < n; ++j) {
        double sigma = 0.0;
        for (std::size_t i = j + 2; i < n; ++i) sigma += H(i, j) * H(i, j);
        const double alpha = H(j + 1, j);
        if (sigma == 0.0) continue;
        const double mu = std::sqrt(alpha * alpha + sigma);
        const double v0 = (alpha <= 0.0) ? alpha - mu : -sigma / (alpha + mu);
        const double beta = 2.0 * v0 * v0 / (sigma + v0 * v0);
        Vector v(n, 0.0);
        v[j + 1] = 1.0;
        for (std::size_t i = j + 2; i < n; ++i) v[i] = H(i, j) / v0;
        // H = (I - beta v v^T) H (I - beta v v^T), Q = Q (I - beta v v^T)
        for (std::size_t k = 0; k < n; ++k) {
            double s = 0.0;
            for (std::size_t i = j + 1; i < n; ++i) s += v[i] * H(i, k);
            s *= beta;
            for (std::size_t i = j + 1; i < n; ++i) H(i, k) -= s * v[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t k = j + 1; k < n; ++k) s += H(i, k) * v[k];
            s *= beta;
            for (std::size_t k = j + 1; k < n; ++k) H(i, k) -= s * v[k];
        }
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t k = j + 1; k < n; ++k) s += Q(i, k) * v[k];
            s *= beta;
            for (std::size_t k = j + 1; k < n; ++k) Q(i, k) -= s * v[k];
        }
        for (std::size_t i = j + 2; i < n; ++i) H(i, j) = 0.0;
    }
}

void apply_house3(DenseColumnBlock& H, DenseColumnBlock& Q, std::size_t r, double x, double y,
                  double z, std::size_t nrows) {
    // 3-element Householder acting on rows/cols r, r+1, r+2 (z ignored if
    // r+2 >= nrows).
    const bool three = (r + 2 < nrows);
    const double nrm = three ? std::sqrt(x * x + y * y + z * z) : std::hypot(x, y);
    if (nrm == 0.0) return;
    const double alpha = (x >= 0.0) ? -nrm : nrm;
    double v0 = x - alpha, v1 = y, v2 = three ? z : 0.0;
    const double vnorm2 = v0 * v0 + v1 * v1 + v2 * v2;
    if (vnorm2 == 0.0) return;
    const double beta = 2.0 / vnorm2;
    const std::size_t n = H.rows();
    for (std::size_t k = 0; k < n; ++k) {
        double s = v0 * H(r, k) + v1 * H(r + 1, k) + (three ? v2 * H(r + 2, k) : 0.0);
        s *= beta;
        H(r, k) -= s * v0;
        H(r + 1, k) -= s * v1;
        if (three) H(r + 2, k) -= s * v2;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = H(i, r) * v0 + H(i, r + 1) * v1 + (three ? H(i, r + 2) * v2 : 0.0);
        s *= beta;
        H(i, r) -= s * v0;
        H(i, r + 1) -= s * v1;
        if (three) H(i, r + 2) -= s * v2;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = Q(i, r) * v0 + Q(i, r + 1) * v1 + (three ? Q(i, r + 2) * v2 : 0.0);
        s *= beta;
        Q(i, r) -= s * v0;
        Q(i, r + 1) -= s * v1;
        if (three) Q(i, r + 2) -= s * v2;
    }
}

void rotate_rows_cols(DenseColumnBlock& H, DenseColumnBlock& Q, std::size_t p, double c, double s) {
    const std::size_t n = H.rows();
    for (std::size_t k = 0; k < n; ++k) {
        const double x = H(p, k), y = H(p + 1, k);
        H(p, k) = c * x + s * y;
        H(p + 1, k) = -s * x + c * y;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double x = H(i, p), y = H(i, p + 1);
        H(i, p) = c * x + s * y;
        H(i, p + 1) = -s * x + c * y;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double x = Q(i, p), y = Q(i, p + 1);
        Q(i, p) = c * x + s * y;
        Q(i, p + 1) = -s * x + c * y;
    }
}

// Rotate a 2x2 diagonal block with real eigenvalues to upper triangular form.
void standardize_block(DenseColumnBlock& H, DenseColumnBlock& Q, std::size_t p) {
    const double a = H(p, p), b = H(p, p + 1), c = H(p + 1, p), d = H(p + 1, p + 1);
    if (c == 0.0) return;
    const double disc = (a - d) * (a - d) + 4.0 * b * c;
    if (disc < 0.0) return;  // complex pair stays as a 2x2 block
    const double sq = std::sqrt(disc);
    // Pick the eigenvalue whose (lam - d) avoids cancellation.
    const double half = (a - d) / 2.0;
    const double lam_minus_d = (half >= 0.0) ? half + sq / 2.0 : half - sq / 2.0;
    // Eigenvector of [[a,b],[c,d]] for lam: (lam - d, c).
    double vx = lam_minus_d, vy = c;
    const double nrm = std::hypot(vx, vy);
    if (nrm == 0.0) return;
    rotate_rows_cols(H, Q, p, vx / nrm, vy / nrm);
    H(p + 1, p) = 0.0;
}

void francis_qr(DenseColumnBlock& H, DenseColumnBlock& Q) {
    const std::size_t n = H.rows();
    if (n <= 1) return;
    std::size_t iter_total = 0;
    const std::size_t max_iter = 100 * n;
    std::size_t hi = n - 1;
    while (true) {
        // Zero negligible subdiagonals.
        for (std::size_t i = 1; i < n; ++i)
            if (std::abs(H(i, i - 1)) <=
                kEps * (std::abs(H(i - 1, i - 1)) + std::abs(H(i, i))))
                H(i, i - 1) = 0.0;
        // Deflate from the bottom.
        while (hi > 0) {
            if (H(hi, hi - 1) == 0.0) {
                --hi;
            } else if (hi >= 1 && (hi == 1 || H(hi - 1, hi - 2) == 0.0)) {
                standardize_block(H, Q, hi - 1);
                if (H(hi, hi - 1) != 0.0) break;  // genuine complex 2x2 block
                --hi;
            } else {
                break;
            }
        }
        if (hi == 0) break;
        // If the active block bottom is a deflated complex 2x2, skip past it.
        if (H(hi, hi - 1) != 0.0 && (hi == 1 || H(hi - 1, hi - 2) == 0.0)) {
            if (hi <= 1) break;
            hi -= 2;
            continue;
        }
        // Find the top of the active block.
        std::size_t lo = hi;
        while (lo > 0 && H(lo, lo - 1) != 0.0) --lo;
        if (++iter_total > max_iter)
            throw std::runtime_error("real_schur_ordered: QR iteration failed to converge");
        // Francis double-shift on H(lo..hi, lo..hi).
        const std::size_t m = hi;
        const double s = H(m - 1, m - 1) + H(m, m);
        const double t = H(m - 1, m - 1) * H(m, m) - H(m - 1, m) * H(m, m - 1);
        double x = H(lo, lo) * H(lo, lo) + H(lo, lo + 1) * H(lo + 1, lo) - s * H(lo, lo) + t;
        double y = H(lo + 1, lo) * (H(lo, lo) + H(lo + 1, lo + 1) - s);
        double z = (lo + 2 <= hi) ? H(lo + 1, lo) * H(lo + 2, lo + 1) : 0.0;
        for (std::size_t r = lo; r + 1 <= hi; ++r) {
            apply_house3(H, Q, r, x, y, z, hi + 1);
            if (r + 1 <= hi) {
                x = H(r + 1, r);
                y = (r + 2 <= hi) ? H(r + 2, r) : 0.0;
                z = (r + 3 <= hi) ? H(r + 3, r) : 0.0;
                if (r > lo) {
                    H(r + 1, r - 1) = 0.0;
                    if (r + 2 <= hi) H(r + 2, r - 1) = 0.0;
                }
            }
        }
    }
    // Final cleanup: standardize any remaining real 2x2 blocks.
    for (std::size_t i = 1; i < n; ++i)
        if (std::abs(H(i, i - 1)) <= kEps * (std::abs(H(i - 1, i - 1)) + std::abs(H(i, i))))
            H(i, i - 1) = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p)
        if (H(p + 1, p) != 0.0) standardize_block(H, Q, p);
    for (std::size_t i = 2; i < n; ++i)
        for (std::size_t j = 0; j + 1 < i; ++j) H(i, j) = 0.0;
}

struct Block {
    std::size_t start;
    std::size_t size;  // 1 or 2
    double re;
    double mag;
};

std::vector<Block> scan_blocks(const DenseColumnBlock& T) {
    const std::size_t n = T.rows();
    std::vector<Block> blocks;
    std::size_t p = 0;
    while (p < n) {
        if (p + 1 < n && T(p + 1, p) != 0.0) {
            const double a = T(p, p), b = T(p, p + 1), c = T(p + 1, p), d = T(p + 1, p + 1);
            const double re = (a + d) / 2.0;
            const double disc = (a - d) * (a - d) + 4.0 * b * c;
            const double im2 = disc < 0.0 ? -disc / 4.0 : 0.0;
            blocks.push_back({p, 2, re, std::sqrt(re * re + im2)});
            p += 2;
        } else {
            blocks.push_back({p, 1, T(p, p), std::abs(T(p, p))});
            ++p;
        }
    }
    return blocks;
}

void solve_small_sylvester(const DenseColumnBlock& A, const DenseColumnBlock& B,
                           const DenseColumnBlock& C, DenseColumnBlock& X) {
    // A X - X B = C with A (p x p), B (q x q), p, q <= 2. Kron system.
    const std::size_t p = A.rows(), q = B.rows();
    const std::size_t N = p * q;
    DenseColumnBlock M(N, N);
    Vector rhs(N);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < q; ++j) {
            const std::size_t row = j * p + i;
            rhs[row] = C(i, j);
            for (std::size_t k = 0; k < p; ++k) M(row, j * p + k) += A(i, k);
            for (std::size_t l = 0; l < q; ++l) M(row, l * p + i) -= B(l, j);
        }
    // Gaussian elimination with partial pivoting.
    std::vector<std::size_t> piv(N);
    std::iota(piv.begin(), piv.end(), 0u);
    for (std::size_t k = 0; k < N; ++k) {
        std::size_t best = k;
        for (std::size_t i = k + 1; i < N; ++i)
            if (std::abs(M(i, k)) > std::abs(M(best, k))) best = i;
        if (best != k) {
            for (std::size_t j = 0; j < N; ++j) std::swap(M(k, j), M(best, j));
            std::swap(rhs[k], rhs[best]);
        }
        if (M(k, k) == 0.0) throw std::runtime_error("sylvester: singular system");
        for (std::size_t i = k + 1; i < N; ++i) {
            const double f = M(i, k) / M(k, k);
            if (f == 0.0) continue;
            for (std::size_t j = k; j < N; ++j) M(i, j) -= f * M(k, j);
            rhs[i] -= f * rhs[k];
        }
    }
    Vector x(N);
    for (std::size_t k = N; k-- > 0;) {
        double sum = rhs[k];
        for (std::size_t j = k + 1; j < N; ++j) sum -= M(k, j) * x[j];
        x[k] = sum / M(k, k);
    }
    X = DenseColumnBlock(p, q);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < q; ++j) X(i, j) = x[j * p + i];
}

// Swap adjacent diagonal blocks starting at `pos` with sizes p and q.
void swap_blocks(DenseColumnBlock& T, DenseColumnBlock& Q, std::size_t pos, std::size_t p,
                 std::size_t q) {
    const std::size_t w = p + q;
    DenseColumnBlock A11(p, p), A22(q, q), A12(p, q);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) A11(i, j) = T(pos + i, pos + j);
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = 0; j < q; ++j) A22(i, j) = T(pos + p + i, pos + p + j);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < q; ++j) A12(i, j) = T(pos + i, pos + p + j);
    DenseColumnBlock X;
    solve_small_sylvester(A11, A22, A12, X);  // A11 X - X A22 = A12
    // Columns of [X; -I] ... invariant subspace of T block for A22: [X; I]
    // with A11 X + A12 = X A22 requires A11 X - X A22 = -A12; flip sign.
    for (double& v : X.data()) v = -v;
    DenseColumnBlock Z(w, q);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < q; ++j) Z(i, j) = X(i, j);
    for (std::size_t j = 0; j < q; ++j) Z(p + j, j) = 1.0;
    // Full orthogonal factor of Z via Householder on a w x w identity.
    ThinQR qr = thin_qr(Z);
    // Complete to w x w: columns of qr.Q span range(Z); fill the complement.
    DenseColumnBlock Qf(w, w);
    for (std::size_t j = 0; j < q; ++j) Qf.set_col(j, qr.Q.col(j));
    std::size_t filled = q;
    for (std::size_t cand = 0; cand < w && filled < w; ++cand) {
        Vector e(w, 0.0);
        e[cand] = 1.0;
        for (int pass = 0; pass < 2; ++pass)
            for (std::size_t k = 0; k < filled; ++k) {
                const double proj = dot(Qf.col(k), e);
                for (std::size_t i = 0; i < w; ++i) e[i] -= proj * Qf(i, k);
            }
        const double nrm = norm2(e);
        if (nrm > 0.3) {
            for (double& v : e) v /= nrm;
            Qf.set_col(filled++, e);
        }
    }
    if (filled < w) throw std::runtime_error("swap_blocks: orthogonal completion failed");
    // Apply Qf to T rows/cols pos..pos+w-1 and accumulate into Q.
    const std::size_t n = T.rows();
    DenseColumnBlock tmp(w, 1);
    for (std::size_t k = 0; k < n; ++k) {
        Vector col(w);
        for (std::size_t i = 0; i < w; ++i) col[i] = T(pos + i, k);
        for (std::size_t i = 0; i < w; ++i) {
            double s = 0.0;
            for (std::size_t l = 0; l < w; ++l) s += Qf(l, i) * col[l];
            T(pos + i, k) = s;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        Vector row(w);
        for (std::size_t j = 0; j < w; ++j) row[j] = T(i, pos + j);
        for (std::size_t j = 0; j < w; ++j) {
            double s = 0.0;
            for (std::size_t l = 0; l < w; ++l) s += row[l] * Qf(l, j);
            T(i, pos + j) = s;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        Vector row(w);
        for (std::size_t j = 0; j < w; ++j) row[j] = Q(i, pos + j);
        for (std::size_t j = 0; j < w; ++j) {
            double s = 0.0;
            for (std::size_t l = 0; l < w; ++l) s += row[l] * Qf(l, j);
            Q(i, pos + j) = s;
        }
    }
    // Zero the structural lower block and restandardize.
    for (std::size_t i = q; i < w; ++i)
        for (std::size_t j = 0; j < q; ++j) T(pos + i, pos + j) = 0.0;
    if (q == 2) standardize_block(T, Q, pos);
    if (p == 2) standardize_block(T, Q, pos + q);
}

double block_key(const Block& b, EigenOrder order) {
    return order == EigenOrder::SmallestMagnitudeFirst ? b.mag : b.re;
}

void reorder_schur(DenseColumnBlock& T, DenseColumnBlock& Q, EigenOrder order) {
    // Selection sort by adjacent swaps.
    while (true) {
        auto blocks = scan_blocks(T);
        bool swapped = false;
        for (std::size_t b = 0; b + 1 < blocks.size(); ++b) {
            if (block_key(blocks[b + 1], order) <
                block_key(blocks[b], order) - 1e-15 * (blocks[b].mag + 1.0)) {
                swap_blocks(T, Q, blocks[b].start, blocks[b].size, blocks[b + 1].size);
                swapped = true;
                break;
            }
        }
        if (!swapped) break;
    }
}

}  // namespace

SchurResult real_schur_ordered(const DenseColumnBlock& H, EigenOrder order) {
    const std::size_t n = H.rows();
    if (n != H.cols()) throw std::invalid_argument("real_schur_ordered: not square");
    double asym = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) asym += (H(i, j) - H(j, i)) * (H(i, j) - H(j, i));
    asym = std::sqrt(asym);
    const double normH = std::max(H.frobenius_norm(), kEps);
    SchurResult out;
    if (asym <= 1e-12 * normH) {
        // Symmetric fast path: Jacobi eigendecomposition plus ordering.
        DenseColumnBlock S(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) S(i, j) = 0.5 * (H(i, j) + H(j, i));
        SymEig eig = jacobi_eig(S);
        std::vector<std::size_t> ord(n);
        std::iota(ord.begin(), ord.end(), 0u);
        if (order == EigenOrder::SmallestMagnitudeFirst)
            std::stable_sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) {
                return std::abs(eig.lambda[a]) < std::abs(eig.lambda[b]);
            });
        out.X = DenseColumnBlock(n, n);
        out.Gamma = DenseColumnBlock(n, n);
        for (std::size_t j = 0; j < n; ++j) {
            out.X.set_col(j, eig.V.col(ord[j]));
            out.Gamma(j, j) = eig.lambda[ord[j]];
        }
        return out;
    }
    DenseColumnBlock T = H, Q;
    hessenberg_reduce(T, Q);
    francis_qr(T, Q);
    reorder_schur(T, Q, order);
    out.X = std::move(Q);
    out.Gamma = std::move(T);
    return out;
}

std::size_t admissible_truncation(const DenseColumnBlock& Gamma, std::size_t want) {
    std::size_t t = std::min(want, Gamma.rows());
    while (t > 0 && t < Gamma.rows() && Gamma(t, t - 1) != 0.0) ++t;
    return t;
}

Vector principal_angles(const DenseColumnBlock& A, const DenseColumnBlock& B) {
    if (A.rows() != B.rows()) throw std::invalid_argument("principal_angles: row mismatch");
    auto range_basis = [](const DenseColumnBlock& M) {
        ThinSVD svd = thin_svd(M);
        const double tol = 1e-12 * std::max(1.0, svd.Omega.empty() ? 0.0 : svd.Omega.front());
        std::size_t r = 0;
        while (r < svd.Omega.size() && svd.Omega[r] > tol) ++r;
        return svd.Phi.leading_cols(r);
    };
    DenseColumnBlock Qa = range_basis(A);
    DenseColumnBlock Qb = range_basis(B);
    if (Qa.cols() == 0 || Qb.cols() == 0) return {};
    DenseColumnBlock M = transpose_matmul(Qa, Qb);
    if (M.rows() < M.cols()) M = transpose(M);
    ThinSVD svd = thin_svd(M);
    const std::size_t k = std::min(Qa.cols(), Qb.cols());
    Vector cosines(svd.Omega.begin(), svd.Omega.begin() + static_cast<std::ptrdiff_t>(k));
    for (double& c : cosines) c = std::clamp(c, 0.0, 1.0);
    return cosines;
}

Vector upper_tri_solve(const DenseColumnBlock& R, std::span<const double> b) {
    const std::size_t n = R.rows();
    if (R.cols() != n || b.size() != n) throw std::invalid_argument("upper_tri_solve: mismatch");
    Vector x(b.begin(), b.end());
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = i + 1; j < n; ++j) x[i] -= R(i, j) * x[j];
        if (R(i, i) == 0.0) throw std::runtime_error("upper_tri_solve: singular R");
        x[i] /= R(i, i);
    }
    return x;
}

Vector upper_tri_transpose_solve(const DenseColumnBlock& R, std::span<const double> b) {
    const std::size_t n = R.rows();
    if (R.cols() != n || b.size() != n)
        throw std::invalid_argument("upper_tri_transpose_solve: mismatch");
    Vector x(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) x[i] -= R(j, i) * x[j];
        if (R(i, i) == 0.0) throw std::runtime_error("upper_tri_transpose_solve: singular R");
        x[i] /= R(i, i);
    }
    return x;
}

}  // namespace ksr
