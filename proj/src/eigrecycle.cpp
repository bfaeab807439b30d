#include "ksr/eigrecycle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ksr {

namespace {

void check_config(const KSConfig& cfg, std::size_t n) {
  if (cfg.k == 0 || cfg.k >= cfg.m || cfg.m > n)
    throw std::invalid_argument("KSConfig: need 0 < k < m <= n");
  if (!(cfg.conv_tol > 0.0))
    throw std::invalid_argument("KSConfig: conv_tol must be positive");
}

void count(double* flops, double c) {
  if (flops) *flops += c;
}

DenseColumnBlock apply_block(const PrecondOperator& op,
                             const DenseColumnBlock& X) {
  DenseColumnBlock Y(X.rows(), X.cols());
  for (std::size_t j = 0; j < X.cols(); ++j)
    Y.set_col(j, precond_apply(op, X.col(j)));
  return Y;
}

}  // namespace

Vector decomposition_column_residuals(const KrylovDecomposition& d) {
  const std::size_t k = d.k();
  if (k == 0) return {};
  const std::size_t cols = d.Rres.cols();
  Vector out(cols, 0.0);
  for (std::size_t j = 0; j < cols; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < d.Rres.rows(); ++i)
      s += d.Rres(i, j) * d.Rres(i, j);
    // Coupling of the leading block through the trailing basis column.
    const double h = d.Hbar(k - 1, j);
    out[j] = std::sqrt(s + h * h);
  }
  return out;
}

KrylovDecomposition min_backward_error_decomposition(
    const PrecondOperator& op, const DenseColumnBlock& Wtilde, double* flops,
    InitDetail* detail) {
  if (Wtilde.cols() == 0)
    throw std::invalid_argument("min_backward_error_decomposition: empty block");
  const std::size_t n = Wtilde.rows();

  ThinQR qr = thin_qr(Wtilde);
  KrylovDecomposition d;
  if (!qr.full_rank) {
    d.rank_dropped = Wtilde.cols() - qr.rank;
    if (qr.rank == 0)
      throw std::invalid_argument("min_backward_error_decomposition: zero block");
    qr.Q = qr.Q.leading_cols(qr.rank);
  }
  const DenseColumnBlock& Ut = qr.Q;
  const std::size_t k = Ut.cols();
  count(flops, 2.0 * n * double(k) * k);  // thin QR

  const DenseColumnBlock KU = apply_block(op, Ut);
  DenseColumnBlock H = transpose_matmul(Ut, KU);
  count(flops, 2.0 * n * double(k) * k);
  DenseColumnBlock Rt = sub(KU, matmul(Ut, H));
  count(flops, 2.0 * n * double(k) * k);

  if (k == 1) {
    d.U = Ut;
    d.Hbar = DenseColumnBlock(1, 0);
    d.Rres = DenseColumnBlock(n, 0);
    if (detail) {
      detail->Utilde = Ut;
      detail->Vk = DenseColumnBlock::identity(1);
      detail->omega = {Rt.frobenius_norm()};
      detail->rtilde_fro = Rt.frobenius_norm();
    }
    return d;
  }

  // Right singular vectors of the residual via its Gram matrix; the left
  // factor is never needed.
  const DenseColumnBlock G = transpose_matmul(Rt, Rt);
  count(flops, 1.0 * n * double(k) * k);  // symmetric product
  const SymEig eig = jacobi_eig(G);  // ascending eigenvalues

  // Descending singular order; expel the largest direction to the back.
  DenseColumnBlock Vk(k, k);
  Vector omega(k);
  for (std::size_t c = 0; c < k; ++c) {
    // Psi column c (descending) is eigenvector k-1-c; the permuted basis is
    // [psi_2 ... psi_k psi_1].
    const std::size_t dst = (c == 0) ? k - 1 : c - 1;
    const std::size_t src = k - 1 - c;
    for (std::size_t i = 0; i < k; ++i) Vk(i, dst) = eig.V(i, src);
    omega[c] = std::sqrt(std::max(eig.lambda[src], 0.0));
  }

  DenseColumnBlock Vk1(k, k - 1);
  for (std::size_t c = 0; c + 1 < k; ++c)
    for (std::size_t i = 0; i < k; ++i) Vk1(i, c) = Vk(i, c);

  d.U = matmul(Ut, Vk);
  count(flops, 2.0 * n * double(k) * k);
  d.Hbar = transpose_matmul(Vk, matmul(H, Vk1));
  d.Rres = matmul(Rt, Vk1);
  count(flops, 2.0 * n * double(k) * (k - 1));

  if (detail) {
    detail->Utilde = Ut;
    detail->Vk = Vk;
    detail->omega = std::move(omega);
    detail->rtilde_fro = Rt.frobenius_norm();
  }
  return d;
}

CycleResult ks_cycle(const PrecondOperator& op, const KrylovDecomposition& d,
                     const KSConfig& cfg, double* flops,
                     const FirstCycleBasis* shortcut) {
  const std::size_t n = d.U.rows();
  check_config(cfg, n);
  const std::size_t kc = d.k();  // current block width
  const std::size_t m = cfg.m;
  if (kc >= m)
    throw std::invalid_argument("ks_cycle: block width must be below m");

  DenseColumnBlock U(n, m + 1);
  for (std::size_t c = 0; c < kc; ++c) U.set_col(c, d.U.col(c));
  DenseColumnBlock H(m + 1, m);
  for (std::size_t c = 0; c + 1 < kc; ++c)
    for (std::size_t r = 0; r < kc; ++r) H(r, c) = d.Hbar(r, c);

  double hnorm = d.Hbar.frobenius_norm();
  bool happy = false;
  std::size_t width = kc;  // orthonormal columns built so far
  for (std::size_t i = kc - 1; i < m; ++i) {
    Vector t = precond_apply(op, U.col(i));
    // Two-pass classical Gram-Schmidt against all previous columns.
    Vector h(width, 0.0);
    for (int pass = 0; pass < 2; ++pass) {
      const bool via_pre = shortcut && shortcut->Utilde && i == kc - 1 &&
                           width == kc && pass == 0;
      if (via_pre) {
        // Range equality: U_k U_k^T t = Utilde Utilde^T t and
        // U_k^T t = Vk^T (Utilde^T t).
        const Vector c0 = transpose_matvec(*shortcut->Utilde, t);
        const Vector hk = transpose_matvec(*shortcut->Vk, c0);
        for (std::size_t r = 0; r < width; ++r) h[r] += hk[r];
        sub_matvec(*shortcut->Utilde, c0, t);
      } else {
        Vector c0(width);
        for (std::size_t r = 0; r < width; ++r) {
          c0[r] = dot(U.col(r), t);
          h[r] += c0[r];
        }
        for (std::size_t r = 0; r < width; ++r) axpy(-c0[r], U.col(r), t);
      }
      count(flops, 4.0 * n * double(width));
    }
    for (std::size_t r = 0; r < width; ++r) H(r, i) = h[r];
    const double beta = norm2(t);
    hnorm = std::max(hnorm, std::max(beta, norm2(h)));
    if (beta <= 1e-13 * std::max(hnorm, 1e-300)) {
      happy = true;
      break;
    }
    H(width, i) = beta;
    scal(1.0 / beta, t);
    U.set_col(width, t);
    ++width;
  }

  // q = columns of H actually filled; basis has `width` columns.
  const std::size_t q = happy ? width : m;

  // Corrected Rayleigh quotient: the rows of the expansion block against the
  // initial residual, then re-orthogonalize the residual.
  DenseColumnBlock R = d.Rres;  // n x (kc - 1)
  if (kc >= 1 && R.cols() > 0 && width > kc) {
    DenseColumnBlock Uc(n, width - kc);
    for (std::size_t c = kc; c < width; ++c) Uc.set_col(c - kc, U.col(c));
    const DenseColumnBlock UcR = transpose_matmul(Uc, R);
    count(flops, 2.0 * n * double(Uc.cols()) * R.cols());
    for (std::size_t c = 0; c < R.cols(); ++c)
      for (std::size_t r = 0; r < Uc.cols(); ++r) H(kc + r, c) = UcR(r, c);
    const DenseColumnBlock corr = matmul(Uc, UcR);
    count(flops, 2.0 * n * double(Uc.cols()) * R.cols());
    R = sub(R, corr);
  }

  // Ordered Schur of the leading q x q block.
  DenseColumnBlock Hq(q, q);
  for (std::size_t c = 0; c < q; ++c)
    for (std::size_t r = 0; r < q; ++r) Hq(r, c) = H(r, c);
  const SchurResult sch = real_schur_ordered(Hq, cfg.ordering);

  // Retain k-1 Schur vectors, or k when the cut splits a 2x2 block.
  std::size_t kk = std::min(cfg.k - 1, q);
  if (kk < q && kk > 0 && sch.Gamma(kk, kk - 1) != 0.0) ++kk;
  if (kk == 0) kk = 1;

  DenseColumnBlock X1(q, kk);
  for (std::size_t c = 0; c < kk; ++c)
    for (std::size_t r = 0; r < q; ++r) X1(r, c) = sch.X(r, c);

  CycleResult out;
  out.invariant = happy;

  DenseColumnBlock Uq(n, q);
  for (std::size_t c = 0; c < q; ++c) Uq.set_col(c, U.col(c));
  const DenseColumnBlock U1 = matmul(Uq, X1);
  count(flops, 2.0 * n * double(q) * kk);

  // Residual in the rotated coordinates; only the leading kc-1 columns of the
  // corrected residual are nonzero.
  const std::size_t rc = R.cols();
  DenseColumnBlock Rnext(n, kk);
  if (rc > 0) {
    DenseColumnBlock Xr(rc, kk);
    for (std::size_t c = 0; c < kk; ++c)
      for (std::size_t r = 0; r < rc; ++r) Xr(r, c) = X1(r, c);
    Rnext = matmul(R, Xr);
    count(flops, 2.0 * n * double(rc) * kk);
  }

  if (happy) {
    // No trailing Krylov direction: the decomposition closes on itself.
    out.d.U = U1;
    out.d.Hbar = DenseColumnBlock(kk, kk - 1);
    for (std::size_t c = 0; c + 1 < kk; ++c)
      for (std::size_t r = 0; r < kk; ++r) out.d.Hbar(r, c) = sch.Gamma(r, c);
    out.d.Rres = DenseColumnBlock(n, kk - 1);
    if (rc > 0)
      for (std::size_t c = 0; c + 1 < kk; ++c)
        for (std::size_t i = 0; i < n; ++i) out.d.Rres(i, c) = Rnext(i, c);
  } else {
    out.d.U = DenseColumnBlock(n, kk + 1);
    for (std::size_t c = 0; c < kk; ++c) out.d.U.set_col(c, U1.col(c));
    out.d.U.set_col(kk, U.col(m));  // u_{m+1}
    out.d.Hbar = DenseColumnBlock(kk + 1, kk);
    for (std::size_t c = 0; c < kk; ++c)
      for (std::size_t r = 0; r < kk; ++r) out.d.Hbar(r, c) = sch.Gamma(r, c);
    // Trailing coupling row: (row m+1 of H) X1.
    for (std::size_t c = 0; c < kk; ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < q; ++r) s += H(m, r) * X1(r, c);
      out.d.Hbar(kk, c) = s;
    }
    out.d.Rres = Rnext;
  }

  out.ritz_values.resize(kk);
  for (std::size_t c = 0; c < kk; ++c) out.ritz_values[c] = sch.Gamma(c, c);
  out.column_residual_norms = decomposition_column_residuals(out.d);
  out.residual_norm = out.d.Rres.frobenius_norm();
  return out;
}

WarmstartResult warmstart_krylov_schur(const PrecondOperator& op,
                                       const DenseColumnBlock& Wtilde,
                                       const KSConfig& cfg) {
  check_config(cfg, Wtilde.rows());
  WarmstartResult res;
  InitDetail detail;
  res.d = min_backward_error_decomposition(op, Wtilde, &res.flops, &detail);

  double norm_est = std::max(res.d.Hbar.frobenius_norm(), 1e-300);
  for (std::size_t cycle = 0; cycle < cfg.J; ++cycle) {
    const Vector col_res = decomposition_column_residuals(res.d);
    const bool converged =
        !col_res.empty() &&
        std::all_of(col_res.begin(), col_res.end(), [&](double r) {
          return r <= cfg.conv_tol * norm_est;
        });
    if (converged) break;

    FirstCycleBasis fcb{&detail.Utilde, &detail.Vk};
    const FirstCycleBasis* sc =
        (cfg.first_cycle_shortcut && cycle == 0) ? &fcb : nullptr;
    CycleResult cr = ks_cycle(op, res.d, cfg, &res.flops, sc);
    res.d = std::move(cr.d);
    ++res.cycles_used;
    res.residual_norms.push_back(cr.residual_norm);
    res.ritz_per_cycle.push_back(cr.ritz_values);
    res.column_residuals_per_cycle.push_back(cr.column_residual_norms);
    for (double rv : cr.ritz_values)
      norm_est = std::max(norm_est, std::abs(rv));
    if (cr.invariant) break;
  }
  res.U = res.d.U;
  return res;
}

FlopAudit flop_audit(const KSConfig& cfg, std::size_t n) {
  FlopAudit a;
  const double N = static_cast<double>(n);
  const double k = static_cast<double>(cfg.k);
  const double m = static_cast<double>(cfg.m);
  a.init_flops = 8.0 * N * k * k;
  a.cycle_flops = 2.0 * N * (m * m - k * k + 2.0 * m * k);
  return a;
}

}  // namespace ksr
