#include "ksr/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "ksr/factor.hpp"

namespace ksr {

namespace {

Vector residual(const PrecondOperator& op, const Vector& f, const Vector& u) {
  Vector r = precond_apply(op, u);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = f[i] - r[i];
  return r;
}

// Rg^{-T} H Rg^{-1} for upper-triangular Rg.
DenseColumnBlock congruence_solve(const DenseColumnBlock& Rg,
                                  const DenseColumnBlock& H) {
  const std::size_t m = H.rows();
  DenseColumnBlock B1(m, m);  // B1 = Rg^{-T} H
  for (std::size_t j = 0; j < m; ++j)
    B1.set_col(j, upper_tri_transpose_solve(Rg, H.col(j)));
  // M = B1 Rg^{-1}  <=>  M^T = Rg^{-T} B1^T.
  const DenseColumnBlock B1t = transpose(B1);
  DenseColumnBlock Mt(m, m);
  for (std::size_t j = 0; j < m; ++j)
    Mt.set_col(j, upper_tri_transpose_solve(Rg, B1t.col(j)));
  return transpose(Mt);
}

}  // namespace

RecycleSpace make_recycle_space(const PrecondOperator& op,
                                const DenseColumnBlock& W) {
  DenseColumnBlock basis = W;
  while (basis.cols() > 0) {
    DenseColumnBlock KW(basis.rows(), basis.cols());
    for (std::size_t j = 0; j < basis.cols(); ++j)
      KW.set_col(j, precond_apply(op, basis.col(j)));
    const ThinQR qr = thin_qr(KW);
    if (qr.full_rank) return {basis, qr.Q, qr.R};
    basis = basis.leading_cols(qr.rank);
  }
  return {};
}

double recycle_space_residual(const PrecondOperator& op,
                              const RecycleSpace& rs) {
  double s = 0.0;
  for (std::size_t j = 0; j < rs.k(); ++j) {
    Vector kw = precond_apply(op, rs.W.col(j));
    for (std::size_t i = 0; i < rs.Rfac.rows(); ++i)
      if (i <= j) axpy(-rs.Rfac(i, j), rs.C.col(i), kw);
    s += dot(kw, kw);
  }
  return std::sqrt(s);
}

std::pair<Vector, Vector> project_initial_guess(const RecycleSpace& rs,
                                                const Vector& u0,
                                                const Vector& r0) {
  if (rs.empty()) return {u0, r0};
  const Vector ct_r = transpose_matvec(rs.C, r0);
  const Vector z = upper_tri_solve(rs.Rfac, ct_r);
  Vector u = u0;
  add_matvec(rs.W, z, u);
  Vector r = r0;
  sub_matvec(rs.C, ct_r, r);
  return {u, r};
}

RminresResult rminres(const PrecondOperator& op, const Vector& f,
                      const Vector& u0, const RecycleSpace& rs,
                      const SolverOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = op.n();
  if (f.size() != n || u0.size() != n)
    throw std::invalid_argument("rminres: dimension mismatch");
  const std::size_t k = rs.k();

  RminresResult res;
  SolveReport& rep = res.report;

  Vector r_raw = residual(op, f, u0);
  ++rep.matvecs;
  const double norm_r_raw = norm2(r_raw);

  auto [u, r0] = project_initial_guess(rs, u0, r_raw);
  const double norm_r0 = norm2(r0);
  const double ref = opt.tol_relative_to_projected ? norm_r0 : norm_r_raw;
  rep.residual_history.push_back(norm_r0);

  LanczosHistory& hist = res.history;
  hist.V = DenseColumnBlock(n, 0);
  std::vector<Vector> v_cols, b_cols;

  if (norm_r0 <= opt.tol * ref || norm_r0 == 0.0) {
    rep.converged = true;
    res.u = u;
    res.next = rs;
    rep.true_final_residual = norm2(residual(op, f, u));
    ++rep.matvecs;
    rep.wall_time = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    rep.recycle_update_skipped = true;
    return res;
  }

  Vector v_prev(n, 0.0), v_curr = r0;
  scal(1.0 / norm_r0, v_curr);
  if (opt.window > 0) v_cols.push_back(v_curr);

  double beta_prev = 0.0;
  double phi = norm_r0;
  double c_prev = 1.0, s_prev = 0.0;    // G_{j-1}
  double c_prev2 = 1.0, s_prev2 = 0.0;  // G_{j-2}
  Vector m_prev(n, 0.0), m_prev2(n, 0.0);
  Vector bt_prev(k, 0.0), bt_prev2(k, 0.0), s_acc(k, 0.0);
  double scale = 0.0;

  const auto w_corrected = [&](const Vector& base) {
    if (k == 0) return base;
    Vector z = upper_tri_solve(rs.Rfac, s_acc);
    scal(-1.0, z);
    Vector out = base;
    add_matvec(rs.W, z, out);
    return out;
  };

  std::size_t j = 0;
  while (j < opt.maxit) {
    ++j;
    Vector q = precond_apply(op, v_curr);
    ++rep.matvecs;

    Vector b(k, 0.0);
    if (k > 0) {
      b = transpose_matvec(rs.C, q);
      sub_matvec(rs.C, b, q);
    }
    const double alpha = dot(v_curr, q);
    axpy(-alpha, v_curr, q);
    if (j > 1) axpy(-beta_prev, v_prev, q);
    if (k > 0) {
      // Selective re-orthogonalization against C.
      const Vector cv = transpose_matvec(rs.C, q);
      if (norm2(cv) > 1e-10 * std::max(norm2(q), 1e-300)) {
        sub_matvec(rs.C, cv, q);
        ++rep.reorthogonalizations;
      }
    }
    if (opt.full_reorthogonalize) {
      for (const Vector& v : v_cols) axpy(-dot(v, q), v, q);
      ++rep.reorthogonalizations;
    }
    const double beta = norm2(q);
    scale = std::max(scale, std::abs(alpha) + beta + beta_prev);

    // Givens update of column j of the tridiagonal.
    const double eps_j = (j >= 3) ? s_prev2 * beta_prev : 0.0;
    const double delta = (j >= 2) ? c_prev2 * beta_prev : 0.0;
    double r1, rho;
    if (j >= 2) {
      r1 = c_prev * delta + s_prev * alpha;
      rho = -s_prev * delta + c_prev * alpha;
    } else {
      r1 = 0.0;
      rho = alpha;
    }
    const GivensRotation g = make_givens(rho, beta, j - 1);
    const double rjj = g.c * rho + g.s * beta;
    const double y_j = g.c * phi;
    phi = -g.s * phi;

    // Direction recurrences for the solution and the deferred W-correction.
    Vector m = v_curr;
    axpy(-r1, m_prev, m);
    axpy(-eps_j, m_prev2, m);
    scal(1.0 / rjj, m);
    axpy(y_j, m, u);
    if (k > 0) {
      Vector bt = b;
      axpy(-r1, bt_prev, bt);
      axpy(-eps_j, bt_prev2, bt);
      scal(1.0 / rjj, bt);
      axpy(y_j, bt, s_acc);
      bt_prev2 = std::move(bt_prev);
      bt_prev = std::move(bt);
    }
    m_prev2 = std::move(m_prev);
    m_prev = std::move(m);

    rep.residual_history.push_back(std::abs(phi));

    const bool store = opt.window > 0 && hist.alpha.size() < opt.window;
    if (store) {
      hist.alpha.push_back(alpha);
      hist.beta.push_back(beta);
      if (k > 0) b_cols.push_back(b);
    }

    if (beta <= 1e-13 * scale) {
      rep.breakdown = true;
      rep.converged = true;
      break;
    }

    v_prev = std::move(v_curr);
    v_curr = q;
    scal(1.0 / beta, v_curr);
    if (store) v_cols.push_back(v_curr);
    beta_prev = beta;
    c_prev2 = c_prev;
    s_prev2 = s_prev;
    c_prev = g.c;
    s_prev = g.s;

    if (opt.sample_true_residual && j % 10 == 0) {
      const Vector ut = w_corrected(u);
      rep.sampled_true_residuals.emplace_back(
          j, norm2(residual(op, f, ut)));
      ++rep.matvecs;
    }

    if (std::abs(phi) <= opt.tol * ref) {
      rep.converged = true;
      break;
    }
  }

  rep.iterations = j;
  res.u = w_corrected(u);
  rep.true_final_residual = norm2(residual(op, f, res.u));
  ++rep.matvecs;

  hist.j = hist.alpha.size();
  if (!v_cols.empty()) {
    hist.V = DenseColumnBlock::from_columns(v_cols);
    // Keep exactly j+1 basis vectors for the retained relation.
    if (hist.V.cols() > hist.j + 1) hist.V = hist.V.leading_cols(hist.j + 1);
    hist.j = std::min(hist.j, hist.V.cols() - 1);
    if (hist.alpha.size() > hist.j) {
      hist.alpha.resize(hist.j);
      hist.beta.resize(hist.j);
      if (k > 0) b_cols.resize(hist.j);
    }
  }
  if (k > 0 && !b_cols.empty()) hist.B = DenseColumnBlock::from_columns(b_cols);
  else hist.B = DenseColumnBlock(k, 0);

  res.next = update_recycle_space(rs, hist, opt.k_next, &rep);

  rep.flops_estimate =
      static_cast<double>(rep.matvecs) * op.flops_per_apply() +
      static_cast<double>(rep.iterations) *
          (10.0 * n + 6.0 * n * static_cast<double>(k));
  rep.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return res;
}

std::pair<Vector, SolveReport> minres(const PrecondOperator& op,
                                      const Vector& f, const Vector& u0,
                                      double tol, std::size_t maxit) {
  SolverOptions opt;
  opt.tol = tol;
  opt.maxit = maxit;
  opt.k_next = 0;
  opt.window = 0;
  auto res = rminres(op, f, u0, RecycleSpace{}, opt);
  return {std::move(res.u), std::move(res.report)};
}

RecycleSpace update_recycle_space(const RecycleSpace& rs,
                                  const LanczosHistory& hist,
                                  std::size_t k_next, SolveReport* report) {
  if (k_next == 0) return {};
  const std::size_t k = rs.k();
  const std::size_t j = hist.j;
  if (j == 0 || k + j < k_next || hist.V.cols() < j + 1) {
    if (report) report->recycle_update_skipped = true;
    return rs;
  }
  const std::size_t n = hist.V.rows();

  // U = [W V_j], op U = Chat G with Chat = [C V_{j+1}] orthonormal.
  DenseColumnBlock U(n, k + j), Chat(n, k + j + 1);
  for (std::size_t c = 0; c < k; ++c) {
    U.set_col(c, rs.W.col(c));
    Chat.set_col(c, rs.C.col(c));
  }
  for (std::size_t c = 0; c < j; ++c) U.set_col(k + c, hist.V.col(c));
  for (std::size_t c = 0; c < j + 1; ++c)
    Chat.set_col(k + c, hist.V.col(c));

  DenseColumnBlock G(k + j + 1, k + j);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t r = 0; r <= c; ++r) G(r, c) = rs.Rfac(r, c);
  for (std::size_t c = 0; c < j; ++c) {
    for (std::size_t r = 0; r < k; ++r) G(r, k + c) = hist.B(r, c);
    G(k + c, k + c) = hist.alpha[c];
    G(k + c + 1, k + c) = hist.beta[c];
    if (c > 0) G(k + c - 1, k + c) = hist.beta[c - 1];
  }

  // Harmonic pencil: G^T G g = theta G^T E g with E = Chat^T U; with
  // G = Qg Rg and H = U^T op U = E^T G this becomes an ordinary symmetric
  // problem for mu = 1/theta.
  const DenseColumnBlock E = transpose_matmul(Chat, U);
  DenseColumnBlock H = transpose_matmul(E, G);
  for (std::size_t a = 0; a < H.rows(); ++a)
    for (std::size_t b = a + 1; b < H.cols(); ++b) {
      const double avg = 0.5 * (H(a, b) + H(b, a));
      H(a, b) = avg;
      H(b, a) = avg;
    }

  const ThinQR qr = thin_qr(G);
  if (!qr.full_rank) {
    if (report) report->recycle_update_skipped = true;
    return rs;
  }
  DenseColumnBlock M = congruence_solve(qr.R, H);
  for (std::size_t a = 0; a < M.rows(); ++a)
    for (std::size_t b = a + 1; b < M.cols(); ++b) {
      const double avg = 0.5 * (M(a, b) + M(b, a));
      M(a, b) = avg;
      M(b, a) = avg;
    }
  const SymEig eig = jacobi_eig(M);

  // Largest mu = smallest harmonic Ritz value.
  const std::size_t kk = std::min(k_next, k + j);
  DenseColumnBlock Gcoef(k + j, kk);
  for (std::size_t c = 0; c < kk; ++c) {
    const std::size_t src = k + j - 1 - c;
    Gcoef.set_col(c, upper_tri_solve(qr.R, eig.V.col(src)));
  }

  const DenseColumnBlock Gg = matmul(G, Gcoef);
  const ThinQR qs = thin_qr(Gg);
  if (!qs.full_rank) {
    if (report) report->recycle_update_skipped = true;
    return rs;
  }
  RecycleSpace next;
  next.W = matmul(U, Gcoef);
  next.C = matmul(Chat, qs.Q);
  next.Rfac = qs.R;
  // Chat is only orthonormal up to the Lanczos orthogonality level, so
  // re-orthonormalize the image basis and fold the correction into Rfac.
  const ThinQR qc = thin_qr(next.C);
  if (!qc.full_rank) {
    if (report) report->recycle_update_skipped = true;
    return rs;
  }
  next.C = qc.Q;
  next.Rfac = matmul(qc.R, next.Rfac);
  return next;
}

}  // namespace ksr
