#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "ksr/eigrecycle.hpp"
#include "ksr/factor.hpp"
#include "ksr/sparse.hpp"

using namespace ksr;

namespace {

Vector random_vector(std::size_t n, std::mt19937& rng) {
    std::normal_distribution<double> nrm;
    Vector v(n);
    for (auto& x : v) x = nrm(rng);
    return v;
}

DenseColumnBlock random_block(std::size_t n, std::size_t k, std::mt19937& rng) {
    DenseColumnBlock W(n, k);
    std::normal_distribution<double> nrm;
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = 0; i < n; ++i) W(i, j) = nrm(rng);
    return W;
}

// Random SPD matrix Q diag(d) Q^T with a log-uniform spectrum, stored with
// exactly symmetric entries.
SparseSymMatrix random_spd(std::size_t n, std::mt19937& rng) {
    const ThinQR qr = thin_qr(random_block(n, n, rng));
    std::uniform_real_distribution<double> uni(-2.0, 2.0);
    Vector d(n);
    for (auto& x : d) x = std::pow(10.0, uni(rng));
    TripletBuilder tb(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            double s = 0.0;
            for (std::size_t l = 0; l < n; ++l)
                s += qr.Q(i, l) * d[l] * qr.Q(j, l);
            if (i == j) tb.add(i, i, s);
            else tb.add_sym(i, j, s);
        }
    return tb.build();
}

double relation_residual(const SparseSymMatrix& K, const KrylovDecomposition& d) {
    const std::size_t cols = d.Rres.cols();
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
        Vector lhs = spmv(K, d.U.col(c));
        sub_matvec(d.U, d.Hbar.col(c), lhs);
        for (std::size_t i = 0; i < lhs.size(); ++i) {
            const double e = lhs[i] - d.Rres(i, c);
            s += e * e;
        }
    }
    return std::sqrt(s);
}

double max_offdiag_identity(const DenseColumnBlock& G) {
    double m = 0.0;
    for (std::size_t i = 0; i < G.rows(); ++i)
        for (std::size_t j = 0; j < G.cols(); ++j)
            m = std::max(m, std::abs(G(i, j) - (i == j ? 1.0 : 0.0)));
    return m;
}

}  // namespace

TEST_CASE("min-backward-error init: exact invariant subspace, zero residual") {
    const std::size_t n = 80, k = 6;
    Vector d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = 1.0 + double(i);
    const auto K = SparseSymMatrix::diagonal(d);
    PrecondOperator op{&K, nullptr};

    // Span of the first k coordinate directions, randomly mixed.
    std::mt19937 rng(7);
    DenseColumnBlock W(n, k);
    std::normal_distribution<double> nrm;
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = 0; i < k; ++i) W(i, j) = nrm(rng);

    const auto dec = min_backward_error_decomposition(op, W);
    CHECK(dec.Rres.frobenius_norm() <= 1e-12 * K.frobenius_norm());
    CHECK(max_offdiag_identity(transpose_matmul(dec.U, dec.U)) <= 1e-12);
}

TEST_CASE("min-backward-error init: single column") {
    const auto K = SparseSymMatrix::identity(40);
    PrecondOperator op{&K, nullptr};
    std::mt19937 rng(11);
    DenseColumnBlock W = random_block(40, 1, rng);
    const auto dec = min_backward_error_decomposition(op, W);
    CHECK(dec.Hbar.cols() == 0);
    CHECK(dec.Rres.cols() == 0);
    CHECK(dec.U.cols() == 1);
    const double nw = norm2(W.col(0));
    for (std::size_t i = 0; i < 40; ++i)
        CHECK(std::abs(std::abs(dec.U(i, 0)) - std::abs(W(i, 0)) / nw) <= 1e-13);
}

TEST_CASE("min-backward-error init: SVD identity and invariants, 50 instances") {
    std::mt19937 rng(23);
    for (int inst = 0; inst < 50; ++inst) {
        const std::size_t n = 100, k = 6;
        TripletBuilder tb(n);
        std::normal_distribution<double> nrm;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) {
                const double v = nrm(rng);
                if (i == j) tb.add(i, i, v);
                else tb.add_sym(i, j, v);
            }
        const auto K = tb.build();
        PrecondOperator op{&K, nullptr};
        DenseColumnBlock W = random_block(n, k, rng);

        const auto dec = min_backward_error_decomposition(op, W);

        // Independent oracle: rebuild the raw residual and take its SVD.
        const ThinQR qr = thin_qr(W);
        const DenseColumnBlock KU = spmm(K, qr.Q);
        const DenseColumnBlock H = transpose_matmul(qr.Q, KU);
        const DenseColumnBlock Rt = sub(KU, matmul(qr.Q, H));
        const ThinSVD svd = thin_svd(Rt);
        const double rt2 = Rt.frobenius_norm() * Rt.frobenius_norm();
        const double om1 = svd.Omega[0];
        const double res2 =
            dec.Rres.frobenius_norm() * dec.Rres.frobenius_norm();
        CHECK(std::abs(res2 - (rt2 - om1 * om1)) <= 1e-10 * rt2);

        CHECK(max_offdiag_identity(transpose_matmul(dec.U, dec.U)) <= 1e-12);
        const DenseColumnBlock UtR = transpose_matmul(dec.U, dec.Rres);
        CHECK(UtR.frobenius_norm() <= 1e-10 * std::max(1.0, Rt.frobenius_norm()));
        CHECK(relation_residual(K, dec) <= 1e-10 * K.frobenius_norm());
    }
}

TEST_CASE("ks_cycle: invariant input is detected and preserved") {
    const std::size_t n = 60, k = 5;
    Vector d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = 2.0 + double(i);
    const auto K = SparseSymMatrix::diagonal(d);
    PrecondOperator op{&K, nullptr};
    std::mt19937 rng(3);
    DenseColumnBlock W(n, k);
    std::normal_distribution<double> nrm;
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = 0; i < k; ++i) W(i, j) = nrm(rng);

    const auto dec = min_backward_error_decomposition(op, W);
    KSConfig cfg;
    cfg.k = k;
    cfg.m = 15;
    cfg.J = 1;
    const auto cyc = ks_cycle(op, dec, cfg);
    CHECK(cyc.invariant);
    CHECK(cyc.residual_norm <= 1e-12 * K.frobenius_norm());
    // Returned range still lies inside the invariant subspace.
    DenseColumnBlock E(n, k);
    for (std::size_t j = 0; j < k; ++j) E(j, j) = 1.0;
    const Vector cos = principal_angles(cyc.d.U, E);
    for (double c : cos) CHECK(c >= 1.0 - 1e-10);
}

TEST_CASE("ks_cycle structural suite on random SPD operators") {
    std::mt19937 rng(101);
    for (int inst = 0; inst < 8; ++inst) {
        const std::size_t n = 90;
        const auto K = random_spd(n, rng);
        PrecondOperator op{&K, nullptr};
        DenseColumnBlock W = random_block(n, 8, rng);

        KSConfig cfg;
        cfg.k = 8;
        cfg.m = 20;
        cfg.J = 1;
        auto dec = min_backward_error_decomposition(op, W);
        double prev = dec.Rres.frobenius_norm();
        for (int cycle = 0; cycle < 4; ++cycle) {
            const auto cyc = ks_cycle(op, dec, cfg);
            CHECK(cyc.residual_norm <= prev * (1.0 + 1e-12));
            CHECK(max_offdiag_identity(transpose_matmul(cyc.d.U, cyc.d.U)) <=
                  1e-12);
            const DenseColumnBlock UtR =
                transpose_matmul(cyc.d.U, cyc.d.Rres);
            CHECK(UtR.frobenius_norm() <= 1e-10 * K.frobenius_norm());
            CHECK(relation_residual(K, cyc.d) <= 1e-10 * K.frobenius_norm());
            prev = cyc.residual_norm;
            dec = cyc.d;
        }
    }
}

TEST_CASE("warm start converges to the smallest eigenspace of a dense oracle") {
    // The cycles repair subspace error that lives in a low-dimensional
    // invariant envelope (the situation produced by mesh transfer); build
    // exactly that: smallest eigenvectors polluted by the next few.
    std::mt19937 rng(17);
    const std::size_t n = 150, k = 8;
    const ThinQR basis = thin_qr(random_block(n, n, rng));
    Vector d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = 1.0 + double(i);
    TripletBuilder tb(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            double s = 0.0;
            for (std::size_t l = 0; l < n; ++l)
                s += basis.Q(i, l) * d[l] * basis.Q(j, l);
            if (i == j) tb.add(i, i, s);
            else tb.add_sym(i, j, s);
        }
    const auto K = tb.build();
    PrecondOperator op{&K, nullptr};

    DenseColumnBlock W(n, k);
    std::uniform_real_distribution<double> u01(-1.0, 1.0);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < n; ++i) W(i, c) = basis.Q(i, c);
        for (std::size_t e = k; e < k + 5; ++e) {
            const double coef = 0.2 * u01(rng);
            for (std::size_t i = 0; i < n; ++i)
                W(i, c) += coef * basis.Q(i, e);
        }
    }

    KSConfig cfg;
    cfg.k = k;
    cfg.m = 24;
    cfg.J = 50;
    cfg.conv_tol = 1e-10;
    const auto res = warmstart_krylov_schur(op, W, cfg);
    CHECK(res.cycles_used < cfg.J);  // convergence test fired
    REQUIRE(!res.column_residuals_per_cycle.empty());

    // Dense oracle: eigenvectors of the full matrix, ascending eigenvalues.
    DenseColumnBlock A(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) A(i, j) = K.entry(i, j);
    const SymEig eig = jacobi_eig(A);
    const std::size_t kk = res.d.Rres.cols();
    REQUIRE(kk >= cfg.k - 1);
    DenseColumnBlock truth(n, kk);
    for (std::size_t c = 0; c < kk; ++c)
        for (std::size_t i = 0; i < n; ++i) truth(i, c) = eig.V(i, c);
    const Vector cos = principal_angles(res.d.U.leading_cols(kk), truth);
    for (double c : cos) CHECK(c >= 1.0 - 1e-8);
}

TEST_CASE("warm start: zero cycles and converged-input shortcuts") {
    const std::size_t n = 50, k = 4;
    Vector d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = 1.0 + 0.5 * double(i);
    const auto K = SparseSymMatrix::diagonal(d);
    PrecondOperator op{&K, nullptr};
    std::mt19937 rng(5);

    KSConfig cfg;
    cfg.k = k;
    cfg.m = 12;
    cfg.J = 0;
    DenseColumnBlock W = random_block(n, k, rng);
    const auto res0 = warmstart_krylov_schur(op, W, cfg);
    CHECK(res0.cycles_used == 0);
    const auto init = min_backward_error_decomposition(op, W);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t i = 0; i < n; ++i)
            CHECK(res0.U(i, c) == doctest::Approx(init.U(i, c)).epsilon(1e-14));

    // Exact invariant input: the convergence check fires before any cycle.
    DenseColumnBlock Winv(n, k);
    for (std::size_t j = 0; j < k; ++j) Winv(j, j) = 1.0;
    cfg.J = 5;
    const auto res1 = warmstart_krylov_schur(op, Winv, cfg);
    CHECK(res1.cycles_used == 0);
}

TEST_CASE("first-cycle shortcut path matches the plain path") {
    std::mt19937 rng(29);
    const std::size_t n = 120;
    const auto K = random_spd(n, rng);
    PrecondOperator op{&K, nullptr};
    DenseColumnBlock W = random_block(n, 6, rng);

    KSConfig cfg;
    cfg.k = 6;
    cfg.m = 18;
    cfg.J = 1;
    const auto plain = warmstart_krylov_schur(op, W, cfg);
    cfg.first_cycle_shortcut = true;
    const auto fast = warmstart_krylov_schur(op, W, cfg);
    REQUIRE(plain.U.cols() == fast.U.cols());
    double diff = 0.0, ref = 0.0;
    for (std::size_t c = 0; c < plain.U.cols(); ++c)
        for (std::size_t i = 0; i < n; ++i) {
            diff += (plain.U(i, c) - fast.U(i, c)) * (plain.U(i, c) - fast.U(i, c));
            ref += plain.U(i, c) * plain.U(i, c);
        }
    CHECK(std::sqrt(diff) <= 1e-12 * std::sqrt(ref) * 100);
}

TEST_CASE("flop audit: closed forms and formula limit") {
    KSConfig cfg;
    cfg.k = 15;
    cfg.m = 45;
    const auto a = flop_audit(cfg, 10000);
    CHECK(a.init_flops == doctest::Approx(1.8e7));
    CHECK(a.cycle_flops == doctest::Approx(6.3e7));
    cfg.m = 15;  // k = m limit: 2 n (2 k^2)
    const auto b = flop_audit(cfg, 10000);
    CHECK(b.cycle_flops == doctest::Approx(2.0 * 10000 * 2 * 225));
}

TEST_CASE("instrumented counts land within a factor 2 of the predictions") {
    const std::size_t n = 30000;
    Vector d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = 1.0 + double(i) / double(n);
    const auto K = SparseSymMatrix::diagonal(d);
    PrecondOperator op{&K, nullptr};
    std::mt19937 rng(41);
    DenseColumnBlock W = random_block(n, 15, rng);

    KSConfig cfg;
    cfg.k = 15;
    cfg.m = 45;
    const auto pred = flop_audit(cfg, n);

    double init_flops = 0.0;
    const auto dec = min_backward_error_decomposition(op, W, &init_flops);
    CHECK(init_flops >= 0.5 * pred.init_flops);
    CHECK(init_flops <= 2.0 * pred.init_flops);

    double cycle_flops = 0.0;
    (void)ks_cycle(op, dec, cfg, &cycle_flops);
    CHECK(cycle_flops >= 0.5 * pred.cycle_flops);
    CHECK(cycle_flops <= 2.0 * pred.cycle_flops);
}

TEST_CASE("config validation") {
    const auto K = SparseSymMatrix::identity(20);
    PrecondOperator op{&K, nullptr};
    std::mt19937 rng(1);
    DenseColumnBlock W = random_block(20, 4, rng);
    KSConfig cfg;
    cfg.k = 4;
    cfg.m = 4;  // k < m violated
    CHECK_THROWS_AS(warmstart_krylov_schur(op, W, cfg), std::invalid_argument);
    cfg.m = 10;
    cfg.conv_tol = 0.0;
    CHECK_THROWS_AS(warmstart_krylov_schur(op, W, cfg), std::invalid_argument);
}
