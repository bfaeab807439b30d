#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <tuple>

#include "doctest.h"
#include "ksr/dense.hpp"
#include "ksr/factor.hpp"
#include "ksr/sparse.hpp"

using namespace ksr;

namespace {

DenseColumnBlock random_block(std::size_t rows, std::size_t cols, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> dist;
    DenseColumnBlock A(rows, cols);
    for (double& v : A.data()) v = dist(rng);
    return A;
}

SparseSymMatrix random_symmetric(std::size_t n, unsigned seed, double density = 0.2) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> dist;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    TripletBuilder b(n);
    for (std::size_t i = 0; i < n; ++i) {
        b.add(i, i, 4.0 + u(rng));
        for (std::size_t j = i + 1; j < n; ++j)
            if (u(rng) < density) b.add_sym(i, j, dist(rng));
    }
    return b.build();
}

// Dense matvec oracle.
Vector dense_matvec(const SparseSymMatrix& K, const Vector& x) {
    Vector y(K.n(), 0.0);
    for (std::size_t i = 0; i < K.n(); ++i)
        for (std::size_t j = 0; j < K.n(); ++j) y[i] += K.entry(i, j) * x[j];
    return y;
}

// Modified Gram-Schmidt oracle for QR.
void mgs(const DenseColumnBlock& A, DenseColumnBlock& Q, DenseColumnBlock& R) {
    Q = A;
    R = DenseColumnBlock(A.cols(), A.cols());
    for (std::size_t j = 0; j < A.cols(); ++j) {
        for (std::size_t i = 0; i < j; ++i) {
            R(i, j) = dot(Q.col(i), Q.col(j));
            auto qj = Q.col(j);
            for (std::size_t r = 0; r < A.rows(); ++r) qj[r] -= R(i, j) * Q(r, i);
        }
        R(j, j) = norm2(Q.col(j));
        auto qj = Q.col(j);
        for (std::size_t r = 0; r < A.rows(); ++r) qj[r] /= R(j, j);
    }
}

double ortho_error(const DenseColumnBlock& Q) {
    DenseColumnBlock G = transpose_matmul(Q, Q);
    double e = 0.0;
    for (std::size_t i = 0; i < G.rows(); ++i)
        for (std::size_t j = 0; j < G.cols(); ++j)
            e += std::pow(G(i, j) - (i == j ? 1.0 : 0.0), 2);
    return std::sqrt(e);
}

}  // namespace

TEST_CASE("spmv identity and diagonal") {
    auto I = SparseSymMatrix::identity(3);
    Vector x{1, 2, 3};
    CHECK(spmv(I, x) == x);
    auto D = SparseSymMatrix::diagonal({2, 5});
    Vector y = spmv(D, Vector{1, 1});
    CHECK(y[0] == 2.0);
    CHECK(y[1] == 5.0);
}

TEST_CASE("spmv matches dense oracle on random symmetric 50x50") {
    auto K = random_symmetric(50, 1);
    std::mt19937 rng(2);
    std::normal_distribution<double> dist;
    Vector x(50);
    for (double& v : x) v = dist(rng);
    Vector y = spmv(K, x), z = dense_matvec(K, x);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < 50; ++i) {
        num += (y[i] - z[i]) * (y[i] - z[i]);
        den += z[i] * z[i];
    }
    CHECK(std::sqrt(num / den) < 1e-13);
}

TEST_CASE("spmv bilinear symmetry") {
    auto K = random_symmetric(40, 3);
    std::mt19937 rng(4);
    std::normal_distribution<double> dist;
    Vector x(40), y(40);
    for (double& v : x) v = dist(rng);
    for (double& v : y) v = dist(rng);
    const double a = dot(x, spmv(K, y)), b = dot(y, spmv(K, x));
    CHECK(std::abs(a - b) <= 1e-13 * std::abs(a));
}

TEST_CASE("spmv dimension mismatch throws") {
    auto I = SparseSymMatrix::identity(3);
    CHECK_THROWS_AS((void)spmv(I, Vector{1, 2}), std::invalid_argument);
}

TEST_CASE("thin_qr of orthonormal block returns it with R = I") {
    auto A = random_block(20, 4, 5);
    auto qr0 = thin_qr(A);
    auto qr = thin_qr(qr0.Q);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(qr.R(j, j) == doctest::Approx(1.0).epsilon(1e-12));
        for (std::size_t i = 0; i < 20; ++i)
            CHECK(qr.Q(i, j) == doctest::Approx(qr0.Q(i, j)).epsilon(1e-10));
    }
}

TEST_CASE("thin_qr single column normalization") {
    DenseColumnBlock A(2, 1);
    A(0, 0) = 3;
    A(1, 0) = 4;
    auto qr = thin_qr(A);
    CHECK(qr.Q(0, 0) == doctest::Approx(0.6));
    CHECK(qr.Q(1, 0) == doctest::Approx(0.8));
    CHECK(qr.R(0, 0) == doctest::Approx(5.0));
}

TEST_CASE("thin_qr random 40x6 against MGS oracle") {
    auto A = random_block(40, 6, 6);
    auto qr = thin_qr(A);
    DenseColumnBlock Qo, Ro;
    mgs(A, Qo, Ro);
    // Reconstruction within 1e-12 relative.
    DenseColumnBlock rec = matmul(qr.Q, qr.R);
    CHECK(sub(rec, A).frobenius_norm() < 1e-12 * A.frobenius_norm());
    // R matches the MGS oracle (both have positive diagonals, so unique).
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = i; j < 6; ++j)
            CHECK(qr.R(i, j) == doctest::Approx(Ro(i, j)).epsilon(1e-8));
    CHECK(ortho_error(qr.Q) <= 1e-12 * 6);
    CHECK(qr.full_rank);
}

TEST_CASE("thin_qr flags rank deficiency") {
    auto A = random_block(30, 3, 7);
    DenseColumnBlock B(30, 4);
    for (std::size_t j = 0; j < 3; ++j) B.set_col(j, A.col(j));
    Vector dep(30);
    for (std::size_t i = 0; i < 30; ++i) dep[i] = A(i, 0) + 2.0 * A(i, 2);
    B.set_col(3, dep);
    auto qr = thin_qr(B);
    CHECK_FALSE(qr.full_rank);
    CHECK(qr.rank == 3);
}

TEST_CASE("thin_qr orthogonality invariant on random sizes") {
    for (unsigned seed = 0; seed < 5; ++seed) {
        auto A = random_block(50 + 13 * seed, 3 + 2 * seed, 100 + seed);
        auto qr = thin_qr(A);
        CHECK(ortho_error(qr.Q) <= 1e-12 * static_cast<double>(A.cols()));
    }
}

TEST_CASE("thin_svd zero matrix") {
    DenseColumnBlock A(5, 3);
    auto svd = thin_svd(A);
    for (double w : svd.Omega) CHECK(w == 0.0);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(svd.Psi(i, j) == doctest::Approx(i == j ? 1.0 : 0.0));
    CHECK(ortho_error(svd.Phi) < 1e-12);
}

TEST_CASE("thin_svd of embedded diagonal") {
    DenseColumnBlock A(4, 2);
    A(0, 0) = 3;
    A(1, 1) = 1;
    auto svd = thin_svd(A);
    CHECK(svd.Omega[0] == doctest::Approx(3.0));
    CHECK(svd.Omega[1] == doctest::Approx(1.0));
}

TEST_CASE("thin_svd singular values match Gram eigenvalue oracle") {
    auto A = random_block(30, 5, 8);
    auto svd = thin_svd(A);
    // Oracle: eigenvalues of A^T A via Jacobi.
    DenseColumnBlock G = transpose_matmul(A, A);
    auto eig = jacobi_eig(G);
    for (std::size_t j = 0; j < 5; ++j) {
        const double oracle = std::sqrt(std::max(0.0, eig.lambda[4 - j]));
        CHECK(std::abs(svd.Omega[j] - oracle) < 1e-11 * svd.Omega[0]);
    }
    for (std::size_t j = 1; j < 5; ++j) CHECK(svd.Omega[j] <= svd.Omega[j - 1]);
}

TEST_CASE("thin_svd reconstruction up to 200x20") {
    const std::tuple<int, int, unsigned> cases[] = {{40, 6, 9u}, {200, 20, 10u}, {33, 7, 11u}};
    for (auto [r, c, seed] : cases) {
        auto A = random_block(r, c, seed);
        auto svd = thin_svd(A);
        DenseColumnBlock S(c, c);
        for (int j = 0; j < c; ++j) S(j, j) = svd.Omega[j];
        DenseColumnBlock rec = matmul(matmul(svd.Phi, S), transpose(svd.Psi));
        CHECK(sub(rec, A).frobenius_norm() <= 1e-12 * A.frobenius_norm());
        CHECK(ortho_error(svd.Phi) < 1e-11);
        CHECK(ortho_error(svd.Psi) < 1e-11);
    }
}

TEST_CASE("schur of symmetric diagonal, smallest first") {
    DenseColumnBlock H(3, 3);
    H(0, 0) = 5;
    H(1, 1) = 1;
    H(2, 2) = 3;
    auto sc = real_schur_ordered(H, EigenOrder::SmallestMagnitudeFirst);
    CHECK(sc.Gamma(0, 0) == doctest::Approx(1.0));
    CHECK(sc.Gamma(1, 1) == doctest::Approx(3.0));
    CHECK(sc.Gamma(2, 2) == doctest::Approx(5.0));
}

TEST_CASE("schur of identity") {
    auto sc = real_schur_ordered(DenseColumnBlock::identity(4), EigenOrder::SmallestMagnitudeFirst);
    for (std::size_t i = 0; i < 4; ++i) CHECK(sc.Gamma(i, i) == doctest::Approx(1.0));
    CHECK(ortho_error(sc.X) < 1e-12);
}

TEST_CASE("schur of random symmetric matches Jacobi oracle and relation") {
    auto A = random_block(12, 12, 12);
    DenseColumnBlock H(12, 12);
    for (std::size_t i = 0; i < 12; ++i)
        for (std::size_t j = 0; j < 12; ++j) H(i, j) = 0.5 * (A(i, j) + A(j, i));
    auto sc = real_schur_ordered(H, EigenOrder::SmallestMagnitudeFirst);
    auto eig = jacobi_eig(H);
    Vector got(12), want = eig.lambda;
    for (std::size_t i = 0; i < 12; ++i) got[i] = sc.Gamma(i, i);
    std::sort(got.begin(), got.end());
    for (std::size_t i = 0; i < 12; ++i)
        CHECK(std::abs(got[i] - want[i]) < 1e-11 * H.frobenius_norm());
    DenseColumnBlock lhs = matmul(H, sc.X), rhs = matmul(sc.X, sc.Gamma);
    CHECK(sub(lhs, rhs).frobenius_norm() <= 1e-11 * H.frobenius_norm());
    // Ordering by magnitude.
    for (std::size_t i = 1; i < 12; ++i)
        CHECK(std::abs(sc.Gamma(i, i)) >= std::abs(sc.Gamma(i - 1, i - 1)) - 1e-12);
}

TEST_CASE("schur general path: nonsymmetric with known real spectrum") {
    // H = S D S^{-1} with known D; mild nonsymmetry.
    std::mt19937 rng(13);
    std::normal_distribution<double> dist;
    const std::size_t n = 9;
    Vector lam{-3.5, -1.0, -0.2, 0.3, 0.9, 1.4, 2.0, 4.0, 7.5};
    DenseColumnBlock S = DenseColumnBlock::identity(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) S(i, j) += 0.1 * dist(rng);
    // H = S diag(lam) S^{-1}: solve S^{-1} columns via Gaussian elimination
    // through upper_tri machinery is unavailable; build from QR instead.
    auto qr = thin_qr(S);
    DenseColumnBlock D(n, n);
    for (std::size_t i = 0; i < n; ++i) D(i, i) = lam[i];
    // H = Q R D R^{-1} Q^T where R D R^{-1} is triangular-similar.
    DenseColumnBlock RD = matmul(qr.R, D);
    DenseColumnBlock M(n, n);  // M = R D R^{-1}
    for (std::size_t j = 0; j < n; ++j) {
        Vector col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = qr.R(i, j);
        // Solve M columns: M R = R D  =>  M = (R D) R^{-1}, column by column
    }
    // Simpler: M(:,j) obtained from solving M * R = RD  => work row-wise.
    // M = RD * R^{-1}: for each row i, solve x^T R = RD(i,:).
    for (std::size_t i = 0; i < n; ++i) {
        Vector rhs(n);
        for (std::size_t j = 0; j < n; ++j) rhs[j] = RD(i, j);
        Vector x = upper_tri_transpose_solve(qr.R, rhs);
        for (std::size_t j = 0; j < n; ++j) M(i, j) = x[j];
    }
    DenseColumnBlock H = matmul(matmul(qr.Q, M), transpose(qr.Q));
    auto sc = real_schur_ordered(H, EigenOrder::SmallestRealFirst);
    Vector got(n);
    for (std::size_t i = 0; i < n; ++i) got[i] = sc.Gamma(i, i);
    for (std::size_t i = 0; i < n; ++i) CHECK(got[i] == doctest::Approx(lam[i]).epsilon(1e-7));
    DenseColumnBlock lhs = matmul(H, sc.X), rhs2 = matmul(sc.X, sc.Gamma);
    CHECK(sub(lhs, rhs2).frobenius_norm() <= 1e-10 * H.frobenius_norm());
    CHECK(ortho_error(sc.X) < 1e-11);
}

TEST_CASE("givens rotation unit norm") {
    for (auto [a, b] : {std::pair{3.0, 4.0}, {0.0, 1.0}, {-2.0, 0.0}, {1e-30, 1e-30}}) {
        auto g = make_givens(a, b, 0);
        CHECK(std::abs(g.c * g.c + g.s * g.s - 1.0) < 1e-14);
        CHECK(std::abs(-g.s * a + g.c * b) < 1e-12 * (std::abs(a) + std::abs(b) + 1.0));
    }
}

TEST_CASE("principal angles: identical and orthogonal subspaces") {
    auto A = random_block(10, 3, 14);
    Vector c = principal_angles(A, A);
    REQUIRE(c.size() == 3);
    for (double v : c) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    DenseColumnBlock E1(4, 1), E2(4, 1);
    E1(0, 0) = 1;
    E2(1, 0) = 1;
    Vector c2 = principal_angles(E1, E2);
    REQUIRE(c2.size() == 1);
    CHECK(c2[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("principal angles invariances") {
    auto A = random_block(25, 4, 15);
    auto B = random_block(25, 6, 16);
    Vector ab = principal_angles(A, B), ba = principal_angles(B, A);
    REQUIRE(ab.size() == ba.size());
    for (std::size_t i = 0; i < ab.size(); ++i) CHECK(ab[i] == doctest::Approx(ba[i]).epsilon(1e-10));
    // Invariance under an invertible column mixer of A.
    std::mt19937 rng(17);
    std::normal_distribution<double> dist;
    DenseColumnBlock Mix = DenseColumnBlock::identity(4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) Mix(i, j) += 0.5 * dist(rng);
    Vector mixed = principal_angles(matmul(A, Mix), B);
    for (std::size_t i = 0; i < ab.size(); ++i)
        CHECK(mixed[i] == doctest::Approx(ab[i]).epsilon(1e-9));
    // Column scaling.
    DenseColumnBlock As = A;
    for (std::size_t i = 0; i < 25; ++i) As(i, 2) *= 37.0;
    Vector scaled = principal_angles(As, B);
    for (std::size_t i = 0; i < ab.size(); ++i)
        CHECK(scaled[i] == doctest::Approx(ab[i]).epsilon(1e-9));
}

TEST_CASE("matrix market round trip") {
    auto K = random_symmetric(20, 18, 0.3);
    std::stringstream ss;
    write_matrix_market(ss, K);
    auto K2 = read_matrix_market(ss);
    REQUIRE(K2.n() == K.n());
    REQUIRE(K2.nnz() == K.nnz());
    for (std::size_t i = 0; i < K.n(); ++i)
        for (std::size_t p = K.row_offsets()[i]; p < K.row_offsets()[i + 1]; ++p)
            CHECK(K2.entry(i, K.col_indices()[p]) == K.values()[p]);
}

TEST_CASE("permute round trip is bit exact") {
    auto K = random_symmetric(15, 19, 0.4);
    std::vector<std::size_t> perm(15);
    std::iota(perm.begin(), perm.end(), 0u);
    std::mt19937 rng(20);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto Kp = permute(K, perm);
    std::vector<std::size_t> inv(15);
    for (std::size_t i = 0; i < 15; ++i) inv[perm[i]] = i;
    auto Kb = permute(Kp, inv);
    CHECK(Kb.values() == K.values());
    CHECK(Kb.col_indices() == K.col_indices());
}

TEST_CASE("triangular solves") {
    auto A = random_block(6, 6, 21);
    auto qr = thin_qr(A);
    std::mt19937 rng(22);
    std::normal_distribution<double> dist;
    Vector b(6);
    for (double& v : b) v = dist(rng);
    Vector x = upper_tri_solve(qr.R, b);
    Vector y = matvec(qr.R, x);
    for (std::size_t i = 0; i < 6; ++i) CHECK(y[i] == doctest::Approx(b[i]).epsilon(1e-10));
    Vector xt = upper_tri_transpose_solve(qr.R, b);
    Vector yt = matvec(transpose(qr.R), xt);
    for (std::size_t i = 0; i < 6; ++i) CHECK(yt[i] == doctest::Approx(b[i]).epsilon(1e-10));
}
