#include "ksr/dense.hpp"

#include <algorithm>
#include <cmath>

namespace ksr {

void DenseColumnBlock::set_col(std::size_t j, std::span<const double> v) {
    if (v.size() != rows_) throw std::invalid_argument("set_col: length mismatch");
    std::copy(v.begin(), v.end(), a_.begin() + static_cast<std::ptrdiff_t>(j * rows_));
}

DenseColumnBlock DenseColumnBlock::identity(std::size_t n) {
    DenseColumnBlock I(n, n);
    for (std::size_t i = 0; i < n; ++i) I(i, i) = 1.0;
    return I;
}

DenseColumnBlock DenseColumnBlock::from_columns(const std::vector<Vector>& cols) {
    if (cols.empty()) return {};
    DenseColumnBlock A(cols.front().size(), cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) A.set_col(j, cols[j]);
    return A;
}

DenseColumnBlock DenseColumnBlock::leading_cols(std::size_t k) const {
    if (k > cols_) throw std::invalid_argument("leading_cols: k > cols");
    DenseColumnBlock B(rows_, k);
    std::copy(a_.begin(), a_.begin() + static_cast<std::ptrdiff_t>(k * rows_), B.a_.begin());
    return B;
}

double DenseColumnBlock::frobenius_norm() const {
    double s = 0.0;
    for (double v : a_) s += v * v;
    return std::sqrt(s);
}

DenseColumnBlock matmul(const DenseColumnBlock& A, const DenseColumnBlock& B) {
    if (A.cols() != B.rows()) throw std::invalid_argument("matmul: dimension mismatch");
    DenseColumnBlock C(A.rows(), B.cols());
    for (std::size_t j = 0; j < B.cols(); ++j)
        for (std::size_t p = 0; p < A.cols(); ++p) {
            const double b = B(p, j);
            if (b == 0.0) continue;
            for (std::size_t i = 0; i < A.rows(); ++i) C(i, j) += A(i, p) * b;
        }
    return C;
}

DenseColumnBlock transpose_matmul(const DenseColumnBlock& A, const DenseColumnBlock& B) {
    if (A.rows() != B.rows()) throw std::invalid_argument("transpose_matmul: dimension mismatch");
    DenseColumnBlock C(A.cols(), B.cols());
    for (std::size_t j = 0; j < B.cols(); ++j)
        for (std::size_t i = 0; i < A.cols(); ++i) C(i, j) = dot(A.col(i), B.col(j));
    return C;
}

Vector matvec(const DenseColumnBlock& A, std::span<const double> x) {
    if (x.size() != A.cols()) throw std::invalid_argument("matvec: dimension mismatch");
    Vector y(A.rows(), 0.0);
    add_matvec(A, x, y);
    return y;
}

Vector transpose_matvec(const DenseColumnBlock& A, std::span<const double> x) {
    if (x.size() != A.rows()) throw std::invalid_argument("transpose_matvec: dimension mismatch");
    Vector y(A.cols());
    for (std::size_t j = 0; j < A.cols(); ++j) y[j] = dot(A.col(j), x);
    return y;
}

void add_matvec(const DenseColumnBlock& A, std::span<const double> x, Vector& y) {
    if (x.size() != A.cols() || y.size() != A.rows())
        throw std::invalid_argument("add_matvec: dimension mismatch");
    for (std::size_t j = 0; j < A.cols(); ++j) {
        const double xj = x[j];
        if (xj == 0.0) continue;
        auto c = A.col(j);
        for (std::size_t i = 0; i < A.rows(); ++i) y[i] += c[i] * xj;
    }
}

void sub_matvec(const DenseColumnBlock& A, std::span<const double> x, Vector& y) {
    if (x.size() != A.cols() || y.size() != A.rows())
        throw std::invalid_argument("sub_matvec: dimension mismatch");
    for (std::size_t j = 0; j < A.cols(); ++j) {
        const double xj = x[j];
        if (xj == 0.0) continue;
        auto c = A.col(j);
        for (std::size_t i = 0; i < A.rows(); ++i) y[i] -= c[i] * xj;
    }
}

DenseColumnBlock add(const DenseColumnBlock& A, const DenseColumnBlock& B) {
    if (A.rows() != B.rows() || A.cols() != B.cols())
        throw std::invalid_argument("add: dimension mismatch");
    DenseColumnBlock C = A;
    for (std::size_t i = 0; i < C.data().size(); ++i) C.data()[i] += B.data()[i];
    return C;
}

DenseColumnBlock sub(const DenseColumnBlock& A, const DenseColumnBlock& B) {
    if (A.rows() != B.rows() || A.cols() != B.cols())
        throw std::invalid_argument("sub: dimension mismatch");
    DenseColumnBlock C = A;
    for (std::size_t i = 0; i < C.data().size(); ++i) C.data()[i] -= B.data()[i];
    return C;
}

DenseColumnBlock transpose(const DenseColumnBlock& A) {
    DenseColumnBlock T(A.cols(), A.rows());
    for (std::size_t j = 0; j < A.cols(); ++j)
        for (std::size_t i = 0; i < A.rows(); ++i) T(j, i) = A(i, j);
    return T;
}

double dot(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

void axpy(double alpha, std::span<const double> x, Vector& y) {
    if (x.size() != y.size()) throw std::invalid_argument("axpy: length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void scal(double alpha, Vector& x) {
    for (double& v : x) v *= alpha;
}

}  // namespace ksr
