#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace ksr {

using Vector = std::vector<double>;

/// Tall-skinny dense block, column-major storage.
class DenseColumnBlock {
public:
    DenseColumnBlock() = default;
    DenseColumnBlock(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), a_(rows * cols, 0.0) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return a_[j * rows_ + i]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[j * rows_ + i]; }

    std::span<double> col(std::size_t j) { return {a_.data() + j * rows_, rows_}; }
    std::span<const double> col(std::size_t j) const { return {a_.data() + j * rows_, rows_}; }

    std::vector<double>& data() { return a_; }
    const std::vector<double>& data() const { return a_; }

    void set_col(std::size_t j, std::span<const double> v);
    Vector col_vec(std::size_t j) const { return Vector(col(j).begin(), col(j).end()); }

    static DenseColumnBlock identity(std::size_t n);
    static DenseColumnBlock from_columns(const std::vector<Vector>& cols);

    /// Keep the leading `k` columns.
    DenseColumnBlock leading_cols(std::size_t k) const;

    double frobenius_norm() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> a_;
};

// Small dense BLAS-ish helpers. All check dimensions and throw
// std::invalid_argument on mismatch.

DenseColumnBlock matmul(const DenseColumnBlock& A, const DenseColumnBlock& B);
DenseColumnBlock transpose_matmul(const DenseColumnBlock& A, const DenseColumnBlock& B);  // A^T B
Vector matvec(const DenseColumnBlock& A, std::span<const double> x);
Vector transpose_matvec(const DenseColumnBlock& A, std::span<const double> x);  // A^T x

// y += A x  and  y -= A x
void add_matvec(const DenseColumnBlock& A, std::span<const double> x, Vector& y);
void sub_matvec(const DenseColumnBlock& A, std::span<const double> x, Vector& y);

DenseColumnBlock add(const DenseColumnBlock& A, const DenseColumnBlock& B);
DenseColumnBlock sub(const DenseColumnBlock& A, const DenseColumnBlock& B);
DenseColumnBlock transpose(const DenseColumnBlock& A);

// Vector helpers.
double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const double> x);
void axpy(double alpha, std::span<const double> x, Vector& y);
void scal(double alpha, Vector& x);

}  // namespace ksr
