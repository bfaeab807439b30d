#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "ksr/dense.hpp"

namespace ksr {

/// Symmetric sparse matrix in CSR layout. Both triangles are stored;
/// construction verifies structural and numerical symmetry.
class SparseSymMatrix {
public:
    SparseSymMatrix() = default;
    SparseSymMatrix(std::size_t n, std::vector<std::size_t> row_offsets,
                    std::vector<std::size_t> col_indices, std::vector<double> values);

    std::size_t n() const { return n_; }
    std::size_t nnz() const { return values_.size(); }
    const std::vector<std::size_t>& row_offsets() const { return row_offsets_; }
    const std::vector<std::size_t>& col_indices() const { return col_indices_; }
    const std::vector<double>& values() const { return values_; }
    bool symmetry_verified() const { return symmetry_verified_; }

    /// Entry lookup by binary search over the sorted row; 0 if absent.
    double entry(std::size_t i, std::size_t j) const;

    double frobenius_norm() const;

    /// Structural + numerical symmetry check (exact storage equality).
    static bool is_symmetric(const SparseSymMatrix& K);

    static SparseSymMatrix identity(std::size_t n);
    static SparseSymMatrix diagonal(const Vector& d);

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> row_offsets_{0};
    std::vector<std::size_t> col_indices_;
    std::vector<double> values_;
    bool symmetry_verified_ = false;
};

/// Accumulates (i, j, value) triplets; duplicates are summed.
class TripletBuilder {
public:
    explicit TripletBuilder(std::size_t n) : n_(n) {}
    void add(std::size_t i, std::size_t j, double v);
    /// Add v at (i,j) and (j,i).
    void add_sym(std::size_t i, std::size_t j, double v);
    SparseSymMatrix build() const;

private:
    std::size_t n_;
    std::vector<std::size_t> is_, js_;
    std::vector<double> vs_;
};

Vector spmv(const SparseSymMatrix& K, std::span<const double> x);
void spmv_into(const SparseSymMatrix& K, std::span<const double> x, Vector& y);

DenseColumnBlock spmm(const SparseSymMatrix& K, const DenseColumnBlock& X);

/// PKP^T for a permutation given as perm[new] = old.
SparseSymMatrix permute(const SparseSymMatrix& K, const std::vector<std::size_t>& perm);

std::size_t bandwidth(const SparseSymMatrix& K);

// Matrix Market coordinate format, symmetric storage (lower triangle).
void write_matrix_market(std::ostream& os, const SparseSymMatrix& K);
void write_matrix_market(const std::string& path, const SparseSymMatrix& K);
SparseSymMatrix read_matrix_market(std::istream& is);
SparseSymMatrix read_matrix_market_file(const std::string& path);

// Plain dumps for tall-skinny blocks (harness debugging aids).
void write_block_text(const std::string& path, const DenseColumnBlock& A);
void write_block_binary(const std::string& path, const DenseColumnBlock& A);
DenseColumnBlock read_block_binary(const std::string& path);

}  // namespace ksr
