#include "ksr/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace ksr {

SparseSymMatrix::SparseSymMatrix(std::size_t n, std::vector<std::size_t> row_offsets,
                                 std::vector<std::size_t> col_indices, std::vector<double> values)
    : n_(n),
      row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      values_(std::move(values)) {
    if (row_offsets_.size() != n_ + 1 || col_indices_.size() != values_.size() ||
        row_offsets_.back() != col_indices_.size())
        throw std::invalid_argument("SparseSymMatrix: inconsistent CSR arrays");
    for (std::size_t i = 0; i < n_; ++i) {
        if (row_offsets_[i] > row_offsets_[i + 1])
            throw std::invalid_argument("SparseSymMatrix: row_offsets not nondecreasing");
        for (std::size_t p = row_offsets_[i] + 1; p < row_offsets_[i + 1]; ++p)
            if (col_indices_[p - 1] >= col_indices_[p])
                throw std::invalid_argument("SparseSymMatrix: unsorted or duplicate columns");
    }
    symmetry_verified_ = is_symmetric(*this);
    if (!symmetry_verified_) throw std::invalid_argument("SparseSymMatrix: not symmetric");
}

double SparseSymMatrix::entry(std::size_t i, std::size_t j) const {
    auto begin = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i]);
    auto end = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i + 1]);
    auto it = std::lower_bound(begin, end, j);
    if (it == end || *it != j) return 0.0;
    return values_[static_cast<std::size_t>(it - col_indices_.begin())];
}

double SparseSymMatrix::frobenius_norm() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return std::sqrt(s);
}

bool SparseSymMatrix::is_symmetric(const SparseSymMatrix& K) {
    for (std::size_t i = 0; i < K.n_; ++i)
        for (std::size_t p = K.row_offsets_[i]; p < K.row_offsets_[i + 1]; ++p) {
            const std::size_t j = K.col_indices_[p];
            if (j >= K.n_) return false;
            if (K.entry(j, i) != K.values_[p]) return false;
        }
    return true;
}

SparseSymMatrix SparseSymMatrix::identity(std::size_t n) {
    return diagonal(Vector(n, 1.0));
}

SparseSymMatrix SparseSymMatrix::diagonal(const Vector& d) {
    const std::size_t n = d.size();
    std::vector<std::size_t> offs(n + 1), cols(n);
    std::iota(offs.begin(), offs.end(), 0u);
    std::iota(cols.begin(), cols.end(), 0u);
    return {n, std::move(offs), std::move(cols), d};
}

void TripletBuilder::add(std::size_t i, std::size_t j, double v) {
    if (i >= n_ || j >= n_) throw std::invalid_argument("TripletBuilder: index out of range");
    is_.push_back(i);
    js_.push_back(j);
    vs_.push_back(v);
}

void TripletBuilder::add_sym(std::size_t i, std::size_t j, double v) {
    add(i, j, v);
    if (i != j) add(j, i, v);
}

SparseSymMatrix TripletBuilder::build() const {
    std::vector<std::size_t> count(n_ + 1, 0);
    for (std::size_t t = 0; t < is_.size(); ++t) ++count[is_[t] + 1];
    std::vector<std::size_t> offs(n_ + 1, 0);
    std::partial_sum(count.begin(), count.end(), offs.begin());
    std::vector<std::size_t> pos(offs.begin(), offs.end() - 1);
    std::vector<std::size_t> cols(is_.size());
    std::vector<double> vals(is_.size());
    for (std::size_t t = 0; t < is_.size(); ++t) {
        cols[pos[is_[t]]] = js_[t];
        vals[pos[is_[t]]] = vs_[t];
        ++pos[is_[t]];
    }
    // Sort within rows and merge duplicates.
    std::vector<std::size_t> out_offs(n_ + 1, 0);
    std::vector<std::size_t> out_cols;
    std::vector<double> out_vals;
    out_cols.reserve(cols.size());
    out_vals.reserve(vals.size());
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < n_; ++i) {
        order.resize(offs[i + 1] - offs[i]);
        std::iota(order.begin(), order.end(), offs[i]);
        // Stable so duplicates accumulate in insertion order; (i, j) and
        // (j, i) then sum in the same order and stay bit-identical.
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return cols[a] < cols[b]; });
        std::size_t in_row = 0;
        for (std::size_t p : order) {
            if (in_row > 0 && out_cols.back() == cols[p]) {
                out_vals.back() += vals[p];
            } else {
                out_cols.push_back(cols[p]);
                out_vals.push_back(vals[p]);
                ++in_row;
            }
        }
        out_offs[i + 1] = out_offs[i] + in_row;
    }
    return {n_, std::move(out_offs), std::move(out_cols), std::move(out_vals)};
}

Vector spmv(const SparseSymMatrix& K, std::span<const double> x) {
    Vector y(K.n());
    spmv_into(K, x, y);
    return y;
}

void spmv_into(const SparseSymMatrix& K, std::span<const double> x, Vector& y) {
    if (x.size() != K.n()) throw std::invalid_argument("spmv: dimension mismatch");
    y.assign(K.n(), 0.0);
    const auto& offs = K.row_offsets();
    const auto& cols = K.col_indices();
    const auto& vals = K.values();
    for (std::size_t i = 0; i < K.n(); ++i) {
        double s = 0.0;
        for (std::size_t p = offs[i]; p < offs[i + 1]; ++p) s += vals[p] * x[cols[p]];
        y[i] = s;
    }
}

DenseColumnBlock spmm(const SparseSymMatrix& K, const DenseColumnBlock& X) {
    if (X.rows() != K.n()) throw std::invalid_argument("spmm: dimension mismatch");
    DenseColumnBlock Y(K.n(), X.cols());
    Vector tmp;
    for (std::size_t j = 0; j < X.cols(); ++j) {
        spmv_into(K, X.col(j), tmp);
        Y.set_col(j, tmp);
    }
    return Y;
}

SparseSymMatrix permute(const SparseSymMatrix& K, const std::vector<std::size_t>& perm) {
    if (perm.size() != K.n()) throw std::invalid_argument("permute: size mismatch");
    std::vector<std::size_t> inv(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
    TripletBuilder b(K.n());
    const auto& offs = K.row_offsets();
    const auto& cols = K.col_indices();
    const auto& vals = K.values();
    for (std::size_t i = 0; i < K.n(); ++i)
        for (std::size_t p = offs[i]; p < offs[i + 1]; ++p)
            b.add(inv[i], inv[cols[p]], vals[p]);
    return b.build();
}

std::size_t bandwidth(const SparseSymMatrix& K) {
    std::size_t bw = 0;
    const auto& offs = K.row_offsets();
    const auto& cols = K.col_indices();
    for (std::size_t i = 0; i < K.n(); ++i)
        for (std::size_t p = offs[i]; p < offs[i + 1]; ++p) {
            const std::size_t j = cols[p];
            bw = std::max(bw, i > j ? i - j : j - i);
        }
    return bw;
}

void write_matrix_market(std::ostream& os, const SparseSymMatrix& K) {
    std::size_t nnz_lower = 0;
    const auto& offs = K.row_offsets();
    const auto& cols = K.col_indices();
    const auto& vals = K.values();
    for (std::size_t i = 0; i < K.n(); ++i)
        for (std::size_t p = offs[i]; p < offs[i + 1]; ++p)
            if (cols[p] <= i) ++nnz_lower;
    os << "%%MatrixMarket matrix coordinate real symmetric\n";
    os << K.n() << " " << K.n() << " " << nnz_lower << "\n";
    os.precision(17);
    for (std::size_t i = 0; i < K.n(); ++i)
        for (std::size_t p = offs[i]; p < offs[i + 1]; ++p)
            if (cols[p] <= i) os << i + 1 << " " << cols[p] + 1 << " " << vals[p] << "\n";
}

void write_matrix_market(const std::string& path, const SparseSymMatrix& K) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    write_matrix_market(os, K);
}

SparseSymMatrix read_matrix_market(std::istream& is) {
    std::string line;
    bool symmetric = false;
    if (!std::getline(is, line)) throw std::runtime_error("matrix market: empty stream");
    if (line.rfind("%%MatrixMarket", 0) != 0)
        throw std::runtime_error("matrix market: missing banner");
    symmetric = line.find("symmetric") != std::string::npos;
    while (std::getline(is, line))
        if (!line.empty() && line[0] != '%') break;
    std::istringstream hdr(line);
    std::size_t nr = 0, nc = 0, nnz = 0;
    hdr >> nr >> nc >> nnz;
    if (nr != nc) throw std::runtime_error("matrix market: not square");
    TripletBuilder b(nr);
    for (std::size_t t = 0; t < nnz; ++t) {
        std::size_t i = 0, j = 0;
        double v = 0.0;
        if (!(is >> i >> j >> v)) throw std::runtime_error("matrix market: truncated data");
        --i;
        --j;
        if (symmetric && i != j) b.add_sym(i, j, v);
        else b.add(i, j, v);
    }
    return b.build();
}

SparseSymMatrix read_matrix_market_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    return read_matrix_market(is);
}

void write_block_text(const std::string& path, const DenseColumnBlock& A) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os.precision(17);
    os << A.rows() << " " << A.cols() << "\n";
    for (std::size_t i = 0; i < A.rows(); ++i) {
        for (std::size_t j = 0; j < A.cols(); ++j) os << (j ? " " : "") << A(i, j);
        os << "\n";
    }
}

void write_block_binary(const std::string& path, const DenseColumnBlock& A) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path);
    const std::uint64_t dims[2] = {A.rows(), A.cols()};
    os.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    os.write(reinterpret_cast<const char*>(A.data().data()),
             static_cast<std::streamsize>(A.data().size() * sizeof(double)));
}

DenseColumnBlock read_block_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::uint64_t dims[2];
    is.read(reinterpret_cast<char*>(dims), sizeof(dims));
    DenseColumnBlock A(dims[0], dims[1]);
    is.read(reinterpret_cast<char*>(A.data().data()),
            static_cast<std::streamsize>(A.data().size() * sizeof(double)));
    if (!is) throw std::runtime_error("block binary: truncated file");
    return A;
}

}  // namespace ksr
