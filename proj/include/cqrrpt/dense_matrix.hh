#ifndef cqrrpt_dense_matrix_hh
#define cqrrpt_dense_matrix_hh

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace cqrrpt {

// =============================================================================
/// Column-major dense matrix of 64-bit reals. Columns are the pivoting unit
/// throughout this library, so column access is contiguous.
///
class DenseMatrix {
public:
    DenseMatrix() : rows_(0), cols_(0) {}

    DenseMatrix(int64_t rows, int64_t cols)
        : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows * cols), 0.0) {
        if (rows < 0 || cols < 0)
            throw std::invalid_argument("DenseMatrix: negative dimension");
    }

    static DenseMatrix identity(int64_t n) {
        DenseMatrix m(n, n);
        for (int64_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    int64_t rows() const { return rows_; }
    int64_t cols() const { return cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }

    // 0-based element access.
    double &operator()(int64_t i, int64_t j) {
        return data_[static_cast<size_t>(j * rows_ + i)];
    }
    double operator()(int64_t i, int64_t j) const {
        return data_[static_cast<size_t>(j * rows_ + i)];
    }

    // Contiguous view of column j.
    std::span<double> col(int64_t j) {
        return {data_.data() + j * rows_, static_cast<size_t>(rows_)};
    }
    std::span<const double> col(int64_t j) const {
        return {data_.data() + j * rows_, static_cast<size_t>(rows_)};
    }

    double *data() { return data_.data(); }
    const double *data() const { return data_.data(); }
    size_t size() const { return data_.size(); }

    // Half-open sub-block copy: rows [r0, r1), columns [c0, c1).
    DenseMatrix block(int64_t r0, int64_t r1, int64_t c0, int64_t c1) const {
        if (r0 < 0 || r1 > rows_ || c0 < 0 || c1 > cols_ || r0 > r1 || c0 > c1)
            throw std::invalid_argument("DenseMatrix::block: range out of bounds");
        DenseMatrix out(r1 - r0, c1 - c0);
        for (int64_t j = c0; j < c1; ++j)
            for (int64_t i = r0; i < r1; ++i)
                out(i - r0, j - c0) = (*this)(i, j);
        return out;
    }

    DenseMatrix leading_columns(int64_t k) const { return block(0, rows_, 0, k); }
    DenseMatrix leading_block(int64_t k) const { return block(0, k, 0, k); }

    // Columns of this matrix selected by 0-based indices, in order.
    DenseMatrix select_columns(std::span<const int64_t> idx) const {
        DenseMatrix out(rows_, static_cast<int64_t>(idx.size()));
        for (size_t j = 0; j < idx.size(); ++j) {
            if (idx[j] < 0 || idx[j] >= cols_)
                throw std::invalid_argument("DenseMatrix::select_columns: index out of range");
            auto src = col(idx[j]);
            auto dst = out.col(static_cast<int64_t>(j));
            for (int64_t i = 0; i < rows_; ++i) dst[i] = src[i];
        }
        return out;
    }

    bool operator==(const DenseMatrix &other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    int64_t rows_, cols_;
    std::vector<double> data_;
};

// =============================================================================
/// The (A_ell, B_ell, C_ell) partition of a k x n upper-trapezoidal matrix at
/// split index ell:
///
///     R = [ A_ell  B_ell ]      A_ell: ell x ell upper-triangular
///         [   0    C_ell ]      B_ell: ell x (n-ell),  C_ell: (k-ell) x (n-ell)
///
/// Stacking the three blocks (with the zero block) reproduces the source.
///
struct TriangularPartition {
    const DenseMatrix *source;
    int64_t ell;

    TriangularPartition(const DenseMatrix &r, int64_t split) : source(&r), ell(split) {
        if (split < 0 || split > r.rows() || r.rows() > r.cols())
            throw std::invalid_argument("TriangularPartition: invalid split index");
    }

    DenseMatrix a() const { return source->block(0, ell, 0, ell); }
    DenseMatrix b() const { return source->block(0, ell, ell, source->cols()); }
    DenseMatrix c() const { return source->block(ell, source->rows(), ell, source->cols()); }
};

} // namespace cqrrpt

#endif
