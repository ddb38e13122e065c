#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace edgeprompt {

/// Dense row-major matrix of doubles. The only tensor carrier in the
/// engine; everything (Q/K/V blocks, hidden states, weights) is one of
/// these.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
    const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }
    std::span<const double> row(std::size_t r) const { return {row_ptr(r), cols_}; }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    /// Copy of columns [col0, col0+n) as an own matrix (per-head slicing).
    Matrix col_slice(std::size_t col0, std::size_t n) const;

    /// Copy of rows [row0, row0+n).
    Matrix row_slice(std::size_t row0, std::size_t n) const;

    bool all_finite() const;

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Standard product. Throws std::invalid_argument naming both shapes on
/// inner-dimension mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

struct SoftmaxResult {
    Matrix probs;            // same shape as scores, rows sum to 1
    std::vector<double> lse; // per-row log(sum(exp(row)))
};

/// Row-wise softmax with max-subtraction, plus the per-row log-sum-exp
/// that makes partial-attention recombination exact. Throws
/// std::domain_error on an empty matrix.
SoftmaxResult row_softmax_lse(const Matrix& scores);

/// log(exp(a) + exp(b)) without overflow; identity element is -inf.
double log_add_exp(double a, double b);

} // namespace edgeprompt
