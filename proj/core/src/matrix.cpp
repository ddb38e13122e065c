#include "edgeprompt/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace edgeprompt {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw std::invalid_argument("Matrix: data length " + std::to_string(data_.size()) +
                                    " does not match " + std::to_string(rows_) + "x" +
                                    std::to_string(cols_));
    }
}

Matrix Matrix::col_slice(std::size_t col0, std::size_t n) const {
    if (col0 + n > cols_) throw std::invalid_argument("Matrix::col_slice out of range");
    Matrix out(rows_, n);
    for (std::size_t r = 0; r < rows_; ++r) {
        const double* src = row_ptr(r) + col0;
        std::copy(src, src + n, out.row_ptr(r));
    }
    return out;
}

Matrix Matrix::row_slice(std::size_t row0, std::size_t n) const {
    if (row0 + n > rows_) throw std::invalid_argument("Matrix::row_slice out of range");
    Matrix out(n, cols_);
    std::copy(row_ptr(row0), row_ptr(row0) + n * cols_, out.row_ptr(0));
    return out;
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: dimension mismatch (" + std::to_string(a.rows()) +
                                    "x" + std::to_string(a.cols()) + ") * (" +
                                    std::to_string(b.rows()) + "x" + std::to_string(b.cols()) +
                                    ")");
    }
    Matrix out(a.rows(), b.cols());
    // ikj order keeps the inner loop contiguous on both b and out.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* out_row = out.row_ptr(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* b_row = b.row_ptr(k);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                out_row[j] += aik * b_row[j];
            }
        }
    }
    return out;
}

SoftmaxResult row_softmax_lse(const Matrix& scores) {
    if (scores.rows() == 0 || scores.cols() == 0) {
        throw std::domain_error("row_softmax_lse: empty matrix");
    }
    SoftmaxResult res;
    res.probs = Matrix(scores.rows(), scores.cols());
    res.lse.resize(scores.rows());
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        const double* s = scores.row_ptr(i);
        double m = s[0];
        for (std::size_t j = 1; j < scores.cols(); ++j) m = std::max(m, s[j]);
        double denom = 0.0;
        double* p = res.probs.row_ptr(i);
        for (std::size_t j = 0; j < scores.cols(); ++j) {
            p[j] = std::exp(s[j] - m);
            denom += p[j];
        }
        const double inv = 1.0 / denom;
        for (std::size_t j = 0; j < scores.cols(); ++j) p[j] *= inv;
        res.lse[i] = m + std::log(denom);
    }
    return res;
}

double log_add_exp(double a, double b) {
    if (std::isinf(a) && a < 0) return b;
    if (std::isinf(b) && b < 0) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

} // namespace edgeprompt
