#include "edgeprompt/attention.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace edgeprompt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_qkv_shapes(const Matrix& q, const Matrix& k, const Matrix& v, const char* where) {
    if (q.cols() == 0) throw std::invalid_argument(std::string(where) + ": zero head width");
    if (k.cols() != q.cols()) {
        throw std::invalid_argument(std::string(where) + ": q is " + std::to_string(q.rows()) +
                                    "x" + std::to_string(q.cols()) + " but k is " +
                                    std::to_string(k.rows()) + "x" + std::to_string(k.cols()));
    }
    if (k.rows() != v.rows()) {
        throw std::invalid_argument(std::string(where) + ": k has " + std::to_string(k.rows()) +
                                    " rows but v has " + std::to_string(v.rows()));
    }
}

// Number of segment keys visible to query row i, given that keys are a
// contiguous run starting at span.key_offset.
std::size_t visible_keys(CausalSpan span, std::size_t n_keys, std::size_t i) {
    const std::size_t qpos = span.query_offset + i;
    if (qpos < span.key_offset) return 0;
    return std::min(n_keys, qpos - span.key_offset + 1);
}

} // namespace

PartialAttention PartialAttention::identity(std::size_t n_query, std::size_t d_head) {
    PartialAttention p;
    p.out = Matrix(n_query, d_head);
    p.lse.assign(n_query, kNegInf);
    p.n_keys = 0;
    return p;
}

Matrix full_attention(const Matrix& q, const Matrix& k, const Matrix& v, CausalSpan span) {
    check_qkv_shapes(q, k, v, "full_attention");
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Matrix out(q.rows(), v.cols());
    std::vector<double> scores(k.rows());
    for (std::size_t i = 0; i < q.rows(); ++i) {
        const std::size_t vis = visible_keys(span, k.rows(), i);
        if (vis == 0) {
            throw std::domain_error("full_attention: query at position " +
                                    std::to_string(span.query_offset + i) +
                                    " has no visible key");
        }
        const double* qi = q.row_ptr(i);
        double m = kNegInf;
        for (std::size_t j = 0; j < vis; ++j) {
            const double* kj = k.row_ptr(j);
            double dot = 0.0;
            for (std::size_t c = 0; c < q.cols(); ++c) dot += qi[c] * kj[c];
            scores[j] = dot * scale;
            m = std::max(m, scores[j]);
        }
        double denom = 0.0;
        double* oi = out.row_ptr(i);
        for (std::size_t j = 0; j < vis; ++j) {
            const double w = std::exp(scores[j] - m);
            denom += w;
            const double* vj = v.row_ptr(j);
            for (std::size_t c = 0; c < v.cols(); ++c) oi[c] += w * vj[c];
        }
        const double inv = 1.0 / denom;
        for (std::size_t c = 0; c < v.cols(); ++c) oi[c] *= inv;
    }
    return out;
}

PartialAttention partial_attention(const Matrix& q, const Matrix& seg_k, const Matrix& seg_v,
                                   CausalSpan span) {
    check_qkv_shapes(q, seg_k, seg_v, "partial_attention");
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    PartialAttention part;
    part.out = Matrix(q.rows(), seg_v.cols());
    part.lse.assign(q.rows(), kNegInf);
    part.n_keys = seg_k.rows();
    std::vector<double> scores(seg_k.rows());
    for (std::size_t i = 0; i < q.rows(); ++i) {
        const std::size_t vis = visible_keys(span, seg_k.rows(), i);
        if (vis == 0) continue; // identity row
        const double* qi = q.row_ptr(i);
        double m = kNegInf;
        for (std::size_t j = 0; j < vis; ++j) {
            const double* kj = seg_k.row_ptr(j);
            double dot = 0.0;
            for (std::size_t c = 0; c < q.cols(); ++c) dot += qi[c] * kj[c];
            scores[j] = dot * scale;
            m = std::max(m, scores[j]);
        }
        double denom = 0.0;
        double* oi = part.out.row_ptr(i);
        for (std::size_t j = 0; j < vis; ++j) {
            const double w = std::exp(scores[j] - m);
            denom += w;
            const double* vj = seg_v.row_ptr(j);
            for (std::size_t c = 0; c < seg_v.cols(); ++c) oi[c] += w * vj[c];
        }
        const double inv = 1.0 / denom;
        for (std::size_t c = 0; c < seg_v.cols(); ++c) oi[c] *= inv;
        part.lse[i] = m + std::log(denom);
    }
    return part;
}

PartialAttention merge_partials(const std::vector<PartialAttention>& parts) {
    if (parts.empty()) throw std::invalid_argument("merge_partials: no partials");
    const std::size_t n_query = parts.front().out.rows();
    const std::size_t d_head = parts.front().out.cols();
    std::size_t n_keys = 0;
    for (const auto& p : parts) {
        if (p.out.rows() != n_query || p.out.cols() != d_head || p.lse.size() != n_query) {
            throw std::invalid_argument("merge_partials: partials disagree on shape");
        }
        n_keys += p.n_keys;
    }
    PartialAttention merged;
    merged.out = Matrix(n_query, d_head);
    merged.lse.assign(n_query, kNegInf);
    merged.n_keys = n_keys;
    for (std::size_t i = 0; i < n_query; ++i) {
        double total = kNegInf;
        for (const auto& p : parts) total = log_add_exp(total, p.lse[i]);
        merged.lse[i] = total;
        if (std::isinf(total) && total < 0) continue; // all parts empty for this row
        double* oi = merged.out.row_ptr(i);
        for (const auto& p : parts) {
            const double alpha = std::exp(p.lse[i] - total);
            if (alpha == 0.0) continue;
            const double* pi = p.out.row_ptr(i);
            for (std::size_t c = 0; c < d_head; ++c) oi[c] += alpha * pi[c];
        }
    }
    return merged;
}

Matrix fuse_partials(const std::vector<PartialAttention>& parts) {
    PartialAttention merged = merge_partials(parts);
    for (std::size_t i = 0; i < merged.lse.size(); ++i) {
        if (std::isinf(merged.lse[i]) && merged.lse[i] < 0) {
            throw std::domain_error("fuse_partials: query row " + std::to_string(i) +
                                    " is masked in every partial");
        }
    }
    return std::move(merged.out);
}

} // namespace edgeprompt
