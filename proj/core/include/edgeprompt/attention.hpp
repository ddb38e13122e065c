#pragma once

#include <cstddef>
#include <vector>

#include "edgeprompt/matrix.hpp"

namespace edgeprompt {

/// Absolute positions anchoring a query block and a key segment in the
/// global causal order. A query at absolute position p sees keys at
/// absolute positions <= p.
struct CausalSpan {
    std::size_t query_offset = 0; // absolute position of the first query token
    std::size_t key_offset = 0;   // absolute position of the first key token
};

/// Attention of a query block restricted to one KV segment, in
/// normalized-output + log-sum-exp form. Segments carried this way can
/// be recombined exactly without ever exchanging score matrices.
///
/// A fully masked row (no visible key) is the identity element:
/// lse = -inf, out row = zeros.
struct PartialAttention {
    Matrix out;              // n_query x d_head, softmax-normalized within the segment
    std::vector<double> lse; // per query row, log sum exp of masked scores
    std::size_t n_keys = 0;

    static PartialAttention identity(std::size_t n_query, std::size_t d_head);
};

/// Monolithic scaled-dot-product attention with causal masking:
/// softmax(q k^T / sqrt(d) + mask) v. Throws std::domain_error if any
/// query row has no visible key.
Matrix full_attention(const Matrix& q, const Matrix& k, const Matrix& v, CausalSpan span);

/// Attention of q against one key/value segment only. Fully masked rows
/// are legal here and yield the identity partial for that row.
PartialAttention partial_attention(const Matrix& q, const Matrix& seg_k, const Matrix& seg_v,
                                   CausalSpan span);

/// Exact recombination of per-segment partials: per query row, each
/// partial is weighted by exp(lse_p - logsumexp(all lse)). The weights
/// form a convex combination and the result equals full attention over
/// the concatenated segments. Throws std::domain_error if some row is
/// masked in every partial.
Matrix fuse_partials(const std::vector<PartialAttention>& parts);

/// Same recombination but keeps the (output, lse) form so fusion can be
/// applied pairwise/incrementally. fuse_partials(parts) ==
/// merge_partials(parts).out for rows with at least one visible key.
PartialAttention merge_partials(const std::vector<PartialAttention>& parts);

} // namespace edgeprompt
