#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "edgeprompt/matrix.hpp"

namespace edgeprompt {

enum class SegmentOrigin { cloud = 0, edge = 1, generated = 2 };

const char* to_string(SegmentOrigin origin);

/// One layer's K and V for one contiguous token span. K and V are
/// seq_len x d_model (heads concatenated), so a segment holds
/// 2 * d_model * seq_len = 2 * n_heads * d_head * seq_len values.
struct KVSegment {
    std::size_t layer = 0;
    SegmentOrigin origin = SegmentOrigin::cloud;
    std::size_t pos_offset = 0; // absolute position of the first token
    Matrix k;
    Matrix v;

    std::size_t seq_len() const { return k.rows(); }
    std::size_t end_position() const { return pos_offset + seq_len(); }
    std::size_t element_count() const { return k.size() + v.size(); }
};

/// Per-layer ordered segment lists with gapless, ascending position
/// coverage; every layer covers the same range and segment origins
/// appear in (cloud, edge, generated) order. One cache per session.
class SegmentedCache {
public:
    SegmentedCache() = default;
    explicit SegmentedCache(std::size_t n_layers) : layers_(n_layers) {}

    std::size_t n_layers() const { return layers_.size(); }
    bool empty() const;

    /// Position one past the last cached token (0 when empty).
    std::size_t end_position() const;

    const std::vector<KVSegment>& layer(std::size_t l) const { return layers_.at(l); }

    /// Appends one new segment per layer (all same origin/offset/length,
    /// contiguous with the current end). Throws std::invalid_argument on
    /// any invariant violation.
    void append(std::vector<KVSegment> per_layer);

    /// Appends a single token's K,V rows (1 x d_model each, one pair per
    /// layer) to the trailing `generated` segment, creating it if absent.
    void append_generated_token(const std::vector<std::pair<Matrix, Matrix>>& per_layer_kv);

    /// Verifies gapless coverage, cross-layer agreement and origin order;
    /// returns an error description or empty string when consistent.
    std::string check_consistent() const;

private:
    std::vector<std::vector<KVSegment>> layers_;
};

} // namespace edgeprompt
