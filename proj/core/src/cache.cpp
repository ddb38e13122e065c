#include "edgeprompt/cache.hpp"

#include <stdexcept>

namespace edgeprompt {

const char* to_string(SegmentOrigin origin) {
    switch (origin) {
    case SegmentOrigin::cloud: return "cloud";
    case SegmentOrigin::edge: return "edge";
    case SegmentOrigin::generated: return "generated";
    }
    return "?";
}

bool SegmentedCache::empty() const {
    return layers_.empty() || layers_.front().empty();
}

std::size_t SegmentedCache::end_position() const {
    if (empty()) return 0;
    return layers_.front().back().end_position();
}

void SegmentedCache::append(std::vector<KVSegment> per_layer) {
    if (layers_.empty()) throw std::invalid_argument("SegmentedCache: zero layers");
    if (per_layer.size() != layers_.size()) {
        throw std::invalid_argument("SegmentedCache::append: got " +
                                    std::to_string(per_layer.size()) + " segments for " +
                                    std::to_string(layers_.size()) + " layers");
    }
    const std::size_t end = end_position();
    for (std::size_t l = 0; l < per_layer.size(); ++l) {
        const KVSegment& seg = per_layer[l];
        if (seg.layer != l) throw std::invalid_argument("SegmentedCache::append: segment layer mismatch");
        if (seg.pos_offset != end) {
            throw std::invalid_argument("SegmentedCache::append: segment starts at " +
                                        std::to_string(seg.pos_offset) + ", cache ends at " +
                                        std::to_string(end));
        }
        if (seg.k.rows() != seg.v.rows() || seg.k.cols() != seg.v.cols()) {
            throw std::invalid_argument("SegmentedCache::append: k/v shape mismatch");
        }
        if (seg.seq_len() == 0) throw std::invalid_argument("SegmentedCache::append: empty segment");
        if (!layers_[l].empty() &&
            static_cast<int>(seg.origin) < static_cast<int>(layers_[l].back().origin)) {
            throw std::invalid_argument("SegmentedCache::append: origin order must be (cloud, edge, generated)");
        }
    }
    for (std::size_t l = 0; l < per_layer.size(); ++l) {
        layers_[l].push_back(std::move(per_layer[l]));
    }
}

void SegmentedCache::append_generated_token(const std::vector<std::pair<Matrix, Matrix>>& per_layer_kv) {
    if (per_layer_kv.size() != layers_.size()) {
        throw std::invalid_argument("SegmentedCache::append_generated_token: layer count mismatch");
    }
    const std::size_t pos = end_position();
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& [k, v] = per_layer_kv[l];
        if (k.rows() != 1 || v.rows() != 1 || k.cols() != v.cols()) {
            throw std::invalid_argument("SegmentedCache::append_generated_token: expected 1-row k/v");
        }
        auto& segs = layers_[l];
        if (!segs.empty() && segs.back().origin == SegmentOrigin::generated) {
            KVSegment& g = segs.back();
            Matrix nk(g.k.rows() + 1, g.k.cols());
            Matrix nv(g.v.rows() + 1, g.v.cols());
            std::copy(g.k.data().begin(), g.k.data().end(), nk.data().begin());
            std::copy(g.v.data().begin(), g.v.data().end(), nv.data().begin());
            std::copy(k.data().begin(), k.data().end(), nk.row_ptr(g.k.rows()));
            std::copy(v.data().begin(), v.data().end(), nv.row_ptr(g.v.rows()));
            g.k = std::move(nk);
            g.v = std::move(nv);
        } else {
            segs.push_back(KVSegment{l, SegmentOrigin::generated, pos, k, v});
        }
    }
}

std::string SegmentedCache::check_consistent() const {
    if (layers_.empty()) return "no layers";
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& segs = layers_[l];
        if (segs.size() != layers_[0].size()) return "layer segment counts differ";
        std::size_t pos = 0;
        int last_origin = -1;
        for (std::size_t s = 0; s < segs.size(); ++s) {
            const KVSegment& seg = segs[s];
            if (seg.layer != l) return "segment carries wrong layer index";
            if (seg.pos_offset != pos) return "gap in position coverage";
            if (seg.k.rows() != seg.v.rows() || seg.k.cols() != seg.v.cols()) return "k/v shape mismatch";
            if (static_cast<int>(seg.origin) < last_origin) return "origin order violated";
            if (seg.pos_offset != layers_[0][s].pos_offset || seg.seq_len() != layers_[0][s].seq_len()) {
                return "layers cover different position ranges";
            }
            last_origin = static_cast<int>(seg.origin);
            pos = seg.end_position();
        }
    }
    return {};
}

} // namespace edgeprompt
