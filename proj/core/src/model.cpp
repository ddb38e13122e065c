#include "edgeprompt/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "edgeprompt/rng.hpp"

namespace edgeprompt {

namespace {

constexpr double kLayerNormEps = 1e-5;

Matrix random_matrix(SplitMix64& rng, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.uniform(-0.1, 0.1);
    return m;
}

std::vector<double> random_vector(SplitMix64& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-0.1, 0.1);
    return v;
}

void accumulate(double& sum, const Matrix& m) {
    for (double v : m.data()) sum += v;
}

std::uint64_t fnv1a64(std::uint64_t h, std::uint64_t value) {
    for (int i = 0; i < 8; ++i) {
        h ^= (value >> (8 * i)) & 0xFF;
        h *= 0x100000001B3ULL;
    }
    return h;
}

} // namespace

void ModelConfig::validate() const {
    if (n_layers == 0 || n_heads == 0 || d_model == 0 || vocab_size == 0 || max_positions == 0) {
        throw std::invalid_argument("ModelConfig: all dimensions must be positive");
    }
    if (d_model % n_heads != 0) {
        throw std::invalid_argument("ModelConfig: d_model " + std::to_string(d_model) +
                                    " not divisible by n_heads " + std::to_string(n_heads));
    }
}

double Model::weight_sum() const {
    double sum = 0.0;
    accumulate(sum, embedding);
    for (const LayerWeights& lw : layers) {
        accumulate(sum, lw.wq);
        accumulate(sum, lw.wk);
        accumulate(sum, lw.wv);
        accumulate(sum, lw.wo);
        accumulate(sum, lw.w1);
        for (double v : lw.b1) sum += v;
        accumulate(sum, lw.w2);
        for (double v : lw.b2) sum += v;
    }
    accumulate(sum, unembed);
    return sum;
}

std::array<std::uint8_t, 8> Model::fingerprint() const {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    h = fnv1a64(h, config.n_layers);
    h = fnv1a64(h, config.n_heads);
    h = fnv1a64(h, config.d_model);
    h = fnv1a64(h, config.vocab_size);
    h = fnv1a64(h, config.max_positions);
    h = fnv1a64(h, config.init_seed);
    std::array<std::uint8_t, 8> out;
    for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>((h >> (8 * i)) & 0xFF);
    return out;
}

Model init_model(const ModelConfig& config) {
    config.validate();
    Model m;
    m.config = config;
    SplitMix64 rng(config.init_seed);
    const std::size_t d = config.d_model;
    m.embedding = random_matrix(rng, config.vocab_size, d);
    m.layers.resize(config.n_layers);
    for (LayerWeights& lw : m.layers) {
        lw.wq = random_matrix(rng, d, d);
        lw.wk = random_matrix(rng, d, d);
        lw.wv = random_matrix(rng, d, d);
        lw.wo = random_matrix(rng, d, d);
        lw.w1 = random_matrix(rng, d, 4 * d);
        lw.b1 = random_vector(rng, 4 * d);
        lw.w2 = random_matrix(rng, 4 * d, d);
        lw.b2 = random_vector(rng, d);
    }
    m.unembed = random_matrix(rng, d, config.vocab_size);
    return m;
}

Matrix embed(const Model& model, const std::vector<TokenId>& tokens, std::size_t pos_offset) {
    const std::size_t d = model.config.d_model;
    if (pos_offset + tokens.size() > model.config.max_positions) {
        throw std::out_of_range("embed: positions " + std::to_string(pos_offset) + ".." +
                                std::to_string(pos_offset + tokens.size()) +
                                " overflow max_positions " +
                                std::to_string(model.config.max_positions));
    }
    Matrix out(tokens.size(), d);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const TokenId tok = tokens[i];
        if (tok >= model.config.vocab_size) {
            throw std::out_of_range("embed: unknown token id " + std::to_string(tok));
        }
        const double* e = model.embedding.row_ptr(tok);
        double* o = out.row_ptr(i);
        const double pos = static_cast<double>(pos_offset + i);
        for (std::size_t c = 0; c < d; ++c) {
            const std::size_t pair = c - (c % 2);
            const double freq = std::pow(10000.0, -static_cast<double>(pair) / static_cast<double>(d));
            const double angle = pos * freq;
            o[c] = e[c] + (c % 2 == 0 ? std::sin(angle) : std::cos(angle));
        }
    }
    return out;
}

Matrix layer_norm(const Matrix& x) {
    Matrix out(x.rows(), x.cols());
    const double n = static_cast<double>(x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double* xi = x.row_ptr(i);
        double mean = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) mean += xi[c];
        mean /= n;
        double var = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) {
            const double dx = xi[c] - mean;
            var += dx * dx;
        }
        var /= n;
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        double* oi = out.row_ptr(i);
        for (std::size_t c = 0; c < x.cols(); ++c) oi[c] = (xi[c] - mean) * inv;
    }
    return out;
}

LayerResult transformer_layer(const Model& model, std::size_t layer, const Matrix& hidden,
                              std::size_t pos_offset,
                              const std::vector<const KVSegment*>& visible) {
    if (layer >= model.layers.size()) throw std::out_of_range("transformer_layer: bad layer index");
    const LayerWeights& lw = model.layers[layer];
    const std::size_t d = model.config.d_model;
    const std::size_t dh = model.config.d_head();
    if (hidden.cols() != d) throw std::invalid_argument("transformer_layer: hidden width mismatch");

    const Matrix normed = layer_norm(hidden);
    const Matrix q = matmul(normed, lw.wq);
    const Matrix k = matmul(normed, lw.wk);
    const Matrix v = matmul(normed, lw.wv);

    Matrix attn(hidden.rows(), d);
    std::vector<PartialAttention> parts;
    for (std::size_t h = 0; h < model.config.n_heads; ++h) {
        const Matrix qh = q.col_slice(h * dh, dh);
        parts.clear();
        for (const KVSegment* seg : visible) {
            parts.push_back(partial_attention(qh, seg->k.col_slice(h * dh, dh),
                                              seg->v.col_slice(h * dh, dh),
                                              CausalSpan{pos_offset, seg->pos_offset}));
        }
        parts.push_back(partial_attention(qh, k.col_slice(h * dh, dh), v.col_slice(h * dh, dh),
                                          CausalSpan{pos_offset, pos_offset}));
        const Matrix head_out = fuse_partials(parts);
        for (std::size_t i = 0; i < head_out.rows(); ++i) {
            std::copy(head_out.row_ptr(i), head_out.row_ptr(i) + dh, attn.row_ptr(i) + h * dh);
        }
    }

    Matrix x(hidden.rows(), d);
    const Matrix proj = matmul(attn, lw.wo);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = hidden.data()[i] + proj.data()[i];

    const Matrix normed2 = layer_norm(x);
    Matrix h1 = matmul(normed2, lw.w1);
    for (std::size_t i = 0; i < h1.rows(); ++i) {
        double* r = h1.row_ptr(i);
        for (std::size_t c = 0; c < h1.cols(); ++c) {
            r[c] += lw.b1[c];
            if (r[c] < 0.0) r[c] = 0.0;
        }
    }
    Matrix h2 = matmul(h1, lw.w2);
    LayerResult res;
    res.hidden = Matrix(hidden.rows(), d);
    for (std::size_t i = 0; i < h2.rows(); ++i) {
        const double* xr = x.row_ptr(i);
        const double* hr = h2.row_ptr(i);
        double* out = res.hidden.row_ptr(i);
        for (std::size_t c = 0; c < d; ++c) out[c] = xr[c] + hr[c] + lw.b2[c];
    }
    res.k = k;
    res.v = v;
    return res;
}

PrefillResult prefill(const Model& model, const std::vector<TokenId>& tokens, SegmentOrigin origin,
                      std::size_t pos_offset, const SegmentedCache& visible_cache) {
    if (tokens.empty()) throw std::invalid_argument("prefill: empty token list");
    if (!visible_cache.empty() && visible_cache.n_layers() != model.config.n_layers) {
        throw std::invalid_argument("prefill: cache layer count mismatch");
    }
    if (visible_cache.end_position() != pos_offset) {
        throw std::invalid_argument("prefill: pos_offset " + std::to_string(pos_offset) +
                                    " does not match cache end " +
                                    std::to_string(visible_cache.end_position()));
    }
    PrefillResult res;
    Matrix hidden = embed(model, tokens, pos_offset);
    res.segments.reserve(model.config.n_layers);
    for (std::size_t l = 0; l < model.config.n_layers; ++l) {
        std::vector<const KVSegment*> visible;
        if (!visible_cache.empty()) {
            for (const KVSegment& seg : visible_cache.layer(l)) visible.push_back(&seg);
        }
        LayerResult lr = transformer_layer(model, l, hidden, pos_offset, visible);
        hidden = std::move(lr.hidden);
        res.segments.push_back(KVSegment{l, origin, pos_offset, std::move(lr.k), std::move(lr.v)});
    }
    res.hidden = std::move(hidden);
    return res;
}

std::vector<double> unembed_logits(const Model& model, std::span<const double> hidden_row) {
    if (hidden_row.size() != model.config.d_model) {
        throw std::invalid_argument("unembed_logits: hidden width mismatch");
    }
    Matrix row(1, model.config.d_model);
    std::copy(hidden_row.begin(), hidden_row.end(), row.row_ptr(0));
    const Matrix logits = matmul(layer_norm(row), model.unembed);
    return {logits.row_ptr(0), logits.row_ptr(0) + logits.cols()};
}

TokenId argmax_token(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("argmax_token: empty logits");
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i) {
        if (logits[i] > logits[best]) best = i; // strict: ties keep the lowest id
    }
    return static_cast<TokenId>(best);
}

DecodeResult decode_step(const Model& model, SegmentedCache& cache, TokenId last_token) {
    if (cache.empty()) throw std::invalid_argument("decode_step: empty cache");
    if (cache.n_layers() != model.config.n_layers) {
        throw std::invalid_argument("decode_step: cache has " + std::to_string(cache.n_layers()) +
                                    " layers, model has " + std::to_string(model.config.n_layers));
    }
    const std::string issue = cache.check_consistent();
    if (!issue.empty()) throw std::invalid_argument("decode_step: inconsistent cache: " + issue);

    const std::size_t pos = cache.end_position();
    Matrix hidden = embed(model, {last_token}, pos);
    std::vector<std::pair<Matrix, Matrix>> new_kv;
    new_kv.reserve(model.config.n_layers);
    for (std::size_t l = 0; l < model.config.n_layers; ++l) {
        std::vector<const KVSegment*> visible;
        for (const KVSegment& seg : cache.layer(l)) visible.push_back(&seg);
        LayerResult lr = transformer_layer(model, l, hidden, pos, visible);
        hidden = std::move(lr.hidden);
        new_kv.emplace_back(std::move(lr.k), std::move(lr.v));
    }
    cache.append_generated_token(new_kv);

    DecodeResult res;
    res.logits = unembed_logits(model, hidden.row(0));
    res.next_token = argmax_token(res.logits);
    return res;
}

std::vector<TokenId> decode_greedy(const Model& model, SegmentedCache& cache,
                                   const Matrix& prefill_hidden, std::size_t n_steps) {
    std::vector<TokenId> out;
    if (n_steps == 0) return out;
    out.reserve(n_steps);
    const std::vector<double> logits =
        unembed_logits(model, prefill_hidden.row(prefill_hidden.rows() - 1));
    out.push_back(argmax_token(logits));
    while (out.size() < n_steps) {
        out.push_back(decode_step(model, cache, out.back()).next_token);
    }
    return out;
}

std::vector<TokenId> generate_monolithic(const Model& model, const std::vector<TokenId>& prompt,
                                         std::size_t n_steps) {
    SegmentedCache cache(model.config.n_layers);
    PrefillResult pf = prefill(model, prompt, SegmentOrigin::edge, 0, cache);
    cache.append(std::move(pf.segments));
    return decode_greedy(model, cache, pf.hidden, n_steps);
}

std::vector<TokenId> generate_split(const Model& model, const std::vector<TokenId>& cloud_prompt,
                                    const std::vector<TokenId>& edge_prompt, std::size_t n_steps) {
    SegmentedCache cache(model.config.n_layers);
    PrefillResult cloud = prefill(model, cloud_prompt, SegmentOrigin::cloud, 0, cache);
    cache.append(std::move(cloud.segments));
    PrefillResult edge =
        prefill(model, edge_prompt, SegmentOrigin::edge, cloud_prompt.size(), cache);
    cache.append(std::move(edge.segments));
    return decode_greedy(model, cache, edge.hidden, n_steps);
}

} // namespace edgeprompt
