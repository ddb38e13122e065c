#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "edgeprompt/attention.hpp"
#include "edgeprompt/cache.hpp"
#include "edgeprompt/matrix.hpp"

namespace edgeprompt {

using TokenId = std::uint32_t;

struct ModelConfig {
    std::size_t n_layers = 2;
    std::size_t n_heads = 2;
    std::size_t d_model = 8;
    std::size_t vocab_size = 32;
    std::size_t max_positions = 512;
    std::uint64_t init_seed = 1;

    std::size_t d_head() const { return d_model / n_heads; }
    void validate() const; // throws std::invalid_argument
};

struct LayerWeights {
    Matrix wq, wk, wv, wo; // d_model x d_model
    Matrix w1;             // d_model x 4*d_model
    std::vector<double> b1;
    Matrix w2; // 4*d_model x d_model
    std::vector<double> b2;
};

/// Decoder-only transformer with deterministic weights. Immutable after
/// init_model and shareable across threads.
///
/// Block structure (pre-norm): x += MHA(LN(x)); x += MLP(LN(x)) with a
/// ReLU D -> 4D -> D MLP, parameterless LayerNorm (eps 1e-5), sinusoidal
/// absolute positions added at the embedding, untied unembedding.
struct Model {
    ModelConfig config;
    Matrix embedding; // vocab x d_model
    std::vector<LayerWeights> layers;
    Matrix unembed; // d_model x vocab

    /// Sum of every weight entry, in generation order. Cheap identity
    /// check for goldens.
    double weight_sum() const;

    /// 8-byte config fingerprint carried in the session handshake; two
    /// endpoints with equal fingerprints generate identical weights.
    std::array<std::uint8_t, 8> fingerprint() const;
};

/// Generates all weights from a single splitmix64 stream seeded with
/// config.init_seed, uniform in [-0.1, 0.1], in this order: embedding,
/// then per layer wq, wk, wv, wo, w1, b1, w2, b2 (row-major), then the
/// unembedding. Same config, same weights.
Model init_model(const ModelConfig& config);

/// Token embedding rows plus sinusoidal position encoding for absolute
/// positions pos_offset, pos_offset+1, ... Throws on unknown token ids
/// and on position overflow past max_positions.
Matrix embed(const Model& model, const std::vector<TokenId>& tokens, std::size_t pos_offset);

/// Parameterless LayerNorm over each row.
Matrix layer_norm(const Matrix& x);

struct LayerResult {
    Matrix hidden; // layer output, n x d_model
    Matrix k;      // new tokens' keys, n x d_model
    Matrix v;      // new tokens' values, n x d_model
};

/// One decoder layer over `hidden` (the new tokens, absolute positions
/// starting at pos_offset), attending over `visible` cached segments of
/// this layer plus the new tokens themselves. Attention runs per head as
/// one partial per segment recombined exactly.
LayerResult transformer_layer(const Model& model, std::size_t layer, const Matrix& hidden,
                              std::size_t pos_offset,
                              const std::vector<const KVSegment*>& visible);

struct PrefillResult {
    Matrix hidden;                  // final-layer hidden states, n x d_model
    std::vector<KVSegment> segments; // one per layer; caller appends to the cache
};

/// Prompt-phase pass over `tokens`. pos_offset must equal the visible
/// cache's end position; the returned segments are NOT appended here.
PrefillResult prefill(const Model& model, const std::vector<TokenId>& tokens,
                      SegmentOrigin origin, std::size_t pos_offset,
                      const SegmentedCache& visible_cache);

/// Final LayerNorm + unembedding of one hidden row.
std::vector<double> unembed_logits(const Model& model, std::span<const double> hidden_row);

/// Greedy pick; ties break toward the lowest token id.
TokenId argmax_token(std::span<const double> logits);

struct DecodeResult {
    TokenId next_token = 0;
    std::vector<double> logits;
};

/// One auto-regressive step: embeds last_token at the cache end, runs
/// all layers against the cache, appends the token's K,V to the
/// `generated` segment of every layer, and returns the greedy next
/// token with its logits.
DecodeResult decode_step(const Model& model, SegmentedCache& cache, TokenId last_token);

/// Convenience harness: prefill `prompt` into an empty cache (origin
/// edge) and decode n_steps tokens greedily. The reference monolithic
/// execution path.
std::vector<TokenId> generate_monolithic(const Model& model, const std::vector<TokenId>& prompt,
                                         std::size_t n_steps);

/// Split execution in process: cloud prefill, edge prefill against the
/// cloud KV, then decode on the edge-side cache. Token-for-token
/// equivalent to generate_monolithic(cloud + edge).
std::vector<TokenId> generate_split(const Model& model, const std::vector<TokenId>& cloud_prompt,
                                    const std::vector<TokenId>& edge_prompt, std::size_t n_steps);

/// Decodes n_steps tokens from an already prefilled cache, starting
/// from the logits of the last prefilled token's hidden row.
std::vector<TokenId> decode_greedy(const Model& model, SegmentedCache& cache,
                                   const Matrix& prefill_hidden, std::size_t n_steps);

} // namespace edgeprompt
