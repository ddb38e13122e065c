#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgeprompt/model.hpp"
#include "edgeprompt/net.hpp"
#include "edgeprompt/pipeline.hpp"

namespace edgeprompt {

/// Session failure on the edge side. Sessions are never resumable; a
/// failed session restarts from SessionInit.
class EdgeError : public std::runtime_error {
public:
    EdgeError(std::string what, std::optional<wire::ErrorCode> server_code = std::nullopt)
        : std::runtime_error(std::move(what)), server_code_(server_code) {}

    bool resumable() const { return false; }
    std::optional<wire::ErrorCode> server_code() const { return server_code_; }

private:
    std::optional<wire::ErrorCode> server_code_;
};

enum class EdgeMode {
    /// One thread: read frame, ack, compute, repeat. The reference
    /// ordering other modes must reproduce token for token.
    sequential,
    /// A reader thread receives and acks frames while the main thread
    /// computes layers as their inputs become available.
    overlapped,
};

struct EdgeOptions {
    EdgeMode mode = EdgeMode::sequential;
    std::uint32_t session_id = 1;
    std::uint32_t cloud_prompt_id = 0;
};

struct EdgeResult {
    std::vector<TokenId> tokens;
    SessionTimings timings;
    std::size_t cloud_len = 0;
};

/// Runs one full session against a cloud peer on `stream`: handshake,
/// per-layer KV reception interleaved with edge-prompt prefill (layer l
/// computes only after its frame arrived and layer l-1 finished), then
/// local greedy decode for n_decode_steps tokens.
EdgeResult edge_run(const Model& model, net::Stream& stream,
                    const std::vector<TokenId>& edge_tokens, std::size_t n_decode_steps,
                    const EdgeOptions& options);

/// Convenience wrapper: connects over TCP, optionally captures the raw
/// wire bytes to `capture_path` for auditing.
EdgeResult edge_run_tcp(const Model& model, const std::string& host, std::uint16_t port,
                        const std::vector<TokenId>& edge_tokens, std::size_t n_decode_steps,
                        const EdgeOptions& options, const std::string& capture_path = "");

} // namespace edgeprompt
