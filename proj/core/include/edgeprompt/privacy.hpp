#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edgeprompt/model.hpp"
#include "edgeprompt/net.hpp"

namespace edgeprompt {

struct PrivacyViolation {
    std::string kind;    // what leaked, e.g. "edge token id sequence"
    net::Direction dir;  // which way the bytes travelled
    std::size_t offset;  // byte offset in that direction's stream
};

struct PrivacyReport {
    bool no_traffic = false;
    std::vector<PrivacyViolation> violations;

    bool clean() const { return violations.empty(); }
    std::string to_string() const;
};

/// Little-endian byte image of a double sequence, for building sentinel
/// patterns from KV rows.
std::vector<std::uint8_t> le_bytes(std::span<const double> values);

/// Little-endian byte image of a token id sequence (u32 each).
std::vector<std::uint8_t> le_bytes(std::span<const TokenId> tokens);

/// Byte-level scan of a captured session. Each wire direction is
/// checked, as one contiguous stream, for the edge prompt's token ids
/// (consecutive little-endian u32 values) and for every sentinel KV
/// byte pattern. Report-only; an empty capture is flagged no_traffic.
PrivacyReport privacy_audit(const std::vector<net::CaptureRecord>& capture,
                            const std::vector<TokenId>& edge_tokens,
                            const std::vector<std::vector<std::uint8_t>>& edge_kv_sentinels);

} // namespace edgeprompt
