#include "edgeprompt/privacy.hpp"

#include <algorithm>
#include <bit>

namespace edgeprompt {

std::vector<std::uint8_t> le_bytes(std::span<const double> values) {
    std::vector<std::uint8_t> out;
    out.reserve(values.size() * 8);
    for (double v : values) {
        const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xFF));
    }
    return out;
}

std::vector<std::uint8_t> le_bytes(std::span<const TokenId> tokens) {
    std::vector<std::uint8_t> out;
    out.reserve(tokens.size() * 4);
    for (TokenId t : tokens) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((t >> (8 * i)) & 0xFF));
    }
    return out;
}

std::string PrivacyReport::to_string() const {
    std::string out;
    if (no_traffic) out += "no traffic captured\n";
    if (violations.empty()) {
        out += "no violations\n";
        return out;
    }
    for (const PrivacyViolation& v : violations) {
        out += "violation: " + v.kind + " in " +
               (v.dir == net::Direction::edge_to_cloud ? "edge->cloud" : "cloud->edge") +
               " stream at byte " + std::to_string(v.offset) + "\n";
    }
    return out;
}

namespace {

void scan(const std::vector<std::uint8_t>& stream, net::Direction dir,
          const std::vector<std::uint8_t>& pattern, const std::string& kind,
          std::vector<PrivacyViolation>& out) {
    if (pattern.empty() || stream.size() < pattern.size()) return;
    auto it = stream.begin();
    for (;;) {
        it = std::search(it, stream.end(), pattern.begin(), pattern.end());
        if (it == stream.end()) break;
        out.push_back(PrivacyViolation{kind, dir, std::size_t(it - stream.begin())});
        ++it;
    }
}

} // namespace

PrivacyReport privacy_audit(const std::vector<net::CaptureRecord>& capture,
                            const std::vector<TokenId>& edge_tokens,
                            const std::vector<std::vector<std::uint8_t>>& edge_kv_sentinels) {
    PrivacyReport report;
    if (capture.empty()) {
        report.no_traffic = true;
        return report;
    }

    // Records are direction-tagged slices of two byte streams; glue
    // them back together so patterns spanning record boundaries are
    // still found.
    std::vector<std::uint8_t> streams[2];
    for (const net::CaptureRecord& rec : capture) {
        auto& s = streams[static_cast<std::size_t>(rec.dir)];
        s.insert(s.end(), rec.bytes.begin(), rec.bytes.end());
    }
    if (streams[0].empty() && streams[1].empty()) {
        report.no_traffic = true;
        return report;
    }

    const std::vector<std::uint8_t> token_pattern = le_bytes(std::span<const TokenId>(edge_tokens));
    for (const net::Direction dir : {net::Direction::edge_to_cloud, net::Direction::cloud_to_edge}) {
        const auto& stream = streams[static_cast<std::size_t>(dir)];
        scan(stream, dir, token_pattern, "edge token id sequence", report.violations);
        for (std::size_t i = 0; i < edge_kv_sentinels.size(); ++i) {
            scan(stream, dir, edge_kv_sentinels[i], "sentinel kv pattern " + std::to_string(i),
                 report.violations);
        }
    }
    return report;
}

} // namespace edgeprompt
