#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace edgeprompt::wire {

/// Frame layout: magic "EPKV" (4 bytes), version (1 byte), msg_type
/// (1 byte), payload_len (u32 little-endian), then payload_len payload
/// bytes. All multi-byte integers on the wire are little-endian.
inline constexpr std::array<std::uint8_t, 4> kMagic = {'E', 'P', 'K', 'V'};
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::size_t kHeaderSize = 10;

/// Upper bound accepted for payload_len. Large enough for any KV frame
/// this engine can produce, small enough to reject corrupt headers
/// before allocating.
inline constexpr std::uint32_t kMaxPayload = 1u << 30;

enum class MsgType : std::uint8_t {
    session_init = 0,
    ack = 1,
    kv_frame = 2,
    end_of_prefill = 3,
    error = 4,
};

/// Error-frame codes carried by ErrorMsg.
enum class ErrorCode : std::uint32_t {
    unknown_prompt = 1,
    fingerprint_mismatch = 2,
    protocol = 3,
};

/// Client hello. edge_prompt_len carries only the length of the edge
/// prompt (needed for position bookkeeping), never its content.
struct SessionInit {
    std::uint32_t session_id = 0;
    std::uint32_t cloud_prompt_id = 0;
    std::array<std::uint8_t, 8> model_fingerprint{};
    std::uint32_t edge_prompt_len = 0;

    bool operator==(const SessionInit&) const = default;
};

/// Client acknowledgment of one received KV frame.
struct Ack {
    std::uint32_t session_id = 0;
    std::uint16_t layer = 0;

    bool operator==(const Ack&) const = default;
};

/// One layer's cloud-prompt KV pair. k_data and v_data each hold
/// seq_len x (n_heads x d_head) doubles, row-major.
struct KVFrame {
    std::uint32_t session_id = 0;
    std::uint16_t layer = 0;
    std::uint32_t seq_len = 0;
    std::uint16_t n_heads = 0;
    std::uint16_t d_head = 0;
    std::vector<double> k_data;
    std::vector<double> v_data;

    bool operator==(const KVFrame&) const = default;

    std::size_t values_per_matrix() const {
        return static_cast<std::size_t>(seq_len) * n_heads * d_head;
    }
};

struct EndOfPrefill {
    bool operator==(const EndOfPrefill&) const = default;
};

struct ErrorMsg {
    std::uint32_t code = 0;
    std::string message;

    bool operator==(const ErrorMsg&) const = default;
};

using Message = std::variant<SessionInit, Ack, KVFrame, EndOfPrefill, ErrorMsg>;

MsgType message_type(const Message& m);

/// Thrown on any malformed frame. `kind` names the failure class.
class WireError : public std::runtime_error {
public:
    enum class Kind { bad_magic, bad_version, truncated, length_overflow, malformed };

    WireError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Serializes a message into one complete frame.
std::vector<std::uint8_t> encode_frame(const Message& m);

/// Parses one complete frame. Rejects bad magic or version before
/// touching the payload; the buffer must contain exactly one frame.
Message decode_frame(std::span<const std::uint8_t> frame);

struct FrameHeader {
    MsgType type;
    std::uint32_t payload_len;
};

/// Validates the fixed 10-byte prefix and returns type plus payload
/// length, for stream readers that fetch the payload separately.
FrameHeader decode_header(std::span<const std::uint8_t> header);

/// Parses a payload whose header has already been consumed.
Message decode_payload(MsgType type, std::span<const std::uint8_t> payload);

} // namespace edgeprompt::wire
