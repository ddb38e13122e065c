#include "edgeprompt/wire.hpp"

#include <bit>
#include <cstring>

namespace edgeprompt::wire {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xFF));
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> buf) : buf_(buf) {}

    std::size_t remaining() const { return buf_.size() - pos_; }

    std::uint8_t u8() { return take(1)[0]; }

    std::uint16_t u16() {
        const auto b = take(2);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }

    std::uint32_t u32() {
        const auto b = take(4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }

    double f64() {
        const auto b = take(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return std::bit_cast<double>(bits);
    }

    std::span<const std::uint8_t> take(std::size_t n) {
        if (remaining() < n) {
            throw WireError(WireError::Kind::truncated,
                            "frame payload truncated: wanted " + std::to_string(n) +
                                " more bytes, have " + std::to_string(remaining()));
        }
        auto s = buf_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

private:
    std::span<const std::uint8_t> buf_;
    std::size_t pos_ = 0;
};

} // namespace

MsgType message_type(const Message& m) {
    return static_cast<MsgType>(m.index());
}

std::vector<std::uint8_t> encode_frame(const Message& m) {
    std::vector<std::uint8_t> payload;
    std::visit(
        [&payload](const auto& msg) {
            using T = std::decay_t<decltype(msg)>;
            if constexpr (std::is_same_v<T, SessionInit>) {
                put_u32(payload, msg.session_id);
                put_u32(payload, msg.cloud_prompt_id);
                payload.insert(payload.end(), msg.model_fingerprint.begin(),
                               msg.model_fingerprint.end());
                put_u32(payload, msg.edge_prompt_len);
            } else if constexpr (std::is_same_v<T, Ack>) {
                put_u32(payload, msg.session_id);
                put_u16(payload, msg.layer);
            } else if constexpr (std::is_same_v<T, KVFrame>) {
                if (msg.k_data.size() != msg.values_per_matrix() ||
                    msg.v_data.size() != msg.values_per_matrix()) {
                    throw WireError(WireError::Kind::malformed,
                                    "kv frame data size does not match declared shape");
                }
                put_u32(payload, msg.session_id);
                put_u16(payload, msg.layer);
                put_u32(payload, msg.seq_len);
                put_u16(payload, msg.n_heads);
                put_u16(payload, msg.d_head);
                payload.reserve(payload.size() + 16 * msg.values_per_matrix());
                for (double v : msg.k_data) put_f64(payload, v);
                for (double v : msg.v_data) put_f64(payload, v);
            } else if constexpr (std::is_same_v<T, EndOfPrefill>) {
                // empty payload
            } else if constexpr (std::is_same_v<T, ErrorMsg>) {
                put_u32(payload, msg.code);
                payload.insert(payload.end(), msg.message.begin(), msg.message.end());
            }
        },
        m);

    if (payload.size() > kMaxPayload) {
        throw WireError(WireError::Kind::length_overflow,
                        "payload size " + std::to_string(payload.size()) + " exceeds limit");
    }

    std::vector<std::uint8_t> frame;
    frame.reserve(kHeaderSize + payload.size());
    frame.insert(frame.end(), kMagic.begin(), kMagic.end());
    frame.push_back(kVersion);
    frame.push_back(static_cast<std::uint8_t>(message_type(m)));
    put_u32(frame, static_cast<std::uint32_t>(payload.size()));
    frame.insert(frame.end(), payload.begin(), payload.end());
    return frame;
}

FrameHeader decode_header(std::span<const std::uint8_t> header) {
    if (header.size() < kHeaderSize) {
        throw WireError(WireError::Kind::truncated, "frame header shorter than 10 bytes");
    }
    if (!std::equal(kMagic.begin(), kMagic.end(), header.begin())) {
        throw WireError(WireError::Kind::bad_magic, "frame magic is not EPKV");
    }
    if (header[4] != kVersion) {
        throw WireError(WireError::Kind::bad_version,
                        "unsupported protocol version " + std::to_string(header[4]));
    }
    const std::uint8_t type = header[5];
    if (type > static_cast<std::uint8_t>(MsgType::error)) {
        throw WireError(WireError::Kind::malformed,
                        "unknown message type " + std::to_string(type));
    }
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(header[6 + i]) << (8 * i);
    if (len > kMaxPayload) {
        throw WireError(WireError::Kind::length_overflow,
                        "declared payload length " + std::to_string(len) + " exceeds limit");
    }
    return FrameHeader{static_cast<MsgType>(type), len};
}

Message decode_payload(MsgType type, std::span<const std::uint8_t> payload) {
    Reader r(payload);
    switch (type) {
    case MsgType::session_init: {
        SessionInit m;
        m.session_id = r.u32();
        m.cloud_prompt_id = r.u32();
        const auto fp = r.take(8);
        std::copy(fp.begin(), fp.end(), m.model_fingerprint.begin());
        m.edge_prompt_len = r.u32();
        if (r.remaining() != 0) {
            throw WireError(WireError::Kind::malformed, "session init payload has trailing bytes");
        }
        return m;
    }
    case MsgType::ack: {
        Ack m;
        m.session_id = r.u32();
        m.layer = r.u16();
        if (r.remaining() != 0) {
            throw WireError(WireError::Kind::malformed, "ack payload has trailing bytes");
        }
        return m;
    }
    case MsgType::kv_frame: {
        KVFrame m;
        m.session_id = r.u32();
        m.layer = r.u16();
        m.seq_len = r.u32();
        m.n_heads = r.u16();
        m.d_head = r.u16();
        const std::size_t n = m.values_per_matrix();
        if (r.remaining() != 16 * n) {
            throw WireError(WireError::Kind::malformed,
                            "kv frame payload length " + std::to_string(payload.size()) +
                                " does not match shape (expected " + std::to_string(14 + 16 * n) +
                                ")");
        }
        m.k_data.resize(n);
        m.v_data.resize(n);
        for (double& v : m.k_data) v = r.f64();
        for (double& v : m.v_data) v = r.f64();
        return m;
    }
    case MsgType::end_of_prefill: {
        if (r.remaining() != 0) {
            throw WireError(WireError::Kind::malformed, "end-of-prefill payload must be empty");
        }
        return EndOfPrefill{};
    }
    case MsgType::error: {
        ErrorMsg m;
        m.code = r.u32();
        const auto rest = r.take(r.remaining());
        m.message.assign(rest.begin(), rest.end());
        return m;
    }
    }
    throw WireError(WireError::Kind::malformed, "unreachable message type");
}

Message decode_frame(std::span<const std::uint8_t> frame) {
    const FrameHeader h = decode_header(frame);
    if (frame.size() != kHeaderSize + h.payload_len) {
        throw WireError(WireError::Kind::truncated,
                        "frame buffer holds " + std::to_string(frame.size()) +
                            " bytes, header declares " +
                            std::to_string(kHeaderSize + h.payload_len));
    }
    return decode_payload(h.type, frame.subspan(kHeaderSize));
}

} // namespace edgeprompt::wire
