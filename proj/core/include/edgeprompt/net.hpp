#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgeprompt/wire.hpp"

namespace edgeprompt::net {

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reliable ordered byte stream, the transport the protocol assumes.
class Stream {
public:
    virtual ~Stream() = default;

    virtual void write_all(std::span<const std::uint8_t> bytes) = 0;

    /// Fills `out` completely; throws TransportError on error or on EOF
    /// before `out` is full.
    virtual void read_exact(std::span<std::uint8_t> out) = 0;

    /// Like read_exact but a clean EOF before the first byte returns
    /// false instead of throwing, for peers that close after the last
    /// frame.
    virtual bool try_read_exact(std::span<std::uint8_t> out) = 0;
};

/// Reads one complete frame (header then payload) from the stream.
wire::Message read_frame(Stream& s);

/// Returns false on clean EOF at a frame boundary.
bool try_read_frame(Stream& s, wire::Message& out);

void write_frame(Stream& s, const wire::Message& m);

class TcpStream final : public Stream {
public:
    explicit TcpStream(int fd);
    ~TcpStream() override;

    TcpStream(TcpStream&& other) noexcept;
    TcpStream& operator=(TcpStream&& other) noexcept;
    TcpStream(const TcpStream&) = delete;
    TcpStream& operator=(const TcpStream&) = delete;

    void write_all(std::span<const std::uint8_t> bytes) override;
    void read_exact(std::span<std::uint8_t> out) override;
    bool try_read_exact(std::span<std::uint8_t> out) override;

    /// Receive timeout; 0 disables. Guards server threads against
    /// clients that stop talking.
    void set_recv_timeout(double seconds);

    int fd() const { return fd_; }
    void close();

private:
    int fd_ = -1;
};

TcpStream tcp_connect(const std::string& host, std::uint16_t port);

class TcpListener {
public:
    /// Binds and listens; port 0 picks an ephemeral port (see port()).
    TcpListener(const std::string& host, std::uint16_t port);
    ~TcpListener();

    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    std::uint16_t port() const { return port_; }

    /// Blocks for the next connection. Throws TransportError once the
    /// listener has been closed.
    TcpStream accept();

    void close();

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

/// Which way bytes travelled, from the edge client's point of view.
enum class Direction : std::uint8_t {
    edge_to_cloud = 0,
    cloud_to_edge = 1,
};

struct CaptureRecord {
    Direction dir;
    std::vector<std::uint8_t> bytes;
};

/// Decorator that records every byte crossing the wrapped stream,
/// tagged by direction. Used by the privacy audit.
class CaptureStream final : public Stream {
public:
    explicit CaptureStream(Stream& inner) : inner_(inner) {}

    void write_all(std::span<const std::uint8_t> bytes) override;
    void read_exact(std::span<std::uint8_t> out) override;
    bool try_read_exact(std::span<std::uint8_t> out) override;

    const std::vector<CaptureRecord>& records() const { return records_; }
    std::vector<CaptureRecord> take_records() { return std::move(records_); }

private:
    Stream& inner_;
    std::vector<CaptureRecord> records_;
};

/// In-memory pipe endpoint for tests: what one side writes, the peer
/// reads. Create with make_stream_pair.
class PipeStream;

std::pair<std::shared_ptr<PipeStream>, std::shared_ptr<PipeStream>> make_stream_pair();

class PipeStream final : public Stream {
public:
    void write_all(std::span<const std::uint8_t> bytes) override;
    void read_exact(std::span<std::uint8_t> out) override;
    bool try_read_exact(std::span<std::uint8_t> out) override;

    /// Signals EOF to the peer's reads.
    void close_write();

    ~PipeStream() override;

private:
    friend std::pair<std::shared_ptr<PipeStream>, std::shared_ptr<PipeStream>> make_stream_pair();
    struct Channel;
    std::shared_ptr<Channel> read_from_;
    std::shared_ptr<Channel> write_to_;
};

/// Capture container file: magic "EPCAP", version byte 0x01, then
/// records of (direction u8, length u32 little-endian, bytes).
void write_capture_file(const std::string& path, const std::vector<CaptureRecord>& records);
std::vector<CaptureRecord> read_capture_file(const std::string& path);

} // namespace edgeprompt::net
