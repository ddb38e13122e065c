#include "edgeprompt/net.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstdio>
#include <cstring>
#include <deque>
#include <mutex>
#include <utility>

namespace edgeprompt::net {

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
    throw TransportError(what + ": " + std::strerror(errno));
}

sockaddr_in make_addr(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        throw TransportError("not an IPv4 address: " + host);
    }
    return addr;
}

} // namespace

wire::Message read_frame(Stream& s) {
    wire::Message m;
    if (!try_read_frame(s, m)) {
        throw TransportError("connection closed while a frame was expected");
    }
    return m;
}

bool try_read_frame(Stream& s, wire::Message& out) {
    std::uint8_t header[wire::kHeaderSize];
    if (!s.try_read_exact(header)) return false;
    const wire::FrameHeader h = wire::decode_header(header);
    std::vector<std::uint8_t> payload(h.payload_len);
    if (h.payload_len > 0) s.read_exact(payload);
    out = wire::decode_payload(h.type, payload);
    return true;
}

void write_frame(Stream& s, const wire::Message& m) {
    s.write_all(wire::encode_frame(m));
}

TcpStream::TcpStream(int fd) : fd_(fd) {}

TcpStream::~TcpStream() { close(); }

TcpStream::TcpStream(TcpStream&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}

TcpStream& TcpStream::operator=(TcpStream&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
}

void TcpStream::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void TcpStream::write_all(std::span<const std::uint8_t> bytes) {
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw_errno("send failed");
        }
        sent += static_cast<std::size_t>(n);
    }
}

void TcpStream::read_exact(std::span<std::uint8_t> out) {
    if (!try_read_exact(out)) {
        throw TransportError("connection closed mid-read");
    }
}

bool TcpStream::try_read_exact(std::span<std::uint8_t> out) {
    std::size_t got = 0;
    while (got < out.size()) {
        const ssize_t n = ::recv(fd_, out.data() + got, out.size() - got, 0);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw_errno("recv failed");
        }
        if (n == 0) {
            if (got == 0) return false;
            throw TransportError("connection closed mid-read");
        }
        got += static_cast<std::size_t>(n);
    }
    return true;
}

void TcpStream::set_recv_timeout(double seconds) {
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(seconds);
    tv.tv_usec = static_cast<suseconds_t>((seconds - static_cast<double>(tv.tv_sec)) * 1e6);
    if (::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv)) != 0) {
        throw_errno("setsockopt(SO_RCVTIMEO) failed");
    }
}

TcpStream tcp_connect(const std::string& host, std::uint16_t port) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw_errno("socket failed");
    TcpStream s(fd);
    const sockaddr_in addr = make_addr(host, port);
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
        throw_errno("connect to " + host + ":" + std::to_string(port) + " failed");
    }
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return s;
}

TcpListener::TcpListener(const std::string& host, std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw_errno("socket failed");
    const int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr = make_addr(host, port);
    if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
        const int saved = errno;
        ::close(fd_);
        fd_ = -1;
        errno = saved;
        throw_errno("bind to " + host + ":" + std::to_string(port) + " failed");
    }
    if (::listen(fd_, 64) != 0) {
        const int saved = errno;
        ::close(fd_);
        fd_ = -1;
        errno = saved;
        throw_errno("listen failed");
    }
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len) != 0) {
        throw_errno("getsockname failed");
    }
    port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() { close(); }

void TcpListener::close() {
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
        fd_ = -1;
    }
}

TcpStream TcpListener::accept() {
    const int listen_fd = fd_;
    if (listen_fd < 0) throw TransportError("listener is closed");
    const int fd = ::accept(listen_fd, nullptr, nullptr);
    if (fd < 0) throw_errno("accept failed");
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return TcpStream(fd);
}

void CaptureStream::write_all(std::span<const std::uint8_t> bytes) {
    inner_.write_all(bytes);
    records_.push_back(CaptureRecord{Direction::edge_to_cloud, {bytes.begin(), bytes.end()}});
}

void CaptureStream::read_exact(std::span<std::uint8_t> out) {
    inner_.read_exact(out);
    records_.push_back(CaptureRecord{Direction::cloud_to_edge, {out.begin(), out.end()}});
}

bool CaptureStream::try_read_exact(std::span<std::uint8_t> out) {
    if (!inner_.try_read_exact(out)) return false;
    records_.push_back(CaptureRecord{Direction::cloud_to_edge, {out.begin(), out.end()}});
    return true;
}

struct PipeStream::Channel {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::uint8_t> bytes;
    bool closed = false;
};

std::pair<std::shared_ptr<PipeStream>, std::shared_ptr<PipeStream>> make_stream_pair() {
    auto a_to_b = std::make_shared<PipeStream::Channel>();
    auto b_to_a = std::make_shared<PipeStream::Channel>();
    auto a = std::make_shared<PipeStream>();
    auto b = std::make_shared<PipeStream>();
    a->write_to_ = a_to_b;
    a->read_from_ = b_to_a;
    b->write_to_ = b_to_a;
    b->read_from_ = a_to_b;
    return {a, b};
}

PipeStream::~PipeStream() { close_write(); }

void PipeStream::close_write() {
    if (!write_to_) return;
    {
        std::lock_guard lk(write_to_->mu);
        write_to_->closed = true;
    }
    write_to_->cv.notify_all();
}

void PipeStream::write_all(std::span<const std::uint8_t> bytes) {
    {
        std::lock_guard lk(write_to_->mu);
        if (write_to_->closed) throw TransportError("pipe write side already closed");
        write_to_->bytes.insert(write_to_->bytes.end(), bytes.begin(), bytes.end());
    }
    write_to_->cv.notify_all();
}

void PipeStream::read_exact(std::span<std::uint8_t> out) {
    if (!try_read_exact(out)) throw TransportError("pipe closed mid-read");
}

bool PipeStream::try_read_exact(std::span<std::uint8_t> out) {
    std::unique_lock lk(read_from_->mu);
    std::size_t got = 0;
    while (got < out.size()) {
        read_from_->cv.wait(lk, [&] { return !read_from_->bytes.empty() || read_from_->closed; });
        while (got < out.size() && !read_from_->bytes.empty()) {
            out[got++] = read_from_->bytes.front();
            read_from_->bytes.pop_front();
        }
        if (got < out.size() && read_from_->closed && read_from_->bytes.empty()) {
            if (got == 0) return false;
            throw TransportError("pipe closed mid-read");
        }
    }
    return true;
}

namespace {
constexpr char kCaptureMagic[5] = {'E', 'P', 'C', 'A', 'P'};
constexpr std::uint8_t kCaptureVersion = 0x01;
} // namespace

void write_capture_file(const std::string& path, const std::vector<CaptureRecord>& records) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw TransportError("cannot open capture file for writing: " + path);
    std::fwrite(kCaptureMagic, 1, sizeof(kCaptureMagic), f);
    std::fputc(kCaptureVersion, f);
    for (const CaptureRecord& r : records) {
        std::fputc(static_cast<int>(r.dir), f);
        const std::uint32_t len = static_cast<std::uint32_t>(r.bytes.size());
        std::uint8_t lenb[4];
        for (int i = 0; i < 4; ++i) lenb[i] = static_cast<std::uint8_t>((len >> (8 * i)) & 0xFF);
        std::fwrite(lenb, 1, 4, f);
        if (!r.bytes.empty()) std::fwrite(r.bytes.data(), 1, r.bytes.size(), f);
    }
    if (std::fclose(f) != 0) throw TransportError("error closing capture file: " + path);
}

std::vector<CaptureRecord> read_capture_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw TransportError("cannot open capture file: " + path);
    std::vector<CaptureRecord> records;
    try {
        char magic[5];
        std::uint8_t version = 0;
        if (std::fread(magic, 1, 5, f) != 5 || std::memcmp(magic, kCaptureMagic, 5) != 0) {
            throw TransportError("not a capture file: " + path);
        }
        if (std::fread(&version, 1, 1, f) != 1 || version != kCaptureVersion) {
            throw TransportError("unsupported capture version in " + path);
        }
        for (;;) {
            int dir = std::fgetc(f);
            if (dir == EOF) break;
            if (dir != 0 && dir != 1) throw TransportError("bad direction tag in " + path);
            std::uint8_t lenb[4];
            if (std::fread(lenb, 1, 4, f) != 4) {
                throw TransportError("truncated capture record in " + path);
            }
            std::uint32_t len = 0;
            for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(lenb[i]) << (8 * i);
            CaptureRecord rec;
            rec.dir = static_cast<Direction>(dir);
            rec.bytes.resize(len);
            if (len > 0 && std::fread(rec.bytes.data(), 1, len, f) != len) {
                throw TransportError("truncated capture record in " + path);
            }
            records.push_back(std::move(rec));
        }
    } catch (...) {
        std::fclose(f);
        throw;
    }
    std::fclose(f);
    return records;
}

} // namespace edgeprompt::net
