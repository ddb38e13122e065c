#include "edgeprompt/edge.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>
#include <utility>

namespace edgeprompt {

namespace {

using Clock = std::chrono::steady_clock;

struct FrameArrival {
    wire::KVFrame frame;
    double request_s;
    double recv_s;
};

class SessionClock {
public:
    SessionClock() : t0_(Clock::now()) {}
    double now() const { return std::chrono::duration<double>(Clock::now() - t0_).count(); }

private:
    Clock::time_point t0_;
};

[[noreturn]] void fail_from_server(const wire::ErrorMsg& err) {
    throw EdgeError("cloud rejected session: " + err.message + " (code " +
                        std::to_string(err.code) + ")",
                    static_cast<wire::ErrorCode>(err.code));
}

/// Validates one received frame against the expected layer and the
/// local model shape.
wire::KVFrame expect_kv_frame(wire::Message m, const EdgeOptions& options, const Model& model,
                              std::size_t expected_layer) {
    if (const auto* err = std::get_if<wire::ErrorMsg>(&m)) fail_from_server(*err);
    auto* kv = std::get_if<wire::KVFrame>(&m);
    if (!kv) {
        throw EdgeError("expected a kv frame for layer " + std::to_string(expected_layer));
    }
    if (kv->session_id != options.session_id) {
        throw EdgeError("kv frame carries session " + std::to_string(kv->session_id) +
                        ", expected " + std::to_string(options.session_id));
    }
    if (kv->layer != expected_layer) {
        throw EdgeError("kv frame for layer " + std::to_string(kv->layer) +
                        " arrived out of order, expected " + std::to_string(expected_layer));
    }
    if (kv->n_heads != model.config.n_heads || kv->d_head != model.config.d_head()) {
        throw EdgeError("kv frame head shape does not match the local model");
    }
    if (kv->seq_len == 0) throw EdgeError("kv frame with empty sequence");
    return std::move(*kv);
}

KVSegment segment_from_frame(const wire::KVFrame& f) {
    const std::size_t d = std::size_t(f.n_heads) * f.d_head;
    Matrix k(f.seq_len, d), v(f.seq_len, d);
    std::copy(f.k_data.begin(), f.k_data.end(), k.data().begin());
    std::copy(f.v_data.begin(), f.v_data.end(), v.data().begin());
    return KVSegment{f.layer, SegmentOrigin::cloud, 0, std::move(k), std::move(v)};
}

void expect_end_of_prefill(net::Stream& stream) {
    const wire::Message m = net::read_frame(stream);
    if (const auto* err = std::get_if<wire::ErrorMsg>(&m)) fail_from_server(*err);
    if (!std::holds_alternative<wire::EndOfPrefill>(m)) {
        throw EdgeError("expected end-of-prefill after the last layer frame");
    }
}

/// Thread-safe handoff of received frames, in layer order, plus error
/// propagation from the reader thread.
class FrameQueue {
public:
    void push(FrameArrival a) {
        {
            std::lock_guard lk(mu_);
            items_.push_back(std::move(a));
        }
        cv_.notify_all();
    }

    void fail(std::exception_ptr e) {
        {
            std::lock_guard lk(mu_);
            error_ = std::move(e);
        }
        cv_.notify_all();
    }

    FrameArrival pop() {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return !items_.empty() || error_; });
        if (items_.empty()) std::rethrow_exception(error_);
        FrameArrival a = std::move(items_.front());
        items_.pop_front();
        return a;
    }

    void rethrow_if_failed() {
        std::lock_guard lk(mu_);
        if (error_) std::rethrow_exception(error_);
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<FrameArrival> items_;
    std::exception_ptr error_;
};

} // namespace

EdgeResult edge_run(const Model& model, net::Stream& stream,
                    const std::vector<TokenId>& edge_tokens, std::size_t n_decode_steps,
                    const EdgeOptions& options) {
    if (edge_tokens.empty()) throw EdgeError("edge prompt must be non-empty");
    const std::size_t L = model.config.n_layers;
    SessionClock clock;

    wire::SessionInit init;
    init.session_id = options.session_id;
    init.cloud_prompt_id = options.cloud_prompt_id;
    init.model_fingerprint = model.fingerprint();
    init.edge_prompt_len = static_cast<std::uint32_t>(edge_tokens.size());
    net::write_frame(stream, init);

    EdgeResult result;
    result.timings.layers.resize(L);

    // Per-layer compute shared by both modes. Layer l of the edge
    // prompt attends over the layer-l cloud segment plus itself; the
    // arithmetic is identical to an in-process prefill against a cache
    // holding the cloud segments.
    std::vector<KVSegment> cloud_segments;
    std::vector<KVSegment> edge_segments;
    cloud_segments.reserve(L);
    edge_segments.reserve(L);
    std::size_t cloud_len = 0;
    Matrix hidden;

    auto compute_layer = [&](std::size_t l, const wire::KVFrame& frame) {
        SessionLayerTiming& lt = result.timings.layers[l];
        lt.compute_start_s = clock.now();
        if (l == 0) {
            cloud_len = frame.seq_len;
            hidden = embed(model, edge_tokens, cloud_len);
        } else if (frame.seq_len != cloud_len) {
            throw EdgeError("kv frame sequence length changed between layers");
        }
        cloud_segments.push_back(segment_from_frame(frame));
        LayerResult lr =
            transformer_layer(model, l, hidden, cloud_len, {&cloud_segments.back()});
        hidden = std::move(lr.hidden);
        edge_segments.push_back(
            KVSegment{l, SegmentOrigin::edge, cloud_len, std::move(lr.k), std::move(lr.v)});
        lt.compute_end_s = clock.now();
    };

    if (options.mode == EdgeMode::sequential) {
        for (std::size_t l = 0; l < L; ++l) {
            SessionLayerTiming& lt = result.timings.layers[l];
            lt.request_s = clock.now();
            wire::KVFrame frame = expect_kv_frame(net::read_frame(stream), options, model, l);
            lt.frame_recv_s = clock.now();
            net::write_frame(stream,
                             wire::Ack{options.session_id, static_cast<std::uint16_t>(l)});
            compute_layer(l, frame);
        }
        expect_end_of_prefill(stream);
    } else {
        FrameQueue queue;
        std::thread reader([&] {
            try {
                double request_s = clock.now();
                for (std::size_t l = 0; l < L; ++l) {
                    wire::KVFrame frame =
                        expect_kv_frame(net::read_frame(stream), options, model, l);
                    const double recv_s = clock.now();
                    net::write_frame(
                        stream, wire::Ack{options.session_id, static_cast<std::uint16_t>(l)});
                    queue.push(FrameArrival{std::move(frame), request_s, recv_s});
                    request_s = clock.now();
                }
                expect_end_of_prefill(stream);
            } catch (...) {
                queue.fail(std::current_exception());
            }
        });
        try {
            for (std::size_t l = 0; l < L; ++l) {
                FrameArrival arrival = queue.pop();
                result.timings.layers[l].request_s = arrival.request_s;
                result.timings.layers[l].frame_recv_s = arrival.recv_s;
                compute_layer(l, arrival.frame);
            }
        } catch (...) {
            reader.join();
            throw;
        }
        reader.join();
        queue.rethrow_if_failed();
    }

    result.timings.prefill_end_s = clock.now();
    result.cloud_len = cloud_len;

    SegmentedCache cache(L);
    cache.append(std::move(cloud_segments));
    cache.append(std::move(edge_segments));
    result.tokens = decode_greedy(model, cache, hidden, n_decode_steps);
    return result;
}

EdgeResult edge_run_tcp(const Model& model, const std::string& host, std::uint16_t port,
                        const std::vector<TokenId>& edge_tokens, std::size_t n_decode_steps,
                        const EdgeOptions& options, const std::string& capture_path) {
    net::TcpStream tcp = net::tcp_connect(host, port);
    if (capture_path.empty()) {
        return edge_run(model, tcp, edge_tokens, n_decode_steps, options);
    }
    net::CaptureStream capture(tcp);
    try {
        EdgeResult result = edge_run(model, capture, edge_tokens, n_decode_steps, options);
        net::write_capture_file(capture_path, capture.records());
        return result;
    } catch (...) {
        net::write_capture_file(capture_path, capture.records());
        throw;
    }
}

} // namespace edgeprompt
