#include "edgeprompt/cloud.hpp"

#include <chrono>
#include <utility>

namespace edgeprompt {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

wire::KVFrame frame_from_segment(std::uint32_t session_id, const ModelConfig& config,
                                 const KVSegment& seg) {
    wire::KVFrame f;
    f.session_id = session_id;
    f.layer = static_cast<std::uint16_t>(seg.layer);
    f.seq_len = static_cast<std::uint32_t>(seg.k.rows());
    f.n_heads = static_cast<std::uint16_t>(config.n_heads);
    f.d_head = static_cast<std::uint16_t>(config.d_head());
    f.k_data.assign(seg.k.data().begin(), seg.k.data().end());
    f.v_data.assign(seg.v.data().begin(), seg.v.data().end());
    return f;
}

void send_error(net::Stream& s, wire::ErrorCode code, const std::string& message) {
    try {
        net::write_frame(s, wire::ErrorMsg{static_cast<std::uint32_t>(code), message});
    } catch (const net::TransportError&) {
        // peer already gone; the session record keeps the reason
    }
}

/// Reads the client's ack for `layer`; anything else is a protocol
/// violation and aborts the session.
void wait_ack(net::Stream& s, std::uint32_t session_id, std::uint16_t layer) {
    const wire::Message m = net::read_frame(s);
    const wire::Ack* ack = std::get_if<wire::Ack>(&m);
    if (!ack || ack->session_id != session_id || ack->layer != layer) {
        send_error(s, wire::ErrorCode::protocol, "expected ack for layer " + std::to_string(layer));
        throw net::TransportError("client sent an unexpected frame instead of an ack");
    }
}

} // namespace

CloudServer::CloudServer(Model model, PromptStore prompts, CloudServerOptions options)
    : model_(std::move(model)), prompts_(std::move(prompts)), options_(std::move(options)) {}

CloudServer::~CloudServer() { stop(); }

void CloudServer::start() {
    std::lock_guard lk(mu_);
    if (listener_) return;
    stopping_ = false;
    listener_ = std::make_unique<net::TcpListener>(options_.listen_host, options_.port);
    accept_thread_ = std::thread([this] { accept_loop(); });
}

void CloudServer::stop() {
    std::vector<std::thread> to_join;
    {
        std::lock_guard lk(mu_);
        stopping_ = true;
        if (listener_) listener_->close();
        to_join.swap(session_threads_);
    }
    if (accept_thread_.joinable()) accept_thread_.join();
    for (std::thread& t : to_join) {
        if (t.joinable()) t.join();
    }
    std::lock_guard lk(mu_);
    listener_.reset();
}

std::uint16_t CloudServer::port() const {
    std::lock_guard lk(mu_);
    if (!listener_) throw net::TransportError("server not started");
    return listener_->port();
}

std::vector<CloudSessionRecord> CloudServer::session_log() const {
    std::lock_guard lk(mu_);
    return log_;
}

void CloudServer::log_session(CloudSessionRecord record) {
    std::lock_guard lk(mu_);
    log_.push_back(std::move(record));
}

void CloudServer::apply_frame_delay(std::uint16_t layer) const {
    double delay = options_.frame_delay_s;
    const auto it = options_.per_layer_delay_s.find(layer);
    if (it != options_.per_layer_delay_s.end()) delay += it->second;
    if (delay > 0.0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
}

std::shared_ptr<const std::vector<KVSegment>> CloudServer::lookup_cache(std::uint32_t prompt_id) {
    std::lock_guard lk(mu_);
    const auto it = kv_cache_.find(prompt_id);
    return it == kv_cache_.end() ? nullptr : it->second;
}

void CloudServer::store_cache(std::uint32_t prompt_id, std::vector<KVSegment> segments) {
    std::lock_guard lk(mu_);
    kv_cache_.emplace(prompt_id,
                      std::make_shared<const std::vector<KVSegment>>(std::move(segments)));
}

void CloudServer::serve_stream(net::Stream& stream) {
    CloudSessionRecord record;
    try {
        const wire::Message first = net::read_frame(stream);
        const wire::SessionInit* init = std::get_if<wire::SessionInit>(&first);
        if (!init) {
            send_error(stream, wire::ErrorCode::protocol, "expected session init");
            record.error = "first frame was not a session init";
            log_session(std::move(record));
            return;
        }
        record.session_id = init->session_id;
        record.prompt_id = init->cloud_prompt_id;

        if (init->model_fingerprint != model_.fingerprint()) {
            send_error(stream, wire::ErrorCode::fingerprint_mismatch,
                       "client model fingerprint does not match served model");
            record.error = "fingerprint mismatch";
            log_session(std::move(record));
            return;
        }
        const auto prompt_it = prompts_.find(init->cloud_prompt_id);
        if (prompt_it == prompts_.end()) {
            send_error(stream, wire::ErrorCode::unknown_prompt,
                       "no prompt registered under id " + std::to_string(init->cloud_prompt_id));
            record.error = "unknown prompt id";
            log_session(std::move(record));
            return;
        }

        const std::size_t n_layers = model_.config.n_layers;
        if (auto cached = lookup_cache(init->cloud_prompt_id)) {
            record.served_from_cache = true;
            for (std::size_t l = 0; l < n_layers; ++l) {
                apply_frame_delay(static_cast<std::uint16_t>(l));
                net::write_frame(stream,
                                 frame_from_segment(init->session_id, model_.config, (*cached)[l]));
                wait_ack(stream, init->session_id, static_cast<std::uint16_t>(l));
            }
        } else {
            // Compute layer by layer so each frame goes out as soon as
            // its KV exists, mirroring the per-layer timing model.
            std::vector<KVSegment> segments;
            segments.reserve(n_layers);
            Matrix hidden = embed(model_, prompt_it->second, 0);
            for (std::size_t l = 0; l < n_layers; ++l) {
                const auto t0 = Clock::now();
                LayerResult lr = transformer_layer(model_, l, hidden, 0, {});
                hidden = std::move(lr.hidden);
                record.layer_compute_s.push_back(seconds_since(t0));
                segments.push_back(
                    KVSegment{l, SegmentOrigin::cloud, 0, std::move(lr.k), std::move(lr.v)});
                apply_frame_delay(static_cast<std::uint16_t>(l));
                net::write_frame(stream,
                                 frame_from_segment(init->session_id, model_.config, segments[l]));
                wait_ack(stream, init->session_id, static_cast<std::uint16_t>(l));
            }
            store_cache(init->cloud_prompt_id, std::move(segments));
        }
        net::write_frame(stream, wire::EndOfPrefill{});
        record.ok = true;
    } catch (const std::exception& e) {
        if (record.error.empty()) record.error = e.what();
    }
    log_session(std::move(record));
}

void CloudServer::accept_loop() {
    for (;;) {
        net::TcpStream conn(-1);
        try {
            conn = listener_->accept();
        } catch (const net::TransportError&) {
            return; // listener closed by stop()
        }
        bool at_capacity = false;
        {
            std::lock_guard lk(mu_);
            if (stopping_) return;
            if (active_sessions_ >= options_.max_sessions) {
                at_capacity = true;
            } else {
                ++active_sessions_;
            }
        }
        if (at_capacity) {
            send_error(conn, wire::ErrorCode::protocol, "session limit reached");
            continue;
        }
        auto session = [this](net::TcpStream s) {
            try {
                s.set_recv_timeout(options_.recv_timeout_s);
                serve_stream(s);
            } catch (...) {
            }
            std::lock_guard lk(mu_);
            --active_sessions_;
        };
        std::lock_guard lk(mu_);
        session_threads_.emplace_back(session, std::move(conn));
    }
}

} // namespace edgeprompt
