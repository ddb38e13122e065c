#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "edgeprompt/model.hpp"
#include "edgeprompt/net.hpp"

namespace edgeprompt {

/// Registered cloud prompts, addressed by id. Prompt content lives on
/// the serving side only; clients refer to prompts by id.
using PromptStore = std::map<std::uint32_t, std::vector<TokenId>>;

struct CloudServerOptions {
    std::string listen_host = "127.0.0.1";
    std::uint16_t port = 0; // 0 picks an ephemeral port
    std::size_t max_sessions = 64;

    /// Injected delay before sending every KV frame, plus optional
    /// extra delay for specific layers. Used to shape timing without
    /// touching correctness.
    double frame_delay_s = 0.0;
    std::map<std::uint16_t, double> per_layer_delay_s;

    double recv_timeout_s = 30.0;
};

struct CloudSessionRecord {
    std::uint32_t session_id = 0;
    std::uint32_t prompt_id = 0;
    bool served_from_cache = false;
    bool ok = false;
    std::string error;

    /// Wall time spent computing each layer's KV for this session.
    /// Empty when the prompt was served from cache.
    std::vector<double> layer_compute_s;
};

/// Serves per-layer KV of registered cloud prompts over the frame
/// protocol. Each session: SessionInit in, then one KV frame per layer
/// in ascending order (each acknowledged by the client), then
/// end-of-prefill. KV for a prompt id is computed once and reused
/// across sessions.
class CloudServer {
public:
    CloudServer(Model model, PromptStore prompts, CloudServerOptions options = {});
    ~CloudServer();

    CloudServer(const CloudServer&) = delete;
    CloudServer& operator=(const CloudServer&) = delete;

    /// Binds the listener and starts accepting in a background thread.
    void start();

    /// Stops accepting and waits for running sessions to finish.
    void stop();

    std::uint16_t port() const;

    /// Runs one full session over an already-connected stream. The TCP
    /// accept loop uses this; tests can call it directly on in-memory
    /// streams.
    void serve_stream(net::Stream& stream);

    std::vector<CloudSessionRecord> session_log() const;

private:
    std::shared_ptr<const std::vector<KVSegment>> lookup_cache(std::uint32_t prompt_id);
    void store_cache(std::uint32_t prompt_id, std::vector<KVSegment> segments);

    void accept_loop();
    void log_session(CloudSessionRecord record);
    void apply_frame_delay(std::uint16_t layer) const;

    Model model_;
    PromptStore prompts_;
    CloudServerOptions options_;

    std::unique_ptr<net::TcpListener> listener_;
    std::thread accept_thread_;
    mutable std::mutex mu_;
    std::vector<std::thread> session_threads_;
    std::size_t active_sessions_ = 0;
    bool stopping_ = false;

    std::map<std::uint32_t, std::shared_ptr<const std::vector<KVSegment>>> kv_cache_;
    std::vector<CloudSessionRecord> log_;
};

} // namespace edgeprompt
