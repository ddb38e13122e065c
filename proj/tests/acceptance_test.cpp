// Acceptance gate: one line per criterion, [PASS] or [FAIL], nonzero
// exit when any criterion fails. Each criterion is self-contained and
// prints enough detail to locate a failure without a debugger.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

#include "edgeprompt/attention.hpp"
#include "edgeprompt/bench.hpp"
#include "edgeprompt/cache.hpp"
#include "edgeprompt/cloud.hpp"
#include "edgeprompt/edge.hpp"
#include "edgeprompt/matrix.hpp"
#include "edgeprompt/model.hpp"
#include "edgeprompt/net.hpp"
#include "edgeprompt/pipeline.hpp"
#include "edgeprompt/privacy.hpp"
#include "edgeprompt/rng.hpp"
#include "edgeprompt/wire.hpp"

using namespace edgeprompt;

namespace {

struct Criterion {
    bool ok = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

Matrix random_matrix(SplitMix64& rng, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
    }
    return m;
}

std::vector<TokenId> random_tokens(SplitMix64& rng, std::size_t n, std::size_t vocab) {
    std::vector<TokenId> tokens(n);
    for (TokenId& t : tokens) t = static_cast<TokenId>(rng.next_u64() % vocab);
    return tokens;
}

// Criterion 1: fused per-segment attention equals monolithic attention
// over the concatenated keys, and the recombination weights form a
// convex combination.
Criterion check_fusion() {
    const auto t0 = std::chrono::steady_clock::now();
    SplitMix64 rng(101);
    double max_rel = 0.0;
    double max_alpha_dev = 0.0;
    const int n_cases = 500;

    for (int it = 0; it < n_cases; ++it) {
        const std::size_t n_q = 1 + rng.next_u64() % 16;
        std::size_t n_k = 1 + rng.next_u64() % 64;
        const std::size_t d = 1 + rng.next_u64() % 16;
        const bool causal = (it % 2) == 1;
        if (causal && n_k < n_q) n_k = n_q;
        const std::size_t query_offset = causal ? n_k - n_q : n_k;

        const Matrix q = random_matrix(rng, n_q, d);
        const Matrix k = random_matrix(rng, n_k, d);
        const Matrix v = random_matrix(rng, n_k, d);
        const Matrix mono = full_attention(q, k, v, {query_offset, 0});

        const std::size_t n_segments = 1 + rng.next_u64() % 4;
        std::vector<std::size_t> cuts = {0, n_k};
        for (std::size_t s = 1; s < n_segments; ++s) cuts.push_back(rng.next_u64() % (n_k + 1));
        std::sort(cuts.begin(), cuts.end());

        std::vector<PartialAttention> parts;
        for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
            const std::size_t b = cuts[s];
            const std::size_t len = cuts[s + 1] - b;
            if (len == 0) {
                parts.push_back(PartialAttention::identity(n_q, d));
                continue;
            }
            parts.push_back(partial_attention(q, k.row_slice(b, len), v.row_slice(b, len),
                                              {query_offset, b}));
        }
        const Matrix fused = fuse_partials(parts);

        for (std::size_t i = 0; i < n_q; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                const double want = mono(i, j);
                const double rel =
                    std::abs(fused(i, j) - want) / std::max(1.0, std::abs(want));
                max_rel = std::max(max_rel, rel);
            }
            double total_lse = -std::numeric_limits<double>::infinity();
            for (const PartialAttention& p : parts) total_lse = log_add_exp(total_lse, p.lse[i]);
            double alpha_sum = 0.0;
            for (const PartialAttention& p : parts) {
                if (std::isinf(p.lse[i]) && p.lse[i] < 0) continue;
                alpha_sum += std::exp(p.lse[i] - total_lse);
            }
            max_alpha_dev = std::max(max_alpha_dev, std::abs(alpha_sum - 1.0));
        }
    }

    const double elapsed = seconds_since(t0);
    Criterion c;
    c.ok = max_rel <= 1e-9 && max_alpha_dev <= 1e-12 && elapsed < 10.0;
    c.detail = std::to_string(n_cases) + " cases, max rel err " + fmt(max_rel) +
               ", max |sum(alpha)-1| " + fmt(max_alpha_dev) + ", " + fmt(elapsed) + " s";
    return c;
}

struct SessionCapture {
    std::vector<net::CaptureRecord> records;
    std::vector<TokenId> edge_tokens;
    std::vector<std::vector<std::uint8_t>> sentinels;
};

std::vector<std::vector<std::uint8_t>> edge_kv_sentinels(const Model& model,
                                                         const std::vector<TokenId>& cloud_tokens,
                                                         const std::vector<TokenId>& edge_tokens) {
    const std::size_t L = model.config.n_layers;
    PrefillResult cloud_pre =
        prefill(model, cloud_tokens, SegmentOrigin::cloud, 0, SegmentedCache(L));
    SegmentedCache cache(L);
    cache.append(std::move(cloud_pre.segments));
    const PrefillResult edge_pre =
        prefill(model, edge_tokens, SegmentOrigin::edge, cloud_tokens.size(), cache);

    std::vector<std::vector<std::uint8_t>> sentinels;
    for (const KVSegment& seg : edge_pre.segments) {
        sentinels.push_back(le_bytes(seg.k.row(0)));
        sentinels.push_back(le_bytes(seg.v.row(seg.seq_len() - 1)));
    }
    return sentinels;
}

// Criterion 2: split execution, in process and over a TCP loopback
// session, decodes token for token what the monolithic path decodes.
// Captures every session's wire bytes for the privacy criterion.
Criterion check_token_equivalence(std::vector<SessionCapture>& captures) {
    const auto t0 = std::chrono::steady_clock::now();
    SplitMix64 rng(202);
    const int n_configs = 50;
    int mismatches = 0;
    std::string first_error;

    const auto tmp_dir = std::filesystem::temp_directory_path() /
                         ("epaccept." + std::to_string(::getpid()));
    std::filesystem::create_directories(tmp_dir);

    for (int it = 0; it < n_configs; ++it) {
        ModelConfig cfg;
        cfg.n_layers = 1 + rng.next_u64() % 4;
        cfg.n_heads = 1 + rng.next_u64() % 4;
        cfg.d_model = cfg.n_heads * (1 + rng.next_u64() % (32 / cfg.n_heads));
        cfg.vocab_size = 8 + rng.next_u64() % 57;
        cfg.max_positions = 256;
        cfg.init_seed = rng.next_u64();

        const std::vector<TokenId> cloud_tokens =
            random_tokens(rng, 1 + rng.next_u64() % 64, cfg.vocab_size);
        // At least 4 edge tokens: a shorter id sequence is a 4-byte LE
        // pattern that collides by chance with small u32 frame fields
        // (seq_len, session id), which the byte-level audit would flag.
        const std::vector<TokenId> edge_tokens =
            random_tokens(rng, 4 + rng.next_u64() % 29, cfg.vocab_size);
        const std::size_t steps = 16;

        try {
            const Model model = init_model(cfg);

            std::vector<TokenId> prompt = cloud_tokens;
            prompt.insert(prompt.end(), edge_tokens.begin(), edge_tokens.end());
            const std::vector<TokenId> mono = generate_monolithic(model, prompt, steps);
            const std::vector<TokenId> split = generate_split(model, cloud_tokens, edge_tokens, steps);

            PromptStore prompts;
            prompts[5] = cloud_tokens;
            CloudServerOptions opts;
            opts.port = 0;
            CloudServer server(model, prompts, opts);
            server.start();

            EdgeOptions edge_opts;
            edge_opts.session_id = static_cast<std::uint32_t>(it + 1);
            edge_opts.cloud_prompt_id = 5;
            edge_opts.mode = (it % 2) ? EdgeMode::overlapped : EdgeMode::sequential;
            const std::string capture_path =
                (tmp_dir / ("session" + std::to_string(it) + ".epcap")).string();

            const EdgeResult wire_result = edge_run_tcp(model, "127.0.0.1", server.port(),
                                                        edge_tokens, steps, edge_opts, capture_path);
            server.stop();

            SessionCapture cap;
            cap.records = net::read_capture_file(capture_path);
            cap.edge_tokens = edge_tokens;
            cap.sentinels = edge_kv_sentinels(model, cloud_tokens, edge_tokens);
            captures.push_back(std::move(cap));

            if (mono != split || mono != wire_result.tokens) {
                ++mismatches;
                if (first_error.empty()) {
                    first_error = "config " + std::to_string(it) + " tokens diverge";
                }
            }
        } catch (const std::exception& e) {
            ++mismatches;
            if (first_error.empty()) {
                first_error = "config " + std::to_string(it) + ": " + e.what();
            }
        }
    }
    std::filesystem::remove_all(tmp_dir);

    const double elapsed = seconds_since(t0);
    Criterion c;
    c.ok = mismatches == 0 && elapsed < 60.0;
    c.detail = std::to_string(n_configs) + " configs over TCP loopback, " +
               std::to_string(mismatches) + " mismatches, " + fmt(elapsed) + " s";
    if (!first_error.empty()) c.detail += "; first: " + first_error;
    return c;
}

// Criterion 3: no capture carries the edge prompt's token bytes or any
// edge KV sentinel in either direction, and a client that does leak its
// edge tokens is caught by the same audit.
Criterion check_privacy(const std::vector<SessionCapture>& captures) {
    int dirty = 0;
    int no_traffic = 0;
    std::string first_error;
    for (std::size_t i = 0; i < captures.size(); ++i) {
        const PrivacyReport report =
            privacy_audit(captures[i].records, captures[i].edge_tokens, captures[i].sentinels);
        if (report.no_traffic) ++no_traffic;
        if (!report.clean()) {
            ++dirty;
            if (first_error.empty()) {
                first_error = "capture " + std::to_string(i) + ": " + report.violations[0].kind;
            }
        }
    }

    // A deliberately leaking client: valid handshake, then the raw edge
    // token bytes written straight to the wire.
    bool fault_detected = false;
    {
        ModelConfig cfg;
        cfg.init_seed = 42;
        const Model model = init_model(cfg);
        const std::vector<TokenId> edge_tokens = {9, 7, 5, 3};
        PromptStore prompts;
        prompts[5] = {1, 2, 3};
        CloudServerOptions opts;
        CloudServer server(model, prompts, opts);

        auto [client_end, server_end] = net::make_stream_pair();
        std::thread srv([&] {
            try {
                server.serve_stream(*server_end);
            } catch (const std::exception&) {
            }
        });

        net::CaptureStream cap(*client_end);
        wire::SessionInit init;
        init.session_id = 1;
        init.cloud_prompt_id = 5;
        init.model_fingerprint = model.fingerprint();
        init.edge_prompt_len = static_cast<std::uint32_t>(edge_tokens.size());
        net::write_frame(cap, init);
        cap.write_all(le_bytes(std::span<const TokenId>(edge_tokens)));
        client_end->close_write();
        srv.join();

        const PrivacyReport report = privacy_audit(cap.take_records(), edge_tokens, {});
        fault_detected = !report.clean() &&
                         report.violations[0].kind == "edge token id sequence" &&
                         report.violations[0].dir == net::Direction::edge_to_cloud;
    }

    Criterion c;
    c.ok = !captures.empty() && dirty == 0 && no_traffic == 0 && fault_detected;
    c.detail = std::to_string(captures.size()) + " captures audited, " + std::to_string(dirty) +
               " violations, leaking client " + (fault_detected ? "detected" : "MISSED");
    if (!first_error.empty()) c.detail += "; first: " + first_error;
    return c;
}

TimingProfile constant_profile(std::size_t L, double prefix, double cc, double ct, double ec) {
    TimingProfile p;
    p.t_prefix = prefix;
    p.t_cc.assign(L, cc);
    p.t_ct.assign(L, ct);
    p.t_ec.assign(L, ec);
    return p;
}

// Criterion 4: on layer-constant profiles the discrete-event simulation
// and the closed-form makespan agree, and the hand-checked case lands
// on 34.0 exactly.
Criterion check_simulator_oracle() {
    SplitMix64 rng(404);
    double max_diff = 0.0;
    for (int it = 0; it < 1000; ++it) {
        const std::size_t L = 1 + rng.next_u64() % 12;
        const TimingProfile p =
            constant_profile(L, rng.uniform(0.0, 10.0), rng.uniform(0.001, 5.0),
                             rng.uniform(0.001, 5.0), rng.uniform(0.001, 5.0));
        max_diff = std::max(max_diff, std::abs(simulate(p).total - closed_form_total(p)));
    }

    const TimingProfile hand = constant_profile(4, 10.0, 2.0, 3.0, 4.0);
    const double hand_total = simulate(hand).total;

    Criterion c;
    c.ok = max_diff <= 1e-9 && hand_total == 34.0;
    c.detail = "1000 constant profiles, max |simulate - closed form| " + fmt(max_diff) +
               ", hand case " + fmt(hand_total);
    return c;
}

// Criterion 5: for profiles conforming to each regime, the simulated
// makespan should equal that regime's critical-path objective.
Criterion check_regime_objectives() {
    SplitMix64 rng(505);
    const int per_regime = 100;
    int misclassified = 0;
    std::vector<int> mismatches(3, 0);
    double max_gap = 0.0;
    std::string example;

    const char* names[3] = {"comm-bound", "edge-bound", "cloud-bound"};
    const Regime want[3] = {Regime::P1_comm_bound, Regime::P2_edge_compute_bound,
                            Regime::P3_cloud_compute_bound};

    for (int r = 0; r < 3; ++r) {
        for (int it = 0; it < per_regime; ++it) {
            const std::size_t L = 2 + rng.next_u64() % 11;
            double cc = 0, ct = 0, ec = 0;
            if (r == 0) { // transmit dominates edge compute
                ct = rng.uniform(0.5, 3.0);
                ec = rng.uniform(0.05, ct - 0.05);
                cc = rng.uniform(0.01, 3.0);
            } else if (r == 1) { // cc < ct < ec
                cc = rng.uniform(0.01, 2.0);
                ct = cc + rng.uniform(0.05, 2.0);
                ec = ct + rng.uniform(0.05, 2.0);
            } else { // ct < cc < ec
                ct = rng.uniform(0.01, 2.0);
                cc = ct + rng.uniform(0.05, 2.0);
                ec = cc + rng.uniform(0.05, 2.0);
            }
            const TimingProfile p = constant_profile(L, rng.uniform(0.0, 5.0), cc, ct, ec);
            if (classify_regime(p) != want[r]) {
                ++misclassified;
                continue;
            }
            const double simulated = simulate(p).total;
            const double objective = objective_value(want[r], p);
            const double gap = std::abs(simulated - objective);
            max_gap = std::max(max_gap, gap);
            if (gap > 1e-9) {
                ++mismatches[r];
                if (example.empty()) {
                    std::ostringstream os;
                    os << names[r] << " L=" << L << " cc=" << fmt(cc) << " ct=" << fmt(ct)
                       << " ec=" << fmt(ec) << ": simulated " << fmt(simulated)
                       << " vs objective " << fmt(objective);
                    example = os.str();
                }
            }
        }
    }

    Criterion c;
    c.ok = misclassified == 0 && mismatches[0] == 0 && mismatches[1] == 0 && mismatches[2] == 0;
    c.detail = "mismatches per regime: " + std::string(names[0]) + " " +
               std::to_string(mismatches[0]) + "/100, " + names[1] + " " +
               std::to_string(mismatches[1]) + "/100, " + names[2] + " " +
               std::to_string(mismatches[2]) + "/100, max gap " + fmt(max_gap);
    if (!example.empty()) c.detail += "; e.g. " + example;
    return c;
}

// Criterion 6: frame round-trips, the golden end-of-prefill byte
// sequence, and KV frame size arithmetic.
Criterion check_wire_format() {
    SplitMix64 rng(606);
    bool ok = true;
    std::string detail;

    const auto roundtrip = [&](const wire::Message& m, const char* what) {
        const std::vector<std::uint8_t> bytes = wire::encode_frame(m);
        if (!(wire::decode_frame(bytes) == m) || wire::encode_frame(wire::decode_frame(bytes)) != bytes) {
            ok = false;
            if (detail.empty()) detail = std::string(what) + " does not round-trip";
        }
    };

    wire::SessionInit init;
    init.session_id = 0x01020304;
    init.cloud_prompt_id = 7;
    init.model_fingerprint = {1, 2, 3, 4, 5, 6, 7, 8};
    init.edge_prompt_len = 9;
    roundtrip(init, "session init");
    roundtrip(wire::Ack{5, 3}, "ack");
    roundtrip(wire::EndOfPrefill{}, "end of prefill");
    roundtrip(wire::ErrorMsg{2, "fingerprint mismatch"}, "error");

    wire::KVFrame frame;
    frame.session_id = 11;
    frame.layer = 1;
    frame.seq_len = 4;
    frame.n_heads = 2;
    frame.d_head = 4;
    frame.k_data.resize(frame.values_per_matrix());
    frame.v_data.resize(frame.values_per_matrix());
    for (double& x : frame.k_data) x = rng.uniform(-1.0, 1.0);
    for (double& x : frame.v_data) x = rng.uniform(-1.0, 1.0);
    roundtrip(frame, "kv frame");

    const std::vector<std::uint8_t> golden = {'E', 'P', 'K', 'V', 0x01, 0x03, 0, 0, 0, 0};
    if (wire::encode_frame(wire::EndOfPrefill{}) != golden) {
        ok = false;
        detail = "end-of-prefill bytes differ from golden";
    }

    int size_errors = 0;
    for (int it = 0; it < 20; ++it) {
        wire::KVFrame f;
        f.session_id = static_cast<std::uint32_t>(rng.next_u64());
        f.layer = static_cast<std::uint16_t>(rng.next_u64() % 64);
        f.seq_len = static_cast<std::uint32_t>(1 + rng.next_u64() % 64);
        f.n_heads = static_cast<std::uint16_t>(1 + rng.next_u64() % 8);
        f.d_head = static_cast<std::uint16_t>(1 + rng.next_u64() % 16);
        f.k_data.assign(f.values_per_matrix(), 0.5);
        f.v_data.assign(f.values_per_matrix(), -0.5);
        const std::size_t want =
            wire::kHeaderSize + 14 + kv_size(f.n_heads, f.d_head, f.seq_len) * 8;
        if (wire::encode_frame(f).size() != want) ++size_errors;
    }
    if (size_errors != 0) {
        ok = false;
        detail = std::to_string(size_errors) + " of 20 kv frame sizes wrong";
    }

    Criterion c;
    c.ok = ok;
    c.detail = ok ? "all message types round-trip, golden bytes and 20 frame sizes match"
                  : detail;
    return c;
}

// Criterion 7: (a) the split/monolithic throughput ratio is
// non-decreasing as the shared cloud prompt grows; (b) interactive
// latency is non-decreasing in the offered rate.
Criterion check_trends() {
    const CostModel cost = CostModel::desk_default();

    std::string ratios;
    bool sweep_ok = true;
    double prev_ratio = 0.0;
    for (std::size_t cloud_len : {64u, 128u, 256u, 512u, 1024u}) {
        Workload w;
        w.n_requests = 8;
        w.group_size = 8;
        w.cloud_len = cloud_len;
        w.edge_len = 512;
        w.arrival = ArrivalKind::batch;
        w.decode_steps = 32;
        const double split = run_batch(w, BenchMode::edgeprompt, cost).throughput_tokens_per_s;
        const double mono = run_batch(w, BenchMode::monolithic, cost).throughput_tokens_per_s;
        const double ratio = split / mono;
        if (ratio < prev_ratio) sweep_ok = false;
        prev_ratio = ratio;
        if (!ratios.empty()) ratios += " ";
        ratios += fmt(ratio);
    }

    bool rate_ok = true;
    double prev_latency = 0.0;
    std::string latencies;
    for (double rate : {1.0, 10.0, 100.0, 1000.0}) {
        Workload w;
        w.n_requests = 200;
        w.cloud_len = 256;
        w.edge_len = 128;
        w.arrival = ArrivalKind::poisson;
        w.rate = rate;
        w.seed = 4242;
        w.decode_steps = 4;
        const BenchResult r = run_interactive(w, BenchMode::edgeprompt, cost);
        if (r.latency.mean < prev_latency - 1e-12) rate_ok = false;
        prev_latency = r.latency.mean;
        if (!latencies.empty()) latencies += " ";
        latencies += fmt(r.latency.mean);
    }

    Criterion c;
    c.ok = sweep_ok && rate_ok;
    c.detail = "throughput ratios [" + ratios + "], mean latencies [" + latencies + "]";
    return c;
}

// Criterion 8: the arrival sampler has the advertised mean and is a
// pure function of its seed.
Criterion check_poisson() {
    Workload w;
    w.n_requests = 100000;
    w.cloud_len = 1;
    w.edge_len = 1;
    w.arrival = ArrivalKind::poisson;
    w.rate = 10.0;
    w.seed = 808;

    const std::vector<double> arrivals = gen_arrivals(w);
    const double mean_gap = arrivals.back() / static_cast<double>(arrivals.size());
    const bool mean_ok = std::abs(mean_gap - 0.1) <= 0.005;
    const bool deterministic = arrivals == gen_arrivals(w);

    Workload other = w;
    other.seed = 809;
    const bool seed_sensitive = gen_arrivals(other) != arrivals;

    Criterion c;
    c.ok = mean_ok && deterministic && seed_sensitive;
    c.detail = "mean inter-arrival " + fmt(mean_gap) + " (want 0.1 within 5%), deterministic " +
               (deterministic ? "yes" : "NO") + ", seed-sensitive " +
               (seed_sensitive ? "yes" : "NO");
    return c;
}

} // namespace

int main() {
    std::vector<SessionCapture> captures;

    struct Entry {
        const char* label;
        Criterion result;
    };
    std::vector<Entry> entries;
    entries.push_back({"fused segment attention matches monolithic attention",
                       check_fusion()});
    entries.push_back({"split and monolithic decoding emit identical tokens over TCP loopback",
                       check_token_equivalence(captures)});
    entries.push_back({"captures never carry edge tokens or edge KV, leaking client is caught",
                       check_privacy(captures)});
    entries.push_back({"simulation matches the closed-form makespan on constant profiles",
                       check_simulator_oracle()});
    entries.push_back({"simulated makespan equals the per-regime critical-path objective",
                       check_regime_objectives()});
    entries.push_back({"wire frames round-trip bit-exactly with golden framing bytes",
                       check_wire_format()});
    entries.push_back({"throughput and latency trends hold under the linear cost model",
                       check_trends()});
    entries.push_back({"poisson arrivals have the advertised mean and fixed-seed determinism",
                       check_poisson()});

    int failures = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const Entry& e = entries[i];
        if (!e.result.ok) ++failures;
        std::printf("[%s] criterion %zu: %s (%s)\n", e.result.ok ? "PASS" : "FAIL", i + 1,
                    e.label, e.result.detail.c_str());
    }
    std::printf("%zu of %zu criteria passed\n", entries.size() - failures, entries.size());
    return failures == 0 ? 0 : 1;
}
