#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edgeprompt/pipeline.hpp"

namespace edgeprompt {

/// Linear per-layer cost model: a device spends a*tokens + b seconds
/// per layer, the link likewise per transmitted layer. Drives the
/// pipeline simulator in place of real hardware magnitudes.
struct CostModel {
    double a_cloud = 0.0;
    double b_cloud = 0.0;
    double a_edge = 0.0;
    double b_edge = 0.0;
    double a_link = 0.0;
    double b_link = 0.0;
    std::size_t n_layers = 1;
    double t_prefix = 0.0;

    /// Desk-scale defaults: cloud several times faster than edge, link
    /// latency dominated by a per-frame constant.
    static CostModel desk_default();

    void validate() const;

    /// Per-layer profile of a split request. When the cloud KV is
    /// cached the cloud compute term drops to zero; transmission is
    /// still paid.
    TimingProfile split_profile(std::size_t cloud_len, std::size_t edge_len,
                                bool cloud_cached) const;

    /// Pipeline makespan of one split prefill.
    double split_prefill_s(std::size_t cloud_len, std::size_t edge_len, bool cloud_cached) const;

    /// Whole prompt computed on the edge device, no transmission.
    double monolithic_prefill_s(std::size_t prompt_len) const;

    /// One greedy decode step, always on the edge device.
    double decode_token_s() const;
};

enum class ArrivalKind { batch, poisson };

struct Workload {
    std::size_t n_requests = 0;
    std::size_t group_size = 1; // consecutive requests sharing one cloud prompt
    std::size_t cloud_len = 0;
    std::size_t edge_len = 0;
    ArrivalKind arrival = ArrivalKind::batch;
    double rate = 0.0; // requests per second, poisson only
    std::uint64_t seed = 1;
    std::size_t decode_steps = 128;

    void validate() const;
};

enum class BenchMode { monolithic, edgeprompt };

struct RequestRow {
    std::size_t request_id = 0;
    double arrival = 0.0;
    double start = 0.0;
    double end = 0.0;
    std::size_t tokens = 0;
    double latency_per_token = 0.0;
};

struct LatencySummary {
    double mean = 0.0;
    double p50 = 0.0;
    double p99 = 0.0;
};

struct BenchResult {
    std::vector<RequestRow> rows;
    double makespan_s = 0.0;
    double throughput_tokens_per_s = 0.0;
    double throughput_req_per_s = 0.0;
    LatencySummary latency;
};

/// Arrival times per request. Batch workloads all arrive at zero;
/// poisson workloads accumulate seeded exponential inter-arrivals
/// (inverse-CDF sampling, so a fixed seed fixes the whole path).
std::vector<double> gen_arrivals(const Workload& w);

std::size_t group_of(const Workload& w, std::size_t request_index);

/// All requests available up front, processed in order on one device
/// pair. In split mode the first request of each group pays the cloud
/// prefill; the rest of the group reuses its cached KV.
BenchResult run_batch(const Workload& w, BenchMode mode, const CostModel& cost);

/// Poisson arrivals into a FIFO prefill queue over one device; decode
/// steps of admitted requests interleave round-robin, one token at a
/// time, with prefill taking priority.
BenchResult run_interactive(const Workload& w, BenchMode mode, const CostModel& cost);

/// CSV image: header request_id,arrival,start,end,tokens,
/// latency_per_token; one row per request; one trailing summary row
/// (first field "summary", then requests/s, tokens/s, mean, p50, p99
/// latency per token). Doubles print as %.17g so output is
/// byte-deterministic and round-trips exactly.
std::string to_csv(const BenchResult& r);

void emit_csv(const BenchResult& r, const std::string& path);

} // namespace edgeprompt
