#include "edgeprompt/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <stdexcept>

#include "edgeprompt/rng.hpp"

namespace edgeprompt {

CostModel CostModel::desk_default() {
    CostModel c;
    c.a_cloud = 1e-5;
    c.b_cloud = 1e-4;
    c.a_edge = 4e-5;
    c.b_edge = 1e-4;
    c.a_link = 1e-5;
    c.b_link = 5e-4;
    c.n_layers = 8;
    c.t_prefix = 1e-3;
    return c;
}

void CostModel::validate() const {
    if (n_layers == 0) throw std::invalid_argument("cost model needs at least one layer");
    for (double v : {a_cloud, b_cloud, a_edge, b_edge, a_link, b_link, t_prefix}) {
        if (!(v >= 0.0)) throw std::invalid_argument("cost model coefficients must be >= 0");
    }
}

TimingProfile CostModel::split_profile(std::size_t cloud_len, std::size_t edge_len,
                                       bool cloud_cached) const {
    validate();
    TimingProfile p;
    p.t_prefix = t_prefix;
    const double cc = cloud_cached ? 0.0 : a_cloud * double(cloud_len) + b_cloud;
    const double ct = a_link * double(cloud_len) + b_link;
    const double ec = a_edge * double(edge_len) + b_edge;
    p.t_cc.assign(n_layers, cc);
    p.t_ct.assign(n_layers, ct);
    p.t_ec.assign(n_layers, ec);
    return p;
}

double CostModel::split_prefill_s(std::size_t cloud_len, std::size_t edge_len,
                                  bool cloud_cached) const {
    return simulate(split_profile(cloud_len, edge_len, cloud_cached)).total;
}

double CostModel::monolithic_prefill_s(std::size_t prompt_len) const {
    validate();
    return t_prefix + double(n_layers) * (a_edge * double(prompt_len) + b_edge);
}

double CostModel::decode_token_s() const {
    return double(n_layers) * (a_edge + b_edge);
}

void Workload::validate() const {
    if (group_size == 0) throw std::invalid_argument("group_size must be positive");
    if (arrival == ArrivalKind::batch) {
        if (n_requests % group_size != 0) {
            throw std::invalid_argument("group_size must divide n_requests for batch workloads");
        }
    } else {
        if (!(rate > 0.0)) throw std::invalid_argument("poisson rate must be positive");
    }
}

std::vector<double> gen_arrivals(const Workload& w) {
    w.validate();
    std::vector<double> arrivals(w.n_requests, 0.0);
    if (w.arrival == ArrivalKind::poisson) {
        SplitMix64 rng(w.seed);
        double t = 0.0;
        for (double& a : arrivals) {
            t += -std::log1p(-rng.uniform01()) / w.rate;
            a = t;
        }
    }
    return arrivals;
}

std::size_t group_of(const Workload& w, std::size_t request_index) {
    return request_index / w.group_size;
}

namespace {

LatencySummary summarize(std::vector<double> latencies) {
    LatencySummary s;
    if (latencies.empty()) return s;
    double sum = 0.0;
    for (double v : latencies) sum += v;
    s.mean = sum / double(latencies.size());
    std::sort(latencies.begin(), latencies.end());
    auto nearest_rank = [&latencies](double q) {
        const std::size_t n = latencies.size();
        std::size_t rank = static_cast<std::size_t>(std::ceil(q * double(n)));
        if (rank == 0) rank = 1;
        if (rank > n) rank = n;
        return latencies[rank - 1];
    };
    s.p50 = nearest_rank(0.50);
    s.p99 = nearest_rank(0.99);
    return s;
}

BenchResult finalize(std::vector<RequestRow> rows) {
    BenchResult r;
    r.rows = std::move(rows);
    std::vector<double> latencies;
    latencies.reserve(r.rows.size());
    double last_end = 0.0;
    std::size_t total_tokens = 0;
    for (RequestRow& row : r.rows) {
        const double elapsed = row.end - row.arrival;
        row.latency_per_token = row.tokens > 0 ? elapsed / double(row.tokens) : elapsed;
        latencies.push_back(row.latency_per_token);
        last_end = std::max(last_end, row.end);
        total_tokens += row.tokens;
    }
    r.makespan_s = last_end;
    if (last_end > 0.0) {
        r.throughput_tokens_per_s = double(total_tokens) / last_end;
        r.throughput_req_per_s = double(r.rows.size()) / last_end;
    }
    r.latency = summarize(std::move(latencies));
    return r;
}

double prefill_cost(const Workload& w, BenchMode mode, const CostModel& cost, bool cloud_cached) {
    if (mode == BenchMode::monolithic) {
        return cost.monolithic_prefill_s(w.cloud_len + w.edge_len);
    }
    return cost.split_prefill_s(w.cloud_len, w.edge_len, cloud_cached);
}

} // namespace

BenchResult run_batch(const Workload& w, BenchMode mode, const CostModel& cost) {
    w.validate();
    cost.validate();
    if (w.arrival != ArrivalKind::batch) {
        throw std::invalid_argument("run_batch needs a batch workload");
    }
    const double decode_s = double(w.decode_steps) * cost.decode_token_s();
    std::vector<RequestRow> rows(w.n_requests);
    double t = 0.0;
    for (std::size_t i = 0; i < w.n_requests; ++i) {
        const bool first_in_group = (i % w.group_size) == 0;
        const bool cached = mode == BenchMode::edgeprompt && !first_in_group;
        RequestRow& row = rows[i];
        row.request_id = i;
        row.arrival = 0.0;
        row.start = t;
        t += prefill_cost(w, mode, cost, cached) + decode_s;
        row.end = t;
        row.tokens = w.decode_steps;
    }
    return finalize(std::move(rows));
}

BenchResult run_interactive(const Workload& w, BenchMode mode, const CostModel& cost) {
    w.validate();
    cost.validate();
    if (w.arrival != ArrivalKind::poisson) {
        throw std::invalid_argument("run_interactive needs poisson arrivals");
    }
    const std::vector<double> arrivals = gen_arrivals(w);
    // Interactive serving gets no cross-request KV reuse here: every
    // request pays its full prefill, so the two modes differ only in
    // where that prefill runs.
    const double prefill_s = prefill_cost(w, mode, cost, false);
    const double token_s = cost.decode_token_s();

    std::vector<RequestRow> rows(w.n_requests);
    std::deque<std::size_t> prefill_queue;
    std::deque<std::pair<std::size_t, std::size_t>> decode_ring; // request, remaining tokens
    std::size_t next_arrival = 0;
    double now = 0.0;

    auto admit_until = [&](double t) {
        while (next_arrival < arrivals.size() && arrivals[next_arrival] <= t) {
            prefill_queue.push_back(next_arrival);
            ++next_arrival;
        }
    };

    std::size_t completed = 0;
    while (completed < w.n_requests) {
        admit_until(now);
        if (prefill_queue.empty() && decode_ring.empty()) {
            now = arrivals[next_arrival]; // device idle, jump to next arrival
            admit_until(now);
        }
        if (!prefill_queue.empty()) {
            const std::size_t idx = prefill_queue.front();
            prefill_queue.pop_front();
            rows[idx].request_id = idx;
            rows[idx].arrival = arrivals[idx];
            rows[idx].start = now;
            now += prefill_s;
            if (w.decode_steps == 0) {
                rows[idx].end = now;
                rows[idx].tokens = 0;
                ++completed;
            } else {
                decode_ring.emplace_back(idx, w.decode_steps);
            }
            continue;
        }
        auto [idx, remaining] = decode_ring.front();
        decode_ring.pop_front();
        now += token_s;
        --remaining;
        if (remaining == 0) {
            rows[idx].end = now;
            rows[idx].tokens = w.decode_steps;
            ++completed;
        } else {
            decode_ring.emplace_back(idx, remaining);
        }
    }
    return finalize(std::move(rows));
}

namespace {

std::string g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

std::string to_csv(const BenchResult& r) {
    std::string out = "request_id,arrival,start,end,tokens,latency_per_token\n";
    for (const RequestRow& row : r.rows) {
        out += std::to_string(row.request_id) + ',' + g17(row.arrival) + ',' + g17(row.start) +
               ',' + g17(row.end) + ',' + std::to_string(row.tokens) + ',' +
               g17(row.latency_per_token) + '\n';
    }
    out += "summary," + g17(r.throughput_req_per_s) + ',' + g17(r.throughput_tokens_per_s) + ',' +
           g17(r.latency.mean) + ',' + g17(r.latency.p50) + ',' + g17(r.latency.p99) + '\n';
    return out;
}

void emit_csv(const BenchResult& r, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    const std::string csv = to_csv(r);
    const std::size_t written = std::fwrite(csv.data(), 1, csv.size(), f);
    const bool ok = written == csv.size();
    if (std::fclose(f) != 0 || !ok) throw std::runtime_error("failed writing " + path);
}

} // namespace edgeprompt
