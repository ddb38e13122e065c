#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "edgeprompt/bench.hpp"
#include "edgeprompt/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

using namespace edgeprompt;

namespace {

Workload batch_workload(std::size_t n, std::size_t group, std::size_t cloud_len,
                        std::size_t edge_len, std::size_t decode_steps) {
    Workload w;
    w.n_requests = n;
    w.group_size = group;
    w.cloud_len = cloud_len;
    w.edge_len = edge_len;
    w.arrival = ArrivalKind::batch;
    w.decode_steps = decode_steps;
    return w;
}

Workload poisson_workload(std::size_t n, double rate, std::uint64_t seed,
                          std::size_t decode_steps) {
    Workload w;
    w.n_requests = n;
    w.group_size = 1;
    w.cloud_len = 96;
    w.edge_len = 24;
    w.arrival = ArrivalKind::poisson;
    w.rate = rate;
    w.seed = seed;
    w.decode_steps = decode_steps;
    return w;
}

CostModel flat_cost(double b_cloud, double b_link, double b_edge,
                    std::size_t n_layers, double t_prefix) {
    CostModel c;
    c.b_cloud = b_cloud;
    c.b_link = b_link;
    c.b_edge = b_edge;
    c.n_layers = n_layers;
    c.t_prefix = t_prefix;
    return c;
}

std::string temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path();
    return (dir / (name + "." + std::to_string(::getpid()))).string();
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        lines.push_back(line);
    return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::istringstream in(line);
    std::string field;
    while (std::getline(in, field, ','))
        fields.push_back(field);
    return fields;
}

double mean_latency(const BenchResult& r) {
    double sum = 0.0;
    for (const auto& row : r.rows)
        sum += row.latency_per_token;
    return sum / static_cast<double>(r.rows.size());
}

} // namespace

TEST_CASE("desk default cost model and workload defaults") {
    const CostModel c = CostModel::desk_default();
    CHECK(c.a_cloud == 1e-5);
    CHECK(c.b_cloud == 1e-4);
    CHECK(c.a_edge == 4e-5);
    CHECK(c.b_edge == 1e-4);
    CHECK(c.a_link == 1e-5);
    CHECK(c.b_link == 5e-4);
    CHECK(c.n_layers == 8);
    CHECK(c.t_prefix == 1e-3);
    c.validate();

    const Workload w;
    CHECK(w.group_size == 1);
    CHECK(w.arrival == ArrivalKind::batch);
    CHECK(w.decode_steps == 128);
}

TEST_CASE("cost model validation") {
    CostModel c = CostModel::desk_default();
    c.a_edge = -1e-6;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);

    CostModel zero_layers = CostModel::desk_default();
    zero_layers.n_layers = 0;
    CHECK_THROWS_AS(zero_layers.validate(), std::invalid_argument);
}

TEST_CASE("cost model profile and closed form agree with the simulator") {
    const CostModel c = CostModel::desk_default();
    for (std::size_t cloud_len : {1u, 64u, 500u}) {
        for (bool cached : {false, true}) {
            const TimingProfile p = c.split_profile(cloud_len, 32, cached);
            CHECK(p.n_layers() == c.n_layers);
            CHECK(p.t_prefix == c.t_prefix);
            for (std::size_t l = 0; l < c.n_layers; ++l) {
                const double want_cc =
                    cached ? 0.0 : c.a_cloud * static_cast<double>(cloud_len) + c.b_cloud;
                CHECK(p.t_cc[l] == doctest::Approx(want_cc).epsilon(1e-15));
                CHECK(p.t_ct[l] ==
                      doctest::Approx(c.a_link * static_cast<double>(cloud_len) + c.b_link)
                          .epsilon(1e-15));
                CHECK(p.t_ec[l] ==
                      doctest::Approx(c.a_edge * 32.0 + c.b_edge).epsilon(1e-15));
            }
            const double prefill = c.split_prefill_s(cloud_len, 32, cached);
            CHECK(prefill == doctest::Approx(simulate(p).total).epsilon(1e-12));
            CHECK(prefill == doctest::Approx(closed_form_total(p)).epsilon(1e-12));
        }
    }
}

TEST_CASE("monolithic prefill and decode step costs") {
    const CostModel c = flat_cost(2.0, 3.0, 4.0, 4, 10.0);
    CHECK(c.monolithic_prefill_s(9) == doctest::Approx(10.0 + 4 * 4.0).epsilon(1e-15));
    CHECK(c.decode_token_s() == doctest::Approx(4 * 4.0).epsilon(1e-15));

    CostModel lin = c;
    lin.a_edge = 0.5;
    CHECK(lin.monolithic_prefill_s(10) ==
          doctest::Approx(10.0 + 4 * (0.5 * 10.0 + 4.0)).epsilon(1e-15));
    CHECK(lin.decode_token_s() == doctest::Approx(4 * (0.5 + 4.0)).epsilon(1e-15));
}

TEST_CASE("batch arrivals are all zero and groups are consecutive") {
    const Workload w = batch_workload(4, 2, 10, 5, 1);
    const std::vector<double> arrivals = gen_arrivals(w);
    REQUIRE(arrivals.size() == 4);
    for (double a : arrivals)
        CHECK(a == 0.0);
    CHECK(group_of(w, 0) == 0);
    CHECK(group_of(w, 1) == 0);
    CHECK(group_of(w, 2) == 1);
    CHECK(group_of(w, 3) == 1);

    const Workload big = batch_workload(12, 4, 10, 5, 1);
    CHECK(group_of(big, 7) == 1);
    CHECK(group_of(big, 8) == 2);
}

TEST_CASE("empty workload yields no arrivals") {
    const Workload w = batch_workload(0, 1, 10, 5, 1);
    CHECK(gen_arrivals(w).empty());
}

TEST_CASE("workload validation") {
    Workload bad_group = batch_workload(5, 2, 10, 5, 1);
    CHECK_THROWS_AS(gen_arrivals(bad_group), std::invalid_argument);

    Workload zero_group = batch_workload(4, 0, 10, 5, 1);
    CHECK_THROWS_AS(gen_arrivals(zero_group), std::invalid_argument);

    Workload no_rate = poisson_workload(4, 0.0, 1, 1);
    CHECK_THROWS_AS(gen_arrivals(no_rate), std::invalid_argument);

    Workload neg_rate = poisson_workload(4, -2.0, 1, 1);
    CHECK_THROWS_AS(gen_arrivals(neg_rate), std::invalid_argument);
}

TEST_CASE("poisson arrivals are increasing with the advertised mean gap") {
    const std::size_t n = 100000;
    const Workload w = poisson_workload(n, 10.0, 2024, 1);
    const std::vector<double> arrivals = gen_arrivals(w);
    REQUIRE(arrivals.size() == n);

    double prev = 0.0;
    for (double a : arrivals) {
        CHECK(a > prev);
        prev = a;
    }

    // Sample mean of n exponential gaps concentrates around 1/rate; a
    // 5% band at n = 1e5 is a > 15-sigma allowance.
    const double mean_gap = arrivals.back() / static_cast<double>(n);
    CHECK(mean_gap == doctest::Approx(0.1).epsilon(0.05));
}

TEST_CASE("arrival generation is a pure function of the seed") {
    const Workload w = poisson_workload(256, 3.0, 99, 1);
    CHECK(gen_arrivals(w) == gen_arrivals(w));

    Workload other = w;
    other.seed = 100;
    CHECK(gen_arrivals(other) != gen_arrivals(w));
}

TEST_CASE("single request batch matches the pipeline total") {
    const CostModel c = flat_cost(1.0, 1.0, 1.0, 1, 0.0);
    Workload w = batch_workload(1, 1, 8, 4, 0);

    const BenchResult r = run_batch(w, BenchMode::edgeprompt, c);
    REQUIRE(r.rows.size() == 1);
    const double want = closed_form_total(c.split_profile(8, 4, false));
    CHECK(want == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(r.rows[0].start == 0.0);
    CHECK(r.rows[0].end == doctest::Approx(want).epsilon(1e-12));
    CHECK(r.makespan_s == doctest::Approx(want).epsilon(1e-12));
    CHECK(r.throughput_req_per_s == doctest::Approx(1.0 / want).epsilon(1e-12));
    CHECK(r.throughput_tokens_per_s == 0.0);
    // A zero-token request reports elapsed time as its latency.
    CHECK(r.rows[0].latency_per_token == doctest::Approx(want).epsilon(1e-12));

    w.decode_steps = 5;
    const BenchResult rd = run_batch(w, BenchMode::edgeprompt, c);
    const double total = want + 5.0 * c.decode_token_s();
    CHECK(rd.makespan_s == doctest::Approx(total).epsilon(1e-12));
    CHECK(rd.throughput_tokens_per_s == doctest::Approx(5.0 / total).epsilon(1e-12));
    CHECK(rd.rows[0].latency_per_token == doctest::Approx(total / 5.0).epsilon(1e-12));
}

TEST_CASE("batch rows run back to back and conserve tokens") {
    const CostModel c = CostModel::desk_default();
    const Workload w = batch_workload(6, 3, 128, 32, 7);
    for (BenchMode mode : {BenchMode::edgeprompt, BenchMode::monolithic}) {
        const BenchResult r = run_batch(w, mode, c);
        REQUIRE(r.rows.size() == 6);
        std::size_t tokens = 0;
        for (std::size_t i = 0; i < r.rows.size(); ++i) {
            const auto& row = r.rows[i];
            CHECK(row.request_id == i);
            CHECK(row.arrival == 0.0);
            CHECK(row.start == (i == 0 ? 0.0 : r.rows[i - 1].end));
            CHECK(row.end > row.start);
            CHECK(row.latency_per_token ==
                  doctest::Approx(row.end / 7.0).epsilon(1e-12));
            tokens += row.tokens;
        }
        CHECK(tokens == 6 * 7);
        CHECK(r.makespan_s == doctest::Approx(r.rows.back().end).epsilon(1e-15));
    }
}

TEST_CASE("shared cloud prompts make split batches strictly faster") {
    const CostModel c = CostModel::desk_default();
    const Workload grouped = batch_workload(8, 8, 512, 32, 0);
    const Workload solo = batch_workload(8, 1, 512, 32, 0);

    const double with_reuse = run_batch(grouped, BenchMode::edgeprompt, c).makespan_s;
    const double without = run_batch(solo, BenchMode::edgeprompt, c).makespan_s;
    CHECK(with_reuse < without);

    // Seven of eight prefills skip the cloud compute chain entirely.
    const double saved = closed_form_total(c.split_profile(512, 32, false)) -
                         closed_form_total(c.split_profile(512, 32, true));
    CHECK(without - with_reuse == doctest::Approx(7.0 * saved).epsilon(1e-9));

    const double mono_grouped = run_batch(grouped, BenchMode::monolithic, c).makespan_s;
    const double mono_solo = run_batch(solo, BenchMode::monolithic, c).makespan_s;
    CHECK(mono_grouped == doctest::Approx(mono_solo).epsilon(1e-15));
}

TEST_CASE("cached requests are insensitive to cloud compute scale") {
    CostModel c = CostModel::desk_default();
    c.a_link = 0.0; // keep transmission flat so only the compute term varies
    const std::size_t n = 4;
    std::vector<double> follower_cost;
    for (std::size_t cloud_len : {64u, 256u, 1024u}) {
        const Workload w = batch_workload(n, n, cloud_len, 32, 0);
        const BenchResult r = run_batch(w, BenchMode::edgeprompt, c);
        follower_cost.push_back(r.rows[2].end - r.rows[2].start);
    }
    CHECK(follower_cost[0] == doctest::Approx(follower_cost[1]).epsilon(1e-15));
    CHECK(follower_cost[1] == doctest::Approx(follower_cost[2]).epsilon(1e-15));
}

TEST_CASE("split throughput advantage grows with the shared prompt") {
    const CostModel c = CostModel::desk_default();
    double prev_ratio = 0.0;
    for (std::size_t cloud_len : {64u, 128u, 256u, 512u, 1024u}) {
        const Workload w = batch_workload(4, 4, cloud_len, 512, 32);
        const BenchResult split = run_batch(w, BenchMode::edgeprompt, c);
        const BenchResult mono = run_batch(w, BenchMode::monolithic, c);
        const double ratio =
            split.throughput_tokens_per_s / mono.throughput_tokens_per_s;
        CHECK(ratio >= prev_ratio);
        prev_ratio = ratio;
    }
    CHECK(prev_ratio > 1.0);
}

TEST_CASE("interactive bench requires poisson arrivals") {
    const Workload w = batch_workload(2, 1, 16, 8, 1);
    CHECK_THROWS_AS(run_interactive(w, BenchMode::edgeprompt, CostModel::desk_default()),
                    std::invalid_argument);
}

TEST_CASE("an idle interactive system serves every request at full speed") {
    const CostModel c = CostModel::desk_default();
    const Workload w = poisson_workload(5, 1e-4, 7, 8);

    const BenchResult r = run_interactive(w, BenchMode::edgeprompt, c);
    REQUIRE(r.rows.size() == 5);
    const double service = c.split_prefill_s(w.cloud_len, w.edge_len, false) +
                           8.0 * c.decode_token_s();
    for (const auto& row : r.rows) {
        CHECK(row.start == doctest::Approx(row.arrival).epsilon(1e-15));
        CHECK(row.latency_per_token == doctest::Approx(service / 8.0).epsilon(1e-12));
    }
}

TEST_CASE("interactive latency is non-decreasing in offered rate") {
    const CostModel c = CostModel::desk_default();
    double prev = 0.0;
    for (double rate : {1.0, 10.0, 100.0, 1000.0}) {
        const Workload w = poisson_workload(200, rate, 4242, 4);
        const BenchResult r = run_interactive(w, BenchMode::edgeprompt, c);
        const double lat = mean_latency(r);
        CHECK(lat >= prev - 1e-12);
        prev = lat;
    }
}

TEST_CASE("interactive mode never reuses cloud KV across requests") {
    const CostModel c = CostModel::desk_default();
    Workload grouped = poisson_workload(12, 50.0, 11, 3);
    grouped.group_size = 12;
    Workload solo = grouped;
    solo.group_size = 1;

    const BenchResult a = run_interactive(grouped, BenchMode::edgeprompt, c);
    const BenchResult b = run_interactive(solo, BenchMode::edgeprompt, c);
    CHECK(to_csv(a) == to_csv(b));
}

TEST_CASE("interactive runs are deterministic per seed") {
    const CostModel c = CostModel::desk_default();
    const Workload w = poisson_workload(64, 20.0, 31, 2);
    const BenchResult a = run_interactive(w, BenchMode::edgeprompt, c);
    const BenchResult b = run_interactive(w, BenchMode::edgeprompt, c);
    CHECK(to_csv(a) == to_csv(b));

    std::size_t tokens = 0;
    for (const auto& row : a.rows)
        tokens += row.tokens;
    CHECK(tokens == 64 * 2);

    Workload other = w;
    other.seed = 32;
    const BenchResult d = run_interactive(other, BenchMode::edgeprompt, c);
    CHECK(to_csv(d) != to_csv(a));
}

TEST_CASE("csv image of the two-request flat-cost batch") {
    const CostModel c = flat_cost(2.0, 3.0, 4.0, 4, 10.0);
    const Workload w = batch_workload(2, 2, 6, 3, 4);
    const BenchResult r = run_batch(w, BenchMode::edgeprompt, c);

    // First request pays the full split prefill (34s for this model),
    // the second reuses the cloud KV (29s); both decode 4 tokens at
    // 16s each.
    CHECK(r.rows[0].end == doctest::Approx(98.0).epsilon(1e-12));
    CHECK(r.rows[1].end == doctest::Approx(191.0).epsilon(1e-12));

    const std::string want =
        "request_id,arrival,start,end,tokens,latency_per_token\n"
        "0,0,0,98,4,24.5\n"
        "1,0,98,191,4,47.75\n"
        "summary,0.010471204188481676,0.041884816753926704,36.125,24.5,47.75\n";
    CHECK(to_csv(r) == want);
}

TEST_CASE("csv doubles round-trip through %.17g") {
    const CostModel c = CostModel::desk_default();
    const Workload w = poisson_workload(32, 7.0, 17, 3);
    const BenchResult r = run_interactive(w, BenchMode::edgeprompt, c);
    const std::vector<std::string> lines = split_lines(to_csv(r));
    REQUIRE(lines.size() == 34);
    CHECK(lines[0] == "request_id,arrival,start,end,tokens,latency_per_token");

    const std::vector<double> arrivals = gen_arrivals(w);
    for (std::size_t i = 0; i < 32; ++i) {
        const std::vector<std::string> fields = split_fields(lines[i + 1]);
        REQUIRE(fields.size() == 6);
        CHECK(fields[0] == std::to_string(i));
        // Parsing the printed field must recover the exact double.
        CHECK(std::strtod(fields[1].c_str(), nullptr) == arrivals[i]);
        CHECK(std::strtod(fields[3].c_str(), nullptr) == r.rows[i].end);
        CHECK(std::strtod(fields[5].c_str(), nullptr) == r.rows[i].latency_per_token);
    }

    const std::vector<std::string> summary = split_fields(lines[33]);
    REQUIRE(summary.size() == 6);
    CHECK(summary[0] == "summary");
    CHECK(std::strtod(summary[1].c_str(), nullptr) == r.throughput_req_per_s);
    CHECK(std::strtod(summary[2].c_str(), nullptr) == r.throughput_tokens_per_s);
    CHECK(std::strtod(summary[3].c_str(), nullptr) == r.latency.mean);
    CHECK(std::strtod(summary[4].c_str(), nullptr) == r.latency.p50);
    CHECK(std::strtod(summary[5].c_str(), nullptr) == r.latency.p99);
}

TEST_CASE("empty results still print the header and summary") {
    const Workload w = batch_workload(0, 1, 10, 5, 1);
    const BenchResult r = run_batch(w, BenchMode::edgeprompt, CostModel::desk_default());
    CHECK(to_csv(r) ==
          "request_id,arrival,start,end,tokens,latency_per_token\n"
          "summary,0,0,0,0,0\n");
}

TEST_CASE("emit_csv writes the same bytes to disk") {
    const CostModel c = CostModel::desk_default();
    const Workload w = batch_workload(3, 1, 40, 10, 2);
    const BenchResult r = run_batch(w, BenchMode::monolithic, c);

    const std::string path = temp_path("bench_emit.csv");
    emit_csv(r, path);
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream buf;
    buf << in.rdbuf();
    CHECK(buf.str() == to_csv(r));
    std::filesystem::remove(path);
}

TEST_CASE("latency percentiles use the nearest-rank rule") {
    const CostModel c = flat_cost(1.0, 1.0, 1.0, 1, 0.0);
    const Workload w = batch_workload(4, 1, 8, 4, 1);
    const BenchResult r = run_batch(w, BenchMode::edgeprompt, c);
    REQUIRE(r.rows.size() == 4);

    std::vector<double> lat;
    for (const auto& row : r.rows)
        lat.push_back(row.latency_per_token);
    std::sort(lat.begin(), lat.end());

    // ceil(0.5 * 4) = 2nd smallest, ceil(0.99 * 4) = 4th smallest.
    CHECK(r.latency.p50 == doctest::Approx(lat[1]).epsilon(1e-15));
    CHECK(r.latency.p99 == doctest::Approx(lat[3]).epsilon(1e-15));
    CHECK(r.latency.mean ==
          doctest::Approx(std::accumulate(lat.begin(), lat.end(), 0.0) / 4.0)
              .epsilon(1e-12));
}
