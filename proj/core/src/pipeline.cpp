#include "edgeprompt/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace edgeprompt {

void TimingProfile::validate() const {
    if (t_ec.size() != t_cc.size() || t_ct.size() != t_cc.size()) {
        throw std::invalid_argument("timing profile vectors have mismatched lengths");
    }
    if (t_prefix < 0.0) throw std::invalid_argument("t_prefix must be non-negative");
    for (const auto* v : {&t_cc, &t_ec, &t_ct}) {
        for (double x : *v) {
            if (!(x >= 0.0)) throw std::invalid_argument("per-layer times must be non-negative");
        }
    }
}

std::string to_string(Regime r) {
    switch (r) {
    case Regime::P1_comm_bound: return "P1_comm_bound";
    case Regime::P2_edge_compute_bound: return "P2_edge_compute_bound";
    case Regime::P3_cloud_compute_bound: return "P3_cloud_compute_bound";
    case Regime::Unclassified: return "Unclassified";
    }
    return "Unclassified";
}

std::string to_string(Actor a) {
    switch (a) {
    case Actor::cloud: return "cloud";
    case Actor::link: return "link";
    case Actor::edge: return "edge";
    }
    return "?";
}

std::size_t kv_size(std::size_t n_heads, std::size_t d_head, std::size_t seq_len) {
    if (n_heads == 0 || d_head == 0 || seq_len == 0) {
        throw std::invalid_argument("kv_size arguments must be positive");
    }
    return 2 * n_heads * d_head * seq_len;
}

double t_cloud(const TimingProfile& p) {
    p.validate();
    double total = 0.0;
    for (std::size_t l = 0; l < p.n_layers(); ++l) total += p.t_cc[l] + p.t_ct[l];
    return total;
}

double t_edge(const TimingProfile& p) {
    p.validate();
    if (p.n_layers() == 0) return 0.0;
    double total = p.t_cc[0] + p.t_ct[0];
    for (double x : p.t_ec) total += x;
    return total;
}

double closed_form_total(const TimingProfile& p) {
    p.validate();
    const std::size_t L = p.n_layers();
    if (L == 0) return p.t_prefix;
    double cloud_tail = 0.0;
    for (std::size_t l = 1; l < L; ++l) cloud_tail += p.t_cc[l] + p.t_ct[l];
    double edge_head = 0.0;
    for (std::size_t l = 0; l + 1 < L; ++l) edge_head += p.t_ec[l];
    return p.t_prefix + (p.t_cc[0] + p.t_ct[0]) + std::max(cloud_tail, edge_head) + p.t_ec[L - 1];
}

PipelineTrace simulate(const TimingProfile& p) {
    p.validate();
    const std::size_t L = p.n_layers();
    PipelineTrace trace;
    trace.events.reserve(3 * L);
    if (L == 0) {
        trace.total = p.t_prefix;
        return trace;
    }

    // The cloud's compute and its transmit slot alternate on one serial
    // chain; edge compute overlaps with that chain, gated per layer by
    // frame arrival and by its own previous layer.
    std::vector<PipelineEvent> cloud(L), link(L), edge(L);
    double chain = p.t_prefix;
    double edge_free = p.t_prefix;
    for (std::size_t l = 0; l < L; ++l) {
        cloud[l] = {Actor::cloud, l, chain, chain + p.t_cc[l]};
        chain = cloud[l].end;
        link[l] = {Actor::link, l, chain, chain + p.t_ct[l]};
        chain = link[l].end;
        const double start = std::max(edge_free, link[l].end);
        edge[l] = {Actor::edge, l, start, start + p.t_ec[l]};
        edge_free = edge[l].end;
    }

    // Emit in timestamp order with a deterministic tie-break: earlier
    // layer first, cloud before link before edge.
    for (std::size_t l = 0; l < L; ++l) {
        trace.events.push_back(cloud[l]);
        trace.events.push_back(link[l]);
        trace.events.push_back(edge[l]);
    }
    std::stable_sort(trace.events.begin(), trace.events.end(),
                     [](const PipelineEvent& a, const PipelineEvent& b) {
                         if (a.start != b.start) return a.start < b.start;
                         if (a.layer != b.layer) return a.layer < b.layer;
                         return static_cast<int>(a.actor) < static_cast<int>(b.actor);
                     });
    trace.total = edge[L - 1].end;
    return trace;
}

namespace {

double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

double max_abs_deviation(const std::vector<double>& v) {
    const double m = mean(v);
    double dev = 0.0;
    for (double x : v) dev = std::max(dev, std::abs(x - m));
    return dev;
}

} // namespace

Regime classify_regime(const TimingProfile& p, double eps) {
    p.validate();
    if (p.n_layers() == 0) return Regime::Unclassified;
    for (const auto* v : {&p.t_cc, &p.t_ec, &p.t_ct}) {
        if (max_abs_deviation(*v) > eps) return Regime::Unclassified;
    }
    const double cc = mean(p.t_cc);
    const double ec = mean(p.t_ec);
    const double ct = mean(p.t_ct);
    if (ec < ct - eps) return Regime::P1_comm_bound;
    if (cc < ct - eps && ct < ec - eps) return Regime::P2_edge_compute_bound;
    if (ct < cc - eps && cc < ec - eps) return Regime::P3_cloud_compute_bound;
    return Regime::Unclassified;
}

double objective_value(Regime r, const TimingProfile& p) {
    p.validate();
    if (r == Regime::Unclassified) {
        throw std::invalid_argument("objective_value: regime is unclassified");
    }
    const std::size_t L = p.n_layers();
    if (L == 0) return p.t_prefix;
    double total = p.t_prefix + p.t_cc[0] + p.t_ct[0];
    if (r == Regime::P1_comm_bound) {
        for (std::size_t l = 1; l < L; ++l) total += p.t_ct[l];
        total += p.t_ec[L - 1];
    } else {
        for (double x : p.t_ec) total += x;
    }
    return total;
}

std::string AssumptionReport::to_string() const {
    auto line = [](const char* name, bool ok) {
        return std::string(name) + ": " + (ok ? "pass" : "fail") + "\n";
    };
    std::string out;
    out += line("A1 cloud speed >= edge speed", cloud_at_least_edge_speed);
    out += line("A2 transmit time stable across layers", transmit_stable);
    out += line("A2 edge compute stable across layers", edge_compute_stable);
    out += line("C1 cloud layer compute < edge layer compute", cloud_faster_per_layer);
    out += line("C2 next frame ready before edge needs it", pipeline_keeps_up);
    return out;
}

AssumptionReport validate_assumptions(const TimingProfile& p, double f_cloud, double f_edge,
                                      double eps) {
    p.validate();
    AssumptionReport r;
    r.cloud_at_least_edge_speed = f_cloud >= f_edge;

    auto stable = [eps](const std::vector<double>& v) {
        if (v.empty()) return true;
        const double m = mean(v);
        if (m == 0.0) return max_abs_deviation(v) == 0.0;
        return max_abs_deviation(v) / m <= eps;
    };
    r.transmit_stable = stable(p.t_ct);
    r.edge_compute_stable = stable(p.t_ec);

    r.cloud_faster_per_layer = true;
    for (std::size_t l = 0; l < p.n_layers(); ++l) {
        if (!(p.t_cc[l] < p.t_ec[l])) r.cloud_faster_per_layer = false;
    }

    r.pipeline_keeps_up = true;
    for (std::size_t l = 1; l < p.n_layers(); ++l) {
        if (!(p.t_ct[l] + p.t_cc[l] < p.t_ct[l - 1] + p.t_ec[l])) r.pipeline_keeps_up = false;
    }
    return r;
}

ProfileExtraction profile_from_session(const SessionTimings& t) {
    if (t.layers.empty()) {
        throw std::invalid_argument("profile_from_session: trace has no layers");
    }
    constexpr double kResolution = 1e-6;
    ProfileExtraction out;
    const std::size_t L = t.layers.size();
    const bool have_cloud = t.cloud_compute_s.size() == L;
    out.profile.t_prefix = t.layers[0].request_s;
    for (std::size_t l = 0; l < L; ++l) {
        const SessionLayerTiming& lt = t.layers[l];
        const double cc = have_cloud ? t.cloud_compute_s[l] : 0.0;
        const double gap = lt.frame_recv_s - lt.request_s;
        const double ct = std::max(0.0, gap - cc);
        const double ec = lt.compute_end_s - lt.compute_start_s;
        out.profile.t_cc.push_back(cc);
        out.profile.t_ct.push_back(ct);
        out.profile.t_ec.push_back(ec);
        if (ct < kResolution) {
            out.notes.push_back("t_ct[" + std::to_string(l) + "] below timer resolution");
        }
        if (ec < kResolution) {
            out.notes.push_back("t_ec[" + std::to_string(l) + "] below timer resolution");
        }
    }
    if (!have_cloud) {
        out.notes.push_back(
            "cloud compute durations unavailable; transmit times include serving time");
    }
    out.profile.validate();
    return out;
}

} // namespace edgeprompt
