#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace edgeprompt {

/// Per-layer timing inputs of the analytical model. Vectors are indexed
/// 0-based; formulas documented in 1-based layer notation use l=1 for
/// index 0.
struct TimingProfile {
    double t_prefix = 0.0;        // setup cost before the first layer
    std::vector<double> t_cc;     // cloud compute per layer
    std::vector<double> t_ec;     // edge compute per layer
    std::vector<double> t_ct;     // cloud-to-edge transmit per layer

    std::size_t n_layers() const { return t_cc.size(); }

    /// Throws std::invalid_argument on negative times or mismatched
    /// vector lengths.
    void validate() const;
};

enum class Regime {
    P1_comm_bound,
    P2_edge_compute_bound,
    P3_cloud_compute_bound,
    Unclassified,
};

std::string to_string(Regime r);

enum class Actor { cloud, link, edge };

std::string to_string(Actor a);

struct PipelineEvent {
    Actor actor;
    std::size_t layer;
    double start;
    double end;
};

struct PipelineTrace {
    std::vector<PipelineEvent> events;
    double total = 0.0;
};

/// KV element count for one layer: 2 x heads x head-dim x sequence
/// length (one K plus one V matrix).
std::size_t kv_size(std::size_t n_heads, std::size_t d_head, std::size_t seq_len);

/// Cloud-side serving total: every layer is computed then transmitted,
/// with no overlap between layers.
double t_cloud(const TimingProfile& p);

/// Collaborative total without pipelining gains: first layer's compute
/// and transmit, then all edge layers.
double t_edge(const TimingProfile& p);

/// Attained makespan of the overlapped pipeline in closed form:
/// t_prefix + (t_cc[0]+t_ct[0])
///          + max(sum_{l>=1}(t_cc[l]+t_ct[l]), sum_{l<=L-2} t_ec[l])
///          + t_ec[L-1].
double closed_form_total(const TimingProfile& p);

/// Discrete-event execution of the dependency graph. The cloud
/// alternates compute and transmit on one serial chain (layer l's
/// compute starts when layer l-1 finished transmitting); edge layer l
/// starts at max(edge layer l-1 end, layer l arrival). Event times
/// include the t_prefix offset; total equals the last edge event's end.
/// For layer-constant profiles the total matches closed_form_total.
PipelineTrace simulate(const TimingProfile& p);

/// Classifies which chain dominates, using layer-averaged times and
/// eps-strict comparisons (eps in seconds). Profiles whose per-layer
/// values deviate from their mean by more than eps are Unclassified, as
/// are boundary orderings.
Regime classify_regime(const TimingProfile& p, double eps = 1e-6);

/// The critical-path value claimed for the given regime:
///   P1:    t_prefix + (t_cc[0]+t_ct[0]) + sum_{l>=1} t_ct[l] + t_ec[L-1]
///   P2/P3: t_prefix + (t_cc[0]+t_ct[0]) + sum_l t_ec[l]
/// Throws std::invalid_argument for Unclassified.
double objective_value(Regime r, const TimingProfile& p);

struct AssumptionReport {
    bool cloud_at_least_edge_speed = false;   // device speed ordering
    bool transmit_stable = false;             // per-layer transmit spread <= eps (relative)
    bool edge_compute_stable = false;         // per-layer edge compute spread <= eps (relative)
    bool cloud_faster_per_layer = false;      // t_cc[l] < t_ec[l] for every layer
    bool pipeline_keeps_up = false;           // t_ct[l]+t_cc[l] < t_ct[l-1]+t_ec[l] for l>=1

    bool all_pass() const {
        return cloud_at_least_edge_speed && transmit_stable && edge_compute_stable &&
               cloud_faster_per_layer && pipeline_keeps_up;
    }

    std::string to_string() const;
};

/// Checks the model's standing assumptions and derived orderings.
/// Stability is judged by relative deviation from the per-vector mean
/// (<= eps); speed and ordering checks are strict.
AssumptionReport validate_assumptions(const TimingProfile& p, double f_cloud, double f_edge,
                                      double eps = 0.05);

/// Edge-side timestamps of one protocol session, all relative to the
/// moment the session opened.
struct SessionLayerTiming {
    double request_s = 0.0;      // frame became due (init or previous ack sent)
    double frame_recv_s = 0.0;   // frame fully received
    double compute_start_s = 0.0;
    double compute_end_s = 0.0;
};

struct SessionTimings {
    std::vector<SessionLayerTiming> layers;

    /// Cloud-reported per-layer compute durations; empty when the
    /// serving side was cached or unavailable.
    std::vector<double> cloud_compute_s;

    double prefill_end_s = 0.0;
};

struct ProfileExtraction {
    TimingProfile profile;
    std::vector<std::string> notes;
};

/// Recovers a TimingProfile from measured session timestamps. Transmit
/// time is the request-to-arrival gap minus the cloud's reported
/// compute share; values below timer resolution are flagged in notes.
/// Throws std::invalid_argument when the trace has no layers.
ProfileExtraction profile_from_session(const SessionTimings& t);

} // namespace edgeprompt
