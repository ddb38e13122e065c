// Command-line front end: cloud serving, edge sessions, the analytical
// timing tools, and the benchmark harness, as subcommands of one binary.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "edgeprompt/bench.hpp"
#include "edgeprompt/cloud.hpp"
#include "edgeprompt/edge.hpp"
#include "edgeprompt/io.hpp"
#include "edgeprompt/model.hpp"
#include "edgeprompt/pipeline.hpp"

namespace {

using namespace edgeprompt;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted.store(true); }

std::pair<std::string, std::uint16_t> split_endpoint(const std::string& endpoint) {
    const auto colon = endpoint.rfind(':');
    if (colon == std::string::npos) {
        throw CLI::ValidationError("endpoint must look like host:port, got " + endpoint);
    }
    const std::string host = endpoint.substr(0, colon);
    const int port = std::stoi(endpoint.substr(colon + 1));
    if (port < 0 || port > 65535) throw CLI::ValidationError("port out of range in " + endpoint);
    return {host, static_cast<std::uint16_t>(port)};
}

std::vector<TokenId> parse_token_list(const std::string& arg) {
    std::string text = arg;
    if (std::filesystem::exists(arg)) {
        std::ifstream in(arg);
        std::stringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    for (char& c : text) {
        if (c == ',' || c == '\n' || c == '\t') c = ' ';
    }
    std::vector<TokenId> tokens;
    std::istringstream ss(text);
    long long v = 0;
    while (ss >> v) {
        if (v < 0) throw CLI::ValidationError("token ids must be non-negative");
        tokens.push_back(static_cast<TokenId>(v));
    }
    if (tokens.empty()) throw CLI::ValidationError("no token ids in: " + arg);
    return tokens;
}

int cmd_serve_cloud(const std::string& listen, const std::string& config_path,
                    const std::string& prompts_path, std::size_t max_sessions,
                    double frame_delay_ms) {
    const auto [host, port] = split_endpoint(listen);
    CloudServerOptions options;
    options.listen_host = host;
    options.port = port;
    options.max_sessions = max_sessions;
    options.frame_delay_s = frame_delay_ms / 1000.0;

    const Model model = init_model(load_model_config(config_path));
    CloudServer server(model, load_prompts(prompts_path), options);
    server.start();
    std::printf("listening on %s:%u\n", host.c_str(), server.port());
    std::fflush(stdout);

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_interrupted.load()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    server.stop();
    for (const CloudSessionRecord& rec : server.session_log()) {
        std::printf("session %u prompt %u %s%s%s\n", rec.session_id, rec.prompt_id,
                    rec.ok ? "ok" : "failed", rec.served_from_cache ? " (cache hit)" : "",
                    rec.error.empty() ? "" : (" " + rec.error).c_str());
    }
    return 0;
}

int cmd_run_edge(const std::string& cloud, const std::string& config_path,
                 const std::string& edge_prompt, std::size_t steps, const std::string& capture,
                 std::uint32_t session_id, std::uint32_t cloud_prompt_id, const std::string& mode,
                 bool print_profile) {
    const auto [host, port] = split_endpoint(cloud);
    const Model model = init_model(load_model_config(config_path));

    EdgeOptions options;
    options.session_id = session_id;
    options.cloud_prompt_id = cloud_prompt_id;
    options.mode = mode == "overlapped" ? EdgeMode::overlapped : EdgeMode::sequential;

    const EdgeResult result =
        edge_run_tcp(model, host, port, parse_token_list(edge_prompt), steps, options, capture);

    for (std::size_t i = 0; i < result.tokens.size(); ++i) {
        std::printf("%s%u", i ? " " : "", result.tokens[i]);
    }
    std::printf("\n");
    if (print_profile) {
        const ProfileExtraction extraction = profile_from_session(result.timings);
        std::printf("t_prefix %s\n", format_g17(extraction.profile.t_prefix).c_str());
        for (std::size_t l = 0; l < extraction.profile.n_layers(); ++l) {
            std::printf("layer %zu t_ct %s t_ec %s\n", l,
                        format_g17(extraction.profile.t_ct[l]).c_str(),
                        format_g17(extraction.profile.t_ec[l]).c_str());
        }
        for (const std::string& note : extraction.notes) std::printf("note: %s\n", note.c_str());
    }
    return 0;
}

int cmd_simulate(const std::string& profile_path, const std::string& out_path) {
    const PipelineTrace trace = simulate(load_profile(profile_path));
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open for writing: " + out_path);
    out << "actor,layer,start,end\n";
    for (const PipelineEvent& e : trace.events) {
        out << to_string(e.actor) << ',' << e.layer << ',' << format_g17(e.start) << ','
            << format_g17(e.end) << '\n';
    }
    if (!out) throw std::runtime_error("failed writing " + out_path);
    std::printf("total %s\n", format_g17(trace.total).c_str());
    return 0;
}

int cmd_classify(const std::string& profile_path, double eps) {
    const TimingProfile profile = load_profile(profile_path);
    const Regime regime = classify_regime(profile, eps);
    std::printf("regime %s\n", to_string(regime).c_str());
    if (regime == Regime::Unclassified) {
        std::printf("objective n/a\n");
    } else {
        std::printf("objective %s\n", format_g17(objective_value(regime, profile)).c_str());
    }
    return 0;
}

int cmd_validate(const std::string& profile_path, double f_cloud, double f_edge, double eps) {
    const AssumptionReport report =
        validate_assumptions(load_profile(profile_path), f_cloud, f_edge, eps);
    std::fputs(report.to_string().c_str(), stdout);
    std::printf("overall %s\n", report.all_pass() ? "pass" : "fail");
    return 0;
}

std::string sweep_out_path(const std::string& out, std::size_t cloud_len) {
    const std::filesystem::path p(out);
    std::filesystem::path named = p.parent_path();
    named /= p.stem().string() + "_cloud" + std::to_string(cloud_len) + p.extension().string();
    return named.string();
}

int cmd_bench_batch(const std::string& sweep_arg, std::size_t edge_len, std::size_t requests,
                    std::size_t groups, const std::string& mode_arg,
                    const std::string& cost_model_path, const std::string& out,
                    std::size_t decode_steps, std::uint64_t seed) {
    std::vector<std::size_t> sweep;
    {
        std::string s = sweep_arg;
        for (char& c : s) {
            if (c == ',') c = ' ';
        }
        std::istringstream ss(s);
        std::size_t v = 0;
        while (ss >> v) sweep.push_back(v);
    }
    if (sweep.empty()) throw CLI::ValidationError("empty cloud length sweep");
    if (groups == 0 || requests % groups != 0) {
        throw CLI::ValidationError("--groups must divide --requests");
    }
    const CostModel cost =
        cost_model_path.empty() ? CostModel::desk_default() : load_cost_model(cost_model_path);
    const BenchMode mode = mode_arg == "monolithic" ? BenchMode::monolithic : BenchMode::edgeprompt;

    for (const std::size_t cloud_len : sweep) {
        Workload w;
        w.n_requests = requests;
        w.group_size = requests / groups;
        w.cloud_len = cloud_len;
        w.edge_len = edge_len;
        w.arrival = ArrivalKind::batch;
        w.seed = seed;
        w.decode_steps = decode_steps;
        const BenchResult r = run_batch(w, mode, cost);
        const std::string path = sweep.size() == 1 ? out : sweep_out_path(out, cloud_len);
        emit_csv(r, path);
        std::printf("cloud_len %zu tokens_per_s %s req_per_s %s -> %s\n", cloud_len,
                    format_g17(r.throughput_tokens_per_s).c_str(),
                    format_g17(r.throughput_req_per_s).c_str(), path.c_str());
    }
    return 0;
}

int cmd_bench_interactive(double rate, std::size_t requests, std::size_t cloud_len,
                          std::size_t edge_len, const std::string& mode_arg,
                          const std::string& cost_model_path, const std::string& out,
                          std::size_t decode_steps, std::uint64_t seed) {
    const CostModel cost =
        cost_model_path.empty() ? CostModel::desk_default() : load_cost_model(cost_model_path);
    Workload w;
    w.n_requests = requests;
    w.cloud_len = cloud_len;
    w.edge_len = edge_len;
    w.arrival = ArrivalKind::poisson;
    w.rate = rate;
    w.seed = seed;
    w.decode_steps = decode_steps;
    const BenchMode mode = mode_arg == "monolithic" ? BenchMode::monolithic : BenchMode::edgeprompt;
    const BenchResult r = run_interactive(w, mode, cost);
    emit_csv(r, out);
    std::printf("rate %s req_per_s %s mean_latency %s -> %s\n", format_g17(rate).c_str(),
                format_g17(r.throughput_req_per_s).c_str(), format_g17(r.latency.mean).c_str(),
                out.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"split-prompt collaborative inference engine"};
    app.require_subcommand(1);

    // serve-cloud
    std::string listen = "127.0.0.1:4700";
    std::string config_path;
    std::string prompts_path;
    std::size_t max_sessions = 64;
    double frame_delay_ms = 0.0;
    auto* serve = app.add_subcommand("serve-cloud", "serve cloud-prompt KV over TCP");
    serve->add_option("--listen", listen, "host:port to listen on (port 0 = ephemeral)");
    serve->add_option("--config", config_path, "model config JSON")->required();
    serve->add_option("--prompts", prompts_path, "prompt registry JSON")->required();
    serve->add_option("--max-sessions", max_sessions, "concurrent session cap");
    serve->add_option("--frame-delay-ms", frame_delay_ms, "injected delay before each KV frame");

    // run-edge
    std::string cloud_endpoint = "127.0.0.1:4700";
    std::string edge_prompt;
    std::size_t steps = 16;
    std::string capture;
    std::uint32_t session_id = 1;
    std::uint32_t cloud_prompt_id = 0;
    std::string edge_mode = "sequential";
    bool print_profile = false;
    auto* run = app.add_subcommand("run-edge", "run one edge session against a cloud");
    run->add_option("--cloud", cloud_endpoint, "cloud host:port");
    run->add_option("--config", config_path, "model config JSON")->required();
    run->add_option("--edge-prompt", edge_prompt, "token ids, or a file of token ids")->required();
    run->add_option("--steps", steps, "greedy decode steps");
    run->add_option("--capture", capture, "write raw wire bytes here for auditing");
    run->add_option("--session-id", session_id, "session id to send");
    run->add_option("--cloud-prompt-id", cloud_prompt_id, "registered cloud prompt id");
    run->add_option("--mode", edge_mode, "sequential or overlapped")
        ->check(CLI::IsMember({"sequential", "overlapped"}));
    run->add_flag("--print-profile", print_profile, "print the measured per-layer profile");

    // simulate
    std::string profile_path;
    std::string out_path = "trace.csv";
    auto* sim = app.add_subcommand("simulate", "run the pipeline simulator on a profile");
    sim->add_option("--profile", profile_path, "timing profile JSON")->required();
    sim->add_option("--out", out_path, "trace CSV path");

    // classify
    double eps = 1e-6;
    auto* cls = app.add_subcommand("classify", "classify a profile's critical-path regime");
    cls->add_option("--profile", profile_path, "timing profile JSON")->required();
    cls->add_option("--eps", eps, "comparison tolerance in seconds");

    // validate
    double f_cloud = 1.0;
    double f_edge = 1.0;
    double validate_eps = 0.05;
    auto* val = app.add_subcommand("validate", "check model assumptions on a profile");
    val->add_option("--profile", profile_path, "timing profile JSON")->required();
    val->add_option("--f-cloud", f_cloud, "cloud device speed")->required();
    val->add_option("--f-edge", f_edge, "edge device speed")->required();
    val->add_option("--eps", validate_eps, "relative stability tolerance");

    // bench
    auto* bench = app.add_subcommand("bench", "run the benchmark harness");
    bench->require_subcommand(1);

    std::string sweep_arg = "64,128,256,512,1024";
    std::size_t edge_len = 512;
    std::size_t requests = 1000;
    std::size_t groups = 100;
    std::string bench_mode = "edgeprompt";
    std::string cost_model_path;
    std::string bench_out = "results.csv";
    std::size_t decode_steps = 128;
    std::uint64_t seed = 1;
    auto* batch = bench->add_subcommand("batch", "grouped batch workload");
    batch->add_option("--cloud-len-sweep", sweep_arg, "comma-separated cloud prompt lengths");
    batch->add_option("--edge-len", edge_len, "edge prompt length");
    batch->add_option("--requests", requests, "total requests");
    batch->add_option("--groups", groups, "number of groups sharing a cloud prompt");
    batch->add_option("--mode", bench_mode, "edgeprompt or monolithic")
        ->check(CLI::IsMember({"edgeprompt", "monolithic"}));
    batch->add_option("--cost-model", cost_model_path, "cost model JSON (default: built-in)");
    batch->add_option("--out", bench_out, "results CSV (sweeps add _cloudN to the name)");
    batch->add_option("--decode-steps", decode_steps, "decode steps per request");
    batch->add_option("--seed", seed, "workload seed");

    double rate = 10.0;
    std::size_t icloud_len = 256;
    std::size_t iedge_len = 128;
    std::size_t irequests = 1000;
    auto* inter = bench->add_subcommand("interactive", "poisson arrival workload");
    inter->add_option("--rate", rate, "offered request rate per second")->required();
    inter->add_option("--requests", irequests, "total requests");
    inter->add_option("--cloud-len", icloud_len, "cloud prompt length");
    inter->add_option("--edge-len", iedge_len, "edge prompt length");
    inter->add_option("--mode", bench_mode, "edgeprompt or monolithic")
        ->check(CLI::IsMember({"edgeprompt", "monolithic"}));
    inter->add_option("--cost-model", cost_model_path, "cost model JSON (default: built-in)");
    inter->add_option("--out", bench_out, "results CSV");
    inter->add_option("--decode-steps", decode_steps, "decode steps per request");
    inter->add_option("--seed", seed, "workload seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (serve->parsed()) {
            return cmd_serve_cloud(listen, config_path, prompts_path, max_sessions,
                                   frame_delay_ms);
        }
        if (run->parsed()) {
            return cmd_run_edge(cloud_endpoint, config_path, edge_prompt, steps, capture,
                                session_id, cloud_prompt_id, edge_mode, print_profile);
        }
        if (sim->parsed()) return cmd_simulate(profile_path, out_path);
        if (cls->parsed()) return cmd_classify(profile_path, eps);
        if (val->parsed()) return cmd_validate(profile_path, f_cloud, f_edge, validate_eps);
        if (bench->parsed()) {
            if (batch->parsed()) {
                return cmd_bench_batch(sweep_arg, edge_len, requests, groups, bench_mode,
                                       cost_model_path, bench_out, decode_steps, seed);
            }
            return cmd_bench_interactive(rate, irequests, icloud_len, iedge_len, bench_mode,
                                         cost_model_path, bench_out, decode_steps, seed);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
