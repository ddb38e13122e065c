#include "edgeprompt/io.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace edgeprompt {

namespace {

using nlohmann::json;

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("invalid JSON in " + path + ": " + e.what());
    }
    return j;
}

void save_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing " + path);
}

} // namespace

ModelConfig load_model_config(const std::string& path) {
    const json j = load_json(path);
    ModelConfig c;
    c.n_layers = j.at("n_layers").get<std::size_t>();
    c.n_heads = j.at("n_heads").get<std::size_t>();
    c.d_model = j.at("d_model").get<std::size_t>();
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.max_positions = j.value("max_positions", std::size_t{512});
    c.init_seed = j.value("init_seed", std::uint64_t{1});
    c.validate();
    return c;
}

void save_model_config(const ModelConfig& config, const std::string& path) {
    save_json(json{{"n_layers", config.n_layers},
                   {"n_heads", config.n_heads},
                   {"d_model", config.d_model},
                   {"vocab_size", config.vocab_size},
                   {"max_positions", config.max_positions},
                   {"init_seed", config.init_seed}},
              path);
}

PromptStore load_prompts(const std::string& path) {
    const json j = load_json(path);
    if (!j.is_object()) throw std::runtime_error(path + ": expected an object of id -> tokens");
    PromptStore store;
    for (const auto& [key, value] : j.items()) {
        std::uint32_t id = 0;
        try {
            id = static_cast<std::uint32_t>(std::stoul(key));
        } catch (const std::exception&) {
            throw std::runtime_error(path + ": prompt id is not a number: " + key);
        }
        store[id] = value.get<std::vector<TokenId>>();
    }
    return store;
}

void save_prompts(const PromptStore& prompts, const std::string& path) {
    json j = json::object();
    for (const auto& [id, tokens] : prompts) j[std::to_string(id)] = tokens;
    save_json(j, path);
}

TimingProfile load_profile(const std::string& path) {
    const json j = load_json(path);
    TimingProfile p;
    p.t_prefix = j.value("t_prefix", 0.0);
    p.t_cc = j.at("t_cc").get<std::vector<double>>();
    p.t_ec = j.at("t_ec").get<std::vector<double>>();
    p.t_ct = j.at("t_ct").get<std::vector<double>>();
    p.validate();
    return p;
}

void save_profile(const TimingProfile& profile, const std::string& path) {
    save_json(json{{"t_prefix", profile.t_prefix},
                   {"t_cc", profile.t_cc},
                   {"t_ec", profile.t_ec},
                   {"t_ct", profile.t_ct}},
              path);
}

CostModel load_cost_model(const std::string& path) {
    const json j = load_json(path);
    CostModel c;
    c.a_cloud = j.at("a_cloud").get<double>();
    c.b_cloud = j.at("b_cloud").get<double>();
    c.a_edge = j.at("a_edge").get<double>();
    c.b_edge = j.at("b_edge").get<double>();
    c.a_link = j.at("a_link").get<double>();
    c.b_link = j.at("b_link").get<double>();
    c.n_layers = j.at("L").get<std::size_t>();
    c.t_prefix = j.at("t_prefix").get<double>();
    c.validate();
    return c;
}

void save_cost_model(const CostModel& cost, const std::string& path) {
    save_json(json{{"a_cloud", cost.a_cloud},
                   {"b_cloud", cost.b_cloud},
                   {"a_edge", cost.a_edge},
                   {"b_edge", cost.b_edge},
                   {"a_link", cost.a_link},
                   {"b_link", cost.b_link},
                   {"L", cost.n_layers},
                   {"t_prefix", cost.t_prefix}},
              path);
}

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace edgeprompt
