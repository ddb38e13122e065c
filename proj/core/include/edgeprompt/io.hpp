#pragma once

#include <string>

#include "edgeprompt/bench.hpp"
#include "edgeprompt/cloud.hpp"
#include "edgeprompt/model.hpp"
#include "edgeprompt/pipeline.hpp"

namespace edgeprompt {

/// model.json: the ModelConfig fields by name, e.g.
/// {"n_layers": 2, "n_heads": 2, "d_model": 8, "vocab_size": 32,
///  "max_positions": 512, "init_seed": 42}
ModelConfig load_model_config(const std::string& path);
void save_model_config(const ModelConfig& config, const std::string& path);

/// prompts.json: prompt id (as a string key) to token id array, e.g.
/// {"7": [3, 1, 4, 1, 5]}
PromptStore load_prompts(const std::string& path);
void save_prompts(const PromptStore& prompts, const std::string& path);

/// profile.json: {"t_prefix": s, "t_cc": [...], "t_ec": [...],
/// "t_ct": [...]}
TimingProfile load_profile(const std::string& path);
void save_profile(const TimingProfile& profile, const std::string& path);

/// cost.json: {"a_cloud", "b_cloud", "a_edge", "b_edge", "a_link",
/// "b_link", "L", "t_prefix"}
CostModel load_cost_model(const std::string& path);
void save_cost_model(const CostModel& cost, const std::string& path);

/// Shortest round-tripping decimal form of a double (%.17g).
std::string format_g17(double v);

} // namespace edgeprompt
