#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "drbid/baseline.hpp"
#include "drbid/ddpg.hpp"
#include "drbid/environment.hpp"

namespace drbid::config {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PipelineConfig {
  int offline_days{15};
  int pretrain_days{50};
  int online_days{5};
  int episodes{150};
  int pretrain_episodes{150};
  double reward_scale{100.0};
  int checkpoint_interval{0};
  bool online_learn{true};
  bool online_explore{true};
  double offline_success_threshold{0.90};
  double online_success_threshold{0.85};
  unsigned workers{1};
};

struct RunConfig {
  std::uint64_t seed{1};
  env::ScenarioConfig scenario;
  ddpg::AgentConfig price_agent;
  ddpg::AgentConfig quantity_agent;
  baseline::BaselineConfig baseline;
  PipelineConfig pipeline;
  std::map<std::string, std::vector<double>> grid;
};

// Scenario numbers 1, 2, 3 select MCP noise sigma 0, 0.2, 0.5.
double scenario_sigma(int scenario);

// Parsing rejects unknown keys and out-of-range values. Sections may be
// partial; anything absent keeps its default. The "agent" section applies to
// both agents and "price_agent" / "quantity_agent" then override one of them.
RunConfig from_json(const nlohmann::json& j);
RunConfig load(const std::string& path);
nlohmann::json to_json(const RunConfig& c);

// Throws ConfigError when the assembled configuration is inconsistent.
void validate(const RunConfig& c);

// Sets one dotted key ("agent.gamma", "pipeline.episodes", ...) to a number.
// "agent.*" keys set both agents.
RunConfig with_override(const RunConfig& c, const std::string& key, double value);

// 16 hex digits of FNV-1a over the canonical JSON of the configuration.
std::string config_hash(const RunConfig& c);

}  // namespace drbid::config
