#include "drbid/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

namespace drbid::config {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were used so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, _] : j_.items()) {
      if (!used_.count(key)) throw ConfigError("unknown key '" + prefix() + key + "'");
    }
  }
  Section(const Section&) = delete;
  Section& operator=(const Section&) = delete;

  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key);
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!j_.at(key).is_number_integer()) throw ConfigError("key '" + prefix() + key + "' must be an integer");
    }
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("key '" + prefix() + key + "' has the wrong type");
    }
  }

  void get_u64(const std::string& key, std::uint64_t& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_unsigned()) throw ConfigError("key '" + prefix() + key + "' must be a non-negative integer");
    out = v.get<std::uint64_t>();
  }

  void get_size(const std::string& key, std::size_t& out) {
    std::uint64_t v = out;
    get_u64(key, v);
    out = static_cast<std::size_t>(v);
  }

  const json& sub(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  std::string prefix() const { return path_.empty() ? "" : path_ + "."; }
  std::string where() const { return path_.empty() ? "configuration" : "'" + path_ + "'"; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

std::vector<sim::HourRange> parse_ranges(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError("'" + path + "' must be a list of [begin, end] hours");
  std::vector<sim::HourRange> out;
  for (const auto& r : j) {
    if (!r.is_array() || r.size() != 2 || !r[0].is_number_integer() || !r[1].is_number_integer()) {
      throw ConfigError("'" + path + "' entries must be [begin, end] integer hours");
    }
    out.push_back({r[0].get<int>(), r[1].get<int>()});
  }
  return out;
}

json ranges_json(const std::vector<sim::HourRange>& ranges) {
  json a = json::array();
  for (const auto& r : ranges) a.push_back({r.begin, r.end});
  return a;
}

void parse_noise(const json& j, const std::string& path, ddpg::NoiseConfig& n) {
  Section s(j, path);
  if (s.has("kind")) {
    std::string kind;
    s.get("kind", kind);
    if (kind == "gaussian") {
      n.kind = ddpg::NoiseKind::Gaussian;
    } else if (kind == "ou") {
      n.kind = ddpg::NoiseKind::OrnsteinUhlenbeck;
    } else {
      throw ConfigError("'" + path + ".kind' must be \"gaussian\" or \"ou\"");
    }
  }
  s.get("start_scale", n.start_scale);
  s.get("end_scale", n.end_scale);
  s.get_u64("decay_steps", n.decay_steps);
  s.get("ou_theta", n.ou_theta);
}

json noise_json(const ddpg::NoiseConfig& n) {
  return {{"kind", n.kind == ddpg::NoiseKind::Gaussian ? "gaussian" : "ou"},
          {"start_scale", n.start_scale},
          {"end_scale", n.end_scale},
          {"decay_steps", n.decay_steps},
          {"ou_theta", n.ou_theta}};
}

void parse_agent(const json& j, const std::string& path, ddpg::AgentConfig& a) {
  Section s(j, path);
  s.get("hidden", a.hidden);
  s.get("actor_lr", a.actor_lr);
  s.get("critic_lr", a.critic_lr);
  s.get("gamma", a.gamma);
  s.get("tau", a.tau);
  s.get_size("batch_size", a.batch_size);
  s.get_size("buffer_capacity", a.buffer_capacity);
  s.get("final_layer_init", a.final_layer_init);
  s.get("invert_gradients", a.invert_gradients);
  if (s.has("noise")) parse_noise(s.sub("noise"), s.prefix() + "noise", a.noise);
}

json agent_json(const ddpg::AgentConfig& a) {
  return {{"hidden", a.hidden},
          {"actor_lr", a.actor_lr},
          {"critic_lr", a.critic_lr},
          {"gamma", a.gamma},
          {"tau", a.tau},
          {"batch_size", a.batch_size},
          {"buffer_capacity", a.buffer_capacity},
          {"final_layer_init", a.final_layer_init},
          {"invert_gradients", a.invert_gradients},
          {"noise", noise_json(a.noise)}};
}

void parse_scenario(const json& j, env::ScenarioConfig& c) {
  Section s(j, "scenario");
  if (s.has("mcp")) {
    Section m(s.sub("mcp"), "scenario.mcp");
    if (m.has("coefficients")) {
      std::vector<double> p;
      m.get("coefficients", p);
      if (p.size() != 6) throw ConfigError("'scenario.mcp.coefficients' needs exactly 6 values");
      std::copy(p.begin(), p.end(), c.mcp.coefficients.begin());
    }
    m.get("sigma", c.mcp.noise_sigma);
    if (m.has("time_unit")) {
      std::string u;
      m.get("time_unit", u);
      if (u == "slot") {
        c.mcp.time_unit = sim::McpTimeUnit::Slot;
      } else if (u == "hour") {
        c.mcp.time_unit = sim::McpTimeUnit::Hour;
      } else {
        throw ConfigError("'scenario.mcp.time_unit' must be \"slot\" or \"hour\"");
      }
    }
  }
  if (s.has("tou")) {
    Section t(s.sub("tou"), "scenario.tou");
    if (t.has("peak_hours")) c.tou.peak = parse_ranges(t.sub("peak_hours"), "scenario.tou.peak_hours");
    if (t.has("semi_peak_hours")) {
      c.tou.semi_peak = parse_ranges(t.sub("semi_peak_hours"), "scenario.tou.semi_peak_hours");
    }
    t.get("peak_rate", c.tou.peak_rate);
    t.get("semi_peak_rate", c.tou.semi_peak_rate);
    t.get("off_peak_rate", c.tou.off_peak_rate);
  }
  if (s.has("population")) {
    Section p(s.sub("population"), "scenario.population");
    p.get("count", c.population.count);
    if (p.has("elasticity_bands")) {
      const auto& b = p.sub("elasticity_bands");
      if (!b.is_array() || b.size() != 3) {
        throw ConfigError("'scenario.population.elasticity_bands' needs 3 [lo, hi] pairs (P, SP, OP)");
      }
      for (std::size_t i = 0; i < 3; ++i) {
        if (!b[i].is_array() || b[i].size() != 2) {
          throw ConfigError("'scenario.population.elasticity_bands' entries must be [lo, hi]");
        }
        c.population.elasticity_bands[i] = {b[i][0].get<double>(), b[i][1].get<double>()};
      }
    }
    p.get("load_min_kw", c.population.load_min_kw);
    p.get("load_max_kw", c.population.load_max_kw);
    if (p.has("load_template")) {
      std::string t;
      p.get("load_template", t);
      if (t == "flat") {
        c.population.load_template = sim::LoadTemplate::Flat;
      } else if (t == "peaked") {
        c.population.load_template = sim::LoadTemplate::Peaked;
      } else {
        throw ConfigError("'scenario.population.load_template' must be \"flat\" or \"peaked\"");
      }
    }
    p.get("peak_amplitude", c.population.peak_amplitude);
    p.get("peak_hour", c.population.peak_hour);
    p.get("peak_width_hours", c.population.peak_width_hours);
    p.get("history_jitter", c.population.history_jitter);
  }
  if (s.has("plans")) {
    Section p(s.sub("plans"), "scenario.plans");
    p.get("participation_probability", c.plans.participation_probability);
    p.get("center_factor", c.plans.center_factor);
    p.get("spread_factor", c.plans.spread_factor);
    p.get("max_price", c.plans.max_price);
  }
  if (s.has("reserve")) {
    Section r(s.sub("reserve"), "scenario.reserve");
    r.get("base", c.reserve.base);
    r.get("afternoon_dip", c.reserve.afternoon_dip);
    r.get("dip_hour", c.reserve.dip_hour);
    r.get("dip_width_hours", c.reserve.dip_width_hours);
    r.get("weekend_shift", c.reserve.weekend_shift);
    r.get("noise_sd", c.reserve.noise_sd);
    r.get("v_min", c.reserve.v_min);
    r.get("v_max", c.reserve.v_max);
  }
  if (s.has("event")) {
    Section e(s.sub("event"), "scenario.event");
    e.get("start_slot", c.event.start_slot);
    e.get("n_slots", c.event.n_slots);
    e.get("slot_hours", c.event.slot_hours);
  }
  if (s.has("bounds")) {
    Section b(s.sub("bounds"), "scenario.bounds");
    b.get("price_min", c.bounds.price_min);
    b.get("price_max", c.bounds.price_max);
    b.get("quantity_max", c.bounds.quantity_max);
  }
  s.get("first_day_of_year", c.first_day_of_year);
  s.get("first_weekday", c.first_weekday);
  s.get("include_date", c.include_date);
}

json scenario_json(const env::ScenarioConfig& c) {
  json bands = json::array();
  for (const auto& [lo, hi] : c.population.elasticity_bands) bands.push_back({lo, hi});
  return {
      {"mcp",
       {{"coefficients", c.mcp.coefficients},
        {"sigma", c.mcp.noise_sigma},
        {"time_unit", c.mcp.time_unit == sim::McpTimeUnit::Slot ? "slot" : "hour"}}},
      {"tou",
       {{"peak_hours", ranges_json(c.tou.peak)},
        {"semi_peak_hours", ranges_json(c.tou.semi_peak)},
        {"peak_rate", c.tou.peak_rate},
        {"semi_peak_rate", c.tou.semi_peak_rate},
        {"off_peak_rate", c.tou.off_peak_rate}}},
      {"population",
       {{"count", c.population.count},
        {"elasticity_bands", bands},
        {"load_min_kw", c.population.load_min_kw},
        {"load_max_kw", c.population.load_max_kw},
        {"load_template", c.population.load_template == sim::LoadTemplate::Flat ? "flat" : "peaked"},
        {"peak_amplitude", c.population.peak_amplitude},
        {"peak_hour", c.population.peak_hour},
        {"peak_width_hours", c.population.peak_width_hours},
        {"history_jitter", c.population.history_jitter}}},
      {"plans",
       {{"participation_probability", c.plans.participation_probability},
        {"center_factor", c.plans.center_factor},
        {"spread_factor", c.plans.spread_factor},
        {"max_price", c.plans.max_price}}},
      {"reserve",
       {{"base", c.reserve.base},
        {"afternoon_dip", c.reserve.afternoon_dip},
        {"dip_hour", c.reserve.dip_hour},
        {"dip_width_hours", c.reserve.dip_width_hours},
        {"weekend_shift", c.reserve.weekend_shift},
        {"noise_sd", c.reserve.noise_sd},
        {"v_min", c.reserve.v_min},
        {"v_max", c.reserve.v_max}}},
      {"event",
       {{"start_slot", c.event.start_slot}, {"n_slots", c.event.n_slots}, {"slot_hours", c.event.slot_hours}}},
      {"bounds",
       {{"price_min", c.bounds.price_min},
        {"price_max", c.bounds.price_max},
        {"quantity_max", c.bounds.quantity_max}}},
      {"first_day_of_year", c.first_day_of_year},
      {"first_weekday", c.first_weekday},
      {"include_date", c.include_date}};
}

void parse_baseline(const json& j, baseline::BaselineConfig& b) {
  Section s(j, "baseline");
  s.get("hidden", b.hidden);
  s.get("learning_rate", b.learning_rate);
  s.get("epochs", b.epochs);
  s.get_size("batch_size", b.batch_size);
}

void parse_pipeline(const json& j, PipelineConfig& p) {
  Section s(j, "pipeline");
  s.get("offline_days", p.offline_days);
  s.get("pretrain_days", p.pretrain_days);
  s.get("online_days", p.online_days);
  s.get("episodes", p.episodes);
  s.get("pretrain_episodes", p.pretrain_episodes);
  s.get("reward_scale", p.reward_scale);
  s.get("checkpoint_interval", p.checkpoint_interval);
  s.get("online_learn", p.online_learn);
  s.get("online_explore", p.online_explore);
  s.get("offline_success_threshold", p.offline_success_threshold);
  s.get("online_success_threshold", p.online_success_threshold);
  s.get("workers", p.workers);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

void validate_agent(const ddpg::AgentConfig& a, const std::string& path) {
  require(!a.hidden.empty(), path + ".hidden must list at least one layer");
  for (auto h : a.hidden) require(h > 0, path + ".hidden sizes must be positive");
  require(a.actor_lr > 0.0 && a.critic_lr > 0.0, path + " learning rates must be positive");
  require(a.gamma >= 0.0 && a.gamma <= 1.0, path + ".gamma must lie in [0, 1]");
  require(a.tau >= 0.0 && a.tau <= 1.0, path + ".tau must lie in [0, 1]");
  require(a.batch_size > 0, path + ".batch_size must be positive");
  require(a.buffer_capacity >= a.batch_size, path + ".buffer_capacity must hold at least one batch");
  require(a.final_layer_init >= 0.0, path + ".final_layer_init must be non-negative");
  require(a.noise.start_scale >= 0.0 && a.noise.end_scale >= 0.0, path + ".noise scales must be non-negative");
  require(a.noise.end_scale <= a.noise.start_scale, path + ".noise must not increase over training");
  require(a.noise.ou_theta >= 0.0 && a.noise.ou_theta <= 1.0, path + ".noise.ou_theta must lie in [0, 1]");
}

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

double scenario_sigma(int scenario) {
  switch (scenario) {
    case 1: return 0.0;
    case 2: return 0.2;
    case 3: return 0.5;
    default: throw ConfigError("scenario must be 1, 2 or 3");
  }
}

RunConfig from_json(const json& j) {
  RunConfig c;
  {
    Section s(j, "");
    s.get_u64("seed", c.seed);
    if (s.has("scenario")) parse_scenario(s.sub("scenario"), c.scenario);
    if (s.has("agent")) {
      parse_agent(s.sub("agent"), "agent", c.price_agent);
      parse_agent(s.sub("agent"), "agent", c.quantity_agent);
    }
    if (s.has("price_agent")) parse_agent(s.sub("price_agent"), "price_agent", c.price_agent);
    if (s.has("quantity_agent")) parse_agent(s.sub("quantity_agent"), "quantity_agent", c.quantity_agent);
    if (s.has("baseline")) parse_baseline(s.sub("baseline"), c.baseline);
    if (s.has("pipeline")) parse_pipeline(s.sub("pipeline"), c.pipeline);
    if (s.has("grid")) {
      const auto& g = s.sub("grid");
      if (!g.is_object()) throw ConfigError("'grid' must map keys to value lists");
      for (const auto& [key, values] : g.items()) {
        if (!values.is_array() || values.empty()) throw ConfigError("grid key '" + key + "' needs a non-empty list");
        std::vector<double> v;
        for (const auto& x : values) {
          if (!x.is_number()) throw ConfigError("grid key '" + key + "' must list numbers");
          v.push_back(x.get<double>());
        }
        c.grid[key] = std::move(v);
      }
    }
  }
  c.scenario.seed = c.seed;
  validate(c);
  for (const auto& [key, values] : c.grid) {
    for (double v : values) (void)with_override(c, key, v);
  }
  return c;
}

RunConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(j);
}

json to_json(const RunConfig& c) {
  json grid = json::object();
  for (const auto& [key, values] : c.grid) grid[key] = values;
  const auto& p = c.pipeline;
  return {{"seed", c.seed},
          {"scenario", scenario_json(c.scenario)},
          {"price_agent", agent_json(c.price_agent)},
          {"quantity_agent", agent_json(c.quantity_agent)},
          {"baseline",
           {{"hidden", c.baseline.hidden},
            {"learning_rate", c.baseline.learning_rate},
            {"epochs", c.baseline.epochs},
            {"batch_size", c.baseline.batch_size}}},
          {"pipeline",
           {{"offline_days", p.offline_days},
            {"pretrain_days", p.pretrain_days},
            {"online_days", p.online_days},
            {"episodes", p.episodes},
            {"pretrain_episodes", p.pretrain_episodes},
            {"reward_scale", p.reward_scale},
            {"checkpoint_interval", p.checkpoint_interval},
            {"online_learn", p.online_learn},
            {"online_explore", p.online_explore},
            {"offline_success_threshold", p.offline_success_threshold},
            {"online_success_threshold", p.online_success_threshold},
            {"workers", p.workers}}},
          {"grid", grid}};
}

void validate(const RunConfig& c) {
  const auto& s = c.scenario;
  require(s.mcp.noise_sigma >= 0.0, "scenario.mcp.sigma must be non-negative");
  for (double p : s.mcp.coefficients) require(std::isfinite(p), "scenario.mcp.coefficients must be finite");
  require(s.tou.peak_rate > 0.0 && s.tou.semi_peak_rate > 0.0 && s.tou.off_peak_rate > 0.0,
          "scenario.tou rates must be positive");
  for (const auto* ranges : {&s.tou.peak, &s.tou.semi_peak}) {
    for (const auto& r : *ranges) {
      require(r.begin >= 0 && r.end <= 24 && r.begin < r.end, "scenario.tou hour ranges must lie within [0, 24)");
    }
  }
  require(s.population.count >= 1, "scenario.population.count must be at least 1");
  for (const auto& [lo, hi] : s.population.elasticity_bands) {
    require(lo <= hi && hi <= 0.0, "scenario.population.elasticity_bands must be [lo, hi] with lo <= hi <= 0");
  }
  require(s.population.load_min_kw > 0.0 && s.population.load_min_kw <= s.population.load_max_kw,
          "scenario.population load range must be positive and ordered");
  require(s.population.history_jitter >= 0.0 && s.population.history_jitter < 1.0,
          "scenario.population.history_jitter must lie in [0, 1)");
  require(s.plans.participation_probability >= 0.0 && s.plans.participation_probability <= 1.0,
          "scenario.plans.participation_probability must lie in [0, 1]");
  require(s.plans.center_factor > 0.0 && s.plans.spread_factor >= 0.0 && s.plans.max_price > 0.0,
          "scenario.plans factors must be positive");
  require(s.reserve.v_min >= 0.0 && s.reserve.v_min < s.reserve.v_max && s.reserve.v_max <= 1.0,
          "scenario.reserve bounds must satisfy 0 <= v_min < v_max <= 1");
  require(s.reserve.noise_sd >= 0.0, "scenario.reserve.noise_sd must be non-negative");
  try {
    s.event.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("scenario.event: ") + e.what());
  }
  require(s.bounds.price_min == 0.0, "scenario.bounds.price_min must be 0 (bidding 0 means sitting out)");
  require(s.bounds.price_max > 0.0 && s.bounds.quantity_max > 0.0, "scenario.bounds maxima must be positive");
  require(s.first_day_of_year >= 1 && s.first_day_of_year <= 365, "scenario.first_day_of_year must lie in [1, 365]");
  require(s.first_weekday >= 0 && s.first_weekday <= 6, "scenario.first_weekday must lie in [0, 6]");

  validate_agent(c.price_agent, "price_agent");
  validate_agent(c.quantity_agent, "quantity_agent");

  require(!c.baseline.hidden.empty(), "baseline.hidden must list at least one layer");
  for (auto h : c.baseline.hidden) require(h > 0, "baseline.hidden sizes must be positive");
  require(c.baseline.learning_rate > 0.0, "baseline.learning_rate must be positive");
  require(c.baseline.epochs >= 0, "baseline.epochs must be non-negative");
  require(c.baseline.batch_size > 0, "baseline.batch_size must be positive");

  const auto& p = c.pipeline;
  require(p.offline_days >= 0 && p.pretrain_days >= 0 && p.online_days >= 0, "pipeline day counts must be >= 0");
  require(p.episodes >= 0 && p.pretrain_episodes >= 0, "pipeline episode counts must be >= 0");
  require(p.reward_scale > 0.0, "pipeline.reward_scale must be positive");
  require(p.checkpoint_interval >= 0, "pipeline.checkpoint_interval must be >= 0");
  require(p.offline_success_threshold >= 0.0 && p.offline_success_threshold <= 1.0,
          "pipeline.offline_success_threshold must lie in [0, 1]");
  require(p.online_success_threshold >= 0.0 && p.online_success_threshold <= 1.0,
          "pipeline.online_success_threshold must lie in [0, 1]");
  require(p.workers >= 1, "pipeline.workers must be at least 1");
}

RunConfig with_override(const RunConfig& c, const std::string& key, double value) {
  json j = to_json(c);
  j.erase("grid");
  std::vector<std::string> parts;
  {
    std::stringstream ss(key);
    std::string part;
    while (std::getline(ss, part, '.')) parts.push_back(part);
  }
  if (parts.size() < 2) throw ConfigError("grid key '" + key + "' must be a dotted path like agent.gamma");

  auto set_path = [&](json& root, std::size_t from) {
    json* node = &root;
    for (std::size_t i = from; i + 1 < parts.size(); ++i) {
      if (!node->is_object() || !node->contains(parts[i])) throw ConfigError("unknown grid key '" + key + "'");
      node = &(*node)[parts[i]];
    }
    if (!node->is_object() || !node->contains(parts.back())) throw ConfigError("unknown grid key '" + key + "'");
    json& leaf = (*node)[parts.back()];
    if (leaf.is_number_integer() || leaf.is_number_unsigned()) {
      if (value != std::floor(value)) throw ConfigError("grid key '" + key + "' takes integer values");
      if (leaf.is_number_unsigned()) {
        if (value < 0) throw ConfigError("grid key '" + key + "' takes non-negative values");
        leaf = static_cast<std::uint64_t>(value);
      } else {
        leaf = static_cast<std::int64_t>(value);
      }
    } else if (leaf.is_number_float()) {
      leaf = value;
    } else if (leaf.is_boolean()) {
      leaf = value != 0.0;
    } else {
      throw ConfigError("grid key '" + key + "' does not name a numeric setting");
    }
  };

  if (parts[0] == "agent") {
    std::vector<std::string> rest(parts.begin() + 1, parts.end());
    parts.assign({"price_agent"});
    parts.insert(parts.end(), rest.begin(), rest.end());
    set_path(j, 0);
    parts[0] = "quantity_agent";
    set_path(j, 0);
  } else {
    set_path(j, 0);
  }
  RunConfig out = from_json(j);
  out.grid = c.grid;
  return out;
}

std::string config_hash(const RunConfig& c) { return fnv1a_hex(to_json(c).dump()); }

}  // namespace drbid::config
