#include "drbid/environment.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

namespace drbid::env {

namespace {
constexpr std::uint64_t kPopulationStream = 0x706f70;  // "pop"
constexpr double kDaysPerYear = 365.0;
constexpr double kLastSlot = sim::kSlotsPerDay - 1;
}  // namespace

Scenario make_scenario(const ScenarioConfig& config) {
  config.event.validate();
  if (config.event.end_slot() > sim::kSlotsPerDay) {
    throw std::invalid_argument("DB event must end within the day");
  }
  Rng rng(config.seed, kPopulationStream);
  return Scenario{config, sim::generate_population(config.population, rng)};
}

sim::DayContext day_context(const ScenarioConfig& config, int day_index) {
  sim::DayContext ctx;
  ctx.day_index = day_index;
  ctx.day_of_year = (config.first_day_of_year - 1 + day_index) % 365 + 1;
  const int weekday = (config.first_weekday + day_index) % 7;
  ctx.weekend = weekday >= 5;
  return ctx;
}

std::vector<double> EventDay::offers_at(std::size_t n) const {
  std::vector<double> out;
  out.reserve(plans.size());
  for (const auto& p : plans) out.push_back(p.prices.at(n));
  return out;
}

double EventDay::mcp_at(const Scenario& scenario, std::size_t n) const {
  const int slot = scenario.config.event.start_slot + static_cast<int>(n);
  return sim::mcp_from_draw(scenario.config.mcp, slot, reserve.at(n), mcp_noise.at(n));
}

EventDay generate_day(const Scenario& scenario, const sim::DayContext& context, Rng& rng) {
  const auto& cfg = scenario.config;
  EventDay day;
  day.context = context;
  day.reserve.reserve(static_cast<std::size_t>(cfg.event.n_slots));
  for (int n = 0; n < cfg.event.n_slots; ++n) {
    day.reserve.push_back(sim::simulate_reserve(cfg.reserve, context, cfg.event.start_slot + n, rng));
  }
  day.plans = sim::generate_participation_plans(scenario.customers, cfg.event, cfg.tou, cfg.plans, rng);
  day.cbl_kw.reserve(scenario.customers.size());
  for (const auto& c : scenario.customers) {
    const auto history = sim::simulate_cbl_history(c, cfg.event, cfg.population.history_jitter, rng);
    day.cbl_kw.push_back(market::compute_cbl(history));
  }
  day.mcp_noise.reserve(static_cast<std::size_t>(cfg.event.n_slots));
  for (int n = 0; n < cfg.event.n_slots; ++n) day.mcp_noise.push_back(rng.normal());
  return day;
}

StateCodec::StateCodec(std::size_t customers, double price_max, double reserve_max,
                       bool include_date)
    : customers_(customers),
      price_max_(price_max),
      reserve_max_(reserve_max),
      include_date_(include_date) {
  if (!(price_max > 0.0) || !(reserve_max > 0.0)) {
    throw std::invalid_argument("state normalisers must be positive");
  }
}

StateCodec::StateCodec(const Scenario& scenario)
    : StateCodec(scenario.customer_count(), scenario.config.bounds.price_max,
                 scenario.config.reserve.v_max, scenario.config.include_date) {}

std::vector<double> StateCodec::encode(const EnvState& state) const {
  if (state.offers.size() != customers_) {
    throw std::invalid_argument("state has the wrong number of customer offers");
  }
  std::vector<double> f;
  f.reserve(size());
  f.push_back(state.slot / kLastSlot);
  f.push_back(include_date_ ? state.day_of_year / kDaysPerYear : 0.0);
  f.push_back(state.weekend ? 1.0 : 0.0);
  for (double o : state.offers) f.push_back(o / price_max_);
  f.push_back(state.reserve / reserve_max_);
  return f;
}

EnvState StateCodec::decode(std::span<const double> features) const {
  if (features.size() != size()) throw std::invalid_argument("feature vector has the wrong length");
  EnvState s;
  s.slot = static_cast<int>(std::lround(features[0] * kLastSlot));
  s.day_of_year = static_cast<int>(std::lround(features[1] * kDaysPerYear));
  s.weekend = features[2] > 0.5;
  s.offers.reserve(customers_);
  for (std::size_t i = 0; i < customers_; ++i) s.offers.push_back(features[3 + i] * price_max_);
  s.reserve = features[3 + customers_] * reserve_max_;
  return s;
}

Environment::Environment(std::shared_ptr<const Scenario> scenario, McpSource source)
    : scenario_(std::move(scenario)), source_(source) {
  if (!scenario_) throw std::invalid_argument("environment needs a scenario");
}

EnvState Environment::state_at(std::size_t n) const {
  EnvState s;
  s.slot = scenario_->config.event.start_slot + static_cast<int>(n);
  s.day_of_year = day_.context.day_of_year;
  s.weekend = day_.context.weekend;
  s.offers = day_.offers_at(n);
  s.reserve = day_.reserve.at(n);
  return s;
}

EnvState Environment::reset(const EventDay& day) {
  const auto n_slots = static_cast<std::size_t>(scenario_->config.event.n_slots);
  if (day.plans.size() != scenario_->customer_count() || day.cbl_kw.size() != scenario_->customer_count() ||
      day.reserve.size() != n_slots || day.mcp_noise.size() != n_slots) {
    throw std::invalid_argument("event day does not match the scenario dimensions");
  }
  day_ = day;
  n_ = 0;
  revealed_ = 0;
  done_ = false;
  state_ = state_at(0);
  return state_;
}

EnvState Environment::reset(const sim::DayContext& context, Rng& rng) {
  return reset(generate_day(*scenario_, context, rng));
}

EnvAction Environment::clip(const EnvAction& action, bool* clipped) const {
  const auto& b = scenario_->config.bounds;
  EnvAction out;
  const double price = std::isnan(action.price) ? b.price_min : action.price;
  const double quantity = std::isnan(action.quantity) ? 0.0 : action.quantity;
  out.price = std::clamp(price, b.price_min, b.price_max);
  out.quantity = std::max(0.0, quantity);
  if (clipped) *clipped = out.price != action.price || out.quantity != action.quantity;
  return out;
}

StepResult Environment::step(const EnvAction& action, Rng* rng) {
  if (done_) throw std::logic_error("step() called on a finished episode; call reset()");
  const auto& cfg = scenario_->config;
  const int slot = cfg.event.start_slot + static_cast<int>(n_);

  StepResult result;
  const EnvAction a = clip(action, &result.clipped);

  double mcp = 0.0;
  if (source_ == McpSource::Simulate) {
    if (!rng) throw std::invalid_argument("simulated prices need an rng");
    mcp = sim::simulate_mcp(cfg.mcp, slot, day_.reserve.at(n_), *rng);
  } else {
    mcp = day_.mcp_at(*scenario_, n_);
  }
  ++revealed_;

  const market::Bid bid{a.price, a.quantity};
  const bool win = bid.price <= mcp;
  const auto offers = day_.offers_at(n_);
  auto settlement = market::settle_customers(offers, bid.price);
  if (!win) std::fill(settlement.begin(), settlement.end(), 0);

  std::vector<market::ConsumptionRecord> records;
  records.reserve(offers.size());
  for (std::size_t i = 0; i < offers.size(); ++i) {
    const double p = sim::simulate_consumption(scenario_->customers[i], cfg.tou, slot,
                                               settlement[i] != 0, offers[i]);
    records.push_back({static_cast<int>(i), slot, p, day_.cbl_kw[i]});
  }

  result.outcome = market::settle_slot(slot, bid, mcp, offers, settlement, records, cfg.event.slot_hours);
  result.reward = result.outcome.profit;

#ifndef NDEBUG
  {
    double cost = 0.0;
    for (std::size_t i = 0; i < offers.size(); ++i) {
      if (result.outcome.settlement[i]) cost += offers[i] * result.outcome.per_customer_shed_kw[i];
    }
    const double expected =
        result.outcome.win
            ? (result.outcome.alpha * bid.price * result.outcome.q_act - cost) * cfg.event.slot_hours
            : 0.0;
    assert(std::abs(expected - result.reward) <= 1e-9 * (1.0 + std::abs(expected)));
  }
#endif

  ++n_;
  result.terminal = n_ >= static_cast<std::size_t>(cfg.event.n_slots);
  done_ = result.terminal;
  if (!result.terminal) state_ = state_at(n_);
  result.next_state = state_;
  return result;
}

}  // namespace drbid::env
