#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "drbid/market_rules.hpp"
#include "drbid/rng.hpp"
#include "drbid/simulators.hpp"

namespace drbid::env {

struct ScenarioConfig {
  sim::McpModel mcp;
  sim::TouSchedule tou;
  sim::PopulationConfig population;
  sim::PlanConfig plans;
  sim::ReserveModel reserve;
  market::DbEvent event;
  market::BidBounds bounds;
  int first_day_of_year{152};
  int first_weekday{0};  // 0 = Monday
  bool include_date{true};
  std::uint64_t seed{1};
};

// A configured world: the scenario parameters plus the customer population
// drawn from them.
struct Scenario {
  ScenarioConfig config;
  std::vector<sim::CustomerProfile> customers;

  std::size_t customer_count() const noexcept { return customers.size(); }
};

Scenario make_scenario(const ScenarioConfig& config);

sim::DayContext day_context(const ScenarioConfig& config, int day_index);

// Everything the world holds for one event day, including the frozen noise
// draws behind the clearing prices.
struct EventDay {
  sim::DayContext context;
  std::vector<market::ParticipationPlan> plans;
  std::vector<double> reserve;     // per event slot
  std::vector<double> cbl_kw;      // per customer
  std::vector<double> mcp_noise;   // standard-normal draw per event slot

  double offer(std::size_t customer, std::size_t n) const { return plans.at(customer).prices.at(n); }
  std::vector<double> offers_at(std::size_t n) const;
  double mcp_at(const Scenario& scenario, std::size_t n) const;
};

EventDay generate_day(const Scenario& scenario, const sim::DayContext& context, Rng& rng);

struct EnvState {
  int slot{0};
  int day_of_year{1};
  bool weekend{false};
  std::vector<double> offers;
  double reserve{0.0};
};

// Fixed normalisation of EnvState into network features:
// [t/95, d/365, w, offers/price_max..., V/v_max].
class StateCodec {
 public:
  StateCodec(std::size_t customers, double price_max, double reserve_max, bool include_date = true);
  explicit StateCodec(const Scenario& scenario);

  std::size_t size() const noexcept { return 4 + customers_; }
  std::vector<double> encode(const EnvState& state) const;
  EnvState decode(std::span<const double> features) const;

 private:
  std::size_t customers_;
  double price_max_;
  double reserve_max_;
  bool include_date_;
};

struct EnvAction {
  double price{0.0};
  double quantity{0.0};
};

struct StepResult {
  double reward{0.0};
  EnvState next_state;
  bool terminal{false};
  bool clipped{false};
  market::SlotOutcome outcome;
};

enum class McpSource { Replay, Simulate };

// One demand-bidding event as an episode: reset() loads a day, each step()
// settles one slot.
class Environment {
 public:
  explicit Environment(std::shared_ptr<const Scenario> scenario,
                       McpSource source = McpSource::Replay);

  EnvState reset(const EventDay& day);
  EnvState reset(const sim::DayContext& context, Rng& rng);

  // `rng` is only consulted when prices are simulated rather than replayed.
  StepResult step(const EnvAction& action, Rng* rng = nullptr);

  const EnvState& state() const noexcept { return state_; }
  const EventDay& day() const noexcept { return day_; }
  const Scenario& scenario() const noexcept { return *scenario_; }
  std::size_t slot_index() const noexcept { return n_; }
  bool done() const noexcept { return done_; }
  // Number of clearing prices revealed so far in this episode.
  std::size_t prices_revealed() const noexcept { return revealed_; }

  EnvAction clip(const EnvAction& action, bool* clipped = nullptr) const;

 private:
  EnvState state_at(std::size_t n) const;

  std::shared_ptr<const Scenario> scenario_;
  McpSource source_;
  EventDay day_;
  EnvState state_;
  std::size_t n_{0};
  std::size_t revealed_{0};
  bool done_{true};
};

}  // namespace drbid::env
