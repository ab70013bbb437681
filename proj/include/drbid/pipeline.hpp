#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "drbid/ddpg.hpp"
#include "drbid/environment.hpp"

namespace drbid::pipeline {

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int last_good_episode)
      : std::runtime_error(what), last_good_episode_(last_good_episode) {}
  int last_good_episode() const noexcept { return last_good_episode_; }

 private:
  int last_good_episode_;
};

struct Dataset {
  std::vector<env::EventDay> days;

  std::size_t periods(const env::Scenario& scenario) const noexcept {
    return days.size() * static_cast<std::size_t>(scenario.config.event.n_slots);
  }
  const env::EventDay* find(int day_index) const;
};

// Days [first_day, first_day + n_days). Each day draws from its own stream so
// a day's content does not depend on which other days were built.
Dataset build_dataset(const env::Scenario& scenario, int first_day, int n_days, std::uint64_t seed);

struct OutcomeRow {
  int episode{0};
  int day{0};
  int slot{0};
  double reserve{0.0};
  market::SlotOutcome outcome;
};

using OutcomeLog = std::vector<OutcomeRow>;

struct RunMetrics {
  std::size_t periods{0};
  double success_rate{0.0};
  double rate_tight{0.0};  // 0.8 <= xi <= 1.2
  double rate_loose{0.0};  // 0.6 <= xi <= 1.5
  double win_rate{0.0};    // bid cleared and curtailment delivered
  double total_profit{0.0};
};

RunMetrics compute_metrics(std::span<const OutcomeRow> log);

// Something that turns an observed state into a bid.
class BidPolicy {
 public:
  virtual ~BidPolicy() = default;
  virtual env::EnvAction decide(const env::EnvState& state, std::span<const double> features) = 0;
  virtual std::string_view label() const = 0;
};

class NeutralPolicy final : public BidPolicy {
 public:
  env::EnvAction decide(const env::EnvState&, std::span<const double>) override { return {}; }
  std::string_view label() const override { return "neutral"; }
};

struct AgentPair {
  ddpg::Agent price;
  ddpg::Agent quantity;
};

AgentPair make_agents(const env::Scenario& scenario, const ddpg::AgentConfig& price_config,
                      const ddpg::AgentConfig& quantity_config, std::uint64_t seed);
inline AgentPair make_agents(const env::Scenario& scenario, const ddpg::AgentConfig& config, std::uint64_t seed) {
  return make_agents(scenario, config, config, seed);
}

// Greedy (noise-free) use of a trained agent pair.
class AgentPolicy final : public BidPolicy {
 public:
  explicit AgentPolicy(const AgentPair& agents) : agents_(&agents) {}
  env::EnvAction decide(const env::EnvState& state, std::span<const double> features) override;
  std::string_view label() const override { return "agents"; }

 private:
  const AgentPair* agents_;
};

// Replays the dataset's frozen draws under a fixed policy. No learning.
OutcomeLog evaluate(std::shared_ptr<const env::Scenario> scenario, const Dataset& dataset,
                    BidPolicy& policy);

struct TrainingOptions {
  int episodes{150};
  double reward_scale{100.0};
  // Called after every `checkpoint_interval` episodes (0 disables).
  int checkpoint_interval{0};
  std::function<void(int episode, const AgentPair&)> on_checkpoint;
  std::function<void(int episode, double cumulative_profit)> on_episode;
  // Every settled training period, exploration included.
  std::function<void(const OutcomeRow&)> on_period;
};

struct OfflineResult {
  std::vector<double> cumulative_profit;  // per episode, raw currency
  ddpg::LearnDiagnostics last_price_diag;
  ddpg::LearnDiagnostics last_quantity_diag;
};

// Each episode is one full pass over the dataset; both agents take one learning
// step per stored transition.
OfflineResult train_offline(std::shared_ptr<const env::Scenario> scenario, AgentPair& agents,
                            const Dataset& dataset, const TrainingOptions& options, Rng& rng);

struct OnlineOptions {
  bool learn{true};
  // Explore at the end of each agent's annealing schedule.
  bool explore{true};
  double reward_scale{100.0};
};

struct OnlineResult {
  OutcomeLog log;
  RunMetrics metrics;
};

// Act-then-learn over new days: each period's bid is fixed before its
// clearing price is revealed, and only then does the period enter learning.
OnlineResult train_online(std::shared_ptr<const env::Scenario> scenario, AgentPair& agents,
                          const Dataset& dataset, const OnlineOptions& options, Rng& rng);

// Grid search ---------------------------------------------------------------

struct GridPoint {
  std::vector<std::pair<std::string, double>> values;  // sorted by key

  std::string describe() const;
};

// Cartesian product over sorted keys and ascending values (duplicates
// dropped), last key varying fastest, so grid order is lexicographic.
std::vector<GridPoint> expand_grid(const std::map<std::string, std::vector<double>>& grid);

struct GridEvaluation {
  GridPoint point;
  RunMetrics metrics;
  double cumulative_profit{0.0};
  bool qualifies{false};
};

struct GridResult {
  std::vector<GridEvaluation> evaluations;  // in grid order
  std::optional<std::size_t> best;          // empty: nothing met the threshold
};

using GridEvaluator = std::function<GridEvaluation(const GridPoint&)>;

// Evaluates every point (on up to `workers` threads) and keeps those whose
// success rate meets `success_threshold`. Among those the highest success rate
// wins, then the higher cumulative profit, then the earlier point.
GridResult grid_search(std::span<const GridPoint> points, const GridEvaluator& evaluate_point,
                       double success_threshold, unsigned workers = 1);

}  // namespace drbid::pipeline
