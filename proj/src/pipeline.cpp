#include "drbid/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

namespace drbid::pipeline {

namespace {

constexpr std::uint64_t kDayStreamBase = 0x64617900;  // "day"
constexpr std::uint64_t kAgentInitStream = 0x696e6974;
constexpr std::uint64_t kPriceStream = 1;
constexpr std::uint64_t kQuantityStream = 2;

std::vector<ddpg::Scalar> to_features(const env::StateCodec& codec, const env::EnvState& state) {
  const auto f = codec.encode(state);
  return {f.begin(), f.end()};
}

OutcomeRow make_row(int episode, const env::Environment& env, const env::StepResult& step) {
  OutcomeRow row;
  row.episode = episode;
  row.day = env.day().context.day_index;
  row.slot = step.outcome.slot;
  row.reserve = env.day().reserve.at(static_cast<std::size_t>(step.outcome.slot -
                                                              env.scenario().config.event.start_slot));
  row.outcome = step.outcome;
  return row;
}

bool in_band(const market::ExecutionRate& xi, double lo, double hi) {
  return xi.finite() && xi.value >= lo && xi.value <= hi;
}

}  // namespace

const env::EventDay* Dataset::find(int day_index) const {
  for (const auto& d : days)
    if (d.context.day_index == day_index) return &d;
  return nullptr;
}

Dataset build_dataset(const env::Scenario& scenario, int first_day, int n_days, std::uint64_t seed) {
  if (n_days < 0) throw std::invalid_argument("day count must be non-negative");
  Dataset ds;
  ds.days.reserve(static_cast<std::size_t>(n_days));
  for (int d = first_day; d < first_day + n_days; ++d) {
    Rng rng(seed, kDayStreamBase + static_cast<std::uint64_t>(d));
    ds.days.push_back(env::generate_day(scenario, env::day_context(scenario.config, d), rng));
  }
  return ds;
}

RunMetrics compute_metrics(std::span<const OutcomeRow> log) {
  if (log.empty()) throw std::invalid_argument("cannot compute metrics of an empty outcome log");
  RunMetrics m;
  m.periods = log.size();
  std::size_t success = 0, tight = 0, loose = 0, wins = 0;
  for (const auto& row : log) {
    const auto& o = row.outcome;
    if (o.profit > 0.0) ++success;
    if (in_band(o.xi, 0.8, 1.2)) ++tight;
    if (in_band(o.xi, 0.6, 1.5)) ++loose;
    if (o.deal()) ++wins;
    m.total_profit += o.profit;
  }
  const double n = static_cast<double>(log.size());
  m.success_rate = static_cast<double>(success) / n;
  m.rate_tight = static_cast<double>(tight) / n;
  m.rate_loose = static_cast<double>(loose) / n;
  m.win_rate = static_cast<double>(wins) / n;
  return m;
}

AgentPair make_agents(const env::Scenario& scenario, const ddpg::AgentConfig& price_config,
                      const ddpg::AgentConfig& quantity_config, std::uint64_t seed) {
  const env::StateCodec codec(scenario);
  const auto& b = scenario.config.bounds;
  Rng init(seed, kAgentInitStream);
  ddpg::Agent price(ddpg::Role::Price, {b.price_min, b.price_max}, codec.size(), price_config, init);
  ddpg::Agent quantity(ddpg::Role::Quantity, {0.0, b.quantity_max}, codec.size(), quantity_config, init);
  return AgentPair{std::move(price), std::move(quantity)};
}

env::EnvAction AgentPolicy::decide(const env::EnvState&, std::span<const double> features) {
  const std::vector<ddpg::Scalar> f(features.begin(), features.end());
  return {agents_->price.greedy_action(f), agents_->quantity.greedy_action(f)};
}

OutcomeLog evaluate(std::shared_ptr<const env::Scenario> scenario, const Dataset& dataset,
                    BidPolicy& policy) {
  env::Environment env(scenario, env::McpSource::Replay);
  const env::StateCodec codec(*scenario);
  OutcomeLog log;
  log.reserve(dataset.periods(*scenario));
  for (const auto& day : dataset.days) {
    auto state = env.reset(day);
    while (!env.done()) {
      const auto features = codec.encode(state);
      const auto step = env.step(policy.decide(state, features));
      log.push_back(make_row(0, env, step));
      state = step.next_state;
    }
  }
  return log;
}

OfflineResult train_offline(std::shared_ptr<const env::Scenario> scenario, AgentPair& agents,
                            const Dataset& dataset, const TrainingOptions& options, Rng& rng) {
  if (options.episodes < 0) throw std::invalid_argument("episode count must be non-negative");
  if (!(options.reward_scale > 0.0)) throw std::invalid_argument("reward scale must be positive");
  OfflineResult result;
  if (options.episodes == 0 || dataset.days.empty()) return result;

  env::Environment env(scenario, env::McpSource::Replay);
  const env::StateCodec codec(*scenario);
  const auto total_steps = static_cast<std::uint64_t>(options.episodes) * dataset.periods(*scenario);
  agents.price.noise().set_decay_steps(agents.price.noise().step() + total_steps);
  agents.quantity.noise().set_decay_steps(agents.quantity.noise().step() + total_steps);
  Rng price_rng = rng.split(kPriceStream);
  Rng quantity_rng = rng.split(kQuantityStream);

  for (int episode = 1; episode <= options.episodes; ++episode) {
    double cumulative = 0.0;
    for (const auto& day : dataset.days) {
      auto state = env.reset(day);
      auto features = to_features(codec, state);
      agents.price.noise().reset_state();
      agents.quantity.noise().reset_state();
      while (!env.done()) {
        const double price = agents.price.act(std::span<const ddpg::Scalar>(features), true, price_rng);
        const double quantity =
            agents.quantity.act(std::span<const ddpg::Scalar>(features), true, quantity_rng);
        const auto step = env.step({price, quantity});
        cumulative += step.reward;
        if (options.on_period) options.on_period(make_row(episode, env, step));
        auto next = to_features(codec, step.next_state);
        const double r = step.reward / options.reward_scale;
        agents.price.observe({features, step.outcome.bid.price, r, next, step.terminal});
        agents.quantity.observe({features, step.outcome.bid.quantity, r, next, step.terminal});
        try {
          result.last_price_diag = agents.price.learn_step(price_rng);
          result.last_quantity_diag = agents.quantity.learn_step(quantity_rng);
        } catch (const nn::NonFiniteGradient& e) {
          throw TrainingError(std::string("training diverged: ") + e.what(), episode - 1);
        }
        if (!std::isfinite(result.last_price_diag.critic_loss) ||
            !std::isfinite(result.last_quantity_diag.critic_loss)) {
          throw TrainingError("training diverged: non-finite critic loss", episode - 1);
        }
        features = std::move(next);
      }
    }
    result.cumulative_profit.push_back(cumulative);
    if (options.on_episode) options.on_episode(episode, cumulative);
    if (options.checkpoint_interval > 0 && options.on_checkpoint &&
        (episode % options.checkpoint_interval == 0 || episode == options.episodes)) {
      options.on_checkpoint(episode, agents);
    }
  }
  return result;
}

OnlineResult train_online(std::shared_ptr<const env::Scenario> scenario, AgentPair& agents,
                          const Dataset& dataset, const OnlineOptions& options, Rng& rng) {
  if (!(options.reward_scale > 0.0)) throw std::invalid_argument("reward scale must be positive");
  env::Environment env(scenario, env::McpSource::Replay);
  const env::StateCodec codec(*scenario);
  Rng price_rng = rng.split(kPriceStream);
  Rng quantity_rng = rng.split(kQuantityStream);
  OnlineResult result;
  // Pretraining already annealed the schedules; pin them at their end scale.
  agents.price.noise().set_decay_steps(agents.price.noise().step());
  agents.quantity.noise().set_decay_steps(agents.quantity.noise().step());

  for (const auto& day : dataset.days) {
    auto state = env.reset(day);
    while (!env.done()) {
      // The bid for this period is fixed before its clearing price exists.
      if (env.prices_revealed() != env.slot_index()) {
        throw std::logic_error("online loop acted after the period's price was revealed");
      }
      auto features = to_features(codec, state);
      const std::span<const ddpg::Scalar> fs(features);
      const double price = agents.price.act(fs, options.explore, price_rng);
      const double quantity = agents.quantity.act(fs, options.explore, quantity_rng);
      const auto step = env.step({price, quantity});
      result.log.push_back(make_row(0, env, step));

      if (options.learn) {
        auto next = to_features(codec, step.next_state);
        const double r = step.reward / options.reward_scale;
        agents.price.observe({features, step.outcome.bid.price, r, next, step.terminal});
        agents.quantity.observe({features, step.outcome.bid.quantity, r, std::move(next), step.terminal});
        try {
          agents.price.learn_step(price_rng);
          agents.quantity.learn_step(quantity_rng);
        } catch (const nn::NonFiniteGradient& e) {
          throw TrainingError(std::string("online learning diverged: ") + e.what(), 0);
        }
      }
      state = step.next_state;
    }
  }
  if (!result.log.empty()) result.metrics = compute_metrics(result.log);
  return result;
}

std::string GridPoint::describe() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) os << ',';
    os << values[i].first << '=' << values[i].second;
  }
  return os.str();
}

std::vector<GridPoint> expand_grid(const std::map<std::string, std::vector<double>>& grid) {
  std::vector<GridPoint> points{GridPoint{}};
  for (const auto& [key, values] : grid) {
    if (values.empty()) throw std::invalid_argument("grid dimension '" + key + "' has no values");
    std::vector<double> sorted(values);
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<GridPoint> next;
    next.reserve(points.size() * values.size());
    for (const auto& p : points) {
      for (double v : sorted) {
        GridPoint q = p;
        q.values.emplace_back(key, v);
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  if (grid.empty()) points.clear();
  return points;
}

GridResult grid_search(std::span<const GridPoint> points, const GridEvaluator& evaluate_point,
                       double success_threshold, unsigned workers) {
  if (points.empty()) throw std::invalid_argument("grid search needs at least one point");
  GridResult result;
  result.evaluations.resize(points.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      try {
        auto ev = evaluate_point(points[i]);
        ev.point = points[i];
        result.evaluations[i] = std::move(ev);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(points.size())));
  if (n == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t i = 0; i < result.evaluations.size(); ++i) {
    auto& ev = result.evaluations[i];
    ev.qualifies = ev.metrics.success_rate >= success_threshold;
    if (!ev.qualifies) continue;
    if (!result.best) {
      result.best = i;
      continue;
    }
    const auto& cur = result.evaluations[*result.best];
    if (ev.metrics.success_rate > cur.metrics.success_rate ||
        (ev.metrics.success_rate == cur.metrics.success_rate && ev.cumulative_profit > cur.cumulative_profit)) {
      result.best = i;
    }
  }
  return result;
}

}  // namespace drbid::pipeline
