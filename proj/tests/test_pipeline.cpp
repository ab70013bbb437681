#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>

#include "drbid/pipeline.hpp"

using namespace drbid;
using namespace drbid::pipeline;

namespace {

std::shared_ptr<const env::Scenario> scenario(double sigma = 0.0, std::uint64_t seed = 5) {
  env::ScenarioConfig cfg;
  cfg.mcp.noise_sigma = sigma;
  cfg.seed = seed;
  return std::make_shared<const env::Scenario>(env::make_scenario(cfg));
}

ddpg::AgentConfig tiny() {
  ddpg::AgentConfig c;
  c.hidden = {16, 16};
  c.batch_size = 8;
  c.buffer_capacity = 2000;
  return c;
}

OutcomeRow row_with(double xi, double profit) {
  OutcomeRow r;
  r.outcome.xi = market::ExecutionRate::of(xi);
  r.outcome.profit = profit;
  r.outcome.win = profit > 0;
  r.outcome.q_act = profit > 0 ? 10.0 : 0.0;
  return r;
}

}  // namespace

TEST(Dataset, DaysAreIndependentOfTheirNeighbours) {
  auto sc = scenario();
  const auto all = build_dataset(*sc, 0, 6, 77);
  const auto tail = build_dataset(*sc, 3, 3, 77);
  ASSERT_EQ(all.days.size(), 6u);
  EXPECT_EQ(all.periods(*sc), 48u);
  for (int d = 0; d < 3; ++d) {
    EXPECT_EQ(all.days[3 + d].reserve, tail.days[d].reserve);
    EXPECT_EQ(all.days[3 + d].mcp_noise, tail.days[d].mcp_noise);
    EXPECT_EQ(all.days[3 + d].cbl_kw, tail.days[d].cbl_kw);
  }
  EXPECT_TRUE(build_dataset(*sc, 0, 0, 77).days.empty());
}

TEST(Metrics, BracketCounts) {
  const OutcomeLog log{row_with(1.0, 1), row_with(0.7, 1), row_with(1.3, 1), row_with(2.0, 1)};
  const auto m = compute_metrics(log);
  EXPECT_DOUBLE_EQ(m.rate_tight, 0.25);
  EXPECT_DOUBLE_EQ(m.rate_loose, 0.75);
  EXPECT_DOUBLE_EQ(m.success_rate, 1.0);
}

TEST(Metrics, ZeroWinsAndEmptyLog) {
  const OutcomeLog log{row_with(2.0, 0), row_with(3.0, 0)};
  const auto m = compute_metrics(log);
  EXPECT_EQ(m.success_rate, 0.0);
  EXPECT_EQ(m.win_rate, 0.0);
  EXPECT_EQ(m.total_profit, 0.0);
  EXPECT_THROW(compute_metrics(OutcomeLog{}), std::invalid_argument);
}

TEST(Metrics, SuccessRateIgnoresProfitScale) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    OutcomeLog log;
    for (int i = 0; i < 20; ++i) log.push_back(row_with(rng.uniform(0, 3), rng.bernoulli(0.6) ? rng.uniform(0, 50) : 0));
    const double k = rng.uniform(0.01, 100);
    OutcomeLog scaled = log;
    for (auto& r : scaled) r.outcome.profit *= k;
    EXPECT_EQ(compute_metrics(log).success_rate, compute_metrics(scaled).success_rate);
  }
}

TEST(Evaluate, NeutralPolicyEarnsNothingInEveryScenario) {
  for (double sigma : {0.0, 0.2, 0.5}) {
    auto sc = scenario(sigma);
    const auto ds = build_dataset(*sc, 0, 15, 3);
    NeutralPolicy neutral;
    const auto log = evaluate(sc, ds, neutral);
    ASSERT_EQ(log.size(), 120u);
    double total = 0.0;
    for (const auto& r : log) total += r.outcome.profit;
    EXPECT_EQ(total, 0.0);
    EXPECT_EQ(compute_metrics(log).total_profit, 0.0);
  }
}

TEST(TrainOffline, ZeroEpisodesLeavesAgentsUntouched) {
  auto sc = scenario();
  const auto ds = build_dataset(*sc, 0, 2, 1);
  auto agents = make_agents(*sc, tiny(), 4);
  const auto before = agents.price.actor();
  TrainingOptions opt;
  opt.episodes = 0;
  Rng rng(1);
  const auto res = train_offline(sc, agents, ds, opt, rng);
  EXPECT_TRUE(res.cumulative_profit.empty());
  EXPECT_TRUE(agents.price.actor() == before);
}

TEST(TrainOffline, EpisodeProfitEqualsSumOfPeriods) {
  auto sc = scenario();
  const auto ds = build_dataset(*sc, 0, 3, 1);
  auto agents = make_agents(*sc, tiny(), 4);
  TrainingOptions opt;
  opt.episodes = 4;
  std::vector<double> sums(5, 0.0);
  std::vector<int> counts(5, 0);
  opt.on_period = [&](const OutcomeRow& r) {
    sums[r.episode] += r.outcome.profit;
    ++counts[r.episode];
  };
  Rng rng(2);
  const auto res = train_offline(sc, agents, ds, opt, rng);
  ASSERT_EQ(res.cumulative_profit.size(), 4u);
  for (int e = 1; e <= 4; ++e) {
    EXPECT_EQ(counts[e], 24);
    EXPECT_NEAR(res.cumulative_profit[e - 1], sums[e], 1e-9);
  }
}

TEST(TrainOffline, FixedSeedRepeatsCurveAndCheckpoints) {
  auto run = [] {
    auto sc = scenario();
    const auto ds = build_dataset(*sc, 0, 2, 1);
    auto agents = make_agents(*sc, tiny(), 4);
    TrainingOptions opt;
    opt.episodes = 3;
    Rng rng(9);
    const auto res = train_offline(sc, agents, ds, opt, rng);
    std::ostringstream os;
    agents.price.save(os);
    agents.quantity.save(os);
    return std::make_pair(res.cumulative_profit, os.str());
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(TrainOffline, CheckpointHookFiresAtInterval) {
  auto sc = scenario();
  const auto ds = build_dataset(*sc, 0, 1, 1);
  auto agents = make_agents(*sc, tiny(), 4);
  TrainingOptions opt;
  opt.episodes = 5;
  opt.checkpoint_interval = 2;
  std::vector<int> at;
  opt.on_checkpoint = [&](int e, const AgentPair&) { at.push_back(e); };
  Rng rng(3);
  train_offline(sc, agents, ds, opt, rng);
  EXPECT_EQ(at, (std::vector<int>{2, 4, 5}));
}

TEST(TrainOnline, FrozenPolicyWithoutLearningMatchesEvaluation) {
  auto sc = scenario();
  const auto ds = build_dataset(*sc, 10, 2, 6);
  auto agents = make_agents(*sc, tiny(), 8);
  OnlineOptions opt;
  opt.learn = false;
  opt.explore = false;
  Rng rng(4);
  const auto before = agents.price.actor();
  const auto online = train_online(sc, agents, ds, opt, rng);
  EXPECT_TRUE(agents.price.actor() == before);
  AgentPolicy policy(agents);
  const auto eval = evaluate(sc, ds, policy);
  ASSERT_EQ(online.log.size(), eval.size());
  for (std::size_t i = 0; i < eval.size(); ++i) {
    EXPECT_EQ(online.log[i].outcome.bid.price, eval[i].outcome.bid.price);
    EXPECT_EQ(online.log[i].outcome.profit, eval[i].outcome.profit);
  }
}

TEST(TrainOnline, LearnsAfterActing) {
  auto sc = scenario();
  const auto ds = build_dataset(*sc, 10, 2, 6);
  auto agents = make_agents(*sc, tiny(), 8);
  OnlineOptions opt;
  Rng rng(5);
  const auto online = train_online(sc, agents, ds, opt, rng);
  EXPECT_EQ(online.log.size(), 16u);
  EXPECT_EQ(agents.price.buffer().size(), 16u);
  EXPECT_EQ(agents.price.learn_steps(), 16u - tiny().batch_size + 1);
}

TEST(Grid, ExpansionIsLexicographic) {
  const auto pts = expand_grid({{"b", {2, 1, 1}}, {"a", {0.5, 0.1}}});
  ASSERT_EQ(pts.size(), 4u);
  EXPECT_EQ(pts[0].describe(), "a=0.1,b=1");
  EXPECT_EQ(pts[1].describe(), "a=0.1,b=2");
  EXPECT_EQ(pts[3].describe(), "a=0.5,b=2");
  EXPECT_TRUE(expand_grid({}).empty());
  EXPECT_THROW(expand_grid({{"a", {}}}), std::invalid_argument);
}

TEST(Grid, SelectionRules) {
  const auto pts = expand_grid({{"x", {1, 2, 3, 4}}});
  // success and profit by point
  const std::map<double, std::pair<double, double>> table{{1, {0.95, 10}}, {2, {0.95, 30}}, {3, {0.80, 99}}, {4, {0.95, 30}}};
  const GridEvaluator ev = [&](const GridPoint& p) {
    GridEvaluation e;
    const auto [s, profit] = table.at(p.values[0].second);
    e.metrics.success_rate = s;
    e.cumulative_profit = profit;
    return e;
  };
  for (unsigned workers : {1u, 3u}) {
    const auto r = grid_search(pts, ev, 0.9, workers);
    ASSERT_TRUE(r.best);
    EXPECT_EQ(*r.best, 1u);  // ties with x=4 go to the earlier point
    EXPECT_FALSE(r.evaluations[2].qualifies);
  }
  const auto single = grid_search(std::vector<GridPoint>{pts[0]}, ev, 0.9);
  EXPECT_EQ(single.best, std::optional<std::size_t>(0));
  EXPECT_DOUBLE_EQ(single.evaluations[0].metrics.success_rate, 0.95);
}

TEST(Grid, DominatedPointNeverSelected) {
  const auto pts = expand_grid({{"x", {1, 2}}});
  const GridEvaluator ev = [](const GridPoint& p) {
    GridEvaluation e;
    e.metrics.success_rate = p.values[0].second == 1 ? 0.91 : 0.97;
    e.cumulative_profit = p.values[0].second == 1 ? 5 : 50;
    return e;
  };
  EXPECT_EQ(grid_search(pts, ev, 0.9).best, std::optional<std::size_t>(1));
}

TEST(Grid, UnreachableThresholdIsExplicit) {
  const auto pts = expand_grid({{"x", {1, 2}}});
  const GridEvaluator ev = [](const GridPoint&) {
    GridEvaluation e;
    e.metrics.success_rate = 0.5;
    return e;
  };
  const auto r = grid_search(pts, ev, 0.9);
  EXPECT_FALSE(r.best.has_value());
  EXPECT_EQ(r.evaluations.size(), 2u);
  EXPECT_THROW(grid_search(std::vector<GridPoint>{}, ev, 0.9), std::invalid_argument);
}

TEST(Grid, EvaluatorFailurePropagates) {
  const auto pts = expand_grid({{"x", {1, 2, 3}}});
  const GridEvaluator ev = [](const GridPoint& p) -> GridEvaluation {
    if (p.values[0].second == 2) throw std::runtime_error("boom");
    return {};
  };
  EXPECT_THROW(grid_search(pts, ev, 0.9, 2), std::runtime_error);
}
