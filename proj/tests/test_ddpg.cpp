#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "drbid/ddpg.hpp"

using namespace drbid;
using namespace drbid::ddpg;

namespace {

AgentConfig small_config() {
  AgentConfig c;
  c.hidden = {16, 16};
  c.batch_size = 4;
  c.buffer_capacity = 64;
  return c;
}

Transition random_transition(Rng& rng, std::size_t dim, const ActionBounds& b) {
  Transition t;
  for (std::size_t i = 0; i < dim; ++i) {
    t.state.push_back(static_cast<Scalar>(rng.uniform()));
    t.next_state.push_back(static_cast<Scalar>(rng.uniform()));
  }
  t.action = rng.uniform(b.low, b.high);
  t.reward = rng.uniform(-1, 1);
  t.terminal = rng.bernoulli(0.2);
  return t;
}

double max_distance(const Network& a, const Network& b) {
  double d = 0.0;
  for (std::size_t l = 0; l < a.layer_count(); ++l) {
    d = std::max(d, static_cast<double>((a.layers()[l].weights - b.layers()[l].weights).cwiseAbs().maxCoeff()));
    d = std::max(d, static_cast<double>((a.layers()[l].bias - b.layers()[l].bias).cwiseAbs().maxCoeff()));
  }
  return d;
}

std::string bytes(const Agent& a) {
  std::ostringstream os;
  a.save(os);
  return os.str();
}

}  // namespace

TEST(Agent, ZeroFinalLayerBidsMidpoint) {
  Rng rng(1);
  Agent q(Role::Quantity, {0.0, 150.0}, 5, small_config(), rng);
  auto& last = q.mutable_actor().mutable_layers().back();
  last.weights.setZero();
  last.bias.setZero();
  const std::vector<Scalar> s(5, 0.3f);
  EXPECT_DOUBLE_EQ(q.greedy_action(s), 75.0);
  EXPECT_DOUBLE_EQ(q.act(std::span<const Scalar>(s), false, rng), 75.0);
}

TEST(Agent, GreedyActionIsRepeatable) {
  Rng rng(2);
  Agent p(Role::Price, {0.0, 10.0}, 5, small_config(), rng);
  const std::vector<Scalar> s{0.1f, 0.2f, 0.3f, 0.4f, 0.5f};
  EXPECT_EQ(p.act(std::span<const Scalar>(s), false, rng), p.act(std::span<const Scalar>(s), false, rng));
}

TEST(Agent, LargeNoiseStillWithinBounds) {
  Rng rng(3);
  auto cfg = small_config();
  cfg.noise.start_scale = cfg.noise.end_scale = 50.0;
  Agent p(Role::Price, {0.0, 10.0}, 5, cfg, rng);
  const std::vector<Scalar> s(5, 0.5f);
  for (int i = 0; i < 1000; ++i) {
    const double a = p.act(std::span<const Scalar>(s), true, rng);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 10.0);
  }
}

TEST(Noise, LinearAnnealing) {
  NoiseConfig c;
  c.decay_steps = 100;
  NoiseProcess n(c);
  EXPECT_DOUBLE_EQ(n.scale_at(0), 0.2);
  EXPECT_NEAR(n.scale_at(50), 0.11, 1e-12);
  EXPECT_DOUBLE_EQ(n.scale_at(100), 0.02);
  EXPECT_DOUBLE_EQ(n.scale_at(1000), 0.02);
  double prev = n.scale_at(0);
  for (std::uint64_t k = 1; k < 200; ++k) {
    EXPECT_LE(n.scale_at(k), prev);
    prev = n.scale_at(k);
  }
  NoiseConfig bad;
  bad.end_scale = 0.5;
  EXPECT_THROW(NoiseProcess{bad}, std::invalid_argument);
}

TEST(ReplayBuffer, RingEvictsOldest) {
  ReplayBuffer b(2);
  Transition t;
  t.state = {1};
  t.next_state = {1};
  for (double r : {1.0, 2.0, 3.0}) {
    t.reward = r;
    b.push(t);
  }
  EXPECT_EQ(b.size(), 2u);
  EXPECT_EQ(b.at(0).reward, 2.0);
  EXPECT_EQ(b.at(1).reward, 3.0);
}

TEST(ReplayBuffer, StoresFieldsAndRefusesEmptySampling) {
  ReplayBuffer b(4);
  Rng rng(4);
  EXPECT_THROW(b.sample_indices(1, rng), std::logic_error);
  const auto t = random_transition(rng, 3, {0, 1});
  b.push(t);
  EXPECT_EQ(b.size(), 1u);
  EXPECT_EQ(b.at(0), t);
  EXPECT_THROW(ReplayBuffer(0), std::invalid_argument);
}

TEST(ReplayBuffer, SamplingStaysInOccupiedSlots) {
  ReplayBuffer b(100);
  Rng rng(5);
  for (int i = 0; i < 7; ++i) b.push(random_transition(rng, 2, {0, 1}));
  std::vector<int> seen(7, 0);
  for (auto i : b.sample_indices(7000, rng)) {
    ASSERT_LT(i, 7u);
    ++seen[i];
  }
  for (int c : seen) EXPECT_NEAR(c, 1000, 150);
}

TEST(Agent, LearnStepSkipsSmallBuffer) {
  Rng rng(6);
  Agent p(Role::Price, {0.0, 10.0}, 3, small_config(), rng);
  p.observe(random_transition(rng, 3, p.bounds()));
  const auto d = p.learn_step(rng);
  EXPECT_TRUE(d.skipped);
  EXPECT_FALSE(d.note.empty());
  EXPECT_EQ(p.learn_steps(), 0u);
}

TEST(Agent, GammaZeroTargetIsReward) {
  Rng rng(7);
  auto cfg = small_config();
  cfg.gamma = 0.0;
  Agent p(Role::Price, {0.0, 10.0}, 3, cfg, rng);
  for (int i = 0; i < 6; ++i) p.observe(random_transition(rng, 3, p.bounds()));
  const std::vector<std::size_t> idx{0, 3, 5};
  const auto batch = p.make_batch(idx);
  EXPECT_EQ(p.critic_targets(batch), batch.rewards);
  const Mat q = p.critic().forward(critic_input(batch.states, batch.actions));
  double want = 0.0;
  for (int k = 0; k < 3; ++k) want += std::pow(static_cast<double>(q(0, k)) - p.buffer().at(idx[k]).reward, 2);
  EXPECT_NEAR(p.critic_loss(batch), want / 3, 1e-6);
}

TEST(Agent, BootstrappedTargetOnHandBatch) {
  Rng rng(8);
  auto cfg = small_config();
  cfg.gamma = 0.9;
  Agent p(Role::Quantity, {0.0, 150.0}, 3, cfg, rng);
  Transition a = random_transition(rng, 3, p.bounds());
  Transition b = random_transition(rng, 3, p.bounds());
  a.terminal = false;
  b.terminal = true;
  p.observe(a);
  p.observe(b);
  const std::vector<std::size_t> idx{0, 1};
  const auto targets = p.critic_targets(p.make_batch(idx));

  // Independent recomputation through the target networks one sample at a time.
  Mat s(3, 1);
  for (int i = 0; i < 3; ++i) s(i, 0) = a.next_state[i];
  const Mat mu = p.target_actor().forward(s);
  Mat x(4, 1);
  x << s(0, 0), s(1, 0), s(2, 0), mu(0, 0);
  const double want_a = a.reward + 0.9 * static_cast<double>(p.target_critic().forward(x)(0, 0));
  EXPECT_NEAR(targets(0, 0), want_a, 1e-6);
  EXPECT_NEAR(targets(0, 1), b.reward, 1e-7);
}

TEST(Agent, SoftUpdateExtremes) {
  Rng rng(9);
  auto cfg = small_config();
  cfg.tau = 1.0;
  Agent one(Role::Price, {0.0, 10.0}, 3, cfg, rng);
  cfg.tau = 0.0;
  Agent zero(Role::Price, {0.0, 10.0}, 3, cfg, rng);
  for (int i = 0; i < 8; ++i) {
    const auto t = random_transition(rng, 3, one.bounds());
    one.observe(t);
    zero.observe(t);
  }
  const Network zero_target = zero.target_actor();
  const Network zero_critic_target = zero.target_critic();
  for (int i = 0; i < 5; ++i) {
    one.learn_step(rng);
    zero.learn_step(rng);
  }
  EXPECT_TRUE(one.target_actor() == one.actor());
  EXPECT_TRUE(one.target_critic() == one.critic());
  EXPECT_TRUE(zero.target_actor() == zero_target);
  EXPECT_TRUE(zero.target_critic() == zero_critic_target);
  EXPECT_FALSE(zero.actor() == zero_target);
}

TEST(Agent, TargetDistanceShrinksByOneMinusTau) {
  Rng rng(10);
  auto cfg = small_config();
  Agent p(Role::Price, {0.0, 10.0}, 3, cfg, rng);
  for (auto& l : p.mutable_actor().mutable_layers()) l.weights.array() += 0.25f;
  for (auto& l : p.mutable_critic().mutable_layers()) l.bias.array() -= 0.5f;
  for (double tau : {0.005, 0.1, 0.5}) {
    const double da = max_distance(p.actor(), p.target_actor());
    const double dc = max_distance(p.critic(), p.target_critic());
    p.update_targets(tau);
    EXPECT_NEAR(max_distance(p.actor(), p.target_actor()), (1 - tau) * da, 1e-6 * da);
    EXPECT_NEAR(max_distance(p.critic(), p.target_critic()), (1 - tau) * dc, 1e-6 * dc);
  }
}

TEST(PolicyGradient, StepMovesTowardTheCriticOptimum) {
  // Q(s, a) = -(a - a*)^2, so dQ/da = -2 (a - a*).
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<std::size_t> hidden{8};
    Network actor(3, hidden, 1, nn::Activation::Relu, nn::Activation::Tanh);
    actor.initialize(rng);
    nn::Adam<Scalar> opt(nn::AdamConfig{1e-3});
    Mat s = Mat::Random(3, 1);
    const float before = actor.forward(s)(0, 0);
    const float target = rng.bernoulli(0.5) ? before + 0.5f : before - 0.5f;
    policy_gradient_step(actor, opt, s, [&](const Mat& a) { return Mat((-2.0f * (a.array() - target)).matrix()); });
    const float after = actor.forward(s)(0, 0);
    EXPECT_LT(std::abs(after - target), std::abs(before - target));
  }
}

TEST(PolicyGradient, InvertedGradientScalesByRemainingRoom) {
  Mat g(1, 4), a(1, 4);
  g << 1.0f, -1.0f, 2.0f, -2.0f;
  a << 0.5f, 0.5f, -1.0f, -1.0f;
  const Mat out = invert_action_gradient(g, a);
  EXPECT_FLOAT_EQ(out(0, 0), 0.25f);
  EXPECT_FLOAT_EQ(out(0, 1), -0.75f);
  EXPECT_FLOAT_EQ(out(0, 2), 2.0f);
  EXPECT_FLOAT_EQ(out(0, 3), 0.0f);
}

TEST(DiscountedReturn, Examples) {
  const std::vector<double> r{1, 1, 1};
  EXPECT_EQ(discounted_return(r, 1.0), (std::vector<double>{3, 2, 1}));
  EXPECT_EQ(discounted_return(r, 0.0), r);
  const std::vector<double> z(4, 0.0);
  EXPECT_EQ(discounted_return(z, 0.99), z);
  const std::vector<double> mixed{1, 2, 3};
  const auto g = discounted_return(mixed, 0.5);
  EXPECT_DOUBLE_EQ(g[0], 1 + 0.5 * 2 + 0.25 * 3);
}

TEST(Agent, CheckpointRoundTrip) {
  Rng rng(12);
  Agent p(Role::Quantity, {0.0, 150.0}, 4, small_config(), rng);
  for (int i = 0; i < 10; ++i) {
    p.observe(random_transition(rng, 4, p.bounds()));
    p.act(std::span<const Scalar>(p.buffer().at(0).state), true, rng);
    p.learn_step(rng);
  }
  std::stringstream ss;
  p.save(ss);
  const auto q = Agent::load(ss, small_config());
  EXPECT_EQ(q.role(), Role::Quantity);
  EXPECT_TRUE(q.actor() == p.actor());
  EXPECT_TRUE(q.target_critic() == p.target_critic());
  EXPECT_EQ(q.buffer().size(), p.buffer().size());
  for (std::size_t i = 0; i < p.buffer().size(); ++i) EXPECT_EQ(q.buffer().at(i), p.buffer().at(i));
  EXPECT_EQ(q.noise().step(), p.noise().step());
  EXPECT_EQ(q.learn_steps(), p.learn_steps());
  EXPECT_EQ(bytes(q), bytes(p));
}

TEST(Agent, CheckpointRejectsGarbage) {
  std::stringstream ss("DBAGxxxx");
  EXPECT_THROW(Agent::load(ss, small_config()), std::exception);
}

TEST(Agent, TrainingIsDeterministic) {
  auto run = [] {
    Rng init(13), data(14), learn(15);
    Agent p(Role::Price, {0.0, 10.0}, 4, small_config(), init);
    for (int i = 0; i < 40; ++i) {
      p.observe(random_transition(data, 4, p.bounds()));
      p.learn_step(learn);
    }
    return bytes(p);
  };
  EXPECT_EQ(run(), run());
}
