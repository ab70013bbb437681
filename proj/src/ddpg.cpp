#include "drbid/ddpg.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

namespace drbid::ddpg {

std::string_view to_string(Role role) noexcept {
  return role == Role::Price ? "price" : "quantity";
}

NoiseProcess::NoiseProcess(NoiseConfig config) : config_(config) {
  if (config_.start_scale < 0.0 || config_.end_scale < 0.0) {
    throw std::invalid_argument("noise scales must be non-negative");
  }
  if (config_.end_scale > config_.start_scale) {
    throw std::invalid_argument("noise scale must not increase over training");
  }
}

double NoiseProcess::scale_at(std::uint64_t step) const noexcept {
  if (config_.decay_steps == 0 || step >= config_.decay_steps) return config_.end_scale;
  const double frac = static_cast<double>(step) / static_cast<double>(config_.decay_steps);
  return config_.start_scale + (config_.end_scale - config_.start_scale) * frac;
}

double NoiseProcess::sample(Rng& rng) {
  // Unit action space spans 2, so a fraction f of the range is 2f wide.
  const double sd = 2.0 * scale();
  ++step_;
  if (config_.kind == NoiseKind::Gaussian) return sd * rng.normal();
  ou_state_ += -config_.ou_theta * ou_state_ + sd * rng.normal();
  return ou_state_;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[cursor_] = std::move(t);
  }
  cursor_ = (cursor_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw std::out_of_range("replay buffer index out of range");
  if (items_.size() < capacity_) return items_[i];
  return items_[(cursor_ + i) % capacity_];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count, Rng& rng) const {
  if (items_.empty()) throw std::logic_error("cannot sample from an empty replay buffer");
  std::vector<std::size_t> idx(count);
  for (auto& i : idx) i = rng.index(items_.size());
  return idx;
}

Mat critic_input(const Mat& states, const Mat& actions) {
  if (actions.rows() != 1 || actions.cols() != states.cols()) {
    throw std::invalid_argument("action row must match the state batch");
  }
  Mat x(states.rows() + 1, states.cols());
  x.topRows(states.rows()) = states;
  x.bottomRows(1) = actions;
  return x;
}

double policy_gradient_step(Network& actor, nn::Adam<Scalar>& optimizer, const Mat& states,
                            const std::function<Mat(const Mat& actions)>& action_gradient) {
  nn::ForwardCache<Scalar> cache;
  const Mat actions = actor.forward(states, cache);
  const Mat dq_da = action_gradient(actions);
  if (dq_da.rows() != actions.rows() || dq_da.cols() != actions.cols()) {
    throw std::invalid_argument("action gradient shape mismatch");
  }
  // Ascend mean Q: the loss is -mean(Q), so upstream is -dQ/da / B.
  const Scalar scale = Scalar(-1) / static_cast<Scalar>(states.cols());
  const Mat upstream = dq_da * scale;
  nn::Gradients<Scalar> grads;
  actor.backward(cache, upstream, &grads, false);
  optimizer.step(actor, grads);
  return static_cast<double>(dq_da.cwiseAbs().mean());
}

Mat invert_action_gradient(const Mat& dq_da, const Mat& actions) {
  Mat out(dq_da.rows(), dq_da.cols());
  for (Eigen::Index j = 0; j < dq_da.size(); ++j) {
    const Scalar g = dq_da(j);
    const Scalar a = std::clamp(actions(j), Scalar(-1), Scalar(1));
    out(j) = g * (g > 0 ? (Scalar(1) - a) : (a + Scalar(1))) * Scalar(0.5);
  }
  return out;
}

Agent::Agent(Role role, ActionBounds bounds, std::size_t state_dim, AgentConfig config)
    : role_(role),
      bounds_(bounds),
      state_dim_(state_dim),
      config_(std::move(config)),
      actor_opt_(nn::AdamConfig{config_.actor_lr}),
      critic_opt_(nn::AdamConfig{config_.critic_lr}),
      buffer_(config_.buffer_capacity),
      noise_(config_.noise) {
  if (!(bounds_.high > bounds_.low)) throw std::invalid_argument("action bounds must be non-empty");
  if (state_dim_ == 0) throw std::invalid_argument("state dimension must be positive");
  if (config_.gamma < 0.0 || config_.gamma > 1.0) throw std::invalid_argument("gamma must lie in [0, 1]");
  if (config_.tau < 0.0 || config_.tau > 1.0) throw std::invalid_argument("tau must lie in [0, 1]");
  if (config_.batch_size == 0) throw std::invalid_argument("batch size must be positive");
}

Agent::Agent(Role role, ActionBounds bounds, std::size_t state_dim, AgentConfig config, Rng& init_rng)
    : Agent(role, bounds, state_dim, std::move(config)) {
  actor_ = Network(state_dim_, config_.hidden, 1, nn::Activation::Relu, nn::Activation::Tanh);
  critic_ = Network(state_dim_ + 1, config_.hidden, 1, nn::Activation::Relu, nn::Activation::Identity);
  actor_.initialize(init_rng, config_.final_layer_init);
  critic_.initialize(init_rng, config_.final_layer_init);
  target_actor_ = actor_;
  target_critic_ = critic_;
}

double Agent::greedy_action(std::span<const Scalar> state) const {
  if (state.size() != state_dim_) throw std::invalid_argument("state has the wrong dimension");
  Mat x(static_cast<Eigen::Index>(state_dim_), 1);
  for (std::size_t i = 0; i < state_dim_; ++i) x(static_cast<Eigen::Index>(i), 0) = state[i];
  const double u = std::clamp(static_cast<double>(actor_.forward(x)(0, 0)), -1.0, 1.0);
  return bounds_.to_physical(u);
}

double Agent::act(std::span<const Scalar> state, bool explore, Rng& rng) {
  double u = bounds_.to_unit(greedy_action(state));
  if (explore) u += noise_.sample(rng);
  u = std::clamp(u, -1.0, 1.0);
  return bounds_.to_physical(u);
}

double Agent::act(std::span<const double> state, bool explore, Rng& rng) {
  std::vector<Scalar> s(state.begin(), state.end());
  return act(std::span<const Scalar>(s), explore, rng);
}

void Agent::observe(Transition t) {
  if (t.state.size() != state_dim_ || t.next_state.size() != state_dim_) {
    throw std::invalid_argument("transition state has the wrong dimension");
  }
  if (!std::isfinite(t.reward)) throw std::invalid_argument("transition reward must be finite");
  buffer_.push(std::move(t));
}

Batch Agent::make_batch(std::span<const std::size_t> indices) const {
  const auto B = static_cast<Eigen::Index>(indices.size());
  const auto D = static_cast<Eigen::Index>(state_dim_);
  Batch b{Mat(D, B), Mat(1, B), Mat(1, B), Mat(D, B), Mat(1, B)};
  for (Eigen::Index k = 0; k < B; ++k) {
    const auto& t = buffer_.slot(indices[static_cast<std::size_t>(k)]);
    for (Eigen::Index i = 0; i < D; ++i) {
      b.states(i, k) = t.state[static_cast<std::size_t>(i)];
      b.next_states(i, k) = t.next_state[static_cast<std::size_t>(i)];
    }
    b.actions(0, k) = static_cast<Scalar>(bounds_.to_unit(t.action));
    b.rewards(0, k) = static_cast<Scalar>(t.reward);
    b.not_done(0, k) = t.terminal ? Scalar(0) : Scalar(1);
  }
  return b;
}

Mat Agent::critic_targets(const Batch& batch) const {
  if (config_.gamma == 0.0) return batch.rewards;
  const Mat next_actions = target_actor_.forward(batch.next_states);
  const Mat next_q = target_critic_.forward(critic_input(batch.next_states, next_actions));
  const Scalar g = static_cast<Scalar>(config_.gamma);
  return batch.rewards + g * batch.not_done.cwiseProduct(next_q);
}

double Agent::critic_loss(const Batch& batch) const {
  const Mat q = critic_.forward(critic_input(batch.states, batch.actions));
  const Mat diff = q - critic_targets(batch);
  return static_cast<double>(diff.squaredNorm()) / static_cast<double>(batch.size());
}

void Agent::update_targets(double tau) {
  nn::soft_update(target_actor_, actor_, tau);
  nn::soft_update(target_critic_, critic_, tau);
}

LearnDiagnostics Agent::learn_step(Rng& rng) {
  LearnDiagnostics diag;
  if (buffer_.size() < config_.batch_size) {
    diag.skipped = true;
    diag.note = "replay buffer holds " + std::to_string(buffer_.size()) + " < batch " +
                std::to_string(config_.batch_size);
    return diag;
  }
  const auto indices = buffer_.sample_indices(config_.batch_size, rng);
  const Batch batch = make_batch(indices);
  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(batch.size());

  // Critic regression toward the bootstrapped target.
  const Mat targets = critic_targets(batch);
  nn::ForwardCache<Scalar> cache;
  const Mat q = critic_.forward(critic_input(batch.states, batch.actions), cache);
  const Mat diff = q - targets;
  diag.critic_loss = static_cast<double>(diff.squaredNorm() * inv_b);
  nn::Gradients<Scalar> grads;
  critic_.backward(cache, diff * (Scalar(2) * inv_b), &grads, false);
  critic_opt_.step(critic_, grads);

  // Actor ascent along dQ/da from the freshly updated critic.
  double objective = 0.0;
  policy_gradient_step(actor_, actor_opt_, batch.states, [&](const Mat& actions) {
    nn::ForwardCache<Scalar> qc;
    const Mat qa = critic_.forward(critic_input(batch.states, actions), qc);
    objective = static_cast<double>(qa.mean());
    const Mat dx = critic_.backward(qc, Mat::Ones(1, qa.cols()), nullptr);
    if (config_.invert_gradients) return invert_action_gradient(dx.bottomRows(1), actions);
    return Mat(dx.bottomRows(1));
  });
  diag.actor_objective = objective;

  update_targets(config_.tau);
  ++learn_steps_;
  return diag;
}

// ---------------------------------------------------------------------------
// Agent checkpoint (little-endian):
//   "DBAG" | version=1 | role u32 | bounds low f64 | bounds high f64 |
//   state_dim u32 | learn_steps u64 | noise_step u64 | noise_decay_steps u64 |
//   actor | critic | target actor | target critic   (network format)
//   buffer: capacity u64 | count u64 | count x transition (oldest first)
//   transition: state f32[D] | action f64 | reward f64 | next f32[D] | terminal u32
// Optimiser moments are not stored; they restart from zero on load.
// ---------------------------------------------------------------------------
namespace {
constexpr std::uint32_t kAgentFormatVersion = 1;
}

void Agent::save(std::ostream& os) const {
  using namespace nn::io;
  os.write("DBAG", 4);
  write_u32(os, kAgentFormatVersion);
  write_u32(os, static_cast<std::uint32_t>(role_));
  write_real<double>(os, bounds_.low);
  write_real<double>(os, bounds_.high);
  write_u32(os, static_cast<std::uint32_t>(state_dim_));
  write_u64(os, learn_steps_);
  write_u64(os, noise_.step());
  write_u64(os, noise_.config().decay_steps);
  nn::write_network(os, actor_);
  nn::write_network(os, critic_);
  nn::write_network(os, target_actor_);
  nn::write_network(os, target_critic_);
  write_u64(os, buffer_.capacity());
  write_u64(os, buffer_.size());
  for (std::size_t i = 0; i < buffer_.size(); ++i) {
    const auto& t = buffer_.at(i);
    for (Scalar v : t.state) write_real<Scalar>(os, v);
    write_real<double>(os, t.action);
    write_real<double>(os, t.reward);
    for (Scalar v : t.next_state) write_real<Scalar>(os, v);
    write_u32(os, t.terminal ? 1u : 0u);
  }
  if (!os) throw nn::CheckpointError("failed to write agent checkpoint");
}

Agent Agent::load(std::istream& is, AgentConfig config) {
  using namespace nn::io;
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "DBAG") throw nn::CheckpointError("not an agent checkpoint");
  if (read_u32(is) != kAgentFormatVersion) throw nn::CheckpointError("unsupported agent checkpoint version");
  const auto role = read_u32(is);
  if (role > 1) throw nn::CheckpointError("unknown agent role");
  ActionBounds bounds;
  bounds.low = read_real<double>(is);
  bounds.high = read_real<double>(is);
  const std::size_t dim = read_u32(is);
  const auto learn_steps = read_u64(is);
  const auto noise_step = read_u64(is);
  const auto decay_steps = read_u64(is);

  Agent agent(static_cast<Role>(role), bounds, dim, std::move(config));
  agent.learn_steps_ = learn_steps;
  agent.noise_.set_step(noise_step);
  agent.noise_.set_decay_steps(decay_steps);
  agent.actor_ = nn::read_network<Scalar>(is);
  agent.critic_ = nn::read_network<Scalar>(is);
  agent.target_actor_ = nn::read_network<Scalar>(is);
  agent.target_critic_ = nn::read_network<Scalar>(is);
  if (agent.actor_.input_size() != dim || agent.critic_.input_size() != dim + 1 ||
      agent.actor_.layer_count() != agent.config_.hidden.size() + 1) {
    throw nn::CheckpointError("agent checkpoint does not match the configured dimensions");
  }
  for (std::size_t l = 0; l < agent.config_.hidden.size(); ++l) {
    if (agent.actor_.layers()[l].outputs() != agent.config_.hidden[l]) {
      throw nn::CheckpointError("agent checkpoint hidden layers differ from the configuration");
    }
  }
  const auto capacity = read_u64(is);
  const auto count = read_u64(is);
  if (count > capacity) throw nn::CheckpointError("replay buffer count exceeds its capacity");
  agent.buffer_ = ReplayBuffer(std::max<std::size_t>(agent.config_.buffer_capacity, 1));
  for (std::uint64_t k = 0; k < count; ++k) {
    Transition t;
    t.state.resize(dim);
    t.next_state.resize(dim);
    for (auto& v : t.state) v = read_real<Scalar>(is);
    t.action = read_real<double>(is);
    t.reward = read_real<double>(is);
    for (auto& v : t.next_state) v = read_real<Scalar>(is);
    t.terminal = read_u32(is) != 0;
    agent.buffer_.push(std::move(t));
  }
  return agent;
}

std::vector<double> discounted_return(std::span<const double> rewards, double gamma) {
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    acc = rewards[k] + gamma * acc;
    out[k] = acc;
  }
  return out;
}

}  // namespace drbid::ddpg
