#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drbid/neuralnet.hpp"
#include "drbid/rng.hpp"

// Deterministic policy gradient agents. The aggregator runs two of them side by
// side: one bids the price, one bids the quantity. Both see the same state and
// the same reward; each critic only sees its own agent's action.
namespace drbid::ddpg {

using Scalar = float;
using Network = nn::DenseNetwork<Scalar>;
using Mat = nn::Matrix<Scalar>;

enum class Role : std::uint32_t { Price = 0, Quantity = 1 };

std::string_view to_string(Role role) noexcept;

struct ActionBounds {
  double low{0.0};
  double high{1.0};

  double mid() const noexcept { return 0.5 * (low + high); }
  double half_range() const noexcept { return 0.5 * (high - low); }
  double to_physical(double unit) const noexcept { return mid() + half_range() * unit; }
  double to_unit(double physical) const noexcept { return (physical - mid()) / half_range(); }
};

enum class NoiseKind { Gaussian, OrnsteinUhlenbeck };

// Exploration noise, with its scale expressed as a fraction of the action
// range and annealed linearly from start_scale to end_scale.
struct NoiseConfig {
  NoiseKind kind{NoiseKind::Gaussian};
  double start_scale{0.2};
  double end_scale{0.02};
  std::uint64_t decay_steps{10000};
  double ou_theta{0.15};
};

class NoiseProcess {
 public:
  explicit NoiseProcess(NoiseConfig config = {});

  const NoiseConfig& config() const noexcept { return config_; }
  void set_decay_steps(std::uint64_t steps) noexcept { config_.decay_steps = steps; }
  double scale_at(std::uint64_t step) const noexcept;
  double scale() const noexcept { return scale_at(step_); }
  std::uint64_t step() const noexcept { return step_; }
  void set_step(std::uint64_t step) noexcept { step_ = step; }

  // Draws one noise value in the unit action space [-1, 1] and advances the schedule.
  double sample(Rng& rng);
  void reset_state() noexcept { ou_state_ = 0.0; }

 private:
  NoiseConfig config_;
  std::uint64_t step_{0};
  double ou_state_{0.0};
};

struct Transition {
  std::vector<Scalar> state;
  double action{0.0};  // physical units
  double reward{0.0};  // already scaled for learning
  std::vector<Scalar> next_state;
  bool terminal{false};

  bool operator==(const Transition&) const = default;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }
  std::size_t cursor() const noexcept { return cursor_; }

  void push(Transition t);
  // i-th oldest transition still held.
  const Transition& at(std::size_t i) const;
  // Uniform draws (with replacement) over the occupied slots.
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const;
  const Transition& slot(std::size_t storage_index) const { return items_.at(storage_index); }

 private:
  std::size_t capacity_;
  std::size_t cursor_{0};
  std::vector<Transition> items_;
};

struct AgentConfig {
  std::vector<std::size_t> hidden{300, 600, 400, 200};
  double actor_lr{1e-4};
  double critic_lr{1e-3};
  double gamma{0.99};
  double tau{0.005};
  std::size_t batch_size{64};
  std::size_t buffer_capacity{100000};
  double final_layer_init{3e-3};
  // Scales dQ/da by the distance left to the bound it pushes toward, so the
  // actor slows down before the squashing output saturates.
  bool invert_gradients{false};
  NoiseConfig noise;
};

struct Batch {
  Mat states;       // state_dim x B
  Mat actions;      // 1 x B, unit space
  Mat rewards;      // 1 x B
  Mat next_states;  // state_dim x B
  Mat not_done;     // 1 x B, 0 where terminal

  std::size_t size() const noexcept { return static_cast<std::size_t>(states.cols()); }
};

struct LearnDiagnostics {
  bool skipped{false};
  std::string note;
  double critic_loss{0.0};
  double actor_objective{0.0};
};

// One policy-gradient ascent step on `actor`: the caller provides dQ/da at
// the actor's current actions; the actor moves to increase mean Q.
double policy_gradient_step(Network& actor, nn::Adam<Scalar>& optimizer, const Mat& states,
                            const std::function<Mat(const Mat& actions)>& action_gradient);

// Stacks a state batch and a 1 x B action row into critic input.
Mat critic_input(const Mat& states, const Mat& actions);

// dQ/da for unit-space actions in [-1, 1]: upward pushes scaled by (1 - a) / 2,
// downward ones by (a + 1) / 2.
Mat invert_action_gradient(const Mat& dq_da, const Mat& actions);

class Agent {
 public:
  Agent(Role role, ActionBounds bounds, std::size_t state_dim, AgentConfig config, Rng& init_rng);

  Role role() const noexcept { return role_; }
  const ActionBounds& bounds() const noexcept { return bounds_; }
  std::size_t state_dim() const noexcept { return state_dim_; }
  const AgentConfig& config() const noexcept { return config_; }

  // Physical action for a state; with `explore` the noise process perturbs it
  // before clipping to the bounds.
  double act(std::span<const Scalar> state, bool explore, Rng& rng);
  double act(std::span<const double> state, bool explore, Rng& rng);
  double greedy_action(std::span<const Scalar> state) const;

  void observe(Transition t);
  LearnDiagnostics learn_step(Rng& rng);

  Batch make_batch(std::span<const std::size_t> indices) const;
  // Bootstrapped critic targets r + gamma * (1 - done) * Q'(s', mu'(s')).
  Mat critic_targets(const Batch& batch) const;
  double critic_loss(const Batch& batch) const;

  void update_targets(double tau);

  const Network& actor() const noexcept { return actor_; }
  const Network& critic() const noexcept { return critic_; }
  const Network& target_actor() const noexcept { return target_actor_; }
  const Network& target_critic() const noexcept { return target_critic_; }
  Network& mutable_actor() noexcept { return actor_; }
  Network& mutable_critic() noexcept { return critic_; }

  const ReplayBuffer& buffer() const noexcept { return buffer_; }
  NoiseProcess& noise() noexcept { return noise_; }
  const NoiseProcess& noise() const noexcept { return noise_; }
  std::uint64_t learn_steps() const noexcept { return learn_steps_; }

  void save(std::ostream& os) const;
  static Agent load(std::istream& is, AgentConfig config);

 private:
  Agent(Role role, ActionBounds bounds, std::size_t state_dim, AgentConfig config);

  Role role_;
  ActionBounds bounds_;
  std::size_t state_dim_;
  AgentConfig config_;
  Network actor_, critic_, target_actor_, target_critic_;
  nn::Adam<Scalar> actor_opt_, critic_opt_;
  ReplayBuffer buffer_;
  NoiseProcess noise_;
  std::uint64_t learn_steps_{0};
};

// R_t = sum_k gamma^(k-t) r_k, accumulated backwards over one episode.
std::vector<double> discounted_return(std::span<const double> rewards, double gamma);

}  // namespace drbid::ddpg
