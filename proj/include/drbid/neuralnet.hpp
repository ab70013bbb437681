#pragma once

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "drbid/rng.hpp"

// Small dense multilayer perceptron with reverse-mode gradients and an Adam
// optimiser. Inputs are column-major batches: one column per sample.
namespace drbid::nn {

enum class Activation : std::uint32_t { Identity = 0, Relu = 1, Tanh = 2 };

class StaleCache : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
struct DenseLayer {
  Matrix<T> weights;  // out x in
  Vector<T> bias;
  Activation activation{Activation::Identity};

  std::size_t inputs() const noexcept { return static_cast<std::size_t>(weights.cols()); }
  std::size_t outputs() const noexcept { return static_cast<std::size_t>(weights.rows()); }
};

template <typename T>
struct Gradients {
  std::vector<Matrix<T>> weights;
  std::vector<Vector<T>> bias;
};

template <typename T>
class DenseNetwork;

// Activations recorded by a training-mode forward pass.
template <typename T>
struct ForwardCache {
  const DenseNetwork<T>* owner{nullptr};
  std::uint64_t version{0};
  Matrix<T> input;
  std::vector<Matrix<T>> outputs;  // post-activation output of each layer

  const Matrix<T>& layer_input(std::size_t l) const { return l == 0 ? input : outputs[l - 1]; }
};

namespace detail {

template <typename T>
void apply_activation(Matrix<T>& z, Activation a) {
  switch (a) {
    case Activation::Identity: break;
    case Activation::Relu: z = z.cwiseMax(T(0)); break;
    case Activation::Tanh: z = z.array().tanh().matrix(); break;
  }
}

// Multiplies `delta` in place by the activation derivative, expressed through the output.
template <typename T>
void apply_derivative(Matrix<T>& delta, const Matrix<T>& out, Activation a) {
  switch (a) {
    case Activation::Identity: break;
    case Activation::Relu:
      delta = (out.array() > T(0)).select(delta, T(0));
      break;
    case Activation::Tanh:
      delta = (delta.array() * (T(1) - out.array().square())).matrix();
      break;
  }
}

}  // namespace detail

template <typename T>
class DenseNetwork {
 public:
  DenseNetwork() = default;

  DenseNetwork(std::size_t inputs, std::span<const std::size_t> hidden, std::size_t outputs,
               Activation hidden_activation, Activation output_activation) {
    std::size_t prev = inputs;
    for (std::size_t h : hidden) {
      add_layer(prev, h, hidden_activation);
      prev = h;
    }
    add_layer(prev, outputs, output_activation);
  }

  explicit DenseNetwork(std::vector<DenseLayer<T>> layers) : layers_(std::move(layers)) {
    for (std::size_t l = 1; l < layers_.size(); ++l) {
      if (layers_[l].inputs() != layers_[l - 1].outputs()) {
        throw std::invalid_argument("layer dimensions do not chain");
      }
    }
  }

  // Uniform fan-in initialisation. A positive `final_range` overrides the
  // scale of the last layer with U(-final_range, final_range).
  void initialize(Rng& rng, double final_range = 0.0) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      auto& layer = layers_[l];
      double r = 1.0 / std::sqrt(static_cast<double>(layer.inputs()));
      if (l + 1 == layers_.size() && final_range > 0.0) r = final_range;
      for (Eigen::Index j = 0; j < layer.weights.cols(); ++j)
        for (Eigen::Index i = 0; i < layer.weights.rows(); ++i)
          layer.weights(i, j) = static_cast<T>(rng.uniform(-r, r));
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
        layer.bias(i) = static_cast<T>(rng.uniform(-r, r));
    }
    ++version_;
  }

  std::size_t input_size() const { return layers_.empty() ? 0 : layers_.front().inputs(); }
  std::size_t output_size() const { return layers_.empty() ? 0 : layers_.back().outputs(); }
  std::size_t layer_count() const noexcept { return layers_.size(); }

  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
  }

  const std::vector<DenseLayer<T>>& layers() const noexcept { return layers_; }
  // Mutable access invalidates any outstanding forward cache.
  std::vector<DenseLayer<T>>& mutable_layers() noexcept {
    ++version_;
    return layers_;
  }
  std::uint64_t version() const noexcept { return version_; }

  Matrix<T> forward(const Matrix<T>& x) const {
    check_input(x);
    Matrix<T> a = x;
    for (const auto& layer : layers_) {
      Matrix<T> z = layer.weights * a;
      z.colwise() += layer.bias;
      detail::apply_activation(z, layer.activation);
      a = std::move(z);
    }
    return a;
  }

  Matrix<T> forward(const Matrix<T>& x, ForwardCache<T>& cache) const {
    check_input(x);
    cache.owner = this;
    cache.version = version_;
    cache.input = x;
    cache.outputs.resize(layers_.size());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& layer = layers_[l];
      Matrix<T>& z = cache.outputs[l];
      z.noalias() = layer.weights * cache.layer_input(l);
      z.colwise() += layer.bias;
      detail::apply_activation(z, layer.activation);
    }
    return cache.outputs.back();
  }

  // Reverse pass from d(loss)/d(output). Fills `grads` when non-null and
  // returns d(loss)/d(input) unless `want_input_grad` is false.
  Matrix<T> backward(const ForwardCache<T>& cache, const Matrix<T>& upstream,
                     Gradients<T>* grads, bool want_input_grad = true) const {
    if (cache.owner != this || cache.version != version_ || cache.outputs.size() != layers_.size()) {
      throw StaleCache("backward() needs a forward cache from this network's current parameters");
    }
    if (upstream.rows() != static_cast<Eigen::Index>(output_size()) ||
        upstream.cols() != cache.outputs.back().cols()) {
      throw std::invalid_argument("upstream gradient shape does not match the network output");
    }
    if (grads) {
      grads->weights.resize(layers_.size());
      grads->bias.resize(layers_.size());
    }
    Matrix<T> delta = upstream;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const auto& layer = layers_[l];
      detail::apply_derivative(delta, cache.outputs[l], layer.activation);
      if (grads) {
        grads->weights[l].noalias() = delta * cache.layer_input(l).transpose();
        grads->bias[l] = delta.rowwise().sum();
      }
      if (l == 0 && !want_input_grad) return {};
      Matrix<T> next;
      next.noalias() = layer.weights.transpose() * delta;
      delta = std::move(next);
    }
    return delta;
  }

  Gradients<T> zero_gradients() const {
    Gradients<T> g;
    for (const auto& l : layers_) {
      g.weights.push_back(Matrix<T>::Zero(l.weights.rows(), l.weights.cols()));
      g.bias.push_back(Vector<T>::Zero(l.bias.size()));
    }
    return g;
  }

  bool all_finite() const {
    for (const auto& l : layers_)
      if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  bool operator==(const DenseNetwork& other) const {
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& a = layers_[l];
      const auto& b = other.layers_[l];
      if (a.activation != b.activation || a.weights.rows() != b.weights.rows() ||
          a.weights.cols() != b.weights.cols() || a.weights != b.weights || a.bias != b.bias) {
        return false;
      }
    }
    return true;
  }

 private:
  void add_layer(std::size_t in, std::size_t out, Activation act) {
    if (in == 0 || out == 0) throw std::invalid_argument("layer sizes must be positive");
    layers_.push_back({Matrix<T>::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
                       Vector<T>::Zero(static_cast<Eigen::Index>(out)), act});
  }

  void check_input(const Matrix<T>& x) const {
    if (layers_.empty()) throw std::logic_error("network has no layers");
    if (x.rows() != static_cast<Eigen::Index>(input_size())) {
      throw std::invalid_argument("input has " + std::to_string(x.rows()) + " features, network expects " +
                                  std::to_string(input_size()));
    }
  }

  std::vector<DenseLayer<T>> layers_;
  std::uint64_t version_{0};
};

// target <- tau * online + (1 - tau) * target
template <typename T>
void soft_update(DenseNetwork<T>& target, const DenseNetwork<T>& online, double tau) {
  if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("soft update factor must lie in [0, 1]");
  auto& tl = target.mutable_layers();
  const auto& ol = online.layers();
  if (tl.size() != ol.size()) throw std::invalid_argument("soft update between different architectures");
  const T a = static_cast<T>(tau);
  const T b = static_cast<T>(1.0 - tau);
  for (std::size_t l = 0; l < tl.size(); ++l) {
    if (tau == 1.0) {
      tl[l].weights = ol[l].weights;
      tl[l].bias = ol[l].bias;
    } else if (tau > 0.0) {
      tl[l].weights = a * ol[l].weights + b * tl[l].weights;
      tl[l].bias = a * ol[l].bias + b * tl[l].bias;
    }
  }
}

struct AdamConfig {
  double learning_rate{1e-3};
  double beta1{0.9};
  double beta2{0.999};
  double epsilon{1e-8};
};

template <typename T>
struct AdamState {
  std::uint64_t step{0};
  std::vector<Matrix<T>> m_weights, v_weights;
  std::vector<Vector<T>> m_bias, v_bias;
};

template <typename T>
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig config) : config_(config) {}

  const AdamConfig& config() const noexcept { return config_; }
  const AdamState<T>& state() const noexcept { return state_; }
  void reset() { state_ = {}; }

  void step(DenseNetwork<T>& net, const Gradients<T>& grads) {
    const auto& layers = net.layers();
    if (grads.weights.size() != layers.size() || grads.bias.size() != layers.size()) {
      throw std::invalid_argument("gradient layer count does not match the network");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (grads.weights[l].rows() != layers[l].weights.rows() ||
          grads.weights[l].cols() != layers[l].weights.cols() ||
          grads.bias[l].size() != layers[l].bias.size()) {
        throw std::invalid_argument("gradient shape mismatch at layer " + std::to_string(l));
      }
      if (!grads.weights[l].allFinite() || !grads.bias[l].allFinite()) {
        throw NonFiniteGradient("non-finite gradient at layer " + std::to_string(l) + " (weight max |g| = " +
                                std::to_string(static_cast<double>(grads.weights[l].cwiseAbs().maxCoeff())) +
                                ", step " + std::to_string(state_.step) + ")");
      }
    }
    if (state_.m_weights.size() != layers.size()) init_state(net);

    ++state_.step;
    const double t = static_cast<double>(state_.step);
    const T lr = static_cast<T>(config_.learning_rate * std::sqrt(1.0 - std::pow(config_.beta2, t)) /
                                (1.0 - std::pow(config_.beta1, t)));
    const T b1 = static_cast<T>(config_.beta1);
    const T b2 = static_cast<T>(config_.beta2);
    const T eps = static_cast<T>(config_.epsilon * std::sqrt(1.0 - std::pow(config_.beta2, t)));

    auto& mut = net.mutable_layers();
    for (std::size_t l = 0; l < mut.size(); ++l) {
      update(mut[l].weights, grads.weights[l], state_.m_weights[l], state_.v_weights[l], lr, b1, b2, eps);
      update(mut[l].bias, grads.bias[l], state_.m_bias[l], state_.v_bias[l], lr, b1, b2, eps);
    }
  }

 private:
  void init_state(const DenseNetwork<T>& net) {
    state_ = {};
    for (const auto& l : net.layers()) {
      state_.m_weights.push_back(Matrix<T>::Zero(l.weights.rows(), l.weights.cols()));
      state_.v_weights.push_back(Matrix<T>::Zero(l.weights.rows(), l.weights.cols()));
      state_.m_bias.push_back(Vector<T>::Zero(l.bias.size()));
      state_.v_bias.push_back(Vector<T>::Zero(l.bias.size()));
    }
  }

  // Bias correction folded into lr and eps:
  // p -= lr_t * m / (sqrt(v) + eps_t) equals the textbook m_hat / (sqrt(v_hat) + eps).
  template <typename M>
  static void update(M& p, const M& g, M& m, M& v, T lr, T b1, T b2, T eps) {
    m = b1 * m + (T(1) - b1) * g;
    v = b2 * v + (T(1) - b2) * g.cwiseProduct(g);
    p.array() -= lr * m.array() / (v.array().sqrt() + eps);
  }

  AdamConfig config_;
  AdamState<T> state_;
};

// ---------------------------------------------------------------------------
// Checkpoint format (all integers little-endian u32, all reals little-endian
// IEEE-754 of the scalar width):
//   "DBNN" | version=1 | scalar_bytes (4|8) | layer_count L | input_size
//   L x { output_size | activation }
//   L x { weights row-major (out x in) | bias (out) }
// ---------------------------------------------------------------------------
inline constexpr std::uint32_t kNetworkFormatVersion = 1;

namespace io {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw CheckpointError("truncated checkpoint");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  write_u32(os, static_cast<std::uint32_t>(v & 0xffffffffu));
  write_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline std::uint64_t read_u64(std::istream& is) {
  const std::uint64_t lo = read_u32(is);
  const std::uint64_t hi = read_u32(is);
  return lo | (hi << 32);
}

template <typename T>
void write_real(std::ostream& os, T v) {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  if constexpr (std::is_same_v<T, float>) {
    write_u32(os, std::bit_cast<std::uint32_t>(v));
  } else {
    write_u64(os, std::bit_cast<std::uint64_t>(v));
  }
}

template <typename T>
T read_real(std::istream& is) {
  if constexpr (std::is_same_v<T, float>) {
    return std::bit_cast<float>(read_u32(is));
  } else {
    return std::bit_cast<double>(read_u64(is));
  }
}

}  // namespace io

template <typename T>
void write_network(std::ostream& os, const DenseNetwork<T>& net) {
  const auto& layers = net.layers();
  os.write("DBNN", 4);
  io::write_u32(os, kNetworkFormatVersion);
  io::write_u32(os, static_cast<std::uint32_t>(sizeof(T)));
  io::write_u32(os, static_cast<std::uint32_t>(layers.size()));
  io::write_u32(os, static_cast<std::uint32_t>(net.input_size()));
  for (const auto& l : layers) {
    io::write_u32(os, static_cast<std::uint32_t>(l.outputs()));
    io::write_u32(os, static_cast<std::uint32_t>(l.activation));
  }
  for (const auto& l : layers) {
    for (Eigen::Index i = 0; i < l.weights.rows(); ++i)
      for (Eigen::Index j = 0; j < l.weights.cols(); ++j) io::write_real<T>(os, l.weights(i, j));
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) io::write_real<T>(os, l.bias(i));
  }
  if (!os) throw CheckpointError("failed to write network checkpoint");
}

template <typename T>
DenseNetwork<T> read_network(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "DBNN") throw CheckpointError("not a network checkpoint");
  const auto version = io::read_u32(is);
  if (version != kNetworkFormatVersion) {
    throw CheckpointError("unsupported network checkpoint version " + std::to_string(version));
  }
  if (io::read_u32(is) != sizeof(T)) throw CheckpointError("checkpoint scalar width mismatch");
  const auto n_layers = io::read_u32(is);
  if (n_layers == 0 || n_layers > 1024) throw CheckpointError("implausible layer count");
  std::uint32_t in = io::read_u32(is);
  std::vector<DenseLayer<T>> layers;
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    const auto out = io::read_u32(is);
    const auto act = io::read_u32(is);
    if (act > static_cast<std::uint32_t>(Activation::Tanh)) throw CheckpointError("unknown activation code");
    if (out == 0 || in == 0 || static_cast<std::uint64_t>(out) * in > (1ull << 28)) {
      throw CheckpointError("implausible layer shape");
    }
    layers.push_back({Matrix<T>(out, in), Vector<T>(out), static_cast<Activation>(act)});
    in = out;
  }
  for (auto& l : layers) {
    for (Eigen::Index i = 0; i < l.weights.rows(); ++i)
      for (Eigen::Index j = 0; j < l.weights.cols(); ++j) l.weights(i, j) = io::read_real<T>(is);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = io::read_real<T>(is);
  }
  return DenseNetwork<T>(std::move(layers));
}

}  // namespace drbid::nn
