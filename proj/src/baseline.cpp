#include "drbid/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "drbid/simulators.hpp"

namespace drbid::baseline {

namespace {

constexpr std::uint32_t kFormatVersion = 1;
constexpr std::uint64_t kPriceInitStream = 0x7072;
constexpr std::uint64_t kQuantityInitStream = 0x7174;

bool is_constant(const std::vector<Sample>& samples) {
  if (samples.empty()) return true;
  return std::all_of(samples.begin(), samples.end(), [&](const Sample& s) { return s.y == samples.front().y; });
}

// Minibatch MSE regression of one network. Targets are divided by `scale`
// so the network works in roughly unit range.
double fit_regressor(Network& net, const std::vector<Sample>& samples, double scale,
                     const BaselineConfig& config, Rng& rng) {
  if (samples.empty()) return 0.0;
  nn::Adam<Scalar> adam(nn::AdamConfig{config.learning_rate});
  const auto n_in = static_cast<Eigen::Index>(net.input_size());
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = std::max<std::size_t>(1, std::min(config.batch_size, samples.size()));
  double last_epoch_loss = 0.0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const auto B = static_cast<Eigen::Index>(end - start);
      nn::Matrix<Scalar> x(n_in, B), y(1, B);
      for (Eigen::Index k = 0; k < B; ++k) {
        const auto& s = samples[order[start + static_cast<std::size_t>(k)]];
        for (Eigen::Index r = 0; r < n_in; ++r) x(r, k) = static_cast<Scalar>(s.x[static_cast<std::size_t>(r)]);
        y(0, k) = static_cast<Scalar>(s.y / scale);
      }
      nn::ForwardCache<Scalar> cache;
      const nn::Matrix<Scalar> diff = net.forward(x, cache) - y;
      loss_sum += static_cast<double>(diff.squaredNorm());
      nn::Gradients<Scalar> grads;
      net.backward(cache, diff * (Scalar(2) / static_cast<Scalar>(B)), &grads, false);
      adam.step(net, grads);
    }
    last_epoch_loss = loss_sum / static_cast<double>(order.size());
  }
  return last_epoch_loss;
}

double predict(const Network& net, std::span<const double> x) {
  if (x.size() != net.input_size()) throw std::invalid_argument("baseline input has the wrong dimension");
  nn::Matrix<Scalar> m(static_cast<Eigen::Index>(x.size()), 1);
  for (std::size_t i = 0; i < x.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = static_cast<Scalar>(x[i]);
  return static_cast<double>(net.forward(m)(0, 0));
}

}  // namespace

FeatureMap::FeatureMap(std::size_t customers, double price_max, double reserve_max, double quantity_max)
    : customers_(customers), price_max_(price_max), reserve_max_(reserve_max), quantity_max_(quantity_max) {
  if (!(price_max_ > 0.0) || !(reserve_max_ > 0.0) || !(quantity_max_ > 0.0)) {
    throw std::invalid_argument("feature scales must be positive");
  }
}

FeatureMap::FeatureMap(const env::Scenario& scenario)
    : FeatureMap(scenario.customer_count(), scenario.config.bounds.price_max, scenario.config.reserve.v_max,
                 scenario.config.bounds.quantity_max) {}

std::vector<double> FeatureMap::price_features(int slot, bool weekend, double reserve) const {
  return {static_cast<double>(slot) / (sim::kSlotsPerDay - 1), weekend ? 1.0 : 0.0, reserve / reserve_max_};
}

std::vector<double> FeatureMap::quantity_features(int slot, bool weekend, std::span<const double> offers) const {
  if (offers.size() != customers_) throw std::invalid_argument("offer vector has the wrong length");
  std::vector<double> f;
  f.reserve(quantity_inputs());
  f.push_back(static_cast<double>(slot) / (sim::kSlotsPerDay - 1));
  f.push_back(weekend ? 1.0 : 0.0);
  for (double o : offers) f.push_back(o / price_max_);
  return f;
}

TrainingSet make_training_set(const env::Scenario& scenario, const FeatureMap& features,
                              const pipeline::Dataset& dataset, std::span<const pipeline::OutcomeRow> log) {
  TrainingSet set;
  const int start = scenario.config.event.start_slot;
  for (const auto& row : log) {
    const env::EventDay* day = dataset.find(row.day);
    if (!day) throw std::invalid_argument("log row refers to a day missing from the dataset");
    const int n = row.slot - start;
    if (n < 0 || n >= scenario.config.event.n_slots) throw std::invalid_argument("log row lies outside the event");
    const bool weekend = day->context.weekend;
    set.price.push_back({features.price_features(row.slot, weekend, row.reserve), row.outcome.mcp});
    if (row.outcome.win) {
      set.quantity.push_back({features.quantity_features(row.slot, weekend, day->offers_at(static_cast<std::size_t>(n))),
                              row.outcome.q_act});
    }
  }
  return set;
}

BaselineModel::BaselineModel(const FeatureMap& features, const BaselineConfig& config)
    : features_(features), config_(config) {}

BaselineModel::BaselineModel(const FeatureMap& features, const BaselineConfig& config, Rng& init_rng)
    : BaselineModel(features, config) {
  price_ = Network(features_.price_inputs(), config_.hidden, 1, nn::Activation::Relu, nn::Activation::Identity);
  quantity_ =
      Network(features_.quantity_inputs(), config_.hidden, 1, nn::Activation::Relu, nn::Activation::Identity);
  Rng price_rng = init_rng.split(kPriceInitStream);
  Rng quantity_rng = init_rng.split(kQuantityInitStream);
  price_.initialize(price_rng);
  quantity_.initialize(quantity_rng);
}

double BaselineModel::predict_price(std::span<const double> x) const {
  return predict(price_, x) * features_.price_max();
}

double BaselineModel::predict_quantity(std::span<const double> x) const {
  return predict(quantity_, x) * features_.quantity_max();
}

// Layout (little-endian): "DBBL" | version u32 | tag "baseline" (u32 length +
// bytes) | price network | quantity network.
void BaselineModel::save(std::ostream& os) const {
  using namespace nn::io;
  os.write("DBBL", 4);
  write_u32(os, kFormatVersion);
  const std::string tag = "baseline";
  write_u32(os, static_cast<std::uint32_t>(tag.size()));
  os.write(tag.data(), static_cast<std::streamsize>(tag.size()));
  nn::write_network(os, price_);
  nn::write_network(os, quantity_);
  if (!os) throw nn::CheckpointError("failed to write baseline checkpoint");
}

BaselineModel BaselineModel::load(std::istream& is, const FeatureMap& features, const BaselineConfig& config) {
  using namespace nn::io;
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "DBBL") throw nn::CheckpointError("not a baseline checkpoint");
  if (read_u32(is) != kFormatVersion) throw nn::CheckpointError("unsupported baseline checkpoint version");
  const auto len = read_u32(is);
  if (len > 64) throw nn::CheckpointError("corrupt baseline tag");
  std::string tag(len, '\0');
  if (!is.read(tag.data(), len) || tag != "baseline") throw nn::CheckpointError("checkpoint is not tagged baseline");
  BaselineModel m(features, config);
  m.price_ = nn::read_network<Scalar>(is);
  m.quantity_ = nn::read_network<Scalar>(is);
  if (m.price_.input_size() != features.price_inputs() || m.quantity_.input_size() != features.quantity_inputs()) {
    throw nn::CheckpointError("baseline checkpoint does not match the scenario's feature layout");
  }
  return m;
}

FitResult fit_baseline(const FeatureMap& features, const TrainingSet& data, const BaselineConfig& config,
                       Rng& rng) {
  if (config.epochs < 0) throw std::invalid_argument("epoch count must be non-negative");
  if (data.price.empty()) throw std::invalid_argument("baseline needs at least one price sample");
  Rng init = rng.split(1);
  FitResult result{BaselineModel(features, config, init), {}};
  auto& diag = result.diagnostics;

  diag.constant_price_target = is_constant(data.price);
  diag.constant_quantity_target = is_constant(data.quantity);
  if (diag.constant_price_target) diag.notes.push_back("price targets are constant");
  if (data.quantity.empty()) {
    diag.notes.push_back("no winning periods: quantity model left untrained");
  } else if (diag.constant_quantity_target) {
    diag.notes.push_back("quantity targets are constant");
  }

  Rng price_rng = rng.split(2);
  Rng quantity_rng = rng.split(3);
  diag.price_loss =
      fit_regressor(result.model.mutable_price_model(), data.price, features.price_max(), config, price_rng);
  diag.quantity_loss = fit_regressor(result.model.mutable_quantity_model(), data.quantity,
                                     features.quantity_max(), config, quantity_rng);
  return result;
}

market::Bid baseline_bid(const BaselineModel& model, const env::EnvState& state, const market::BidBounds& bounds) {
  const auto& f = model.features();
  const double price = model.predict_price(f.price_features(state.slot, state.weekend, state.reserve));
  const double quantity = model.predict_quantity(f.quantity_features(state.slot, state.weekend, state.offers));
  return {std::clamp(price, bounds.price_min, bounds.price_max), std::clamp(quantity, 0.0, bounds.quantity_max)};
}

env::EnvAction BaselinePolicy::decide(const env::EnvState& state, std::span<const double>) {
  const auto bid = baseline_bid(*model_, state, bounds_);
  return {bid.price, bid.quantity};
}

}  // namespace drbid::baseline
