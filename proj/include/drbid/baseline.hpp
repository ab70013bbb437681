#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "drbid/environment.hpp"
#include "drbid/neuralnet.hpp"
#include "drbid/pipeline.hpp"

// Supervised benchmark: one regressor predicts the clearing price from
// (t, w, V), another predicts achievable curtailment from (t, w, offers). The
// two never share inputs or losses.
namespace drbid::baseline {

using Scalar = float;
using Network = nn::DenseNetwork<Scalar>;

struct BaselineConfig {
  std::vector<std::size_t> hidden{300, 600, 400, 200};
  double learning_rate{1e-3};
  int epochs{200};
  std::size_t batch_size{64};
};

struct Sample {
  std::vector<double> x;
  double y{0.0};
};

struct TrainingSet {
  std::vector<Sample> price;
  std::vector<Sample> quantity;
};

struct FitDiagnostics {
  bool constant_price_target{false};
  bool constant_quantity_target{false};
  double price_loss{0.0};     // final epoch mean squared error, normalised units
  double quantity_loss{0.0};
  std::vector<std::string> notes;
};

// Feature layouts and target scalings shared by training and inference.
class FeatureMap {
 public:
  FeatureMap(std::size_t customers, double price_max, double reserve_max, double quantity_max);
  explicit FeatureMap(const env::Scenario& scenario);

  std::size_t customers() const noexcept { return customers_; }
  std::size_t price_inputs() const noexcept { return 3; }
  std::size_t quantity_inputs() const noexcept { return 2 + customers_; }
  double price_max() const noexcept { return price_max_; }
  double quantity_max() const noexcept { return quantity_max_; }

  std::vector<double> price_features(int slot, bool weekend, double reserve) const;
  std::vector<double> quantity_features(int slot, bool weekend, std::span<const double> offers) const;

 private:
  std::size_t customers_;
  double price_max_;
  double reserve_max_;
  double quantity_max_;
};

// Regression targets from logged periods: every period contributes its
// realized clearing price; only periods that won contribute a curtailment
// target, since a lost bid reveals nothing about achievable shedding.
TrainingSet make_training_set(const env::Scenario& scenario, const FeatureMap& features,
                              const pipeline::Dataset& dataset, std::span<const pipeline::OutcomeRow> log);

class BaselineModel {
 public:
  BaselineModel(const FeatureMap& features, const BaselineConfig& config, Rng& init_rng);

  const FeatureMap& features() const noexcept { return features_; }
  const BaselineConfig& config() const noexcept { return config_; }
  const Network& price_model() const noexcept { return price_; }
  const Network& quantity_model() const noexcept { return quantity_; }
  Network& mutable_price_model() noexcept { return price_; }
  Network& mutable_quantity_model() noexcept { return quantity_; }

  // Raw predictions in physical units (not clipped).
  double predict_price(std::span<const double> x) const;
  double predict_quantity(std::span<const double> x) const;

  void save(std::ostream& os) const;
  static BaselineModel load(std::istream& is, const FeatureMap& features, const BaselineConfig& config);

 private:
  BaselineModel(const FeatureMap& features, const BaselineConfig& config);

  FeatureMap features_;
  BaselineConfig config_;
  Network price_;
  Network quantity_;
};

struct FitResult {
  BaselineModel model;
  FitDiagnostics diagnostics;
};

FitResult fit_baseline(const FeatureMap& features, const TrainingSet& data, const BaselineConfig& config,
                       Rng& rng);

// Bids the predictions as they are, clipped to the action bounds.
market::Bid baseline_bid(const BaselineModel& model, const env::EnvState& state,
                         const market::BidBounds& bounds);

class BaselinePolicy final : public pipeline::BidPolicy {
 public:
  BaselinePolicy(const BaselineModel& model, market::BidBounds bounds) : model_(&model), bounds_(bounds) {}
  env::EnvAction decide(const env::EnvState& state, std::span<const double> features) override;
  std::string_view label() const override { return "baseline"; }

 private:
  const BaselineModel* model_;
  market::BidBounds bounds_;
};

}  // namespace drbid::baseline
