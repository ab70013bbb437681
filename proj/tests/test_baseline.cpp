#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "drbid/baseline.hpp"

using namespace drbid;
using namespace drbid::baseline;

namespace {

BaselineConfig small() {
  BaselineConfig c;
  c.hidden = {16, 16};
  c.epochs = 300;
  c.batch_size = 16;
  c.learning_rate = 3e-3;
  return c;
}

const FeatureMap kFeatures(2, 10.0, 0.2, 100.0);

}  // namespace

TEST(Baseline, FeatureLayouts) {
  EXPECT_EQ(kFeatures.price_features(56, true, 0.1), (std::vector<double>{56.0 / 95.0, 1.0, 0.5}));
  const std::vector<double> offers{2.0, 5.0};
  EXPECT_EQ(kFeatures.quantity_features(0, false, offers), (std::vector<double>{0.0, 0.0, 0.2, 0.5}));
  const std::vector<double> wrong{1.0};
  EXPECT_THROW(kFeatures.quantity_features(0, false, wrong), std::invalid_argument);
  EXPECT_THROW(FeatureMap(2, 0.0, 0.2, 1.0), std::invalid_argument);
}

TEST(Baseline, ConstantTargetsAreFlaggedAndLearned) {
  TrainingSet data;
  Rng rng(1);
  for (int i = 0; i < 64; ++i) {
    data.price.push_back({kFeatures.price_features(56 + i % 8, i % 7 == 0, rng.uniform(0, 0.2)), 4.0});
  }
  auto fit = fit_baseline(kFeatures, data, small(), rng);
  EXPECT_TRUE(fit.diagnostics.constant_price_target);
  EXPECT_TRUE(data.quantity.empty());
  EXPECT_FALSE(fit.diagnostics.notes.empty());
  for (const auto& s : data.price) EXPECT_NEAR(fit.model.predict_price(s.x), 4.0, 0.05);
}

TEST(Baseline, LearnsALinearPrice) {
  TrainingSet data;
  Rng rng(2);
  auto target = [](const std::vector<double>& x) { return 2.0 + 3.0 * x[0] + 4.0 * x[2]; };
  for (int i = 0; i < 200; ++i) {
    auto x = kFeatures.price_features(static_cast<int>(rng.index(96)), false, rng.uniform(0, 0.2));
    data.price.push_back({x, target(x)});
  }
  auto fit = fit_baseline(kFeatures, data, small(), rng);
  EXPECT_FALSE(fit.diagnostics.constant_price_target);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto x = kFeatures.price_features(static_cast<int>(rng.index(96)), false, rng.uniform(0, 0.2));
    worst = std::max(worst, std::abs(fit.model.predict_price(x) - target(x)));
  }
  EXPECT_LT(worst, 0.15);
}

TEST(Baseline, FitIsDeterministic) {
  TrainingSet data;
  Rng gen(3);
  for (int i = 0; i < 40; ++i) {
    data.price.push_back({kFeatures.price_features(60, false, gen.uniform(0, 0.2)), gen.uniform(3, 5)});
    const std::vector<double> offers{gen.uniform(0, 10), gen.uniform(0, 10)};
    data.quantity.push_back({kFeatures.quantity_features(60, false, offers), gen.uniform(0, 80)});
  }
  auto cfg = small();
  cfg.epochs = 20;
  Rng a(9), b(9);
  const auto fa = fit_baseline(kFeatures, data, cfg, a);
  const auto fb = fit_baseline(kFeatures, data, cfg, b);
  EXPECT_TRUE(fa.model.price_model() == fb.model.price_model());
  EXPECT_TRUE(fa.model.quantity_model() == fb.model.quantity_model());
  EXPECT_EQ(fa.diagnostics.price_loss, fb.diagnostics.price_loss);
}

TEST(Baseline, BidPassesPredictionsThroughWithClipping) {
  Rng rng(4);
  BaselineModel model(kFeatures, small(), rng);
  // Zero weights leave only the output bias, so predictions are that bias times the scale.
  auto& p = model.mutable_price_model();
  auto& q = model.mutable_quantity_model();
  for (auto* net : {&p, &q}) {
    for (auto& layer : net->mutable_layers()) {
      layer.weights.setZero();
      layer.bias.setZero();
    }
  }
  env::EnvState s;
  s.slot = 60;
  s.offers = {1.0, 2.0};
  s.reserve = 0.1;
  const market::BidBounds bounds{0.0, 10.0, 100.0};

  p.mutable_layers().back().bias(0) = 0.45f;
  q.mutable_layers().back().bias(0) = 0.3f;
  auto bid = baseline_bid(model, s, bounds);
  EXPECT_NEAR(bid.price, 4.5, 1e-6);
  EXPECT_NEAR(bid.quantity, 30.0, 1e-5);

  p.mutable_layers().back().bias(0) = 2.0f;
  q.mutable_layers().back().bias(0) = -1.0f;
  bid = baseline_bid(model, s, bounds);
  EXPECT_EQ(bid.price, 10.0);
  EXPECT_EQ(bid.quantity, 0.0);
}

TEST(Baseline, CheckpointRoundTrip) {
  Rng rng(5);
  BaselineModel model(kFeatures, small(), rng);
  std::stringstream ss;
  model.save(ss);
  const auto bytes = ss.str();
  const auto back = BaselineModel::load(ss, kFeatures, small());
  EXPECT_TRUE(back.price_model() == model.price_model());
  EXPECT_TRUE(back.quantity_model() == model.quantity_model());
  std::stringstream again;
  back.save(again);
  EXPECT_EQ(again.str(), bytes);

  std::stringstream other(bytes);
  EXPECT_THROW(BaselineModel::load(other, FeatureMap(3, 10.0, 0.2, 100.0), small()), nn::CheckpointError);
  std::stringstream junk("DBBX....");
  EXPECT_THROW(BaselineModel::load(junk, kFeatures, small()), nn::CheckpointError);
}

TEST(Baseline, TrainingSetOnlyUsesWinsForQuantity) {
  env::ScenarioConfig cfg;
  cfg.population.count = 2;
  auto sc = env::make_scenario(cfg);
  const auto ds = pipeline::build_dataset(sc, 0, 1, 1);
  const FeatureMap fm(sc);
  pipeline::OutcomeLog log;
  for (int n = 0; n < 4; ++n) {
    pipeline::OutcomeRow r;
    r.day = 0;
    r.slot = cfg.event.start_slot + n;
    r.reserve = ds.days[0].reserve[static_cast<std::size_t>(n)];
    r.outcome.mcp = 4.0 + n;
    r.outcome.win = n % 2 == 0;
    r.outcome.q_act = 10.0 * n;
    log.push_back(r);
  }
  const auto set = make_training_set(sc, fm, ds, log);
  ASSERT_EQ(set.price.size(), 4u);
  ASSERT_EQ(set.quantity.size(), 2u);
  EXPECT_EQ(set.price[3].y, 7.0);
  EXPECT_EQ(set.quantity[1].y, 20.0);
  log[0].day = 99;
  EXPECT_THROW(make_training_set(sc, fm, ds, log), std::invalid_argument);
}
