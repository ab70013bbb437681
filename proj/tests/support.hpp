#pragma once

// Oracles shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <vector>

#include "drbid/market_rules.hpp"
#include "drbid/neuralnet.hpp"
#include "drbid/rng.hpp"

namespace support {

using namespace drbid;

// Clearing-price surface evaluated straight from the default coefficients.
inline double mcp_surface(double t, double v) {
  const double p1 = -0.00042, p2 = 126.7125, p3 = -0.06412, p4 = 0.04937, p5 = -55.07590, p6 = 7.45740;
  return p1 * t * t + p2 * v * v + p3 * v * t + p4 * t + p5 * v + p6;
}

// Largest relative disagreement between backprop and central differences of
// loss = sum(w .* out) over every parameter of a random double network.
inline double gradient_check(Rng& rng, double step = 1e-5) {
  const std::size_t in = 1 + rng.index(4);
  std::vector<std::size_t> hidden(1 + rng.index(3));
  for (auto& h : hidden) h = 1 + rng.index(6);
  const std::size_t out = 1 + rng.index(2);
  const auto hidden_act = rng.bernoulli(0.5) ? nn::Activation::Relu : nn::Activation::Tanh;
  const auto out_act = rng.bernoulli(0.5) ? nn::Activation::Identity : nn::Activation::Tanh;
  nn::DenseNetwork<double> net(in, hidden, out, hidden_act, out_act);
  net.initialize(rng);
  const std::size_t batch = 1 + rng.index(3);
  nn::Matrix<double> x(in, batch), w(out, batch);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.uniform(-1, 1);
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.uniform(-1, 1);

  auto loss = [&](const nn::DenseNetwork<double>& n) { return n.forward(x).cwiseProduct(w).sum(); };
  nn::ForwardCache<double> cache;
  net.forward(x, cache);
  nn::Gradients<double> g;
  const nn::Matrix<double> dx = net.backward(cache, w, &g);

  double worst = 0.0;
  auto compare = [&](double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
  };
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const Eigen::Index rows = net.layers()[l].weights.rows(), cols = net.layers()[l].weights.cols();
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        auto plus = net, minus = net;
        plus.mutable_layers()[l].weights(i, j) += step;
        minus.mutable_layers()[l].weights(i, j) -= step;
        compare(g.weights[l](i, j), (loss(plus) - loss(minus)) / (2 * step));
      }
      auto plus = net, minus = net;
      plus.mutable_layers()[l].bias(i) += step;
      minus.mutable_layers()[l].bias(i) -= step;
      compare(g.bias[l](i), (loss(plus) - loss(minus)) / (2 * step));
    }
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    nn::Matrix<double> xp = x, xm = x;
    xp(i) += step;
    xm(i) -= step;
    compare(dx(i), (net.forward(xp).cwiseProduct(w).sum() - net.forward(xm).cwiseProduct(w).sum()) / (2 * step));
  }
  return worst;
}

// Random small settlement instance plus brute-force recomputation of each rule.
struct SettlementCase {
  std::vector<double> offers;
  std::vector<market::ConsumptionRecord> records;
  double bid_price{0.0};
  double bid_quantity{0.0};
  double mcp{0.0};
  std::vector<double> history;
};

inline SettlementCase random_case(Rng& rng) {
  SettlementCase c;
  const std::size_t n = 1 + rng.index(6);
  // Prices on a coarse grid so ties with the bid price actually happen.
  auto price = [&] { return static_cast<double>(rng.index(41)) * 0.25; };
  for (std::size_t i = 0; i < n; ++i) {
    c.offers.push_back(rng.bernoulli(0.25) ? 0.0 : price());
    const double cbl = static_cast<double>(rng.index(201));
    const double used = static_cast<double>(rng.index(221));
    c.records.push_back({static_cast<int>(i), 56, used, cbl});
  }
  c.bid_price = price();
  c.bid_quantity = static_cast<double>(rng.index(301));
  c.mcp = price();
  for (int d = 0; d < 5; ++d) c.history.push_back(static_cast<double>(rng.index(1000)) / 4.0);
  return c;
}

inline double brute_alpha(double xi) {
  if (0.8 <= xi && xi <= 1.2) return 1.1;
  if ((0.6 <= xi && xi < 0.8) || (1.2 < xi && xi <= 1.5)) return 1.05;
  return 1.0;
}

// Returns the number of disagreements between the library and brute force.
inline int check_settlement_case(const SettlementCase& c) {
  int bad = 0;
  double sum = 0.0;
  for (double h : c.history) sum += h;
  if (market::compute_cbl(c.history) != sum / 5.0) ++bad;

  const auto x = market::settle_customers(c.offers, c.bid_price);
  for (std::size_t i = 0; i < c.offers.size(); ++i) {
    const int want = (c.offers[i] > 0.0 && c.offers[i] <= c.bid_price) ? 1 : 0;
    if (x[i] != want) ++bad;
  }

  double q_act = 0.0;
  std::vector<double> shed;
  for (const auto& r : c.records) {
    const double q = r.baseline_kw > r.actual_kw ? r.baseline_kw - r.actual_kw : 0.0;
    shed.push_back(q);
    q_act += q;
  }
  const auto s = market::actual_shedding(c.records);
  if (s.total_kw != q_act || s.per_customer_kw != shed) ++bad;

  double alpha = 1.0;
  if (q_act > 0.0) alpha = brute_alpha(c.bid_quantity / q_act);
  if (market::incentive_ratio(market::execution_rate(c.bid_quantity, q_act)) != alpha) ++bad;

  const bool win = c.bid_price <= c.mcp;
  double cost = 0.0;
  for (std::size_t i = 0; i < c.offers.size(); ++i)
    if (x[i] == 1) cost += c.offers[i] * shed[i];
  const double want = win ? (alpha * c.bid_price * q_act - cost) * 0.25 : 0.0;
  if (market::slot_profit(win, alpha, c.bid_price, q_act, x, c.offers, shed, 0.25) != want) ++bad;
  return bad;
}

}  // namespace support
