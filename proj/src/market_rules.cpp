#include "drbid/market_rules.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace drbid::market {

void DbEvent::validate() const {
  if (n_slots < 1) throw std::invalid_argument("DB event needs at least one slot");
  if (!(slot_hours > 0.0)) throw std::invalid_argument("DB event slot length must be positive");
  if (start_slot < 0) throw std::invalid_argument("DB event start slot must be non-negative");
}

double compute_cbl(std::span<const double> daily_window_maxima) {
  if (daily_window_maxima.size() != kCblHistoryDays) {
    throw InvalidHistory("CBL needs exactly " + std::to_string(kCblHistoryDays) +
                         " eligible prior days, got " +
                         std::to_string(daily_window_maxima.size()));
  }
  double sum = 0.0;
  for (double m : daily_window_maxima) {
    if (!(m >= 0.0)) throw InvalidHistory("CBL history contains a negative or NaN maximum");
    sum += m;
  }
  return sum / static_cast<double>(kCblHistoryDays);
}

Shedding actual_shedding(std::span<const ConsumptionRecord> records) {
  Shedding out;
  out.per_customer_kw.reserve(records.size());
  for (const auto& r : records) {
    const double q = std::max(0.0, r.baseline_kw - r.actual_kw);
    out.per_customer_kw.push_back(q);
    out.total_kw += q;
  }
  return out;
}

ExecutionRate execution_rate(double q_bid, double q_act) {
  if (q_act > 0.0) return ExecutionRate::of(q_bid / q_act);
  if (q_bid > 0.0) return {ExecutionRate::Kind::UndefinedInfinite, 0.0};
  return {ExecutionRate::Kind::NoOp, 0.0};
}

double incentive_ratio(double xi) {
  if (std::isnan(xi) || xi < 0.0) throw std::domain_error("execution rate must be non-negative");
  if (xi >= 0.8 && xi <= 1.2) return 1.1;
  if ((xi >= 0.6 && xi < 0.8) || (xi > 1.2 && xi <= 1.5)) return 1.05;
  return 1.0;
}

double incentive_ratio(const ExecutionRate& xi) {
  // An undelivered bid (or no bid at all) earns no bonus.
  if (!xi.finite()) return 1.0;
  return incentive_ratio(xi.value);
}

std::vector<int> settle_customers(std::span<const double> offers, double bid_price) {
  std::vector<int> x(offers.size(), 0);
  for (std::size_t i = 0; i < offers.size(); ++i) {
    x[i] = (offers[i] > 0.0 && offers[i] <= bid_price) ? 1 : 0;
  }
  return x;
}

std::vector<int> settle_customers(std::span<const ParticipationPlan> plans, std::size_t slot_index,
                                  double bid_price) {
  std::vector<double> offers;
  offers.reserve(plans.size());
  for (const auto& p : plans) offers.push_back(p.prices.at(slot_index));
  return settle_customers(offers, bid_price);
}

double slot_profit(bool win, double alpha, double bid_price, double q_act,
                   std::span<const int> settlement, std::span<const double> offers,
                   std::span<const double> per_customer_shed_kw, double slot_hours) {
  if (!win) return 0.0;
  if (settlement.size() != offers.size() || offers.size() != per_customer_shed_kw.size()) {
    throw std::invalid_argument("settlement, offers and shedding must have one entry per customer");
  }
  double cost = 0.0;
  for (std::size_t i = 0; i < offers.size(); ++i) {
    if (settlement[i] != 0) cost += offers[i] * per_customer_shed_kw[i];
  }
  return (alpha * bid_price * q_act - cost) * slot_hours;
}

double event_profit(std::span<const SlotOutcome> outcomes) {
  return std::accumulate(outcomes.begin(), outcomes.end(), 0.0,
                         [](double acc, const SlotOutcome& o) { return acc + o.profit; });
}

SlotOutcome settle_slot(int slot, const Bid& bid, double mcp, std::span<const double> offers,
                        std::span<const int> settlement,
                        std::span<const ConsumptionRecord> records, double slot_hours) {
  SlotOutcome out;
  out.slot = slot;
  out.mcp = mcp;
  out.bid = bid;
  out.win = bid.price <= mcp;
  out.settlement.assign(settlement.begin(), settlement.end());
  auto shed = actual_shedding(records);
  out.q_act = shed.total_kw;
  out.per_customer_shed_kw = std::move(shed.per_customer_kw);
  out.xi = execution_rate(bid.quantity, out.q_act);
  out.alpha = incentive_ratio(out.xi);
  out.profit = slot_profit(out.win, out.alpha, bid.price, out.q_act, out.settlement, offers,
                           out.per_customer_shed_kw, slot_hours);
  return out;
}

}  // namespace drbid::market
