#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Settlement arithmetic of the risk-free demand-bidding program. Everything in
// here is a pure function of its arguments.
namespace drbid::market {

inline constexpr double kDefaultSlotHours = 0.25;
inline constexpr std::size_t kCblHistoryDays = 5;

class InvalidHistory : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A demand-bidding event covering `n_slots` consecutive slots of the day grid,
// starting at `start_slot`. end_slot() is exclusive.
struct DbEvent {
  int start_slot{56};
  int n_slots{8};
  double slot_hours{kDefaultSlotHours};

  int end_slot() const noexcept { return start_slot + n_slots; }
  bool contains(int slot) const noexcept { return slot >= start_slot && slot < end_slot(); }
  void validate() const;
};

// Per-customer curtailment offers for each slot of an event. A zero price
// means the customer sits that slot out.
struct ParticipationPlan {
  int customer_id{0};
  std::vector<double> prices;
};

struct BidBounds {
  double price_min{0.0};
  double price_max{10.0};
  double quantity_max{200.0};
};

struct Bid {
  double price{0.0};
  double quantity{0.0};

  bool participates() const noexcept { return price > 0.0; }
};

struct ConsumptionRecord {
  int customer_id{0};
  int slot{0};
  double actual_kw{0.0};
  double baseline_kw{0.0};
};

struct Shedding {
  double total_kw{0.0};
  std::vector<double> per_customer_kw;
};

// Execution rate q_bid / q_act. The ratio is undefined when nothing was shed;
// the two degenerate cases are kept apart so callers can log them.
struct ExecutionRate {
  enum class Kind { Finite, UndefinedInfinite, NoOp };

  Kind kind{Kind::NoOp};
  double value{0.0};

  bool finite() const noexcept { return kind == Kind::Finite; }
  static ExecutionRate of(double value) { return {Kind::Finite, value}; }
};

struct SlotOutcome {
  int slot{0};
  double mcp{0.0};
  Bid bid;
  bool win{false};
  std::vector<int> settlement;
  double q_act{0.0};
  std::vector<double> per_customer_shed_kw;
  ExecutionRate xi;
  double alpha{1.0};
  double profit{0.0};

  // A market win that also produced real curtailment.
  bool deal() const noexcept { return win && q_act > 0.0; }
};

// Mean of exactly five per-day window maxima (eligible days filtered by the caller).
double compute_cbl(std::span<const double> daily_window_maxima);

Shedding actual_shedding(std::span<const ConsumptionRecord> records);

ExecutionRate execution_rate(double q_bid, double q_act);

double incentive_ratio(double xi);
double incentive_ratio(const ExecutionRate& xi);

// x_{i,t}: 1 when the customer participates and asks no more than the bid price.
std::vector<int> settle_customers(std::span<const double> offers, double bid_price);
std::vector<int> settle_customers(std::span<const ParticipationPlan> plans, std::size_t slot_index,
                                  double bid_price);

double slot_profit(bool win, double alpha, double bid_price, double q_act,
                   std::span<const int> settlement, std::span<const double> offers,
                   std::span<const double> per_customer_shed_kw, double slot_hours);

// Profit of a whole event: sum of the per-slot profits.
double event_profit(std::span<const SlotOutcome> outcomes);

// Full settlement of one slot from the bid, the clearing price, the offers and
// the metered consumption (which must already reflect the settlement).
SlotOutcome settle_slot(int slot, const Bid& bid, double mcp, std::span<const double> offers,
                        std::span<const int> settlement,
                        std::span<const ConsumptionRecord> records, double slot_hours);

}  // namespace drbid::market
