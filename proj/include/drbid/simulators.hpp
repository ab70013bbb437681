#pragma once

#include <array>
#include <utility>
#include <vector>

#include "drbid/market_rules.hpp"
#include "drbid/rng.hpp"

// Stochastic stand-ins for the two uncertain signals the aggregator faces: the
// market clearing price and its customers' consumption under curtailment.
namespace drbid::sim {

inline constexpr int kSlotsPerDay = 96;
inline constexpr int kSlotsPerHour = 4;

// Quadratic surface in (slot-of-day, reserve fraction) plus Gaussian noise.
// What the polynomial's t counts: quarter-hour slots of the day (0-95) or hours.
enum class McpTimeUnit { Slot, Hour };

struct McpModel {
  std::array<double, 6> coefficients{-0.00042, 126.7125, -0.06412, 0.04937, -55.07590, 7.45740};
  double noise_sigma{0.0};
  McpTimeUnit time_unit{McpTimeUnit::Slot};

  double mean(double t, double reserve) const noexcept;
  double time_of(int slot_of_day) const noexcept {
    return time_unit == McpTimeUnit::Slot ? static_cast<double>(slot_of_day)
                                          : static_cast<double>(slot_of_day) / kSlotsPerHour;
  }
};

// Clearing price for a given standard-normal draw; clamped at zero.
double mcp_from_draw(const McpModel& model, int slot_of_day, double reserve, double z);
double simulate_mcp(const McpModel& model, int slot_of_day, double reserve, Rng& rng);

enum class TariffBand { Peak = 0, SemiPeak = 1, OffPeak = 2 };

struct HourRange {
  int begin{0};  // inclusive
  int end{0};    // exclusive
  bool contains(int hour) const noexcept { return hour >= begin && hour < end; }
};

struct TouSchedule {
  std::vector<HourRange> peak{{13, 17}};
  std::vector<HourRange> semi_peak{{9, 13}, {17, 21}};
  double peak_rate{5.0};
  double semi_peak_rate{3.5};
  double off_peak_rate{2.0};

  TariffBand band_at(int slot_of_day) const;
  double rate_at(int slot_of_day) const;
  double rate(TariffBand band) const noexcept;
};

enum class LoadTemplate { Flat, Peaked };

struct PopulationConfig {
  int count{16};
  // [lo, hi] elasticity range per tariff band, indexed by TariffBand.
  std::array<std::pair<double, double>, 3> elasticity_bands{{{-0.4, 0.0}, {-0.6, -0.4}, {-1.0, -0.6}}};
  double load_min_kw{20.0};
  double load_max_kw{200.0};
  LoadTemplate load_template{LoadTemplate::Flat};
  double peak_amplitude{0.2};
  double peak_hour{15.0};
  double peak_width_hours{3.0};
  // Relative day-to-day spread of the in-window maxima feeding the baseline.
  double history_jitter{0.0};
};

struct CustomerProfile {
  int id{0};
  std::array<double, 3> elasticity{};  // indexed by TariffBand
  double load_scale_kw{0.0};
  std::vector<double> baseline_kw;     // one entry per slot of day

  double elasticity_in(TariffBand band) const noexcept {
    return elasticity[static_cast<std::size_t>(band)];
  }
};

std::vector<CustomerProfile> generate_population(const PopulationConfig& config, Rng& rng);

// Consumption of one customer at one slot. A settled customer curtails
// according to its elasticity and the deviation of its offer from the ToU rate.
double simulate_consumption(const CustomerProfile& profile, const TouSchedule& tou,
                            int slot_of_day, bool settled, double offer);

struct PlanConfig {
  double participation_probability{0.8};
  double center_factor{0.9};
  double spread_factor{0.3};
  double max_price{10.0};
};

std::vector<market::ParticipationPlan> generate_participation_plans(
    const std::vector<CustomerProfile>& profiles, const market::DbEvent& event,
    const TouSchedule& tou, const PlanConfig& config, Rng& rng);

struct ReserveModel {
  double base{0.10};
  double afternoon_dip{0.03};
  double dip_hour{15.0};
  double dip_width_hours{2.5};
  double weekend_shift{0.02};
  double noise_sd{0.025};
  double v_min{0.03};
  double v_max{0.15};

  double profile(int slot_of_day, bool weekend) const noexcept;
};

struct DayContext {
  int day_index{0};
  int day_of_year{1};
  bool weekend{false};
};

double simulate_reserve(const ReserveModel& model, const DayContext& day, int slot_of_day,
                        Rng& rng);

// Five eligible prior days of in-window maximum demand for one customer.
std::vector<double> simulate_cbl_history(const CustomerProfile& profile,
                                         const market::DbEvent& event, double jitter, Rng& rng);

}  // namespace drbid::sim
