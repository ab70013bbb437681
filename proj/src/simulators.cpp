#include "drbid/simulators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace drbid::sim {

double McpModel::mean(double t, double reserve) const noexcept {
  const auto& p = coefficients;
  return p[0] * t * t + p[1] * reserve * reserve + p[2] * reserve * t + p[3] * t +
         p[4] * reserve + p[5];
}

double mcp_from_draw(const McpModel& model, int slot_of_day, double reserve, double z) {
  if (!(reserve >= 0.0 && reserve <= 1.0)) {
    throw std::domain_error("reserve rate must be a fraction in [0, 1]");
  }
  if (model.noise_sigma < 0.0) throw std::domain_error("MCP noise sigma must be non-negative");
  const double price = model.mean(model.time_of(slot_of_day), reserve) + model.noise_sigma * z;
  return std::max(0.0, price);
}

double simulate_mcp(const McpModel& model, int slot_of_day, double reserve, Rng& rng) {
  // The draw is taken even when sigma is zero so streams line up across scenarios.
  const double z = rng.normal();
  return mcp_from_draw(model, slot_of_day, reserve, z);
}

TariffBand TouSchedule::band_at(int slot_of_day) const {
  const int hour = (slot_of_day % kSlotsPerDay) / kSlotsPerHour;
  for (const auto& r : peak)
    if (r.contains(hour)) return TariffBand::Peak;
  for (const auto& r : semi_peak)
    if (r.contains(hour)) return TariffBand::SemiPeak;
  return TariffBand::OffPeak;
}

double TouSchedule::rate(TariffBand band) const noexcept {
  switch (band) {
    case TariffBand::Peak: return peak_rate;
    case TariffBand::SemiPeak: return semi_peak_rate;
    case TariffBand::OffPeak: return off_peak_rate;
  }
  return off_peak_rate;
}

double TouSchedule::rate_at(int slot_of_day) const { return rate(band_at(slot_of_day)); }

namespace {

double bump(double hour, double center, double width) {
  const double u = (hour - center) / width;
  return std::exp(-0.5 * u * u);
}

double slot_hour(int slot) { return (static_cast<double>(slot) + 0.5) / kSlotsPerHour; }

}  // namespace

std::vector<CustomerProfile> generate_population(const PopulationConfig& config, Rng& rng) {
  if (config.count < 1) throw std::invalid_argument("population needs at least one customer");
  std::vector<CustomerProfile> out;
  out.reserve(static_cast<std::size_t>(config.count));
  for (int i = 0; i < config.count; ++i) {
    CustomerProfile c;
    c.id = i;
    for (std::size_t b = 0; b < 3; ++b) {
      const auto [lo, hi] = config.elasticity_bands[b];
      c.elasticity[b] = rng.uniform(lo, hi);
    }
    c.load_scale_kw = rng.uniform(config.load_min_kw, config.load_max_kw);
    c.baseline_kw.resize(kSlotsPerDay);
    for (int s = 0; s < kSlotsPerDay; ++s) {
      double shape = 1.0;
      if (config.load_template == LoadTemplate::Peaked) {
        shape = 1.0 - config.peak_amplitude +
                config.peak_amplitude * bump(slot_hour(s), config.peak_hour, config.peak_width_hours);
      }
      c.baseline_kw[static_cast<std::size_t>(s)] = c.load_scale_kw * shape;
    }
    out.push_back(std::move(c));
  }
  return out;
}

double simulate_consumption(const CustomerProfile& profile, const TouSchedule& tou,
                            int slot_of_day, bool settled, double offer) {
  const double rate = tou.rate_at(slot_of_day);
  if (!(rate > 0.0)) throw std::domain_error("ToU rate must be positive");
  const double p0 = profile.baseline_kw.at(static_cast<std::size_t>(slot_of_day % kSlotsPerDay));
  if (!settled) return p0;
  const double eps = profile.elasticity_in(tou.band_at(slot_of_day));
  const double p = p0 * (1.0 + eps * std::abs(offer - rate) / rate);
  return std::clamp(p, 0.0, p0);
}

namespace {

double truncated_normal(Rng& rng, double mean, double sd, double hi) {
  if (sd <= 0.0) return std::clamp(mean, 0.0, hi);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double v = rng.normal(mean, sd);
    if (v > 0.0 && v <= hi) return v;
  }
  return std::clamp(mean, 0.0, hi);
}

}  // namespace

std::vector<market::ParticipationPlan> generate_participation_plans(
    const std::vector<CustomerProfile>& profiles, const market::DbEvent& event,
    const TouSchedule& tou, const PlanConfig& config, Rng& rng) {
  std::vector<market::ParticipationPlan> plans;
  plans.reserve(profiles.size());
  for (const auto& c : profiles) {
    market::ParticipationPlan plan;
    plan.customer_id = c.id;
    plan.prices.assign(static_cast<std::size_t>(event.n_slots), 0.0);
    for (int n = 0; n < event.n_slots; ++n) {
      if (!rng.bernoulli(config.participation_probability)) continue;
      const double rate = tou.rate_at(event.start_slot + n);
      plan.prices[static_cast<std::size_t>(n)] = truncated_normal(
          rng, config.center_factor * rate, config.spread_factor * rate, config.max_price);
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

double ReserveModel::profile(int slot_of_day, bool weekend) const noexcept {
  double v = base - afternoon_dip * bump(slot_hour(slot_of_day), dip_hour, dip_width_hours);
  if (weekend) v += weekend_shift;
  return v;
}

double simulate_reserve(const ReserveModel& model, const DayContext& day, int slot_of_day,
                        Rng& rng) {
  const double z = rng.normal();
  const double v = model.profile(slot_of_day, day.weekend) + model.noise_sd * z;
  return std::clamp(v, model.v_min, model.v_max);
}

std::vector<double> simulate_cbl_history(const CustomerProfile& profile,
                                         const market::DbEvent& event, double jitter, Rng& rng) {
  double window_max = 0.0;
  for (int s = event.start_slot; s < event.end_slot(); ++s) {
    window_max = std::max(window_max, profile.baseline_kw.at(static_cast<std::size_t>(s % kSlotsPerDay)));
  }
  std::vector<double> maxima(market::kCblHistoryDays, window_max);
  if (jitter > 0.0) {
    for (auto& m : maxima) m = std::max(0.0, m * (1.0 + jitter * rng.normal()));
  }
  return maxima;
}

}  // namespace drbid::sim
