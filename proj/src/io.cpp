#include "drbid/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

namespace drbid::io {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // folds -0
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_xi(const market::ExecutionRate& xi) {
  switch (xi.kind) {
    case market::ExecutionRate::Kind::Finite: return format_number(xi.value);
    case market::ExecutionRate::Kind::UndefinedInfinite: return "inf";
    case market::ExecutionRate::Kind::NoOp: return "nan";
  }
  return "nan";
}

void write_outcomes_csv(std::ostream& os, std::span<const pipeline::OutcomeRow> log) {
  os << kOutcomeHeader << '\n';
  for (const auto& r : log) {
    const auto& o = r.outcome;
    os << r.episode << ',' << r.day << ',' << r.slot << ',' << format_number(r.reserve) << ','
       << format_number(o.mcp) << ',' << format_number(o.bid.price) << ',' << format_number(o.bid.quantity) << ','
       << format_number(o.q_act) << ',' << format_xi(o.xi) << ',' << format_number(o.alpha) << ','
       << (o.win ? 1 : 0) << ',' << (o.deal() ? 1 : 0) << ',' << format_number(o.profit) << '\n';
  }
}

void write_profit_curve_csv(std::ostream& os, std::span<const double> curve) {
  os << kProfitCurveHeader << '\n';
  for (std::size_t i = 0; i < curve.size(); ++i) os << (i + 1) << ',' << format_number(curve[i]) << '\n';
}

void write_dataset_csv(std::ostream& os, const env::Scenario& scenario, const pipeline::Dataset& dataset) {
  os << "day,day_of_year,weekend,t,V,z,mcp";
  for (std::size_t i = 0; i < scenario.customer_count(); ++i) os << ",offer_" << i;
  os << '\n';
  const int start = scenario.config.event.start_slot;
  for (const auto& day : dataset.days) {
    for (std::size_t n = 0; n < day.reserve.size(); ++n) {
      os << day.context.day_index << ',' << day.context.day_of_year << ',' << (day.context.weekend ? 1 : 0) << ','
         << (start + static_cast<int>(n)) << ',' << format_number(day.reserve[n]) << ','
         << format_number(day.mcp_noise[n]) << ',' << format_number(day.mcp_at(scenario, n));
      for (double offer : day.offers_at(n)) os << ',' << format_number(offer);
      os << '\n';
    }
  }
}

void write_baselines_csv(std::ostream& os, const pipeline::Dataset& dataset) {
  os << "day,customer,cbl_kw\n";
  for (const auto& day : dataset.days) {
    for (std::size_t i = 0; i < day.cbl_kw.size(); ++i) {
      os << day.context.day_index << ',' << i << ',' << format_number(day.cbl_kw[i]) << '\n';
    }
  }
}

void write_customers_csv(std::ostream& os, const env::Scenario& scenario) {
  os << "customer,load_scale_kw,elasticity_peak,elasticity_semi_peak,elasticity_off_peak\n";
  for (const auto& c : scenario.customers) {
    os << c.id << ',' << format_number(c.load_scale_kw) << ',' << format_number(c.elasticity[0]) << ','
       << format_number(c.elasticity[1]) << ',' << format_number(c.elasticity[2]) << '\n';
  }
}

nlohmann::json metrics_json(const pipeline::RunMetrics& m, std::string_view label) {
  return {{"schema", kMetricsSchema},
          {"policy", std::string(label)},
          {"periods", m.periods},
          {"success_rate", m.success_rate},
          {"rate_tight", m.rate_tight},
          {"rate_loose", m.rate_loose},
          {"win_rate", m.win_rate},
          {"total_profit", m.total_profit}};
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir.string() + "'");
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

namespace {

template <class Fn>
void write_binary(const std::filesystem::path& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  fn(out);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::ifstream open_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint '" + path.string() + "'");
  return in;
}

}  // namespace

void save_agents(const std::filesystem::path& dir, const pipeline::AgentPair& agents) {
  ensure_directory(dir);
  write_binary(dir / kPriceAgentFile, [&](std::ostream& os) { agents.price.save(os); });
  write_binary(dir / kQuantityAgentFile, [&](std::ostream& os) { agents.quantity.save(os); });
}

pipeline::AgentPair load_agents(const std::filesystem::path& dir, const config::RunConfig& c,
                                const env::Scenario& scenario) {
  auto price_in = open_binary(dir / kPriceAgentFile);
  auto quantity_in = open_binary(dir / kQuantityAgentFile);
  pipeline::AgentPair pair{ddpg::Agent::load(price_in, c.price_agent), ddpg::Agent::load(quantity_in, c.quantity_agent)};
  const env::StateCodec codec(scenario);
  if (pair.price.role() != ddpg::Role::Price || pair.quantity.role() != ddpg::Role::Quantity) {
    throw nn::CheckpointError("agent checkpoints hold the wrong roles");
  }
  if (pair.price.state_dim() != codec.size() || pair.quantity.state_dim() != codec.size()) {
    throw nn::CheckpointError("agent checkpoints expect " + std::to_string(pair.price.state_dim()) +
                              " state features, the scenario has " + std::to_string(codec.size()));
  }
  const auto& b = scenario.config.bounds;
  if (pair.price.bounds().high != b.price_max || pair.quantity.bounds().high != b.quantity_max) {
    throw nn::CheckpointError("agent checkpoints were trained with different bid bounds");
  }
  return pair;
}

void save_baseline(const std::filesystem::path& dir, const baseline::BaselineModel& model) {
  ensure_directory(dir);
  write_binary(dir / kBaselineFile, [&](std::ostream& os) { model.save(os); });
}

baseline::BaselineModel load_baseline(const std::filesystem::path& dir, const config::RunConfig& c,
                                      const env::Scenario& scenario) {
  auto in = open_binary(dir / kBaselineFile);
  return baseline::BaselineModel::load(in, baseline::FeatureMap(scenario), c.baseline);
}

}  // namespace drbid::io
