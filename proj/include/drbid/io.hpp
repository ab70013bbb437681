#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "drbid/baseline.hpp"
#include "drbid/config.hpp"
#include "drbid/pipeline.hpp"

// Run-directory files: tidy CSV tables, JSON metrics and manifest, binary
// checkpoints. Every text format is written with shortest round-trip number
// formatting so identical runs give identical bytes.
namespace drbid::io {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kOutcomeSchema = 1;
inline constexpr int kProfitCurveSchema = 1;
inline constexpr int kDatasetSchema = 1;
inline constexpr int kMetricsSchema = 1;
inline constexpr int kManifestSchema = 1;

inline constexpr const char* kOutcomeHeader =
    "episode,day,t,V,mcp,bid_price,bid_quantity,q_act,xi,alpha,win,deal,profit";
inline constexpr const char* kProfitCurveHeader = "episode,cumulative_profit";

std::string format_number(double v);
// Finite values as numbers; "inf" when q_act = 0 < q_bid; "nan" for the no-op case.
std::string format_xi(const market::ExecutionRate& xi);

void write_outcomes_csv(std::ostream& os, std::span<const pipeline::OutcomeRow> log);
void write_profit_curve_csv(std::ostream& os, std::span<const double> curve);
// One row per (day, event slot): calendar, reserve, frozen draw, clearing
// price under this scenario, and every customer's offer.
void write_dataset_csv(std::ostream& os, const env::Scenario& scenario, const pipeline::Dataset& dataset);
// One row per (day, customer): the customer's baseline for that day.
void write_baselines_csv(std::ostream& os, const pipeline::Dataset& dataset);
void write_customers_csv(std::ostream& os, const env::Scenario& scenario);

nlohmann::json metrics_json(const pipeline::RunMetrics& m, std::string_view label);

void ensure_directory(const std::filesystem::path& dir);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

inline constexpr const char* kPriceAgentFile = "price_agent.ckpt";
inline constexpr const char* kQuantityAgentFile = "quantity_agent.ckpt";
inline constexpr const char* kBaselineFile = "baseline.ckpt";

void save_agents(const std::filesystem::path& dir, const pipeline::AgentPair& agents);
pipeline::AgentPair load_agents(const std::filesystem::path& dir, const config::RunConfig& c,
                                const env::Scenario& scenario);
void save_baseline(const std::filesystem::path& dir, const baseline::BaselineModel& model);
baseline::BaselineModel load_baseline(const std::filesystem::path& dir, const config::RunConfig& c,
                                      const env::Scenario& scenario);

}  // namespace drbid::io
