// drbid: simulate, train, evaluate, grid-search and report for the
// demand-bidding aggregator agents.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "drbid/config.hpp"
#include "drbid/experiment.hpp"
#include "drbid/io.hpp"

namespace fs = std::filesystem;
using namespace drbid;

namespace {

enum Exit { kOk = 0, kConfigError = 1, kRuntimeError = 2, kThresholdNotMet = 3 };

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> scenario;
  std::string mode{"offline"};
  std::string pretrained;
  std::string out;
  bool dry_run{false};
  bool pretrain{false};
  std::string policy{"agents"};
  std::vector<std::string> report_dirs;
};

config::RunConfig resolve_config(const CommonOptions& o) {
  config::RunConfig c = o.config_path.empty() ? config::RunConfig{} : config::load(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.scenario) c.scenario.mcp.noise_sigma = config::scenario_sigma(*o.scenario);
  c.scenario.seed = c.seed;
  config::validate(c);
  return c;
}

nlohmann::json manifest(const config::RunConfig& c, const std::string& command, const std::string& mode,
                        const nlohmann::json& files) {
  const auto s = experiment::derive_seeds(c.seed);
  return {{"schema", io::kManifestSchema},
          {"tool", "drbid"},
          {"command", command},
          {"mode", mode},
          {"config_hash", config::config_hash(c)},
          {"config", config::to_json(c)},
          {"seeds",
           {{"master", s.master},
            {"population", s.population},
            {"data", s.data},
            {"agents", s.agents},
            {"training", s.training},
            {"baseline", s.baseline}}},
          {"files", files}};
}

template <class Fn>
std::string to_string_with(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

void require_out(const CommonOptions& o) {
  if (o.out.empty()) throw config::ConfigError("--out is required");
}

void print_metrics(const std::string& label, const pipeline::RunMetrics& m) {
  std::printf("%-10s periods %3zu  success %.3f  tight %.3f  loose %.3f  win %.3f  profit %.2f\n", label.c_str(),
              m.periods, m.success_rate, m.rate_tight, m.rate_loose, m.win_rate, m.total_profit);
}

// ---------------------------------------------------------------------------

int cmd_simulate(const CommonOptions& o) {
  const auto c = resolve_config(o);
  require_out(o);
  if (o.mode != "offline" && o.mode != "online") throw config::ConfigError("--mode must be offline or online");
  if (o.dry_run) {
    std::printf("config ok (hash %s); would write datasets to %s\n", config::config_hash(c).c_str(), o.out.c_str());
    return kOk;
  }
  const auto scenario = experiment::build_scenario(c);
  std::vector<std::pair<std::string, pipeline::Dataset>> sets;
  if (o.mode == "offline") {
    sets.emplace_back("offline", experiment::offline_dataset(c, *scenario));
  } else {
    sets.emplace_back("pretrain", experiment::pretrain_dataset(c, *scenario));
    sets.emplace_back("online", experiment::online_dataset(c, *scenario));
  }
  const fs::path out(o.out);
  io::ensure_directory(out);
  nlohmann::json files = {{"customers.csv", 1}};
  io::write_text(out / "customers.csv", to_string_with([&](std::ostream& os) { io::write_customers_csv(os, *scenario); }));
  for (const auto& [name, ds] : sets) {
    if (ds.days.empty()) std::fprintf(stderr, "warning: %s dataset has no days; writing an empty table\n", name.c_str());
    const std::string data_file = name + "_dataset.csv";
    const std::string cbl_file = name + "_baselines.csv";
    io::write_text(out / data_file, to_string_with([&](std::ostream& os) { io::write_dataset_csv(os, *scenario, ds); }));
    io::write_text(out / cbl_file, to_string_with([&](std::ostream& os) { io::write_baselines_csv(os, ds); }));
    files[data_file] = io::kDatasetSchema;
    files[cbl_file] = io::kDatasetSchema;
    std::printf("%s: %zu days, %zu periods\n", name.c_str(), ds.days.size(), ds.periods(*scenario));
  }
  io::write_json(out / "manifest.json", manifest(c, "simulate", o.mode, files));
  return kOk;
}

void write_run_outputs(const fs::path& out, const std::string& prefix, std::span<const pipeline::OutcomeRow> log,
                       const pipeline::RunMetrics& m, std::string_view label, nlohmann::json& files) {
  io::write_text(out / (prefix + "outcomes.csv"), to_string_with([&](std::ostream& os) { io::write_outcomes_csv(os, log); }));
  io::write_json(out / (prefix + "metrics.json"), io::metrics_json(m, label));
  files[prefix + "outcomes.csv"] = io::kOutcomeSchema;
  files[prefix + "metrics.json"] = io::kMetricsSchema;
}

fs::path checkpoint_dir(const fs::path& p) {
  if (fs::exists(p / io::kPriceAgentFile)) return p;
  if (fs::exists(p / "checkpoint" / io::kPriceAgentFile)) return p / "checkpoint";
  throw io::IoError("no agent checkpoint found under '" + p.string() + "'");
}

int cmd_train(const CommonOptions& o) {
  const auto c = resolve_config(o);
  require_out(o);
  if (o.mode != "offline" && o.mode != "online") throw config::ConfigError("--mode must be offline or online");
  if (o.mode == "online" && o.pretrained.empty()) {
    throw config::ConfigError("online training needs --pretrained DIR (agents pretrained with train --pretrain)");
  }
  if (o.mode == "online" && o.pretrain) throw config::ConfigError("--pretrain applies to offline mode only");
  if (o.dry_run) {
    std::printf("config ok (hash %s); would train %s into %s\n", config::config_hash(c).c_str(), o.mode.c_str(),
                o.out.c_str());
    return kOk;
  }
  const fs::path out(o.out);
  io::ensure_directory(out);
  nlohmann::json files;

  if (o.mode == "offline") {
    const auto on_episode = [](int ep, double profit) {
      if (ep % 10 == 0) std::fprintf(stderr, "episode %d cumulative profit %.2f\n", ep, profit);
    };
    const auto on_checkpoint = [&](int ep, const pipeline::AgentPair& agents) {
      io::save_agents(out / "checkpoints" / ("episode_" + std::to_string(ep)), agents);
    };
    auto run = o.pretrain ? experiment::run_pretraining(c, on_episode, on_checkpoint)
                          : experiment::run_offline(c, on_episode, on_checkpoint);
    io::save_agents(out / "checkpoint", run.agents);
    files["checkpoint/price_agent.ckpt"] = 1;
    files["checkpoint/quantity_agent.ckpt"] = 1;
    io::write_text(out / "profit_curve.csv",
                   to_string_with([&](std::ostream& os) { io::write_profit_curve_csv(os, run.training.cumulative_profit); }));
    files["profit_curve.csv"] = io::kProfitCurveSchema;
    if (!run.evaluation.empty()) {
      write_run_outputs(out, "", run.evaluation, run.metrics, "agents", files);
      print_metrics("agents", run.metrics);
    } else {
      std::fprintf(stderr, "warning: empty dataset; no evaluation written\n");
    }
    io::write_json(out / "manifest.json", manifest(c, "train", o.pretrain ? "pretrain" : "offline", files));
    return kOk;
  }

  const auto scenario = experiment::build_scenario(c);
  auto pretrained = io::load_agents(checkpoint_dir(o.pretrained), c, *scenario);
  auto run = experiment::run_online(c, std::move(pretrained));
  io::save_agents(out / "checkpoint", run.agents);
  files["checkpoint/price_agent.ckpt"] = 1;
  files["checkpoint/quantity_agent.ckpt"] = 1;
  if (run.online.log.empty()) {
    std::fprintf(stderr, "warning: no online days configured; nothing evaluated\n");
  } else {
    write_run_outputs(out, "", run.online.log, run.online.metrics, "agents", files);
    print_metrics("agents", run.online.metrics);
  }
  if (run.baseline_fit) {
    io::save_baseline(out / "checkpoint", run.baseline_fit->model);
    files["checkpoint/baseline.ckpt"] = 1;
    for (const auto& note : run.baseline_fit->diagnostics.notes) std::fprintf(stderr, "baseline: %s\n", note.c_str());
    if (run.baseline_metrics) {
      write_run_outputs(out, "baseline_", run.baseline_log, *run.baseline_metrics, "baseline", files);
      print_metrics("baseline", *run.baseline_metrics);
    }
  }
  io::write_json(out / "manifest.json", manifest(c, "train", "online", files));
  return kOk;
}

int cmd_evaluate(const CommonOptions& o) {
  const auto c = resolve_config(o);
  require_out(o);
  if (o.pretrained.empty()) throw config::ConfigError("evaluate needs --pretrained DIR holding the checkpoint");
  if (o.mode != "offline" && o.mode != "online") throw config::ConfigError("--mode must be offline or online");
  if (o.policy != "agents" && o.policy != "baseline") throw config::ConfigError("--policy must be agents or baseline");
  if (o.dry_run) {
    std::printf("config ok (hash %s); would evaluate %s\n", config::config_hash(c).c_str(), o.policy.c_str());
    return kOk;
  }
  const auto scenario = experiment::build_scenario(c);
  const auto dataset =
      o.mode == "offline" ? experiment::offline_dataset(c, *scenario) : experiment::online_dataset(c, *scenario);
  if (dataset.days.empty()) throw config::ConfigError("the selected dataset has no days to evaluate");

  pipeline::OutcomeLog log;
  const fs::path dir = o.policy == "agents" ? checkpoint_dir(o.pretrained)
                       : fs::exists(fs::path(o.pretrained) / io::kBaselineFile)
                           ? fs::path(o.pretrained)
                           : fs::path(o.pretrained) / "checkpoint";
  if (o.policy == "agents") {
    const auto agents = io::load_agents(dir, c, *scenario);
    pipeline::AgentPolicy policy(agents);
    log = pipeline::evaluate(scenario, dataset, policy);
  } else {
    const auto model = io::load_baseline(dir, c, *scenario);
    baseline::BaselinePolicy policy(model, scenario->config.bounds);
    log = pipeline::evaluate(scenario, dataset, policy);
  }
  const auto metrics = pipeline::compute_metrics(log);
  const fs::path out(o.out);
  io::ensure_directory(out);
  nlohmann::json files;
  write_run_outputs(out, "", log, metrics, o.policy, files);
  io::write_json(out / "manifest.json", manifest(c, "evaluate", o.mode, files));
  print_metrics(o.policy, metrics);
  return kOk;
}

int cmd_grid_search(const CommonOptions& o) {
  const auto c = resolve_config(o);
  require_out(o);
  if (o.mode != "offline" && o.mode != "online") throw config::ConfigError("--mode must be offline or online");
  if (c.grid.empty()) throw config::ConfigError("grid-search needs a non-empty 'grid' section in the config");
  const auto points = pipeline::expand_grid(c.grid);
  if (o.dry_run) {
    std::printf("config ok (hash %s); %zu grid points\n", config::config_hash(c).c_str(), points.size());
    return kOk;
  }
  const bool online = o.mode == "online";
  const double threshold =
      online ? c.pipeline.online_success_threshold : c.pipeline.offline_success_threshold;

  const pipeline::GridEvaluator evaluate_point = [&](const pipeline::GridPoint& p) {
    config::RunConfig pc = c;
    for (const auto& [key, value] : p.values) pc = config::with_override(pc, key, value);
    pipeline::GridEvaluation ev;
    if (online) {
      auto pre = experiment::run_pretraining(pc);
      auto run = experiment::run_online(pc, std::move(pre.agents), false);
      ev.metrics = run.online.metrics;
    } else {
      auto run = experiment::run_offline(pc);
      ev.metrics = run.metrics;
    }
    ev.cumulative_profit = ev.metrics.total_profit;
    std::fprintf(stderr, "%s: success %.3f profit %.2f\n", p.describe().c_str(), ev.metrics.success_rate,
                 ev.metrics.total_profit);
    return ev;
  };
  const auto result = pipeline::grid_search(points, evaluate_point, threshold, c.pipeline.workers);

  const fs::path out(o.out);
  io::ensure_directory(out);
  std::ostringstream csv;
  csv << "point,success_rate,rate_tight,rate_loose,win_rate,total_profit,qualifies,selected\n";
  for (std::size_t i = 0; i < result.evaluations.size(); ++i) {
    const auto& ev = result.evaluations[i];
    csv << '"' << ev.point.describe() << "\"," << io::format_number(ev.metrics.success_rate) << ','
        << io::format_number(ev.metrics.rate_tight) << ',' << io::format_number(ev.metrics.rate_loose) << ','
        << io::format_number(ev.metrics.win_rate) << ',' << io::format_number(ev.metrics.total_profit) << ','
        << (ev.qualifies ? 1 : 0) << ',' << (result.best == i ? 1 : 0) << '\n';
  }
  io::write_text(out / "grid.csv", csv.str());
  nlohmann::json best = {{"threshold", threshold}, {"mode", o.mode}};
  if (result.best) {
    const auto& ev = result.evaluations[*result.best];
    nlohmann::json values = nlohmann::json::object();
    for (const auto& [k, v] : ev.point.values) values[k] = v;
    best["status"] = "selected";
    best["point"] = values;
    best["metrics"] = io::metrics_json(ev.metrics, "agents");
  } else {
    best["status"] = "no qualifying configuration";
  }
  io::write_json(out / "best.json", best);
  io::write_json(out / "manifest.json", manifest(c, "grid-search", o.mode, {{"grid.csv", 1}, {"best.json", 1}}));
  if (!result.best) {
    std::printf("no qualifying configuration: no grid point reached success rate %.3f\n", threshold);
    return kThresholdNotMet;
  }
  std::printf("selected %s\n", result.evaluations[*result.best].point.describe().c_str());
  return kOk;
}

int cmd_report(const CommonOptions& o) {
  if (o.report_dirs.empty()) throw config::ConfigError("report needs at least one run directory");
  std::printf("%-32s %-9s %7s %9s %7s %7s %7s %12s\n", "run", "policy", "periods", "success", "tight", "loose",
              "win", "profit");
  for (const auto& d : o.report_dirs) {
    bool any = false;
    for (const char* name : {"metrics.json", "baseline_metrics.json"}) {
      const fs::path p = fs::path(d) / name;
      if (!fs::exists(p)) continue;
      any = true;
      nlohmann::json m;
      try {
        m = nlohmann::json::parse(io::read_text(p));
      } catch (const nlohmann::json::exception& e) {
        throw io::IoError("unreadable metrics file '" + p.string() + "': " + e.what());
      }
      std::printf("%-32s %-9s %7d %9.3f %7.3f %7.3f %7.3f %12.2f\n", d.c_str(),
                  m.at("policy").get<std::string>().c_str(), m.at("periods").get<int>(),
                  m.at("success_rate").get<double>(), m.at("rate_tight").get<double>(),
                  m.at("rate_loose").get<double>(), m.at("win_rate").get<double>(),
                  m.at("total_profit").get<double>());
    }
    const fs::path curve = fs::path(d) / "profit_curve.csv";
    if (fs::exists(curve)) {
      std::istringstream in(io::read_text(curve));
      std::string line;
      std::getline(in, line);
      std::vector<double> values;
      while (std::getline(in, line)) values.push_back(std::stod(line.substr(line.find(',') + 1)));
      if (!values.empty()) {
        std::printf("%-32s profit curve: %zu episodes, last %.2f\n", "", values.size(), values.back());
      }
      any = true;
    }
    if (!any) throw io::IoError("no metrics found in '" + d + "'");
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Demand-bidding aggregator: simulation, DDPG training and evaluation"};
  app.require_subcommand(1);
  CommonOptions o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Master seed (overrides the config)");
    sub->add_option("--scenario", o.scenario, "1, 2 or 3: MCP noise sigma 0, 0.2 or 0.5")
        ->check(CLI::IsMember({1, 2, 3}));
    sub->add_option("--out", o.out, "Output directory");
    sub->add_flag("--dry-run", o.dry_run, "Validate the configuration and exit without writing");
  };
  auto add_mode = [&](CLI::App* sub) {
    sub->add_option("--mode", o.mode, "offline or online")->check(CLI::IsMember({"offline", "online"}));
  };

  auto* simulate = app.add_subcommand("simulate", "Write the scenario's datasets and frozen draws");
  add_common(simulate);
  add_mode(simulate);

  auto* train = app.add_subcommand("train", "Train the agents (offline) or run the online protocol");
  add_common(train);
  add_mode(train);
  train->add_option("--pretrained", o.pretrained, "Pretrained checkpoint directory (online mode)");
  train->add_flag("--pretrain", o.pretrain, "Offline training on the online protocol's pretraining days");

  auto* evaluate = app.add_subcommand("evaluate", "Replay frozen draws under a saved policy");
  add_common(evaluate);
  add_mode(evaluate);
  evaluate->add_option("--pretrained", o.pretrained, "Checkpoint directory to evaluate");
  evaluate->add_option("--policy", o.policy, "agents or baseline")->check(CLI::IsMember({"agents", "baseline"}));

  auto* grid = app.add_subcommand("grid-search", "Evaluate the config's grid and select a configuration");
  add_common(grid);
  add_mode(grid);

  auto* report = app.add_subcommand("report", "Summarise metrics of finished runs");
  report->add_option("runs", o.report_dirs, "Run directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*simulate) return cmd_simulate(o);
    if (*train) return cmd_train(o);
    if (*evaluate) return cmd_evaluate(o);
    if (*grid) return cmd_grid_search(o);
    if (*report) return cmd_report(o);
  } catch (const config::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const pipeline::TrainingError& e) {
    std::fprintf(stderr, "training failed after episode %d: %s\n", e.last_good_episode(), e.what());
    return kRuntimeError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeError;
  }
  return kConfigError;
}
