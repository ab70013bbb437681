#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>

#include "drbid/baseline.hpp"
#include "drbid/config.hpp"
#include "drbid/pipeline.hpp"

// End-to-end protocols assembled from a RunConfig: which days each dataset
// covers and which seed drives which stream.
namespace drbid::experiment {

struct Seeds {
  std::uint64_t master{0};
  std::uint64_t population{0};
  std::uint64_t data{0};
  std::uint64_t agents{0};
  std::uint64_t training{0};
  std::uint64_t baseline{0};
};

Seeds derive_seeds(std::uint64_t master);

std::shared_ptr<const env::Scenario> build_scenario(const config::RunConfig& c);

// Offline protocol: days [0, offline_days), trained for `episodes` passes and
// evaluated greedily on the same frozen draws.
pipeline::Dataset offline_dataset(const config::RunConfig& c, const env::Scenario& scenario);
// Online protocol: pretraining days [0, pretrain_days) and the following
// online_days as the act-then-learn test days.
pipeline::Dataset pretrain_dataset(const config::RunConfig& c, const env::Scenario& scenario);
pipeline::Dataset online_dataset(const config::RunConfig& c, const env::Scenario& scenario);

struct OfflineRun {
  std::shared_ptr<const env::Scenario> scenario;
  pipeline::Dataset dataset;
  pipeline::AgentPair agents;
  pipeline::OfflineResult training;
  pipeline::OutcomeLog evaluation;
  pipeline::RunMetrics metrics;
};

using EpisodeHook = std::function<void(int episode, double cumulative_profit)>;
using CheckpointHook = std::function<void(int episode, const pipeline::AgentPair&)>;

OfflineRun run_offline(const config::RunConfig& c, const EpisodeHook& on_episode = {},
                       const CheckpointHook& on_checkpoint = {});

// Pretrains fresh agents on the pretraining days (offline protocol with
// pretrain_episodes).
OfflineRun run_pretraining(const config::RunConfig& c, const EpisodeHook& on_episode = {},
                           const CheckpointHook& on_checkpoint = {});

struct OnlineRun {
  std::shared_ptr<const env::Scenario> scenario;
  pipeline::Dataset online_days;
  pipeline::AgentPair agents;  // after online learning
  pipeline::OnlineResult online;
  std::optional<baseline::FitResult> baseline_fit;
  pipeline::OutcomeLog baseline_log;
  std::optional<pipeline::RunMetrics> baseline_metrics;
};

// Online protocol from pretrained agents. The benchmark regressors are fitted
// on the pretrained agents' greedy log over the pretraining days and then
// evaluated on the same online days and draws, without learning.
OnlineRun run_online(const config::RunConfig& c, pipeline::AgentPair pretrained, bool with_baseline = true);

}  // namespace drbid::experiment
