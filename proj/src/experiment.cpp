#include "drbid/experiment.hpp"

namespace drbid::experiment {

Seeds derive_seeds(std::uint64_t master) {
  Seeds s;
  s.master = master;
  s.population = master;
  s.data = splitmix64(master ^ 0x64617461ULL);
  s.agents = splitmix64(master ^ 0x6167656eULL);
  s.training = splitmix64(master ^ 0x74726169ULL);
  s.baseline = splitmix64(master ^ 0x62617365ULL);
  return s;
}

std::shared_ptr<const env::Scenario> build_scenario(const config::RunConfig& c) {
  env::ScenarioConfig sc = c.scenario;
  sc.seed = derive_seeds(c.seed).population;
  return std::make_shared<const env::Scenario>(env::make_scenario(sc));
}

pipeline::Dataset offline_dataset(const config::RunConfig& c, const env::Scenario& scenario) {
  return pipeline::build_dataset(scenario, 0, c.pipeline.offline_days, derive_seeds(c.seed).data);
}

pipeline::Dataset pretrain_dataset(const config::RunConfig& c, const env::Scenario& scenario) {
  return pipeline::build_dataset(scenario, 0, c.pipeline.pretrain_days, derive_seeds(c.seed).data);
}

pipeline::Dataset online_dataset(const config::RunConfig& c, const env::Scenario& scenario) {
  return pipeline::build_dataset(scenario, c.pipeline.pretrain_days, c.pipeline.online_days,
                                 derive_seeds(c.seed).data);
}

namespace {

OfflineRun train_and_evaluate(const config::RunConfig& c, std::shared_ptr<const env::Scenario> scenario,
                              pipeline::Dataset dataset, int episodes, const EpisodeHook& on_episode,
                              const CheckpointHook& on_checkpoint) {
  const Seeds seeds = derive_seeds(c.seed);
  OfflineRun run{scenario, std::move(dataset),
                 pipeline::make_agents(*scenario, c.price_agent, c.quantity_agent, seeds.agents), {}, {}, {}};
  pipeline::TrainingOptions opt;
  opt.episodes = episodes;
  opt.reward_scale = c.pipeline.reward_scale;
  opt.checkpoint_interval = c.pipeline.checkpoint_interval;
  opt.on_checkpoint = on_checkpoint;
  opt.on_episode = on_episode;
  Rng rng(seeds.training);
  run.training = pipeline::train_offline(scenario, run.agents, run.dataset, opt, rng);
  if (!run.dataset.days.empty()) {
    pipeline::AgentPolicy policy(run.agents);
    run.evaluation = pipeline::evaluate(scenario, run.dataset, policy);
    run.metrics = pipeline::compute_metrics(run.evaluation);
  }
  return run;
}

}  // namespace

OfflineRun run_offline(const config::RunConfig& c, const EpisodeHook& on_episode,
                       const CheckpointHook& on_checkpoint) {
  auto scenario = build_scenario(c);
  auto dataset = offline_dataset(c, *scenario);
  return train_and_evaluate(c, scenario, std::move(dataset), c.pipeline.episodes, on_episode, on_checkpoint);
}

OfflineRun run_pretraining(const config::RunConfig& c, const EpisodeHook& on_episode,
                           const CheckpointHook& on_checkpoint) {
  auto scenario = build_scenario(c);
  auto dataset = pretrain_dataset(c, *scenario);
  return train_and_evaluate(c, scenario, std::move(dataset), c.pipeline.pretrain_episodes, on_episode,
                            on_checkpoint);
}

OnlineRun run_online(const config::RunConfig& c, pipeline::AgentPair pretrained, bool with_baseline) {
  const Seeds seeds = derive_seeds(c.seed);
  auto scenario = build_scenario(c);
  OnlineRun run{scenario, online_dataset(c, *scenario), std::move(pretrained), {}, std::nullopt, {}, std::nullopt};

  if (with_baseline) {
    // Fitted before online learning touches the agents.
    const auto history = pretrain_dataset(c, *scenario);
    if (!history.days.empty()) {
      pipeline::AgentPolicy pretrained_policy(run.agents);
      const auto history_log = pipeline::evaluate(scenario, history, pretrained_policy);
      const baseline::FeatureMap features(*scenario);
      const auto data = baseline::make_training_set(*scenario, features, history, history_log);
      Rng rng(seeds.baseline);
      run.baseline_fit = baseline::fit_baseline(features, data, c.baseline, rng);
    }
  }

  pipeline::OnlineOptions opt;
  opt.learn = c.pipeline.online_learn;
  opt.explore = c.pipeline.online_explore;
  opt.reward_scale = c.pipeline.reward_scale;
  Rng rng(seeds.training, 1);
  run.online = pipeline::train_online(scenario, run.agents, run.online_days, opt, rng);

  if (run.baseline_fit && !run.online_days.days.empty()) {
    baseline::BaselinePolicy policy(run.baseline_fit->model, scenario->config.bounds);
    run.baseline_log = pipeline::evaluate(scenario, run.online_days, policy);
    run.baseline_metrics = pipeline::compute_metrics(run.baseline_log);
  }
  return run;
}

}  // namespace drbid::experiment
