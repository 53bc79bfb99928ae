#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "p5/environment.hpp"
#include "p5/policy.hpp"

namespace p5 {

struct TrainConfig {
  PpoHyper hyper;
  std::vector<std::size_t> hidden{128, 128};
  double log_std_init = -0.5;
  std::size_t num_envs = 4;
  std::size_t rollout_steps = 512;  // per environment per update
  std::size_t episodes = 100;       // stop once this many episodes have completed
  std::size_t normalizer_warmup = 200;
  std::size_t workers = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LearningCurvePoint {
  std::size_t episode = 0;
  double cumulative_reward = 0.0;
  double mean_cumulative_reward = 0.0;  // over the last 10 completed episodes
};

struct UpdateLog {
  std::size_t update = 0;
  std::size_t episodes_done = 0;
  PpoStats stats;
};

struct TrainResult {
  PolicyParams params;
  std::vector<LearningCurvePoint> curve;
  std::vector<UpdateLog> updates;
  std::size_t aborted_episodes = 0;
  std::size_t total_steps = 0;
};

using TrainProgress = std::function<void(const UpdateLog&)>;

// PPO over num_envs independent environments. Environment e runs episode i with
// seed episode_seed(seed, e, i); collection may be spread across workers without
// changing the result.
TrainResult train_policy(const Topology& topo, const EnvConfig& env_cfg, const ForceFieldParams& ff,
                         const LangevinParams& dyn, const TrainConfig& cfg, const TrainProgress& progress = {});

std::uint64_t episode_seed(std::uint64_t seed, std::size_t env, std::size_t episode);

// "episode,cumulative_reward,mean_cumulative_reward" rows.
std::string learning_curve_csv(const std::vector<LearningCurvePoint>& curve);

}  // namespace p5
