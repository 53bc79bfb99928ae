#include "p5/training.hpp"

#include <algorithm>
#include <optional>
#include <thread>

#include "p5/error.hpp"
#include "p5/text.hpp"

namespace p5 {

void TrainConfig::validate() const {
  hyper.validate();
  if (hidden.empty() || std::find(hidden.begin(), hidden.end(), 0u) != hidden.end()) {
    throw InvalidArgument("hidden layer sizes must be positive");
  }
  if (num_envs == 0 || rollout_steps == 0) throw InvalidArgument("num_envs and rollout_steps must be positive");
  if (episodes == 0) throw InvalidArgument("episodes must be positive");
  if (workers == 0) throw InvalidArgument("workers must be positive");
}

std::uint64_t episode_seed(std::uint64_t seed, std::size_t env, std::size_t episode) {
  return splitmix64(splitmix64(seed ^ 0x5eedULL) ^ splitmix64((static_cast<std::uint64_t>(env) << 40) ^ episode));
}

namespace {

struct Worker {
  Environment env;
  Rng action_rng;
  std::size_t episodes_started = 0;
  double episode_return = 0.0;
  std::uint64_t base_seed = 0;
  std::size_t index = 0;

  void start_episode() {
    env.reset(episode_seed(base_seed, index, episodes_started));
    ++episodes_started;
    episode_return = 0.0;
  }
};

struct Collected {
  RolloutBuffer buffer;
  std::vector<Observation> raw_observations;
  std::vector<double> finished_returns;
  std::size_t aborted = 0;
};

Collected collect(Worker& w, const PolicyParams& params, std::size_t steps, const PpoHyper& hyper) {
  Collected c;
  RolloutBuffer& b = c.buffer;
  while (b.size() < steps) {
    const Observation obs = w.env.observation();
    ActionSample a = sample_action(params, obs, w.action_rng);
    StepResult r;
    try {
      r = w.env.step(a.action);
    } catch (const OverlapError&) {
      if (!b.dones.empty()) b.dones.back() = 1;
      ++c.aborted;
      w.start_episode();
      continue;
    } catch (const IntegrationError&) {
      if (!b.dones.empty()) b.dones.back() = 1;
      ++c.aborted;
      w.start_episode();
      continue;
    }
    c.raw_observations.push_back(obs);
    b.observations.push_back(std::move(a.normalized_obs));
    b.raw_actions.push_back(Eigen::Map<const Eigen::VectorXd>(a.raw.data(), static_cast<Eigen::Index>(a.raw.size())));
    b.actions.push_back(std::move(a.action));
    b.log_probs.push_back(a.log_prob);
    b.rewards.push_back(r.reward.total);
    b.values.push_back(a.value);
    b.dones.push_back(r.done ? 1 : 0);
    w.episode_return += r.reward.total;
    if (r.done) {
      c.finished_returns.push_back(w.episode_return);
      w.start_episode();
    }
  }
  const double bootstrap = b.dones.back() ? 0.0 : forward(params, w.env.observation()).value;
  GaeResult g = compute_gae(b.rewards, b.values, b.dones, bootstrap, hyper.gamma, hyper.gae_lambda);
  b.advantages = std::move(g.advantages);
  b.returns = std::move(g.returns);
  return c;
}

}  // namespace

TrainResult train_policy(const Topology& topo, const EnvConfig& env_cfg, const ForceFieldParams& ff,
                         const LangevinParams& dyn, const TrainConfig& cfg, const TrainProgress& progress) {
  cfg.validate();
  env_cfg.validate();
  Rng root(cfg.seed);

  std::vector<Worker> workers;
  workers.reserve(cfg.num_envs);
  for (std::size_t e = 0; e < cfg.num_envs; ++e) {
    workers.push_back(Worker{Environment(topo, env_cfg, ff, dyn), root.split(1000 + e), 0, 0.0, cfg.seed, e});
    workers.back().start_episode();
  }

  TrainResult result;
  const Environment& env0 = workers.front().env;
  result.params = PolicyParams::create(env0.observation_size(), env0.action_size(), cfg.hidden,
                                       splitmix64(cfg.seed ^ 0xacc0), cfg.log_std_init);

  // Seed the observation statistics with a short unsteered run so the first
  // update does not see raw coordinates.
  {
    Environment warm(topo, env_cfg, ff, dyn);
    std::vector<Observation> obs{warm.reset(splitmix64(cfg.seed ^ 0x3a3a))};
    const std::vector<double> zero(warm.action_size(), 0.0);
    for (std::size_t t = 0; t < cfg.normalizer_warmup && !warm.done(); ++t) obs.push_back(warm.step(zero).observation);
    result.params.normalizer.update(obs);
  }

  Rng update_rng = root.split(1);
  std::size_t completed = 0;
  double window_sum = 0.0;
  std::vector<double> returns;
  for (std::size_t update = 0; completed < cfg.episodes; ++update) {
    std::vector<std::optional<Collected>> parts(workers.size());
    std::vector<std::exception_ptr> errors(workers.size());
    auto run_range = [&](std::size_t first, std::size_t stride) {
      for (std::size_t e = first; e < workers.size(); e += stride) {
        try {
          parts[e] = collect(workers[e], result.params, cfg.rollout_steps, cfg.hyper);
        } catch (...) {
          errors[e] = std::current_exception();
        }
      }
    };
    const std::size_t n_threads = std::min(cfg.workers, workers.size());
    if (n_threads <= 1) {
      run_range(0, 1);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(run_range, t, n_threads);
      for (auto& th : pool) th.join();
    }
    for (auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }

    RolloutBuffer buffer;
    std::vector<Observation> raw;
    for (auto& part : parts) {
      buffer.append(part->buffer);
      raw.insert(raw.end(), part->raw_observations.begin(), part->raw_observations.end());
      result.aborted_episodes += part->aborted;
      for (double ret : part->finished_returns) {
        ++completed;
        returns.push_back(ret);
        window_sum += ret;
        if (returns.size() > 10) window_sum -= returns[returns.size() - 11];
        const double n = static_cast<double>(std::min<std::size_t>(returns.size(), 10));
        result.curve.push_back({completed, ret, window_sum / n});
      }
    }
    result.total_steps += buffer.size();

    PpoUpdateResult upd = ppo_update(result.params, buffer, cfg.hyper, update_rng);
    result.params = std::move(upd.params);
    result.params.normalizer.update(raw);
    result.updates.push_back({update, completed, upd.stats});
    if (progress) progress(result.updates.back());
  }
  return result;
}

std::string learning_curve_csv(const std::vector<LearningCurvePoint>& curve) {
  std::string out = "episode,cumulative_reward,mean_cumulative_reward\n";
  for (const auto& p : curve) {
    out += std::to_string(p.episode) + ',' + format_sci10(p.cumulative_reward) + ',' +
           format_sci10(p.mean_cumulative_reward) + '\n';
  }
  return out;
}

}  // namespace p5
