#include <doctest.h>

#include <algorithm>

#include "p5/error.hpp"
#include "p5/training.hpp"
#include "support.hpp"

using namespace p5;

namespace {

// Sanity task: a 3-monomer chain rewarded for staying compact.
struct Sanity {
  Topology topo = build_cellulose_acetate_chain(3);
  ForceFieldParams ff = p5::test::default_ff();
  EnvConfig env;
  LangevinParams dyn;
  TrainConfig train;
  Sanity() {
    dyn = make_langevin_params(topo, 0.1, 1.0, thermal_energy_internal(TimescaleParams{}));
    env.episode_length = 100;
    env.f_coef = 50.0;
    env.theta_max = 0.02;
    env.target_rg_min = 0.0;
    env.target_rg_max = 6.0;
    train.hidden = {32, 32};
    train.num_envs = 2;
    train.rollout_steps = 100;
    train.hyper.minibatch_size = 100;
    train.hyper.learning_rate = 0.1;
    train.hyper.value_coef = 0.01;
    train.normalizer_warmup = 50;
  }
};

}  // namespace

TEST_CASE("episode seeds are distinct and stable") {
  CHECK(episode_seed(1, 0, 0) == episode_seed(1, 0, 0));
  CHECK(episode_seed(1, 0, 0) != episode_seed(1, 1, 0));
  CHECK(episode_seed(1, 0, 0) != episode_seed(1, 0, 1));
  CHECK(episode_seed(1, 0, 0) != episode_seed(2, 0, 0));
}

TEST_CASE("training is reproducible and independent of the worker count") {
  Sanity s;
  s.train.episodes = 6;
  s.train.seed = 3;
  const TrainResult a = train_policy(s.topo, s.env, s.ff, s.dyn, s.train);
  s.train.workers = 2;
  const TrainResult b = train_policy(s.topo, s.env, s.ff, s.dyn, s.train);
  CHECK(a.params == b.params);
  CHECK(learning_curve_csv(a.curve) == learning_curve_csv(b.curve));
  CHECK(a.curve.size() == 6);
  CHECK(a.total_steps == 600);
  CHECK(a.updates.size() == 3);
  CHECK(learning_curve_csv(a.curve).rfind("episode,cumulative_reward,mean_cumulative_reward\n", 0) == 0);

  s.train.num_envs = 0;
  CHECK_THROWS_AS(train_policy(s.topo, s.env, s.ff, s.dyn, s.train), InvalidArgument);
}

TEST_CASE("sanity task learning curve trends upward (median of 10 runs)") {
  Sanity s;
  s.train.episodes = 120;
  const std::size_t runs = 10;
  std::vector<std::vector<double>> curves;
  for (std::size_t r = 0; r < runs; ++r) {
    s.train.seed = 100 + r;
    std::vector<double> c;
    for (const auto& p : train_policy(s.topo, s.env, s.ff, s.dyn, s.train).curve) c.push_back(p.cumulative_reward);
    curves.push_back(std::move(c));
  }
  // Median over runs per episode, then compare the first and last fifth.
  std::vector<double> med;
  for (std::size_t e = 0; e < s.train.episodes; ++e) {
    std::vector<double> v;
    for (const auto& c : curves) v.push_back(c[e]);
    std::nth_element(v.begin(), v.begin() + runs / 2, v.end());
    med.push_back(v[runs / 2]);
  }
  const std::size_t fifth = med.size() / 5;
  double early = 0.0, late = 0.0;
  for (std::size_t i = 0; i < fifth; ++i) {
    early += med[i] / static_cast<double>(fifth);
    late += med[med.size() - 1 - i] / static_cast<double>(fifth);
  }
  MESSAGE("median episode reward: first fifth " << early << ", last fifth " << late);
  CHECK(late > early);
}
