#include <doctest.h>

#include <cmath>

#include "p5/environment.hpp"
#include "p5/error.hpp"
#include "support.hpp"

using namespace p5;

namespace {

// Independent RG: pairwise form RG² = Σ_{i<j} |ri − rj|² / N².
double rg_pairwise(const std::vector<Vec3>& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) s += norm2(x[i] - x[j]);
  }
  const double n = static_cast<double>(x.size());
  return std::sqrt(s / (n * n));
}

}  // namespace

TEST_CASE("radius of gyration") {
  CHECK(radius_of_gyration(std::vector<Vec3>(5, Vec3{1, 2, 3})) == 0.0);
  CHECK(radius_of_gyration(std::vector<Vec3>{{0, 0, 0}, {2, 0, 0}}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(radius_of_gyration(std::vector<Vec3>{}), InvalidArgument);
  Rng rng(1);
  for (int f = 0; f < 10; ++f) {
    std::vector<Vec3> x(525);
    for (Vec3& r : x) r = Vec3{rng.normal(), rng.normal(), rng.normal()} * 30.0 + Vec3{100, -50, 7};
    CHECK(std::abs(radius_of_gyration(x) / rg_pairwise(x) - 1.0) < 1e-12);
  }
  // Equal masses: the mass-weighted form coincides.
  std::vector<Vec3> x{{0, 0, 0}, {3, 1, 0}, {1, 4, 2}};
  CHECK(radius_of_gyration(x, std::vector<double>(3, 65.4)) == doctest::Approx(radius_of_gyration(x)).epsilon(1e-14));
}

TEST_CASE("reward components") {
  const EnvConfig cfg;
  const RewardBreakdown mid = compute_reward(100.0, cfg);
  CHECK(mid.r_dist == 0.0);
  CHECK(mid.r_rg == cfg.k_r);
  CHECK(mid.r_shaping == cfg.k_s);
  CHECK(mid.total == cfg.k_r + cfg.k_s);

  const RewardBreakdown out = compute_reward(250.0, cfg);
  CHECK(out.r_dist == doctest::Approx(-cfg.k_d * 2500));
  CHECK(out.r_rg == 0.0);
  CHECK(out.r_shaping == doctest::Approx(-0.5 * cfg.k_s));
  CHECK(out.total == out.r_dist + out.r_rg + out.r_shaping);

  const RewardBreakdown edge = compute_reward(200.0, cfg);
  CHECK(edge.r_dist == 0.0);
  CHECK(edge.r_rg == cfg.k_r);
  CHECK(edge.r_shaping == 0.0);

  // Continuity of r_dist and r_shaping; r_rg jumps by exactly k_r.
  const RewardBreakdown above = compute_reward(std::nextafter(200.0, 300.0), cfg);
  CHECK(std::abs(above.r_dist - edge.r_dist) < 1e-9);
  CHECK(std::abs(above.r_shaping - edge.r_shaping) < 1e-9);
  CHECK(edge.r_rg - above.r_rg == cfg.k_r);
}

TEST_CASE("reset") {
  const Topology t = build_cellulose_acetate_chain(75);
  const ForceFieldParams ff = p5::test::default_ff();
  EnvConfig cfg;
  const ResetResult a = reset(t, cfg, ff, 3), b = reset(t, cfg, ff, 3);
  CHECK(a.state == b.state);
  CHECK(a.observation == b.observation);
  const double rg = radius_of_gyration(a.state.positions);
  CHECK(rg > 0.0);
  CHECK(std::isfinite(rg));
  for (const Vec3& v : a.state.velocities) CHECK(v == Vec3{});

  cfg.init_noise_sigma = 0.0;
  const ResetResult c = reset(t, cfg, ff, 3);
  CHECK(c.state.positions == canonical_conformation(t, ff));
  CHECK(c.initial_density.log_density(c.state.positions) == 0.0);
}

TEST_CASE("observation layout on a hand-built two-bead chain") {
  const Topology t = parse_topology("[beads]\n0 Na 72 0 1\n1 P3 72 1 1\n[bonds]\n0 1 0\n");
  SystemState s = SystemState::at_rest({{0, 0, 0}, {3, 4, 0}});
  s.velocities = {{0.1, 0.2, 0.3}, {-1, 0, 1}};
  s.angular_velocities = {{0, 0, 1}, {2, 0, 0}};
  EnvConfig cfg;
  cfg.k_neighbors = 2;
  cfg.target_rg_min = 1;
  cfg.target_rg_max = 9;
  const Observation o = observe(s, t, cfg);
  const std::vector<double> expected{
      -1.5, -2, 0, 0.1, 0.2, 0.3, 0, 0, 1, 0, 0, 3, 4, 0, 0, 0, 0,    // bead 0
      1.5, 2, 0, -1, 0, 1, 2, 0, 0, 0, 0, -3, -4, 0, 0, 0, 0,         // bead 1
      2.5, 1, 9};
  REQUIRE(o.size() == expected.size());
  for (std::size_t i = 0; i < o.size(); ++i) CHECK(o[i] == doctest::Approx(expected[i]).epsilon(1e-15));

  cfg.obs_radius = 5.0 - 1e-9;  // neighbour just outside
  const Observation far = observe(s, t, cfg);
  for (std::size_t i = 11; i < 17; ++i) CHECK(far[i] == 0.0);

  CHECK(observation_size(75, 4) == 1728);
}

TEST_CASE("observation is fixed-length and finite") {
  const Topology t = build_cellulose_acetate_chain(5);
  const ForceFieldParams ff = p5::test::default_ff();
  const EnvConfig cfg;
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    SystemState s = SystemState::at_rest(p5::test::jittered_chain(t, ff, rng, 2.0));
    for (Vec3& v : s.velocities) v = {rng.normal(), rng.normal(), rng.normal()};
    const Observation o = observe(s, t, cfg);
    CHECK(o.size() == observation_size(5, cfg.k_neighbors));
    for (double v : o) CHECK(std::isfinite(v));
  }
}

TEST_CASE("learned forces and action bounds") {
  const Topology t = build_cellulose_acetate_chain(2);
  EnvConfig cfg;
  cfg.f_coef = 2.0;
  std::vector<double> a{1, -0.5, 0, 0.5, 0, 0, 0, 1, 1, 1};
  const auto f = learned_forces(a, t, cfg);
  CHECK(f[t.backbone_order[0]] == Vec3{1, -0.5, 0});
  CHECK(f[t.backbone_order[1]] == Vec3{0, 0, 2});
  CHECK(f[1] == Vec3{});
  a[3] = 1.2;
  CHECK_THROWS_AS(learned_forces(a, t, cfg), InvalidArgument);
  a[3] = 0.5;
  a[4] = -1.01;
  CHECK_THROWS_AS(check_action_bounds(a, 2), InvalidArgument);
  CHECK_THROWS_AS(check_action_bounds(std::vector<double>(9, 0.0), 2), InvalidArgument);
}

TEST_CASE("environment step") {
  const Topology t = build_cellulose_acetate_chain(4);
  const ForceFieldParams ff = p5::test::default_ff();
  EnvConfig cfg;
  cfg.episode_length = 5;
  const LangevinParams dyn = make_langevin_params(t, 0.01, 0.5, 10.0);
  Environment env(t, cfg, ff, dyn);
  env.reset(8);

  // Zero action equals the bare Langevin step on stream 1 of the seed.
  const SystemState s0 = env.state();
  Rng rng = Rng(8).split(1);
  const auto f0 = total_energy_forces(t, s0.positions, ff).forces;
  const SystemState bare = langevin_step(s0, f0, std::vector<Vec3>(t.bead_count()), dyn, rng);
  const std::vector<double> zero(env.action_size(), 0.0);
  const StepResult r = env.step(zero);
  CHECK(env.state() == bare);
  CHECK(r.reward.total == compute_reward(radius_of_gyration(env.state().positions), cfg).total);
  CHECK(r.info.rg == radius_of_gyration(env.state().positions));
  CHECK_FALSE(r.done);

  std::vector<double> a(env.action_size(), 0.0);
  for (std::size_t b = 0; b < 4; ++b) a[5 * b + 4] = 1.0;
  for (int i = 0; i < 3; ++i) CHECK_FALSE(env.step(a).done);
  CHECK(env.step(a).done);
  CHECK(env.state().step == 5);
  CHECK_THROWS_AS(env.step(a), InvalidArgument);

  // The free function agrees with the stateful wrapper.
  const ForceField field(t, ff);
  Rng r1 = Rng(8).split(1);
  env.reset(8);
  const SystemState start = env.state();
  const StepResult via_env = env.step(a);
  const auto [next, via_free] = step(start, a, t, cfg, field, dyn, r1);
  CHECK(next == env.state());
  CHECK(via_free.observation == via_env.observation);
}
