// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the number of failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "p5/analysis.hpp"
#include "p5/cli.hpp"
#include "p5/fileio.hpp"
#include "p5/training.hpp"
#include "../support.hpp"

using namespace p5;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
  std::printf("ACCEPTANCE %d: %s  %s\n", n, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- 1
void timescale() {
  const double v = timescale_factor_fs(TimescaleParams{});
  const double rel = std::abs(v / 209.7915273799608 - 1.0);
  report(1, rel < 1e-9, fmt("timescale %.13f fs, rel err %.2e", v, rel));
}

// ---------------------------------------------------------------- 2
void rg_oracle() {
  Rng rng(2024);
  double worst = 0.0;
  for (int f = 0; f < 100; ++f) {
    std::vector<Vec3> x(525);
    const Vec3 offset{50 * rng.normal(), 50 * rng.normal(), 50 * rng.normal()};
    for (Vec3& r : x) r = offset + Vec3{rng.normal(), rng.normal(), rng.normal()} * (5.0 + 40.0 * rng.uniform());
    // Direct pairwise summation, no centroid.
    long double s = 0.0L;
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (std::size_t j = i + 1; j < x.size(); ++j) s += norm2(x[i] - x[j]);
    }
    const double direct = static_cast<double>(std::sqrt(s / (525.0L * 525.0L)));
    worst = std::max(worst, std::abs(radius_of_gyration(x) / direct - 1.0));
  }
  report(2, worst < 1e-12, fmt("max rel err %.2e over 100 frames of 525 beads", worst));
}

// ---------------------------------------------------------------- 3
Topology scattered_chain(std::size_t n) {
  std::string text = "[beads]\n";
  const char* kinds[] = {"Na", "P3", "SP1"};
  for (std::size_t i = 0; i < n; ++i) text += std::to_string(i) + " " + kinds[i % 3] + " 72 0 " + (i ? "0" : "1") + "\n";
  text += "[bonds]\n";
  for (std::size_t i = 0; i + 1 < n; ++i) text += std::to_string(i) + " " + std::to_string(i + 1) + " 0\n";
  return parse_topology(text);
}

void forces() {
  const auto t0 = std::chrono::steady_clock::now();
  ForceFieldParams ff = p5::test::default_ff();
  ff.dihedral_sets[0] = {3.0, 3, 0.4};  // the default torsion is flat; give it a gradient to check
  Rng rng(3);
  double worst_fd = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Topology t = build_cellulose_acetate_chain(3 + static_cast<std::size_t>(trial % 5));  // 21-49 beads
    const ForceField field(t, ff);
    const auto x = p5::test::jittered_chain(t, ff, rng, 0.4);
    const auto numeric =
        p5::test::numeric_forces([&](const std::vector<Vec3>& y) { return field.total(y).potential_energy; }, x, 1e-5);
    worst_fd = std::max(worst_fd, p5::test::max_rel_error(field.total(x).forces, numeric));
  }
  double worst_cell = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 100 + 10 * static_cast<std::size_t>(trial % 20);
    const Topology t = scattered_chain(n);
    const double box = 20.0 + 2.0 * static_cast<double>(trial);
    std::vector<Vec3> x;
    while (x.size() < n) {
      const Vec3 r{box * rng.uniform(), box * rng.uniform(), box * rng.uniform()};
      bool ok = true;
      for (const Vec3& y : x) ok = ok && norm(r - y) > 3.0;
      if (ok) x.push_back(r);
    }
    const ForceField field(t, ff);
    const EnergyForces a = field.lj(x), b = field.lj_all_pairs(x);
    worst_cell = std::max({worst_cell, p5::test::max_rel_error(a.forces, b.forces),
                           std::abs(a.potential_energy - b.potential_energy) / std::max(1.0, std::abs(b.potential_energy))});
  }
  report(3, worst_fd < 1e-6 && worst_cell < 1e-10,
         fmt("FD max rel err %.2e (50 chains, 21-49 beads); cell list vs all pairs %.2e (100 configs); %.1f s", worst_fd,
             worst_cell, seconds_since(t0)));
}

// ---------------------------------------------------------------- 4
void integrator() {
  const auto t0 = std::chrono::steady_clock::now();
  const Topology dimer = parse_topology("[beads]\n0 Na 72 0 1\n1 Na 72 0 0\n[bonds]\n0 1 0\n");
  const ForceFieldParams ff = p5::test::default_ff();
  const LangevinParams p = make_langevin_params(dimer, 0.002, 0.0, 0.0);
  SystemState s = SystemState::at_rest({{0, 0, 0}, {ff.bond_sets[0].r0 + 0.5, 0.2, 0}});
  s.velocities = {{0.1, 0.3, 0}, {-0.1, -0.3, 0}};
  Rng rng(0);
  const std::vector<Vec3> zero(2);
  // Velocities live at half steps; the whole-step kinetic energy averages the two neighbours.
  EnergyForces ef = compute_bonded(dimer, s.positions, ff);
  s = langevin_step(s, ef.forces, zero, p, rng);
  double e0 = 0.0, drift = 0.0;
  for (int i = 0; i < 10000; ++i) {
    ef = compute_bonded(dimer, s.positions, ff);
    const SystemState next = langevin_step(s, ef.forces, zero, p, rng);
    const double e = 0.5 * (kinetic_energy(s, p.masses) + kinetic_energy(next, p.masses)) + ef.potential_energy;
    if (i == 0) e0 = e;
    drift = std::max(drift, std::abs(e / e0 - 1.0));
    s = next;
  }

  const Topology one = parse_topology("[beads]\n0 Na 72 0 1\n");
  const double kT = thermal_energy_internal(TimescaleParams{});
  const LangevinParams q = make_langevin_params(one, 0.05, 0.05, kT);
  SystemState b = SystemState::at_rest({{0, 0, 0}});
  Rng noise(404);
  const std::vector<Vec3> none(1);
  long double ke = 0.0L;
  const long n = 2000000;
  for (long i = 0; i < n; ++i) {
    b = langevin_step(b, none, none, q, noise);
    ke += 0.5L * q.masses[0] * norm2(b.velocities[0]);
  }
  const double per_dof = static_cast<double>(ke / n / 3.0L);
  const double dev = per_dof / (kT / 2) - 1.0;
  report(4, drift < 1e-4 && std::abs(dev) < 0.05,
         fmt("(a) dimer energy drift %.2e over 1e4 steps; (b) <KE>/dof = %.4f vs kT/2 = %.4f (%+.2f%%) over 2e6 steps; %.1f s",
             drift, per_dof, kT / 2, 100 * dev, seconds_since(t0)));
}

// ---------------------------------------------------------------- 5
void ppo_gradients() {
  const std::vector<std::size_t> hidden{4, 3};
  PolicyParams p = PolicyParams::create(3, 5, hidden, 5, -0.3);
  Rng init(1);
  for (auto& w : p.actor.weights) for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = 0.5 * init.normal();
  Rng rng(8);
  const std::size_t n = 16;
  PpoBatch b;
  b.observations = Eigen::MatrixXd(3, n);
  b.raw_actions = Eigen::MatrixXd(5, n);
  b.old_log_probs = Eigen::VectorXd(n);
  b.advantages = Eigen::VectorXd(n);
  b.returns = Eigen::VectorXd(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    for (Eigen::Index r = 0; r < 3; ++r) b.observations(r, c) = rng.normal();
    const PolicyOutput out = forward_normalized(p, b.observations.col(c));
    std::vector<double> raw(5);
    for (std::size_t a = 0; a < 5; ++a) {
      raw[a] = out.means(static_cast<Eigen::Index>(a)) + 0.7 * rng.normal();
      b.raw_actions(static_cast<Eigen::Index>(a), c) = raw[a];
    }
    // a mix of ratios inside and well outside the clip range
    const double shift = i % 3 == 0 ? 0.5 * (i % 2 ? 1 : -1) : 0.05 * rng.normal();
    b.old_log_probs(c) = squashed_log_prob(out.means, out.log_std, raw) + shift;
    b.advantages(c) = rng.normal();
    b.returns(c) = rng.normal();
  }
  PpoHyper h;
  h.entropy_coef = 0.01;
  PolicyGradient g = PolicyGradient::zeros_like(p);
  ppo_loss(p, b, h, &g);
  std::vector<double*> params;
  std::vector<double> analytic;
  for (Mlp* net : {&p.actor, &p.critic}) {
    for (auto& w : net->weights) for (Eigen::Index i = 0; i < w.size(); ++i) params.push_back(w.data() + i);
    for (auto& v : net->biases) for (Eigen::Index i = 0; i < v.size(); ++i) params.push_back(v.data() + i);
  }
  for (Eigen::Index i = 0; i < p.log_std.size(); ++i) params.push_back(p.log_std.data() + i);
  for (Mlp* net : {&g.actor, &g.critic}) {
    for (auto& w : net->weights) for (Eigen::Index i = 0; i < w.size(); ++i) analytic.push_back(w.data()[i]);
    for (auto& v : net->biases) for (Eigen::Index i = 0; i < v.size(); ++i) analytic.push_back(v.data()[i]);
  }
  for (Eigen::Index i = 0; i < g.log_std.size(); ++i) analytic.push_back(g.log_std(i));
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    double& x = *params[k];
    const double x0 = x, step = 1e-6;
    x = x0 + step;
    const double up = ppo_loss(p, b, h, nullptr).total;
    x = x0 - step;
    const double down = ppo_loss(p, b, h, nullptr).total;
    x = x0;
    const double numeric = (up - down) / (2 * step);
    const double scale = std::max({std::abs(numeric), std::abs(analytic[k]), 1e-6});
    worst = std::max(worst, std::abs(numeric - analytic[k]) / scale);
  }

  // GAE against the O(T²) definition.
  const std::size_t T = 200;
  std::vector<double> r(T), v(T);
  std::vector<std::uint8_t> done(T);
  for (std::size_t t = 0; t < T; ++t) {
    r[t] = rng.normal();
    v[t] = rng.normal();
    done[t] = rng.uniform() < 0.05;
  }
  const double gamma = 0.99, lambda = 0.95, boot = 0.3;
  const GaeResult gae = compute_gae(r, v, done, boot, gamma, lambda);
  double gae_err = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    double a = 0.0, w = 1.0;
    for (std::size_t k = t; k < T; ++k) {
      const double next = done[k] ? 0.0 : (k + 1 < T ? v[k + 1] : boot);
      a += w * (r[k] + gamma * next - v[k]);
      if (done[k]) break;
      w *= gamma * lambda;
    }
    gae_err = std::max(gae_err, std::abs(gae.advantages[t] - a));
  }
  report(5, worst < 1e-4 && gae_err < 1e-12,
         fmt("max per-parameter rel err %.2e over %zu parameters; GAE max abs err %.2e (T=%zu)", worst, params.size(),
             gae_err, T));
}

// ---------------------------------------------------------------- 6, 7
struct Experiment {
  Topology topo = build_cellulose_acetate_chain(10);
  ForceFieldParams ff = p5::test::default_ff();
  EnvConfig cfg;
  LangevinParams dyn;
  Experiment() {
    dyn = make_langevin_params(topo, 0.1, 1.0, thermal_energy_internal(TimescaleParams{}));
    cfg.episode_length = 500;
    cfg.f_coef = 100.0;
    cfg.theta_max = 0.02;
  }
};

std::vector<double> baseline_rg(const Experiment& x, std::uint64_t seed, std::size_t n) {
  Environment env(x.topo, x.cfg, x.ff, x.dyn);
  std::vector<double> rg;
  for (std::size_t s = 0; s < n; ++s) {
    env.reset(evaluation_seed(seed, s));
    Rng unused(0);
    for (const auto& f : run_episode(env, x.cfg.episode_length, nullptr, unused).frames) rg.push_back(f.rg);
  }
  return rg;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Exact one-sided Mann-Whitney test (H1: y tends to exceed x), midranks for ties,
// by enumerating every split of the pooled sample.
double mann_whitney_p(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> all(x);
  all.insert(all.end(), y.begin(), y.end());
  const std::size_t n = all.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return all[a] < all[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && all[order[j + 1]] == all[order[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  double observed = 0.0;
  for (std::size_t i = x.size(); i < n; ++i) observed += rank[i];
  std::size_t hits = 0, total = 0;
  std::vector<bool> pick(n, false);
  std::fill(pick.begin() + static_cast<long>(x.size()), pick.end(), true);
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += pick[i] ? rank[i] : 0.0;
    hits += s >= observed - 1e-9;
    ++total;
  } while (std::next_permutation(pick.begin(), pick.end()));
  return static_cast<double>(hits) / static_cast<double>(total);
}

void steering() {
  Experiment x;
  const auto t_all = std::chrono::steady_clock::now();

  // Narrow compaction band (2 Å wide) in the lower tail of the unsteered RG
  // distribution, placed where the pooled 20-seed baseline occupancy first reaches 0.15.
  const double width = 2.0, target = 0.15;
  std::vector<double> pooled = baseline_rg(x, 99, 20);
  std::sort(pooled.begin(), pooled.end());
  double hi = pooled.front();
  while (occupancy_fraction(pooled, hi - width, hi).fraction < target) hi += 0.01;
  x.cfg.target_rg_min = hi - width;
  x.cfg.target_rg_max = hi;
  const double calibrated = occupancy_fraction(pooled, hi - width, hi).fraction;
  std::printf("  band [%.2f, %.2f] A, calibrated baseline occupancy %.3f (20 seeds); unsteered RG median %.2f A\n",
              hi - width, hi, calibrated, median(pooled));

  TrainConfig tc;
  tc.hidden = {64, 64};
  tc.num_envs = 4;
  tc.rollout_steps = 500;
  tc.episodes = 3000;
  tc.seed = 1;
  tc.hyper.learning_rate = 0.3;
  tc.hyper.minibatch_size = 250;
  tc.hyper.value_coef = 0.01;
  const auto t_train = std::chrono::steady_clock::now();
  const TrainResult trained = train_policy(x.topo, x.cfg, x.ff, x.dyn, tc);
  const double train_s = seconds_since(t_train);
  std::printf("  trained %zu episodes (%zu steps, %zu aborted) in %.1f s; last-10 mean reward %.1f (first 10: %.1f)\n",
              trained.curve.size(), trained.total_steps, trained.aborted_episodes, train_s,
              trained.curve.back().mean_cumulative_reward, trained.curve[9].mean_cumulative_reward);

  Environment env(x.topo, x.cfg, x.ff, x.dyn);
  std::vector<double> base, steer;
  for (std::size_t s = 0; s < 10; ++s) {
    env.reset(evaluation_seed(7, s));
    Rng r0(s);
    base.push_back(occupancy_fraction(run_episode(env, x.cfg.episode_length, nullptr, r0).frames, x.cfg.target_rg_min,
                                      x.cfg.target_rg_max).fraction);
    env.reset(evaluation_seed(7, s));
    Rng r1(s);
    // steer with the policy mean
    steer.push_back(occupancy_fraction(run_episode(env, x.cfg.episode_length, &trained.params, r1, true).frames,
                                       x.cfg.target_rg_min, x.cfg.target_rg_max).fraction);
    std::printf("  eval seed %zu: baseline %.3f steered %.3f\n", s, base.back(), steer.back());
  }
  const double mb = median(base), ms = median(steer);
  const double pb = std::accumulate(base.begin(), base.end(), 0.0) / 10, ps = std::accumulate(steer.begin(), steer.end(), 0.0) / 10;
  const double p = mann_whitney_p(base, steer);
  const bool median_ok = ms >= 2.0 * mb && ms > mb;
  const bool calib_ok = calibrated >= 0.05 && calibrated <= 0.25;
  report(6, calib_ok && median_ok && ps > pb && p < 0.05 && train_s <= 1800.0,
         fmt("median occupancy baseline %.3f -> steered %.3f (ratio %s); mean %.3f -> %.3f (%s); one-sided "
             "Mann-Whitney p = %.2e; training %.0f s",
             mb, ms, mb > 0 ? fmt("%.1fx", ms / mb).c_str() : "inf", pb, ps, format_percent(improvement_percent(
                                                                                 OccupancyStats{10, 0, pb},
                                                                                 OccupancyStats{10, 0, ps})).c_str(),
             p, train_s));

  // Perturbation recovery, sigma = 5 x init noise. Perturbed chains start far above
  // the band, so these episodes run 4x longer than training episodes.
  const double sigma = 5.0 * x.cfg.init_noise_sigma;
  EnvConfig long_cfg = x.cfg;
  long_cfg.episode_length = 2000;
  const auto t_pert = std::chrono::steady_clock::now();
  const PerturbationReport pu = perturbation_experiment(x.topo, long_cfg, x.ff, x.dyn, nullptr, 10, sigma, 11);
  const PerturbationReport ps_ =
      perturbation_experiment(x.topo, long_cfg, x.ff, x.dyn, &trained.params, 10, sigma, 11, true);
  auto show = [](const std::optional<double>& m) { return m ? fmt("%.1f", *m) : std::string("none"); };
  for (std::size_t e = 0; e < 10; ++e) {
    const auto& a = pu.records[e];
    const auto& b = ps_.records[e];
    std::printf("  perturbed episode %zu: start RG %.2f; first entry unsteered %s, steered %s%s\n", e,
                a.rg_trace.front(), a.first_entry ? std::to_string(*a.first_entry).c_str() : "none",
                b.first_entry ? std::to_string(*b.first_entry).c_str() : "none",
                a.broken || b.broken ? fmt("  (chain broken at the end: unsteered %d, steered %d)", a.broken, b.broken).c_str() : "");
  }
  const bool recovered = ps_.median_first_entry.has_value() &&
                         (!pu.median_first_entry.has_value() || *ps_.median_first_entry < *pu.median_first_entry);
  report(7, recovered,
         fmt("median first-entry step steered %s vs unsteered %s (sigma %.2f A, 10 episodes of %zu steps, %zu/%zu "
             "ending with broken bonds); occupancy %.3f vs %.3f; %.1f s (experiment total %.0f s)",
             show(ps_.median_first_entry).c_str(), show(pu.median_first_entry).c_str(), sigma, long_cfg.episode_length,
             ps_.broken_episodes, pu.broken_episodes, ps_.mean_occupancy,
             pu.mean_occupancy, seconds_since(t_pert), seconds_since(t_all)));
}

// ---------------------------------------------------------------- 8
void trajectory_density() {
  // Identities on a steered 3-monomer trajectory.
  const Topology topo = build_cellulose_acetate_chain(3);
  const ForceFieldParams ff = p5::test::default_ff();
  EnvConfig cfg;
  cfg.episode_length = 60;
  cfg.f_coef = 5.0;
  cfg.theta_max = 0.02;
  const LangevinParams dyn = make_langevin_params(topo, 0.02, 0.5, 10.0);
  Environment env(topo, cfg, ff, dyn);
  const std::vector<std::size_t> hidden{8};
  const PolicyParams policy = PolicyParams::create(env.observation_size(), env.action_size(), hidden, 4, -0.5);
  env.reset(12);
  Rng rng(3);
  const Episode ep = run_episode(env, 60, &policy, rng);
  const TrajectoryModel model{&topo, &ff, &cfg, &dyn, &policy};
  const std::span<const TrajectoryFrame> fr(ep.frames);
  const std::span<const std::vector<double>> ac(ep.actions);
  const InitialDensity& init = env.initial_density();
  // Empty trajectory: only s0, so log p is exactly log p(s0) (0 when conditioned on s0).
  const bool empty_ok = trajectory_log_prob(fr.first(1), {}, model, &init) == init.log_density(ep.frames[0].positions) &&
                        trajectory_log_prob(fr.first(1), {}, model) == 0.0;
  double add_err = 0.0;
  const double whole = trajectory_log_prob(fr, ac, model);
  for (std::size_t k : {1, 17, 30, 59}) {
    const double split = trajectory_log_prob(fr.first(k + 1), ac.first(k), model) +
                         trajectory_log_prob(fr.subspan(k), ac.subspan(k), model);
    add_err = std::max(add_err, std::abs(split - whole) / std::abs(whole));
  }

  // Free bead: product of Gaussians in closed form.
  const Topology one = parse_topology("[beads]\n0 Na 72 0 1\n");
  EnvConfig free_cfg;
  free_cfg.episode_length = 200;
  const LangevinParams fd = make_langevin_params(one, 0.05, 0.4, 2.0);
  Environment fe(one, free_cfg, ff, fd);
  fe.reset(5);
  Rng unused(0);
  const Episode free_ep = run_episode(fe, 200, nullptr, unused);
  const double var = 2 * fd.gamma * fd.kT * fd.dt / fd.masses[0];
  long double closed = 0.0L;
  for (std::size_t t = 0; t + 1 < free_ep.frames.size(); ++t) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double d = free_ep.frames[t + 1].velocities[0][c] - free_ep.frames[t].velocities[0][c] * (1 - fd.gamma * fd.dt);
      closed += -0.5L * std::log(2 * M_PI * var) - d * d / (2 * var);
    }
  }
  const TrajectoryModel free_model{&one, &ff, &free_cfg, &fd, nullptr};
  const double got = trajectory_log_prob(free_ep.frames, {}, free_model);
  const double rel = std::abs(got / static_cast<double>(closed) - 1.0);
  report(8, empty_ok && add_err < 1e-12 && rel < 1e-10,
         fmt("single-frame identity %s; additivity max rel err %.2e; free-bead closed form rel err %.2e (200 steps)",
             empty_ok ? "exact" : "violated", add_err, rel));
}

// ---------------------------------------------------------------- 9
void anomalies() {
  Experiment x;
  const ForceField field(x.topo, x.ff);
  const auto x0 = canonical_conformation(x.topo, x.ff);
  auto frames_of = [&](const std::vector<std::vector<Vec3>>& p) {
    std::vector<AnomalyFrame> f;
    for (std::size_t s = 0; s < p.size(); ++s) f.push_back({s, p[s], field.total(p[s]).potential_energy});
    return f;
  };
  auto steps_of = [](const AnomalyReport& r, AnomalyKind k) {
    std::vector<std::size_t> s;
    for (const auto& e : r.events) if (e.kind == k) s.push_back(e.step);
    return s;
  };

  std::vector<std::vector<Vec3>> stretched(200, x0);
  const Vec3 dir = (x0[6] - x0[5]) / norm(x0[6] - x0[5]);
  stretched[83][6] = x0[5] + dir * (1.6 * x.ff.bond_sets[paramsets::kPendantBond].r0);
  const auto bonds = steps_of(detect_anomalies(frames_of(stretched), x.topo, x.ff), AnomalyKind::BondBreakage);

  // Overlap: a pendant end driven onto a ring bead of another monomer at step 141.
  std::vector<std::vector<Vec3>> overlap(200, x0);
  const std::size_t mover = 7 * 4 + 6, target = 7 * 6 + 1;
  overlap[141][mover] = x0[target] + Vec3{0.25 * x.ff.lj_pair(x.topo.beads[mover].type, x.topo.beads[target].type).sigma, 0, 0};
  const auto spikes = steps_of(detect_anomalies(frames_of(overlap), x.topo, x.ff), AnomalyKind::EnergySpike);

  // Clean: the static chain, and an unsteered Langevin run from the canonical state.
  const bool still_clean = detect_anomalies(frames_of(std::vector<std::vector<Vec3>>(200, x0)), x.topo, x.ff).empty();
  Environment env(x.topo, x.cfg, x.ff, x.dyn);
  env.reset(3, 0.0);
  Rng unused(0);
  const Episode ep = run_episode(env, x.cfg.episode_length, nullptr, unused);
  std::vector<AnomalyFrame> md;
  for (const auto& f : ep.frames) md.push_back({f.step, f.positions, f.potential_energy});
  const std::size_t md_events = detect_anomalies(md, x.topo, x.ff).events.size();

  const bool ok = bonds == std::vector<std::size_t>{83} && spikes == std::vector<std::size_t>{141} && still_clean &&
                  md_events == 0;
  report(9, ok,
         fmt("bond stretch flagged at %s (injected 83); PE spike at %s (injected 141); clean static %s, clean "
             "%zu-step MD run %zu events",
             bonds.empty() ? "none" : std::to_string(bonds.front()).c_str(),
             spikes.empty() ? "none" : std::to_string(spikes.front()).c_str(), still_clean ? "empty" : "NOT empty",
             x.cfg.episode_length, md_events));
}

// ---------------------------------------------------------------- 10
std::string run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_subcommand(args, out, err);
  if (code != 0) throw std::runtime_error("p5 " + args.front() + " exited " + std::to_string(code) + ": " + err.str());
  return out.str();
}

void reproducibility() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string cfg =
      "topology.monomers = 10\ndyn.dt = 0.1\ndyn.gamma = 1\nenv.episode_length = 200\nenv.f_coef = 50\n"
      "env.theta_max = 0.02\nenv.target_rg_min = 14\nenv.target_rg_max = 16\nppo.hidden = 32, 32\n"
      "ppo.num_envs = 2\nppo.rollout_steps = 200\nppo.minibatch_size = 100\nppo.learning_rate = 0.1\n"
      "ppo.value_coef = 0.01\nrun.seed = 5\n";
  const std::vector<std::string> files{"chain.p5t", "policy.p5c", "curve.csv", "steered.xyz", "report.csv", "stdout.txt"};
  std::vector<std::vector<std::string>> runs;
  for (int r = 0; r < 2; ++r) {
    const fs::path dir = fs::temp_directory_path() / ("p5_acceptance_run" + std::to_string(r));
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto at = [&](const std::string& f) { return (dir / f).string(); };
    write_file_atomic(at("run.cfg"), cfg);
    std::string log;
    log += run_cli({"build", "--config", at("run.cfg"), "--out", at("chain.p5t")});
    log += run_cli({"train", "--config", at("run.cfg"), "--topology", at("chain.p5t"), "--episodes", "100", "--out",
                    at("policy.p5c"), "--curve", at("curve.csv")});
    log += run_cli({"simulate", "--config", at("run.cfg"), "--topology", at("chain.p5t"), "--mode", "steered",
                    "--policy", at("policy.p5c"), "--steps", "200", "--traj", at("steered.xyz")});
    log += run_cli({"eval", "--config", at("run.cfg"), "--topology", at("chain.p5t"), "--traj", at("steered.xyz"),
                    "--csv", at("report.csv")});
    // Paths differ between the two runs; compare the output with them removed.
    for (std::size_t pos; (pos = log.find(dir.string())) != std::string::npos;) log.erase(pos, dir.string().size());
    write_file_atomic(at("stdout.txt"), log);
    std::vector<std::string> bytes;
    for (const auto& f : files) bytes.push_back(read_file(dir / f));
    runs.push_back(std::move(bytes));
    fs::remove_all(dir);
  }
  std::string differing;
  std::size_t total = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    total += runs[0][i].size();
    if (runs[0][i] != runs[1][i] || runs[0][i].empty()) differing += " " + files[i];
  }
  report(10, differing.empty(),
         differing.empty() ? fmt("build/train(100 episodes)/simulate/eval twice: %zu files, %zu bytes identical; %.1f s",
                                 files.size(), total, seconds_since(t0))
                           : "files differ:" + differing);
}

void guarded(int n, const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    report(n, false, std::string("threw: ") + e.what());
  }
}

}  // namespace

int main() {
  guarded(1, timescale);
  guarded(2, rg_oracle);
  guarded(3, forces);
  guarded(4, integrator);
  guarded(5, ppo_gradients);
  try {
    steering();
  } catch (const std::exception& e) {
    report(6, false, std::string("threw: ") + e.what());
    report(7, false, "not run: steering experiment failed");
  }
  guarded(8, trajectory_density);
  guarded(9, anomalies);
  guarded(10, reproducibility);
  std::printf("%d criteria failed\n", failures);
  return failures;
}
