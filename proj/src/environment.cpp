#include "p5/environment.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <tuple>

#include "p5/error.hpp"
#include "p5/geometry.hpp"

namespace p5 {

namespace {

Vec3 centroid(std::span<const Vec3> x) {
  Vec3 c;
  for (const Vec3& r : x) c += r;
  return c / static_cast<double>(x.size());
}

Vec3 weighted_centroid(std::span<const Vec3> x, std::span<const double> m) {
  Vec3 c;
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    c += x[i] * m[i];
    total += m[i];
  }
  return c / total;
}

std::vector<Vec3> fibonacci_directions(std::size_t n) {
  std::vector<Vec3> dirs;
  dirs.reserve(n);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double r = std::sqrt(1.0 - z * z);
    const double phi = golden * static_cast<double>(i);
    dirs.push_back({r * std::cos(phi), r * std::sin(phi), z});
  }
  return dirs;
}

double bond_r0(const Topology& topo, const ForceFieldParams& params, std::size_t a, std::size_t b, double fallback) {
  for (const BondedTerm& t : topo.terms) {
    if (t.kind != TermKind::Bond) continue;
    if ((t.beads[0] == a && t.beads[1] == b) || (t.beads[0] == b && t.beads[1] == a)) {
      return params.bond_sets[t.paramset].r0;
    }
  }
  return fallback;
}

}  // namespace

void EnvConfig::validate() const {
  if (!(target_rg_min < target_rg_max)) {
    throw InvalidArgument("target_rg_min must be smaller than target_rg_max");
  }
  if (target_rg_min < 0.0) throw InvalidArgument("target_rg_min must be non-negative");
  if (episode_length < 1) throw InvalidArgument("episode_length must be at least 1");
  if (!(theta_max > 0.0)) throw InvalidArgument("theta_max must be positive");
  if (!(f_coef >= 0.0)) throw InvalidArgument("f_coef must be non-negative");
  if (!(obs_radius > 0.0)) throw InvalidArgument("obs_radius must be positive");
  if (!(init_noise_sigma >= 0.0)) throw InvalidArgument("init_noise_sigma must be non-negative");
}

double radius_of_gyration(std::span<const Vec3> x) {
  if (x.empty()) throw InvalidArgument("radius_of_gyration: empty position list");
  const Vec3 c = centroid(x);
  double sum = 0.0;
  for (const Vec3& r : x) sum += norm2(r - c);
  return std::sqrt(sum / static_cast<double>(x.size()));
}

double radius_of_gyration(std::span<const Vec3> x, std::span<const double> masses) {
  if (x.empty()) throw InvalidArgument("radius_of_gyration: empty position list");
  if (masses.size() != x.size()) throw InvalidArgument("radius_of_gyration: masses do not match positions");
  const Vec3 c = weighted_centroid(x, masses);
  double sum = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sum += masses[i] * norm2(x[i] - c);
    total += masses[i];
  }
  return std::sqrt(sum / total);
}

RewardBreakdown compute_reward(double rg, const EnvConfig& cfg) {
  const double lo = cfg.target_rg_min;
  const double hi = cfg.target_rg_max;
  const bool inside = rg >= lo && rg <= hi;
  const double d = inside ? 0.0 : (rg < lo ? lo - rg : rg - hi);
  const double mid = 0.5 * (lo + hi);
  const double half_width = 0.5 * (hi - lo);
  RewardBreakdown r;
  r.r_dist = -cfg.k_d * d * d;
  r.r_rg = inside ? cfg.k_r : 0.0;
  r.r_shaping = cfg.k_s * (1.0 - std::abs(rg - mid) / half_width);
  r.total = r.r_dist + r.r_rg + r.r_shaping;
  return r;
}

void check_action_bounds(std::span<const double> action, std::size_t backbone_beads) {
  if (action.size() != action_size(backbone_beads)) {
    throw InvalidArgument("action has length " + std::to_string(action.size()) + ", expected " +
                          std::to_string(action_size(backbone_beads)));
  }
  for (std::size_t i = 0; i < action.size(); ++i) {
    const double a = action[i];
    const bool magnitude = i % kActionsPerBead == action_slot::kAlpha;
    const double lo = magnitude ? 0.0 : -1.0;
    if (!(a >= lo && a <= 1.0)) throw InvalidArgument("action component " + std::to_string(i) + " out of bounds");
  }
}

std::vector<Vec3> learned_forces(std::span<const double> action, const Topology& topo, const EnvConfig& cfg) {
  check_action_bounds(action, topo.n_monomers);
  std::vector<Vec3> f(topo.bead_count());
  for (std::size_t b = 0; b < topo.n_monomers; ++b) {
    const double* a = action.data() + kActionsPerBead * b;
    const double scale = cfg.f_coef * a[action_slot::kAlpha];
    f[topo.backbone_order[b]] = Vec3{a[action_slot::kX], a[action_slot::kY], a[action_slot::kZ]} * scale;
  }
  return f;
}

std::vector<Vec3> canonical_conformation(const Topology& topo, const ForceFieldParams& params) {
  params.check_covers(topo);
  const std::size_t n = topo.bead_count();
  std::vector<Vec3> x(n);
  std::vector<bool> placed(n, false);
  const auto& bb = topo.backbone_order;
  const double default_r0 = params.bond_sets.empty() ? 4.7 : params.bond_sets.front().r0;

  // Backbone: planar zigzag, alternating turn direction.
  Vec3 dir{1.0, 0.0, 0.0};
  for (std::size_t i = 0; i < bb.size(); ++i) {
    if (i > 0) {
      x[bb[i]] = x[bb[i - 1]] + dir * bond_r0(topo, params, bb[i - 1], bb[i], default_r0);
      if (i + 1 < bb.size()) {
        double theta = kDefaultBackboneAngleDeg * std::numbers::pi / 180.0;
        for (const BondedTerm& t : topo.terms) {
          if (t.kind == TermKind::Angle && t.beads[1] == bb[i] &&
              ((t.beads[0] == bb[i - 1] && t.beads[2] == bb[i + 1]) || (t.beads[0] == bb[i + 1] && t.beads[2] == bb[i - 1]))) {
            theta = params.angle_sets[t.paramset].theta0;
          }
        }
        const double turn = (i % 2 == 1 ? 1.0 : -1.0) * (std::numbers::pi - theta);
        dir = rotate_about_axis(dir, Vec3{0.0, 0.0, 1.0}, turn);
      }
    }
    placed[bb[i]] = true;
  }

  // Remaining beads: breadth-first from the backbone, each placed at its bond
  // length from placed partners, as far as possible from everything else.
  const auto adj = topo.bond_graph();
  std::vector<std::vector<double>> r0_of(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : adj[i]) r0_of[i].push_back(bond_r0(topo, params, i, j, default_r0));
  }
  static const std::vector<Vec3> kDirections = fibonacci_directions(200);
  std::deque<std::size_t> queue(bb.begin(), bb.end());

  auto clearance = [&](std::size_t v, const Vec3& c) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (!placed[j] || std::binary_search(adj[v].begin(), adj[v].end(), j)) continue;
      best = std::min(best, norm2(c - x[j]));
    }
    return best;
  };

  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    for (std::size_t v : adj[u]) {
      if (placed[v]) continue;
      std::vector<std::pair<std::size_t, double>> partners;
      for (std::size_t k = 0; k < adj[v].size(); ++k) {
        if (placed[adj[v][k]]) partners.emplace_back(adj[v][k], r0_of[v][k]);
      }
      std::vector<Vec3> candidates;
      if (partners.size() >= 2) {
        // Circle of points at the right distance from the first two partners.
        const Vec3 p = x[partners[0].first];
        const Vec3 q = x[partners[1].first];
        const double rp = partners[0].second;
        const double rq = partners[1].second;
        const Vec3 pq = q - p;
        const double d = norm(pq);
        if (d > 0.0 && d < rp + rq && d > std::abs(rp - rq)) {
          const Vec3 ez = pq / d;
          const double a = (rp * rp - rq * rq + d * d) / (2.0 * d);
          const double h = std::sqrt(std::max(0.0, rp * rp - a * a));
          Vec3 ex = cross(ez, Vec3{0.0, 0.0, 1.0});
          if (norm(ex) < 1e-6) ex = cross(ez, Vec3{0.0, 1.0, 0.0});
          ex = ex / norm(ex);
          const Vec3 ey = cross(ez, ex);
          for (int k = 0; k < 72; ++k) {
            const double phi = 2.0 * std::numbers::pi * k / 72.0;
            candidates.push_back(p + ez * a + (ex * std::cos(phi) + ey * std::sin(phi)) * h);
          }
        }
      }
      if (candidates.empty()) {
        const double r0 = partners.front().second;
        const Vec3 base = x[partners.front().first];
        for (const Vec3& d : kDirections) candidates.push_back(base + d * r0);
      }
      std::size_t best = 0;
      std::pair<double, double> best_score{std::numeric_limits<double>::infinity(), 0.0};
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        double strain = 0.0;
        for (const auto& [j, r0] : partners) {
          const double e = norm(candidates[c] - x[j]) - r0;
          strain += e * e;
        }
        strain = std::round(strain * 1e6) / 1e6;
        const std::pair<double, double> score{strain, -clearance(v, candidates[c])};
        if (score < best_score) {
          best_score = score;
          best = c;
        }
      }
      x[v] = candidates[best];
      placed[v] = true;
      queue.push_back(v);
    }
  }
  return x;
}

double InitialDensity::log_density(std::span<const Vec3> positions) const {
  if (positions.size() != mean.size()) throw InvalidArgument("initial density: position count mismatch");
  if (sigma == 0.0) {
    for (std::size_t i = 0; i < mean.size(); ++i) {
      if (positions[i] != mean[i]) return -std::numeric_limits<double>::infinity();
    }
    return 0.0;
  }
  const double norm_const = -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sigma);
  double logp = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    logp += -0.5 * norm2(positions[i] - mean[i]) / (sigma * sigma) + 3.0 * norm_const;
  }
  return logp;
}

Observation observe(const SystemState& state, const Topology& topo, const EnvConfig& cfg) {
  const auto& x = state.positions;
  const auto& bb = topo.backbone_order;
  const std::size_t nb = bb.size();
  const std::size_t k = cfg.k_neighbors;
  const auto masses = topo.masses();
  const Vec3 center = cfg.mass_weighted_rg ? weighted_centroid(x, masses) : centroid(x);
  const double rg = cfg.mass_weighted_rg ? radius_of_gyration(x, masses) : radius_of_gyration(x);
  const double r2max = cfg.obs_radius * cfg.obs_radius;

  Observation obs;
  obs.reserve(observation_size(nb, k));
  std::vector<std::pair<double, std::size_t>> near;
  for (std::size_t b = 0; b < nb; ++b) {
    const std::size_t id = bb[b];
    const Vec3 rel = x[id] - center;
    const Vec3& v = state.velocities[id];
    const Vec3& w = state.angular_velocities[id];
    obs.insert(obs.end(), {rel.x, rel.y, rel.z, v.x, v.y, v.z, w.x, w.y, w.z});
    obs.push_back(b > 0 && b + 1 < nb ? bond_angle(x[bb[b - 1]], x[id], x[bb[b + 1]]) : 0.0);
    obs.push_back(b + 3 < nb ? dihedral_angle(x[id], x[bb[b + 1]], x[bb[b + 2]], x[bb[b + 3]]) : 0.0);

    near.clear();
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (j == id) continue;
      const double d2 = norm2(x[j] - x[id]);
      if (d2 <= r2max) near.emplace_back(d2, j);
    }
    const std::size_t keep = std::min(k, near.size());
    std::partial_sort(near.begin(), near.begin() + static_cast<std::ptrdiff_t>(keep), near.end());
    for (std::size_t s = 0; s < k; ++s) {
      if (s < keep) {
        const Vec3 d = x[near[s].second] - x[id];
        obs.insert(obs.end(), {d.x, d.y, d.z});
      } else {
        obs.insert(obs.end(), {0.0, 0.0, 0.0});
      }
    }
  }
  obs.push_back(rg);
  obs.push_back(cfg.target_rg_min);
  obs.push_back(cfg.target_rg_max);
  return obs;
}

ResetResult reset_from(const std::vector<Vec3>& canonical, const Topology& topo, const EnvConfig& cfg,
                       double noise_sigma, std::uint64_t seed) {
  Rng noise = Rng(seed).split(0);
  std::vector<Vec3> x = canonical;
  for (Vec3& r : x) r += Vec3{noise.normal(), noise.normal(), noise.normal()} * noise_sigma;
  ResetResult out{SystemState::at_rest(std::move(x)), {}, {canonical, noise_sigma}};
  out.observation = observe(out.state, topo, cfg);
  return out;
}

ResetResult reset(const Topology& topo, const EnvConfig& cfg, const ForceFieldParams& params, std::uint64_t seed) {
  cfg.validate();
  return reset_from(canonical_conformation(topo, params), topo, cfg, cfg.init_noise_sigma, seed);
}

namespace {

// Core transition shared by the free function and Environment; `forces` are the
// systematic forces at `state`. Returns the new state and its systematic forces.
std::tuple<SystemState, EnergyForces, StepResult> advance(const SystemState& state, const EnergyForces& forces,
                                                          std::span<const double> action, const EnvConfig& cfg,
                                                          const ForceField& ff, const LangevinParams& dyn, Rng& rng) {
  const Topology& topo = ff.topology();
  const std::vector<Vec3> kicks = learned_forces(action, topo, cfg);
  SystemState next = langevin_step(state, forces.forces, kicks, dyn, rng);
  for (std::size_t m = 0; m < topo.n_monomers; ++m) {
    const double theta = action[kActionsPerBead * m + action_slot::kAngle] * cfg.theta_max;
    rotate_monomer_in_place(next.positions, topo, m, theta);
  }
  EnergyForces next_forces = ff.total(next.positions);

  StepResult result;
  result.info.rg = cfg.mass_weighted_rg ? radius_of_gyration(next.positions, dyn.masses)
                                        : radius_of_gyration(next.positions);
  result.info.potential_energy = next_forces.potential_energy;
  result.info.bond_breakage = has_bond_breakage(next.positions, topo, ff.params());
  result.reward = compute_reward(result.info.rg, cfg);
  result.done = next.step == cfg.episode_length;
  result.observation = observe(next, topo, cfg);
  return {std::move(next), std::move(next_forces), std::move(result)};
}

}  // namespace

std::pair<SystemState, StepResult> step(const SystemState& state, std::span<const double> action, const Topology& topo,
                                        const EnvConfig& cfg, const ForceField& ff, const LangevinParams& dyn, Rng& rng) {
  if (topo != ff.topology()) throw InvalidArgument("step: force field was built for a different topology");
  const EnergyForces forces = ff.total(state.positions);
  auto [next, next_forces, result] = advance(state, forces, action, cfg, ff, dyn, rng);
  return {std::move(next), std::move(result)};
}

Environment::Environment(const Topology& topo, EnvConfig cfg, const ForceFieldParams& ff_params, LangevinParams dyn)
    : cfg_(cfg), ff_(topo, ff_params), dyn_(std::move(dyn)), canonical_(canonical_conformation(topo, ff_params)) {
  cfg_.validate();
  dyn_.validate(topo.bead_count());
}

const Observation& Environment::reset(std::uint64_t seed) { return reset(seed, cfg_.init_noise_sigma); }

const Observation& Environment::reset(std::uint64_t seed, double noise_sigma) {
  ResetResult r = reset_from(canonical_, topology(), cfg_, noise_sigma, seed);
  state_ = std::move(r.state);
  observation_ = std::move(r.observation);
  initial_density_ = std::move(r.initial_density);
  forces_ = ff_.total(state_.positions);
  rng_ = Rng(seed).split(1);
  return observation_;
}

const Observation& Environment::reset_to(const SystemState& state, std::uint64_t dynamics_seed) {
  if (state.size() != topology().bead_count()) throw InvalidArgument("reset_to: state does not match topology");
  state_ = state;
  observation_ = observe(state_, topology(), cfg_);
  initial_density_ = {state_.positions, 0.0};
  forces_ = ff_.total(state_.positions);
  rng_ = Rng(dynamics_seed).split(1);
  return observation_;
}

StepResult Environment::step(std::span<const double> action) {
  if (done()) throw InvalidArgument("step called on a finished episode; call reset first");
  auto [next, next_forces, result] = advance(state_, forces_, action, cfg_, ff_, dyn_, rng_);
  state_ = std::move(next);
  forces_ = std::move(next_forces);
  observation_ = result.observation;
  return result;
}

double Environment::rg() const {
  return cfg_.mass_weighted_rg ? radius_of_gyration(state_.positions, dyn_.masses) : radius_of_gyration(state_.positions);
}

std::size_t Environment::observation_size() const {
  return p5::observation_size(topology().n_monomers, cfg_.k_neighbors);
}

std::size_t Environment::action_size() const { return p5::action_size(topology().n_monomers); }

}  // namespace p5
