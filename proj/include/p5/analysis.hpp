#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "p5/environment.hpp"
#include "p5/policy.hpp"

namespace p5 {

struct TrajectoryFrame {
  std::uint64_t step = 0;
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;
  std::vector<Vec3> angular_velocities;  // not stored in trajectory files; zero after reading
  double rg = 0.0;
  double potential_energy = 0.0;
  double reward_total = 0.0;

  SystemState state() const;
};

struct Episode {
  std::vector<TrajectoryFrame> frames;     // frame 0 is the initial state
  std::vector<std::vector<double>> actions;  // actions[t] moved frames[t] to frames[t+1]
};

TrajectoryFrame make_frame(const Environment& env, double reward_total);

// Rolls out from the environment's current state for up to `steps` steps (or until
// the episode ends). A null policy means the zero action, i.e. plain Langevin
// dynamics. With a policy, actions are sampled from it using `action_rng`, or
// taken as the squashed means when `deterministic`.
Episode run_episode(Environment& env, std::size_t steps, const PolicyParams* policy, Rng& action_rng,
                    bool deterministic = false);

struct OccupancyStats {
  std::size_t n_frames = 0;
  std::size_t n_inside = 0;
  double fraction = 0.0;
};

// Frames with rg in the closed interval [lo, hi].
OccupancyStats occupancy_fraction(std::span<const TrajectoryFrame> frames, double lo, double hi);
OccupancyStats occupancy_fraction(std::span<const double> rg_values, double lo, double hi);

// Relative occupancy gain in percent; throws InvalidArgument for a zero baseline.
double improvement_percent(const OccupancyStats& baseline, const OccupancyStats& steered);
// "+37.14%" style, two decimals, explicit sign.
std::string format_percent(double percent);

// Bins [lo + i·w, lo + (i+1)·w), the final bin closed at hi; values outside
// [lo, hi] are ignored. Returns (lower edge, count) pairs.
std::vector<std::pair<double, std::size_t>> rg_histogram(std::span<const double> rg_values, double bin_width, double lo,
                                                         double hi);

// Everything needed to re-evaluate the density of a recorded trajectory.
struct TrajectoryModel {
  const Topology* topology = nullptr;
  const ForceFieldParams* forcefield = nullptr;
  const EnvConfig* env = nullptr;
  const LangevinParams* dynamics = nullptr;
  const PolicyParams* policy = nullptr;  // null: unsteered, no policy term
};

// log p(s0) + Σ_t [log π(a_t|s_t) + log p(s_{t+1}|s_t, a_t)]. Without an initial
// density the result is conditional on frames[0]. `actions` is empty for an
// unsteered trajectory, else one per transition.
double trajectory_log_prob(std::span<const TrajectoryFrame> frames, std::span<const std::vector<double>> actions,
                           const TrajectoryModel& model, const InitialDensity* initial = nullptr);

// Mean squared displacement over all beads and time origins, least-squares fit
// of MSD against lag over lags in [lag_min, lag_max] (steps); returns slope/6 in
// Å² per step. Frames must be evenly spaced.
double msd_diffusion_coefficient(std::span<const TrajectoryFrame> frames, std::uint64_t lag_min = 100,
                                 std::uint64_t lag_max = 1000);

struct PerturbationRecord {
  std::size_t episode = 0;
  std::uint64_t seed = 0;
  std::optional<std::size_t> first_entry;  // first step with rg in band; none if never
  double occupancy = 0.0;
  std::vector<double> rg_trace;  // index = step
  // A bond is still outside the anomaly band at the last frame. Large perturbations
  // can start the chain in a near-overlap that blows it apart; such episodes are kept but flagged.
  bool broken = false;
};

struct PerturbationReport {
  double perturb_sigma = 0.0;
  std::vector<PerturbationRecord> records;
  std::optional<double> median_first_entry;  // none when at least half never enter
  double mean_occupancy = 0.0;
  std::size_t broken_episodes = 0;
};

// Seed of evaluation episode i; shared by evaluation and perturbation runs.
std::uint64_t evaluation_seed(std::uint64_t seed, std::size_t episode);

// Runs n_episodes episodes from the canonical conformation perturbed with
// perturb_sigma, steered by `policy` (null: unsteered).
PerturbationReport perturbation_experiment(const Topology& topo, const EnvConfig& cfg, const ForceFieldParams& ff,
                                           const LangevinParams& dyn, const PolicyParams* policy,
                                           std::size_t n_episodes, double perturb_sigma, std::uint64_t seed,
                                           bool deterministic = false);

// Median where a missing value ranks above every finite one.
std::optional<double> median_with_none(std::span<const std::optional<std::size_t>> values);

// Reports: a human-readable table and "metric,value" CSV rows.
struct Report {
  std::vector<std::pair<std::string, std::string>> rows;
  void add(std::string metric, std::string value) { rows.emplace_back(std::move(metric), std::move(value)); }
  std::string text(std::string_view title) const;
  std::string csv() const;
};

Report occupancy_report(const OccupancyStats& s, double lo, double hi);
Report perturbation_summary(const PerturbationReport& r);
// Per-episode rows: episode,seed,first_entry,occupancy.
std::string perturbation_episodes_csv(const PerturbationReport& r);

}  // namespace p5
