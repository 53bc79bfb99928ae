#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "p5/dynamics.hpp"
#include "p5/forcefield.hpp"
#include "p5/rng.hpp"
#include "p5/topology.hpp"

namespace p5 {

struct EnvConfig {
  double target_rg_min = 0.0;    // Å
  double target_rg_max = 200.0;  // Å
  std::size_t episode_length = 20000;
  double f_coef = 0.5;       // force scale of the learned kick
  double theta_max = 0.0873; // rad
  double obs_radius = 12.0;  // Å
  std::size_t k_neighbors = 4;
  double init_noise_sigma = 0.5;  // Å
  double k_d = 0.001;  // per Å²
  double k_r = 1.0;
  double k_s = 0.5;
  bool mass_weighted_rg = false;

  void validate() const;
};

// Root-mean-square distance of the beads from their unweighted mean position.
double radius_of_gyration(std::span<const Vec3> positions);
// Mass-weighted variant about the centre of mass.
double radius_of_gyration(std::span<const Vec3> positions, std::span<const double> masses);

struct RewardBreakdown {
  double r_dist = 0.0;
  double r_rg = 0.0;
  double r_shaping = 0.0;
  double total = 0.0;
};

// Distance penalty outside [lo, hi], constant bonus inside (closed interval), and a
// shaping term peaking at the band centre that turns negative outside the band.
RewardBreakdown compute_reward(double rg, const EnvConfig& cfg);

// Per backbone bead: position relative to the centre (3), velocity (3), angular
// velocity (3), bond angle (1), dihedral (1), k nearest neighbours within
// obs_radius as relative positions (3k, nearest first, zero padded). Tail: RG, lo, hi.
using Observation = std::vector<double>;

inline constexpr std::size_t kPerBeadObservation = 11;
inline constexpr std::size_t kObservationTail = 3;
inline constexpr std::size_t kActionsPerBead = 5;

// Action slots per backbone bead: x, y, z direction in [-1,1], magnitude alpha in
// [0,1], rotation fraction in [-1,1].
namespace action_slot {
inline constexpr std::size_t kX = 0;
inline constexpr std::size_t kY = 1;
inline constexpr std::size_t kZ = 2;
inline constexpr std::size_t kAlpha = 3;
inline constexpr std::size_t kAngle = 4;
}  // namespace action_slot

constexpr std::size_t observation_size(std::size_t backbone_beads, std::size_t k_neighbors) {
  return backbone_beads * (kPerBeadObservation + 3 * k_neighbors) + kObservationTail;
}
constexpr std::size_t action_size(std::size_t backbone_beads) { return kActionsPerBead * backbone_beads; }

// Throws InvalidArgument if any component is outside its bound or not finite.
void check_action_bounds(std::span<const double> action, std::size_t backbone_beads);

// Learned per-bead external forces implied by an action vector.
std::vector<Vec3> learned_forces(std::span<const double> action, const Topology& topo, const EnvConfig& cfg);

// Planar zigzag backbone at the bond/angle minima, other beads grown outwards from it.
std::vector<Vec3> canonical_conformation(const Topology& topo, const ForceFieldParams& params);

// Isotropic Gaussian around a mean conformation; sigma == 0 is a point mass.
struct InitialDensity {
  std::vector<Vec3> mean;
  double sigma = 0.0;
  double log_density(std::span<const Vec3> positions) const;
};

Observation observe(const SystemState& state, const Topology& topo, const EnvConfig& cfg);

struct ResetResult {
  SystemState state;
  Observation observation;
  InitialDensity initial_density;
};

ResetResult reset(const Topology& topo, const EnvConfig& cfg, const ForceFieldParams& params, std::uint64_t seed);
// Same, with an explicit canonical conformation and noise scale.
ResetResult reset_from(const std::vector<Vec3>& canonical, const Topology& topo, const EnvConfig& cfg,
                       double noise_sigma, std::uint64_t seed);

struct StepInfo {
  double rg = 0.0;
  double potential_energy = 0.0;
  bool bond_breakage = false;
};

struct StepResult {
  Observation observation;
  RewardBreakdown reward;
  bool done = false;
  StepInfo info;
};

// One control step: learned kicks on backbone beads, a Langevin step, dihedral
// rotations in monomer order, then reward from the new conformation.
std::pair<SystemState, StepResult> step(const SystemState& state, std::span<const double> action, const Topology& topo,
                                        const EnvConfig& cfg, const ForceField& ff, const LangevinParams& dyn, Rng& rng);

// Stateful wrapper that caches forces between steps.
class Environment {
 public:
  Environment(const Topology& topo, EnvConfig cfg, const ForceFieldParams& ff_params, LangevinParams dyn);

  // Starts a new episode: initial noise from stream 0 of `seed`, dynamics from stream 1.
  const Observation& reset(std::uint64_t seed);
  const Observation& reset(std::uint64_t seed, double noise_sigma);
  // Starts from an explicit state (step counter is kept).
  const Observation& reset_to(const SystemState& state, std::uint64_t dynamics_seed);
  StepResult step(std::span<const double> action);

  const SystemState& state() const { return state_; }
  const EnergyForces& forces() const { return forces_; }
  const Observation& observation() const { return observation_; }
  const InitialDensity& initial_density() const { return initial_density_; }
  double rg() const;
  bool done() const { return state_.step >= cfg_.episode_length; }

  const Topology& topology() const { return ff_.topology(); }
  const EnvConfig& config() const { return cfg_; }
  const ForceField& forcefield() const { return ff_; }
  const LangevinParams& dynamics() const { return dyn_; }
  const std::vector<Vec3>& canonical() const { return canonical_; }
  std::size_t observation_size() const;
  std::size_t action_size() const;

 private:
  EnvConfig cfg_;
  ForceField ff_;
  LangevinParams dyn_;
  std::vector<Vec3> canonical_;
  SystemState state_;
  EnergyForces forces_;
  Observation observation_;
  InitialDensity initial_density_;
  Rng rng_;
};

}  // namespace p5
