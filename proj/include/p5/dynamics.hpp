#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "p5/rng.hpp"
#include "p5/topology.hpp"
#include "p5/vec3.hpp"

namespace p5 {

// Dynamic state s_t. Lengths in Å, time in dimensionless steps.
struct SystemState {
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;
  std::vector<Vec3> angular_velocities;
  std::uint64_t step = 0;

  std::size_t size() const { return positions.size(); }
  static SystemState at_rest(std::vector<Vec3> positions);
  friend bool operator==(const SystemState&, const SystemState&) = default;
};

// Converts between the dimensionless time unit and physical time. One time
// unit is the time a bead moving at the characteristic thermal speed needs to
// cover the characteristic length.
struct TimescaleParams {
  double length_m = 1e-10;
  double monomer_molar_mass = 458.0;  // g/mol
  double beads_per_monomer = 7.0;
  double temperature = 298.0;  // K
  double boltzmann = 1.380649e-23;  // J/K
  double avogadro = 6.022e23;  // 1/mol

  void validate() const;
};

// Bead mass in kg.
double bead_mass_kg(const TimescaleParams& p);
// Femtoseconds per dimensionless time unit: r / sqrt(6 kT / m_bead).
double timescale_factor_fs(const TimescaleParams& p);
// One internal energy unit (amu·Å²/unit²) expressed in kJ/mol.
double energy_unit_kj_mol(const TimescaleParams& p);
// k_B·T expressed in internal energy units.
double thermal_energy_internal(const TimescaleParams& p);

struct LangevinParams {
  double dt = 0.002;
  double gamma = 0.1;
  double kT = 0.0;
  std::vector<double> masses;    // amu, per bead
  std::vector<double> inertias;  // amu·Å², solid sphere (2/5)·m·(d/2)²

  void validate(std::size_t n_beads) const;
};

LangevinParams make_langevin_params(const Topology& topo, double dt, double gamma, double kT);

// Euler-Maruyama update with externally supplied unit normal deviates; noise_v and
// noise_w hold one 3-vector per bead. Rotational friction equals gamma.
SystemState langevin_step_with_noise(const SystemState& state, std::span<const Vec3> systematic_forces,
                                     std::span<const Vec3> external_forces, const LangevinParams& params,
                                     std::span<const Vec3> noise_v, std::span<const Vec3> noise_w);

// Draws per bead a translational then a rotational noise 3-vector from rng.
SystemState langevin_step(const SystemState& state, std::span<const Vec3> systematic_forces,
                          std::span<const Vec3> external_forces, const LangevinParams& params, Rng& rng);

// Rigidly rotates the non-backbone beads of `monomer` by theta about the axis
// through its backbone bead, directed along the bond from the previous backbone
// bead (for monomer 0, towards the next backbone bead). Velocities are untouched.
SystemState apply_monomer_rotation(const SystemState& state, const Topology& topo, std::size_t monomer, double theta);
void rotate_monomer_in_place(std::vector<Vec3>& positions, const Topology& topo, std::size_t monomer, double theta);

// log p(next | prev, forces) of the translational velocity update; applied_forces is the
// total force (systematic plus external) used to produce `next`. Positions and
// the angular-velocity variables carry no further density given v'.
double transition_log_density(const SystemState& prev, const SystemState& next, std::span<const Vec3> applied_forces,
                              const LangevinParams& params);

// Kinetic energy ½ Σ m v².
double kinetic_energy(const SystemState& state, std::span<const double> masses);

}  // namespace p5
