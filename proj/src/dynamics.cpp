#include "p5/dynamics.hpp"

#include <cmath>
#include <numbers>

#include "p5/error.hpp"

namespace p5 {

namespace {

void require_finite(std::span<const Vec3> v, const char* what) {
  for (const Vec3& a : v) {
    if (!is_finite(a)) throw IntegrationError(std::string("non-finite value in ") + what);
  }
}

double amu_kg(const TimescaleParams& p) { return 1e-3 / p.avogadro; }

double time_unit_s(const TimescaleParams& p) { return timescale_factor_fs(p) * 1e-15; }

}  // namespace

SystemState SystemState::at_rest(std::vector<Vec3> positions) {
  SystemState s;
  const std::size_t n = positions.size();
  s.positions = std::move(positions);
  s.velocities.assign(n, Vec3{});
  s.angular_velocities.assign(n, Vec3{});
  return s;
}

void TimescaleParams::validate() const {
  if (!(length_m > 0) || !(monomer_molar_mass > 0) || !(beads_per_monomer > 0) || !(temperature > 0) ||
      !(boltzmann > 0) || !(avogadro > 0)) {
    throw InvalidArgument("timescale parameters must all be positive");
  }
}

double bead_mass_kg(const TimescaleParams& p) {
  return p.monomer_molar_mass * 1e-3 / (p.beads_per_monomer * p.avogadro);
}

double timescale_factor_fs(const TimescaleParams& p) {
  p.validate();
  // Characteristic speed from ½ m v² = 3 kT gives the published conversion constant.
  const double v_char = std::sqrt(6.0 * p.boltzmann * p.temperature / bead_mass_kg(p));
  return p.length_m / v_char * 1e15;
}

double energy_unit_kj_mol(const TimescaleParams& p) {
  const double t = time_unit_s(p);
  return amu_kg(p) * 1e-20 / (t * t) * p.avogadro * 1e-3;
}

double thermal_energy_internal(const TimescaleParams& p) {
  const double t = time_unit_s(p);
  return p.boltzmann * p.temperature / (amu_kg(p) * 1e-20 / (t * t));
}

void LangevinParams::validate(std::size_t n_beads) const {
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  if (!(gamma >= 0.0)) throw InvalidArgument("gamma must be non-negative");
  if (!(kT >= 0.0)) throw InvalidArgument("kT must be non-negative");
  if (masses.size() != n_beads || inertias.size() != n_beads) {
    throw InvalidArgument("per-bead masses/inertias do not match bead count");
  }
}

LangevinParams make_langevin_params(const Topology& topo, double dt, double gamma, double kT) {
  LangevinParams p;
  p.dt = dt;
  p.gamma = gamma;
  p.kT = kT;
  for (const BeadSpec& b : topo.beads) {
    const double radius = bead_type(b.type).vdw_diameter / 2.0;
    p.masses.push_back(b.mass);
    p.inertias.push_back(0.4 * b.mass * radius * radius);
  }
  p.validate(topo.bead_count());
  return p;
}

SystemState langevin_step_with_noise(const SystemState& state, std::span<const Vec3> systematic_forces,
                                     std::span<const Vec3> external_forces, const LangevinParams& params,
                                     std::span<const Vec3> noise_v, std::span<const Vec3> noise_w) {
  const std::size_t n = state.size();
  params.validate(n);
  if (systematic_forces.size() != n || external_forces.size() != n || noise_v.size() != n || noise_w.size() != n ||
      state.velocities.size() != n || state.angular_velocities.size() != n) {
    throw InvalidArgument("langevin_step: array lengths do not match bead count");
  }
  require_finite(state.positions, "positions");
  require_finite(state.velocities, "velocities");
  require_finite(state.angular_velocities, "angular velocities");
  require_finite(systematic_forces, "systematic forces");
  require_finite(external_forces, "external forces");

  const double dt = params.dt;
  const double g = params.gamma;
  SystemState next;
  next.positions.resize(n);
  next.velocities.resize(n);
  next.angular_velocities.resize(n);
  next.step = state.step + 1;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = params.masses[i];
    const double amp_v = std::sqrt(2.0 * g * params.kT * dt / m);
    const double amp_w = std::sqrt(2.0 * g * params.kT * dt / params.inertias[i]);
    const Vec3& v = state.velocities[i];
    const Vec3 accel = (systematic_forces[i] + external_forces[i]) / m - v * g;
    next.velocities[i] = v + accel * dt + noise_v[i] * amp_v;
    next.positions[i] = state.positions[i] + next.velocities[i] * dt;
    const Vec3& w = state.angular_velocities[i];
    next.angular_velocities[i] = w - w * (g * dt) + noise_w[i] * amp_w;
  }
  require_finite(next.positions, "integrated positions");
  require_finite(next.velocities, "integrated velocities");
  return next;
}

SystemState langevin_step(const SystemState& state, std::span<const Vec3> systematic_forces,
                          std::span<const Vec3> external_forces, const LangevinParams& params, Rng& rng) {
  const std::size_t n = state.size();
  std::vector<Vec3> xi_v(n);
  std::vector<Vec3> xi_w(n);
  for (std::size_t i = 0; i < n; ++i) {
    xi_v[i] = {rng.normal(), rng.normal(), rng.normal()};
    xi_w[i] = {rng.normal(), rng.normal(), rng.normal()};
  }
  return langevin_step_with_noise(state, systematic_forces, external_forces, params, xi_v, xi_w);
}

void rotate_monomer_in_place(std::vector<Vec3>& positions, const Topology& topo, std::size_t monomer, double theta) {
  if (monomer >= topo.n_monomers) throw InvalidArgument("rotation: monomer index out of range");
  if (positions.size() != topo.bead_count()) throw InvalidArgument("rotation: positions do not match bead count");
  if (theta == 0.0) return;

  std::vector<std::size_t> movers;
  for (std::size_t id : topo.monomer_beads(monomer)) {
    if (!topo.beads[id].is_backbone) movers.push_back(id);
  }
  if (movers.empty()) return;
  if (topo.n_monomers < 2) throw DegenerateGeometry("rotation axis undefined for a single-monomer chain");

  const auto& order = topo.backbone_order;
  const Vec3 pivot = positions[order[monomer]];
  const Vec3 axis = monomer > 0 ? pivot - positions[order[monomer - 1]] : positions[order[1]] - pivot;
  const double len = norm(axis);
  if (!(len > 0.0)) throw DegenerateGeometry("rotation axis of monomer " + std::to_string(monomer) + " is degenerate");
  const Vec3 unit = axis / len;
  for (std::size_t id : movers) positions[id] = pivot + rotate_about_axis(positions[id] - pivot, unit, theta);
}

SystemState apply_monomer_rotation(const SystemState& state, const Topology& topo, std::size_t monomer, double theta) {
  SystemState next = state;
  rotate_monomer_in_place(next.positions, topo, monomer, theta);
  return next;
}

double transition_log_density(const SystemState& prev, const SystemState& next, std::span<const Vec3> applied_forces,
                              const LangevinParams& params) {
  const std::size_t n = prev.size();
  params.validate(n);
  if (!(params.kT > 0.0) || !(params.gamma > 0.0)) {
    throw DegenerateTransition("transition density undefined without noise (kT and gamma must be positive)");
  }
  if (next.step != prev.step + 1) throw InvalidArgument("transition_log_density: next.step must equal prev.step + 1");
  if (next.size() != n || applied_forces.size() != n || prev.velocities.size() != n || next.velocities.size() != n) {
    throw InvalidArgument("transition_log_density: array lengths do not match");
  }

  const double dt = params.dt;
  const double g = params.gamma;
  const double half_log_two_pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double logp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = params.masses[i];
    const double amp = std::sqrt(2.0 * g * params.kT * dt / m);
    const Vec3& v = prev.velocities[i];
    const Vec3 mean = v + (applied_forces[i] / m - v * g) * dt;
    const Vec3 xi = (next.velocities[i] - mean) / amp;
    logp += -0.5 * norm2(xi) - 3.0 * half_log_two_pi - 3.0 * std::log(amp);
  }
  return logp;
}

double kinetic_energy(const SystemState& state, std::span<const double> masses) {
  double ke = 0.0;
  for (std::size_t i = 0; i < state.size(); ++i) ke += 0.5 * masses[i] * norm2(state.velocities[i]);
  return ke;
}

}  // namespace p5
