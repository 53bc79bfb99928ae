#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "p5/topology.hpp"
#include "p5/vec3.hpp"

namespace p5 {

struct BondParams {
  double k = 0.0;   // energy / Å²
  double r0 = 0.0;  // Å
  friend bool operator==(const BondParams&, const BondParams&) = default;
};

struct AngleParams {
  double k = 0.0;       // energy / rad²
  double theta0 = 0.0;  // rad
  friend bool operator==(const AngleParams&, const AngleParams&) = default;
};

struct DihedralParams {
  double k = 0.0;  // energy
  int multiplicity = 1;
  double phase = 0.0;  // rad
  friend bool operator==(const DihedralParams&, const DihedralParams&) = default;
};

struct LjPair {
  double epsilon = 0.0;
  double sigma = 0.0;  // Å
  friend bool operator==(const LjPair&, const LjPair&) = default;
};

// All energies are in internal units (amu·Å²/step²).
struct ForceFieldParams {
  std::vector<BondParams> bond_sets;
  std::vector<AngleParams> angle_sets;
  std::vector<DihedralParams> dihedral_sets;
  std::array<std::array<LjPair, kBeadKindCount>, kBeadKindCount> lj{};
  double cutoff = 12.0;
  int exclusion_depth = 2;

  const LjPair& lj_pair(BeadKind a, BeadKind b) const { return lj[kind_index(a)][kind_index(b)]; }
  void set_lj_pair(BeadKind a, BeadKind b, LjPair p);

  // Throws InvalidArgument on negative constants, asymmetric LJ table, or cutoff <= max sigma.
  void validate() const;
  // Throws InvalidArgument if the topology references a paramset that does not exist.
  void check_covers(const Topology& topo) const;

  friend bool operator==(const ForceFieldParams&, const ForceFieldParams&) = default;
};

// Backbone angle of the canonical zigzag, and the default angle minimum.
inline constexpr double kDefaultBackboneAngleDeg = 140.0;

// Defaults: k_bond 1250 kJ/mol/nm², r0 4.7 Å for every bond set; backbone angle
// 25 kJ/mol/rad² at 140°; free dihedrals; ε 0.85 with σ the larger vdW diameter
// of the pair; 12 Å cutoff; 1-2 and 1-3 exclusions. `energy_unit_kj_mol` is the
// size of one internal energy unit in kJ/mol (see dynamics.hpp).
ForceFieldParams default_forcefield(double energy_unit_kj_mol);

// Rows override or extend `base`; sections may be omitted.
ForceFieldParams parse_forcefield(std::string_view text, const ForceFieldParams& base);
std::string write_forcefield(const ForceFieldParams& params);

enum class EnergyComponent : std::size_t { Bond = 0, Angle, Dihedral, Lj };
inline constexpr std::size_t kEnergyComponentCount = 4;

struct EnergyForces {
  double potential_energy = 0.0;
  std::vector<Vec3> forces;
  std::array<double, kEnergyComponentCount> components{};

  double component(EnergyComponent c) const { return components[static_cast<std::size_t>(c)]; }

  static EnergyForces zeros(std::size_t n) {
    EnergyForces ef;
    ef.forces.assign(n, Vec3{});
    return ef;
  }
};

// Evaluates the force field for one topology. Exclusion lists and per-bead LJ
// types are precomputed at construction; evaluation is const and deterministic.
class ForceField {
 public:
  ForceField(const Topology& topo, ForceFieldParams params);

  const ForceFieldParams& params() const { return params_; }
  const Topology& topology() const { return topo_; }

  EnergyForces bonded(std::span<const Vec3> positions) const;
  // Cell-list evaluation of the shifted Lennard-Jones potential.
  EnergyForces lj(std::span<const Vec3> positions) const;
  // O(N²) reference for lj().
  EnergyForces lj_all_pairs(std::span<const Vec3> positions) const;
  EnergyForces total(std::span<const Vec3> positions) const;

  bool excluded(std::size_t i, std::size_t j) const;

 private:
  void add_pair(std::size_t i, std::size_t j, const Vec3& ri, const Vec3& rj, EnergyForces& out) const;

  Topology topo_;
  ForceFieldParams params_;
  std::vector<std::vector<std::size_t>> exclusions_;  // sorted, j > i only
  std::array<std::array<double, kBeadKindCount>, kBeadKindCount> shift_{};
};

EnergyForces compute_bonded(const Topology& topo, std::span<const Vec3> positions, const ForceFieldParams& params);
EnergyForces compute_lj(const Topology& topo, std::span<const Vec3> positions, const ForceFieldParams& params);
EnergyForces total_energy_forces(const Topology& topo, std::span<const Vec3> positions,
                                 const ForceFieldParams& params);

struct AnomalyThresholds {
  double stretch_factor = 1.5;
  double compress_factor = 0.5;
  double spike_factor = 10.0;
  std::size_t spike_window = 101;
};

enum class AnomalyKind { BondBreakage, EnergySpike };

struct AnomalyEvent {
  std::size_t step = 0;
  AnomalyKind kind = AnomalyKind::BondBreakage;
  std::vector<std::size_t> beads;  // bond endpoints for BondBreakage
  double magnitude = 0.0;          // r/r0 for BondBreakage, |PE|/median for EnergySpike
};

struct AnomalyReport {
  std::vector<AnomalyEvent> events;
  bool empty() const { return events.empty(); }
};

struct AnomalyFrame {
  std::size_t step = 0;
  std::span<const Vec3> positions;
  double potential_energy = 0.0;
};

// Flags bonds outside [compress·r0, stretch·r0] and frames whose |PE| exceeds
// spike_factor times the median |PE| of the preceding spike_window frames.
AnomalyReport detect_anomalies(std::span<const AnomalyFrame> frames, const Topology& topo,
                               const ForceFieldParams& params, const AnomalyThresholds& thresholds = {});

// True if any bond of `positions` lies outside the thresholds' length band.
bool has_bond_breakage(std::span<const Vec3> positions, const Topology& topo, const ForceFieldParams& params,
                       const AnomalyThresholds& thresholds = {});

}  // namespace p5
