#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace p5 {

// Martini bead classes used by the coarse-grained cellulose acetate model.
enum class BeadKind { Na, P3, SP1 };

inline constexpr std::size_t kBeadKindCount = 3;

struct BeadType {
  BeadKind kind;
  std::string_view name;
  double vdw_diameter;  // Å
  double default_mass;  // amu
};

// Monomer molar mass split evenly over its seven beads.
inline constexpr double kMonomerMass = 458.0;
inline constexpr std::size_t kBeadsPerMonomer = 7;
inline constexpr double kDefaultBeadMass = kMonomerMass / static_cast<double>(kBeadsPerMonomer);

const BeadType& bead_type(BeadKind kind);
std::optional<BeadKind> parse_bead_kind(std::string_view name);
inline std::size_t kind_index(BeadKind kind) { return static_cast<std::size_t>(kind); }

struct BeadSpec {
  std::size_t id = 0;
  BeadKind type = BeadKind::Na;
  double mass = kDefaultBeadMass;
  std::size_t monomer = 0;
  bool is_backbone = false;

  friend bool operator==(const BeadSpec&, const BeadSpec&) = default;
};

enum class TermKind { Bond, Angle, Dihedral };

constexpr std::size_t arity(TermKind kind) {
  switch (kind) {
    case TermKind::Bond: return 2;
    case TermKind::Angle: return 3;
    case TermKind::Dihedral: return 4;
  }
  return 0;
}

struct BondedTerm {
  TermKind kind = TermKind::Bond;
  std::array<std::size_t, 4> beads{};  // only the first arity(kind) entries are meaningful
  std::size_t paramset = 0;

  std::size_t size() const { return arity(kind); }
  friend bool operator==(const BondedTerm&, const BondedTerm&) = default;
};

struct Topology {
  std::vector<BeadSpec> beads;
  std::vector<BondedTerm> terms;
  std::size_t n_monomers = 0;
  std::vector<std::size_t> backbone_order;  // one bead id per monomer, in monomer order

  std::size_t bead_count() const { return beads.size(); }
  std::vector<double> masses() const;
  double total_mass() const;
  std::vector<BondedTerm> terms_of(TermKind kind) const;
  // Bead ids belonging to monomer m, ascending.
  std::vector<std::size_t> monomer_beads(std::size_t m) const;
  // Adjacency lists of the bond graph, neighbours ascending.
  std::vector<std::vector<std::size_t>> bond_graph() const;

  // Throws InvalidArgument if any structural invariant is violated.
  void validate() const;

  friend bool operator==(const Topology&, const Topology&) = default;
};

// Parses the line-based `.p5t` format. Errors carry the offending line number.
Topology parse_topology(std::string_view text);
std::string write_topology(const Topology& topo);

// Paramset ids shared between the builder and the default force field.
namespace paramsets {
inline constexpr std::size_t kBackboneBond = 0;
inline constexpr std::size_t kRingBond = 1;
inline constexpr std::size_t kPendantBond = 2;
inline constexpr std::size_t kBackboneAngle = 0;
inline constexpr std::size_t kBackboneDihedral = 0;
}  // namespace paramsets

// Built-in one-monomer fragment in `.p5t` form: three SP1 ring beads (bead 0 is
// the backbone) carrying two Na-P3 pendant arms. Replaceable without code changes
// by passing another fragment to build_chain.
std::string_view cellulose_acetate_fragment();

// Replicates a one-monomer fragment n_monomers times, links consecutive backbone
// beads, and adds backbone angle and dihedral terms.
Topology build_chain(const Topology& fragment, std::size_t n_monomers);
Topology build_cellulose_acetate_chain(std::size_t n_monomers);

}  // namespace p5
