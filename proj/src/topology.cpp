#include "p5/topology.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <sstream>

#include "p5/error.hpp"
#include "p5/text.hpp"

namespace p5 {

namespace {

constexpr std::array<BeadType, kBeadKindCount> kBeadTypes{{
    {BeadKind::Na, "Na", 5.2, kDefaultBeadMass},
    {BeadKind::P3, "P3", 5.2, kDefaultBeadMass},
    {BeadKind::SP1, "SP1", 4.7, kDefaultBeadMass},
}};

constexpr std::string_view kCelluloseAcetateFragment = R"(# cellulose acetate monomer, 7 beads
[beads]
0 SP1 65.428571428571431 0 1
1 SP1 65.428571428571431 0 0
2 SP1 65.428571428571431 0 0
3 Na  65.428571428571431 0 0
4 P3  65.428571428571431 0 0
5 Na  65.428571428571431 0 0
6 P3  65.428571428571431 0 0
[bonds]
0 1 1
1 2 1
2 0 1
1 3 2
3 4 2
2 5 2
5 6 2
)";

std::optional<TermKind> section_term_kind(std::string_view section) {
  if (section == "bonds") return TermKind::Bond;
  if (section == "angles") return TermKind::Angle;
  if (section == "dihedrals") return TermKind::Dihedral;
  return std::nullopt;
}

std::string_view section_name(TermKind kind) {
  switch (kind) {
    case TermKind::Bond: return "bonds";
    case TermKind::Angle: return "angles";
    case TermKind::Dihedral: return "dihedrals";
  }
  return "";
}

struct DisjointSet {
  std::vector<std::size_t> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

// Shared structural checks; `line_of_term` maps a term index to its source line (0 if unknown).
template <typename LineOf>
void check_terms(const Topology& topo, LineOf line_of_term) {
  const std::size_t n = topo.beads.size();
  for (std::size_t t = 0; t < topo.terms.size(); ++t) {
    const BondedTerm& term = topo.terms[t];
    for (std::size_t a = 0; a < term.size(); ++a) {
      if (term.beads[a] >= n) {
        throw ParseError(line_of_term(t), "dangling reference to bead " + std::to_string(term.beads[a]) +
                                              " (topology has " + std::to_string(n) + " beads)");
      }
      for (std::size_t b = 0; b < a; ++b) {
        if (term.beads[a] == term.beads[b]) {
          throw ParseError(line_of_term(t), "bead " + std::to_string(term.beads[a]) + " repeated in " +
                                                std::string(section_name(term.kind)) + " term");
        }
      }
    }
  }
}

std::vector<std::size_t> derive_backbone(const Topology& topo, const std::vector<std::size_t>& bead_lines) {
  std::size_t n_monomers = 0;
  for (const BeadSpec& b : topo.beads) n_monomers = std::max(n_monomers, b.monomer + 1);
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> backbone(n_monomers, kNone);
  for (const BeadSpec& b : topo.beads) {
    if (!b.is_backbone) continue;
    if (backbone[b.monomer] != kNone) {
      throw ParseError(bead_lines.empty() ? 0 : bead_lines[b.id],
                       "monomer " + std::to_string(b.monomer) + " has more than one backbone bead");
    }
    backbone[b.monomer] = b.id;
  }
  for (std::size_t m = 0; m < n_monomers; ++m) {
    if (backbone[m] == kNone) {
      throw ParseError(0, "missing backbone flag for monomer " + std::to_string(m));
    }
  }
  return backbone;
}

void check_connected(const Topology& topo) {
  if (topo.beads.empty()) return;
  DisjointSet sets(topo.beads.size());
  for (const BondedTerm& t : topo.terms) {
    if (t.kind == TermKind::Bond) sets.unite(t.beads[0], t.beads[1]);
  }
  const std::size_t root = sets.find(0);
  for (std::size_t i = 1; i < topo.beads.size(); ++i) {
    if (sets.find(i) != root) {
      throw ParseError(0, "bond graph is not connected (bead " + std::to_string(i) + " unreachable from bead 0)");
    }
  }
}

}  // namespace

const BeadType& bead_type(BeadKind kind) { return kBeadTypes[kind_index(kind)]; }

std::optional<BeadKind> parse_bead_kind(std::string_view name) {
  for (const BeadType& t : kBeadTypes) {
    if (t.name == name) return t.kind;
  }
  return std::nullopt;
}

std::vector<double> Topology::masses() const {
  std::vector<double> m;
  m.reserve(beads.size());
  for (const BeadSpec& b : beads) m.push_back(b.mass);
  return m;
}

double Topology::total_mass() const {
  double sum = 0.0;
  for (const BeadSpec& b : beads) sum += b.mass;
  return sum;
}

std::vector<BondedTerm> Topology::terms_of(TermKind kind) const {
  std::vector<BondedTerm> out;
  for (const BondedTerm& t : terms) {
    if (t.kind == kind) out.push_back(t);
  }
  return out;
}

std::vector<std::size_t> Topology::monomer_beads(std::size_t m) const {
  std::vector<std::size_t> ids;
  for (const BeadSpec& b : beads) {
    if (b.monomer == m) ids.push_back(b.id);
  }
  return ids;
}

std::vector<std::vector<std::size_t>> Topology::bond_graph() const {
  std::vector<std::vector<std::size_t>> adj(beads.size());
  for (const BondedTerm& t : terms) {
    if (t.kind != TermKind::Bond) continue;
    adj[t.beads[0]].push_back(t.beads[1]);
    adj[t.beads[1]].push_back(t.beads[0]);
  }
  for (auto& list : adj) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return adj;
}

void Topology::validate() const {
  try {
    for (std::size_t i = 0; i < beads.size(); ++i) {
      if (beads[i].id != i) throw InvalidArgument("bead ids must be contiguous from 0");
      if (!(beads[i].mass > 0.0)) throw InvalidArgument("bead " + std::to_string(i) + " has non-positive mass");
    }
    check_terms(*this, [](std::size_t) { return std::size_t{0}; });
    if (derive_backbone(*this, {}) != backbone_order) {
      throw InvalidArgument("backbone_order does not list one backbone bead per monomer in monomer order");
    }
    std::size_t monomers = 0;
    for (const BeadSpec& b : beads) monomers = std::max(monomers, b.monomer + 1);
    if (monomers != n_monomers) throw InvalidArgument("n_monomers inconsistent with bead monomer indices");
    check_connected(*this);
  } catch (const ParseError& e) {
    throw InvalidArgument(e.what());
  }
}

Topology parse_topology(std::string_view text) {
  Topology topo;
  std::vector<std::size_t> bead_lines;  // indexed by id once sorted
  std::vector<std::pair<std::size_t, std::size_t>> raw_bead_lines;
  std::vector<std::size_t> term_lines;
  std::string section;

  std::size_t line_no = 0;
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    line = strip_comment(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(line_no, "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "beads" && !section_term_kind(section)) {
        throw ParseError(line_no, "unknown section [" + section + "]");
      }
      continue;
    }
    const std::vector<std::string_view> fields = split_fields(line);
    if (section.empty()) throw ParseError(line_no, "data row outside of any section");

    if (section == "beads") {
      if (fields.size() != 5) {
        throw ParseError(line_no, "bead row needs 5 fields (id type mass monomer backbone), got " +
                                      std::to_string(fields.size()));
      }
      BeadSpec bead;
      bead.id = parse_index(fields[0], line_no, "bead id");
      const auto kind = parse_bead_kind(fields[1]);
      if (!kind) throw ParseError(line_no, "unknown bead type '" + std::string(fields[1]) + "'");
      bead.type = *kind;
      bead.mass = parse_real(fields[2], line_no, "mass");
      if (!(bead.mass > 0.0)) throw ParseError(line_no, "mass must be positive");
      bead.monomer = parse_index(fields[3], line_no, "monomer index");
      if (fields[4] != "0" && fields[4] != "1") throw ParseError(line_no, "backbone flag must be 0 or 1");
      bead.is_backbone = fields[4] == "1";
      for (const BeadSpec& other : topo.beads) {
        if (other.id == bead.id) throw ParseError(line_no, "duplicate bead id " + std::to_string(bead.id));
      }
      topo.beads.push_back(bead);
      raw_bead_lines.emplace_back(bead.id, line_no);
      continue;
    }

    const TermKind kind = *section_term_kind(section);
    const std::size_t n = arity(kind);
    if (fields.size() != n + 1) {
      throw ParseError(line_no, "arity mismatch in [" + section + "]: expected " + std::to_string(n) +
                                    " bead ids and a paramset, got " + std::to_string(fields.size()) + " fields");
    }
    BondedTerm term;
    term.kind = kind;
    for (std::size_t a = 0; a < n; ++a) term.beads[a] = parse_index(fields[a], line_no, "bead id");
    term.paramset = parse_index(fields[n], line_no, "paramset");
    topo.terms.push_back(term);
    term_lines.push_back(line_no);
  }

  std::sort(topo.beads.begin(), topo.beads.end(), [](const BeadSpec& a, const BeadSpec& b) { return a.id < b.id; });
  std::sort(raw_bead_lines.begin(), raw_bead_lines.end());
  for (std::size_t i = 0; i < topo.beads.size(); ++i) {
    if (topo.beads[i].id != i) {
      throw ParseError(0, "bead ids must be contiguous from 0 (missing id " + std::to_string(i) + ")");
    }
    bead_lines.push_back(raw_bead_lines[i].second);
  }

  check_terms(topo, [&](std::size_t t) { return term_lines[t]; });
  topo.backbone_order = derive_backbone(topo, bead_lines);
  topo.n_monomers = topo.backbone_order.size();
  check_connected(topo);
  return topo;
}

std::string write_topology(const Topology& topo) {
  std::string out = "# p5 coarse-grained topology\n[beads]\n";
  for (const BeadSpec& b : topo.beads) {
    out += std::to_string(b.id) + ' ' + std::string(bead_type(b.type).name) + ' ' + format_shortest(b.mass) + ' ' +
           std::to_string(b.monomer) + ' ' + (b.is_backbone ? '1' : '0') + '\n';
  }
  // Terms keep their order; a section header is emitted whenever the kind changes.
  std::optional<TermKind> current;
  for (const BondedTerm& t : topo.terms) {
    if (current != t.kind) {
      out += '[' + std::string(section_name(t.kind)) + "]\n";
      current = t.kind;
    }
    for (std::size_t a = 0; a < t.size(); ++a) out += std::to_string(t.beads[a]) + ' ';
    out += std::to_string(t.paramset) + '\n';
  }
  return out;
}

std::string_view cellulose_acetate_fragment() { return kCelluloseAcetateFragment; }

Topology build_chain(const Topology& fragment, std::size_t n_monomers) {
  if (n_monomers == 0) throw InvalidArgument("build_chain: n_monomers must be at least 1");
  if (fragment.n_monomers != 1) throw InvalidArgument("build_chain: fragment must describe exactly one monomer");

  const std::size_t per = fragment.beads.size();
  const std::size_t bb = fragment.backbone_order.front();
  Topology topo;
  topo.n_monomers = n_monomers;
  topo.beads.reserve(per * n_monomers);

  for (std::size_t m = 0; m < n_monomers; ++m) {
    const std::size_t offset = m * per;
    for (BeadSpec b : fragment.beads) {
      b.id += offset;
      b.monomer = m;
      topo.beads.push_back(b);
    }
    for (BondedTerm t : fragment.terms) {
      for (std::size_t a = 0; a < t.size(); ++a) t.beads[a] += offset;
      topo.terms.push_back(t);
    }
    topo.backbone_order.push_back(offset + bb);
  }

  const auto& order = topo.backbone_order;
  for (std::size_t m = 0; m + 1 < n_monomers; ++m) {
    topo.terms.push_back({TermKind::Bond, {order[m], order[m + 1], 0, 0}, paramsets::kBackboneBond});
  }
  for (std::size_t m = 0; m + 2 < n_monomers; ++m) {
    topo.terms.push_back({TermKind::Angle, {order[m], order[m + 1], order[m + 2], 0}, paramsets::kBackboneAngle});
  }
  for (std::size_t m = 0; m + 3 < n_monomers; ++m) {
    topo.terms.push_back(
        {TermKind::Dihedral, {order[m], order[m + 1], order[m + 2], order[m + 3]}, paramsets::kBackboneDihedral});
  }
  return topo;
}

Topology build_cellulose_acetate_chain(std::size_t n_monomers) {
  static const Topology fragment = parse_topology(kCelluloseAcetateFragment);
  return build_chain(fragment, n_monomers);
}

}  // namespace p5
