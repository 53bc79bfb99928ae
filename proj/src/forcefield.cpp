#include "p5/forcefield.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <limits>
#include <optional>

#include "p5/error.hpp"
#include "p5/text.hpp"

namespace p5 {

namespace {

std::string term_label(const BondedTerm& t, std::size_t index) {
  std::string s = "term " + std::to_string(index) + " (";
  for (std::size_t a = 0; a < t.size(); ++a) s += (a ? "-" : "") + std::to_string(t.beads[a]);
  return s + ")";
}

double lj_energy(const LjPair& p, double r2) {
  const double sr2 = p.sigma * p.sigma / r2;
  const double sr6 = sr2 * sr2 * sr2;
  return 4.0 * p.epsilon * (sr6 * sr6 - sr6);
}

void finalize(EnergyForces& ef) {
  ef.potential_energy = 0.0;
  for (double c : ef.components) ef.potential_energy += c;
}

}  // namespace

void ForceFieldParams::set_lj_pair(BeadKind a, BeadKind b, LjPair p) {
  lj[kind_index(a)][kind_index(b)] = p;
  lj[kind_index(b)][kind_index(a)] = p;
}

void ForceFieldParams::validate() const {
  for (const BondParams& b : bond_sets) {
    if (!(b.k >= 0.0) || !(b.r0 > 0.0)) throw InvalidArgument("bond set needs k >= 0 and r0 > 0");
  }
  for (const AngleParams& a : angle_sets) {
    if (!(a.k >= 0.0) || !(a.theta0 >= 0.0 && a.theta0 <= std::numbers::pi)) {
      throw InvalidArgument("angle set needs k >= 0 and theta0 in [0, pi]");
    }
  }
  for (const DihedralParams& d : dihedral_sets) {
    if (!(d.k >= 0.0)) throw InvalidArgument("dihedral set needs k >= 0");
  }
  double max_sigma = 0.0;
  for (std::size_t a = 0; a < kBeadKindCount; ++a) {
    for (std::size_t b = 0; b < kBeadKindCount; ++b) {
      const LjPair& p = lj[a][b];
      if (!(p.sigma > 0.0) || !(p.epsilon >= 0.0)) throw InvalidArgument("LJ pair needs sigma > 0 and epsilon >= 0");
      if (p != lj[b][a]) throw InvalidArgument("LJ table must be symmetric");
      max_sigma = std::max(max_sigma, p.sigma);
    }
  }
  if (!(cutoff > max_sigma)) throw InvalidArgument("cutoff must exceed the largest LJ sigma");
  if (exclusion_depth < 0) throw InvalidArgument("exclusion_depth must be non-negative");
}

void ForceFieldParams::check_covers(const Topology& topo) const {
  for (std::size_t t = 0; t < topo.terms.size(); ++t) {
    const BondedTerm& term = topo.terms[t];
    const std::size_t available = term.kind == TermKind::Bond    ? bond_sets.size()
                                  : term.kind == TermKind::Angle ? angle_sets.size()
                                                                 : dihedral_sets.size();
    if (term.paramset >= available) {
      throw InvalidArgument(term_label(term, t) + " references missing paramset " + std::to_string(term.paramset));
    }
  }
}

ForceFieldParams default_forcefield(double energy_unit_kj_mol) {
  // kJ/mol/nm² -> kJ/mol/Å² is a factor 1/100.
  const double k_bond = 1250.0 / 100.0 / energy_unit_kj_mol;
  const double k_angle = 25.0 / energy_unit_kj_mol;
  ForceFieldParams p;
  p.bond_sets.assign(3, BondParams{k_bond, 4.7});
  p.angle_sets.push_back({k_angle, kDefaultBackboneAngleDeg * std::numbers::pi / 180.0});
  p.dihedral_sets.push_back({0.0, 1, 0.0});
  for (std::size_t a = 0; a < kBeadKindCount; ++a) {
    for (std::size_t b = 0; b < kBeadKindCount; ++b) {
      const double sigma = std::max(bead_type(static_cast<BeadKind>(a)).vdw_diameter,
                                    bead_type(static_cast<BeadKind>(b)).vdw_diameter);
      p.lj[a][b] = {0.85, sigma};
    }
  }
  p.cutoff = 12.0;
  p.exclusion_depth = 2;
  return p;
}

ForceFieldParams parse_forcefield(std::string_view text, const ForceFieldParams& base) {
  ForceFieldParams p = base;
  std::string section;
  std::array<std::array<std::optional<LjPair>, kBeadKindCount>, kBeadKindCount> seen{};
  std::size_t line_no = 0;

  auto put = [&](auto& sets, std::size_t id, auto value) {
    if (id > sets.size()) {
      throw ParseError(line_no, "paramset id " + std::to_string(id) + " skips ids (next is " +
                                    std::to_string(sets.size()) + ")");
    }
    if (id == sets.size()) sets.push_back(value);
    else sets[id] = value;
  };
  auto expect = [&](const std::vector<std::string_view>& f, std::size_t n) {
    if (f.size() != n) {
      throw ParseError(line_no, "[" + section + "] rows need " + std::to_string(n) + " fields, got " +
                                    std::to_string(f.size()));
    }
  };

  for (std::string_view line : split_lines(text)) {
    ++line_no;
    line = strip_comment(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(line_no, "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "bondsets" && section != "anglesets" && section != "dihedralsets" && section != "lj" &&
          section != "global") {
        throw ParseError(line_no, "unknown section [" + section + "]");
      }
      continue;
    }
    const auto f = split_fields(line);
    if (section.empty()) throw ParseError(line_no, "data row outside of any section");
    if (section == "bondsets") {
      expect(f, 3);
      put(p.bond_sets, parse_index(f[0], line_no, "paramset id"),
          BondParams{parse_real(f[1], line_no, "k"), parse_real(f[2], line_no, "r0")});
    } else if (section == "anglesets") {
      expect(f, 3);
      put(p.angle_sets, parse_index(f[0], line_no, "paramset id"),
          AngleParams{parse_real(f[1], line_no, "k"), parse_real(f[2], line_no, "theta0")});
    } else if (section == "dihedralsets") {
      expect(f, 4);
      put(p.dihedral_sets, parse_index(f[0], line_no, "paramset id"),
          DihedralParams{parse_real(f[1], line_no, "k"),
                         static_cast<int>(parse_integer(f[2], line_no, "multiplicity")),
                         parse_real(f[3], line_no, "phase")});
    } else if (section == "lj") {
      expect(f, 4);
      const auto a = parse_bead_kind(f[0]);
      const auto b = parse_bead_kind(f[1]);
      if (!a || !b) throw ParseError(line_no, "unknown bead type in [lj] row");
      const LjPair pair{parse_real(f[2], line_no, "epsilon"), parse_real(f[3], line_no, "sigma")};
      for (const auto& [x, y] : {std::pair{*a, *b}, std::pair{*b, *a}}) {
        auto& slot = seen[kind_index(x)][kind_index(y)];
        if (slot && *slot != pair) throw ParseError(line_no, "asymmetric LJ entry for this type pair");
        slot = pair;
      }
      p.set_lj_pair(*a, *b, pair);
    } else {
      expect(f, 2);
      if (f[0] == "cutoff") p.cutoff = parse_real(f[1], line_no, "cutoff");
      else if (f[0] == "exclusion_depth") p.exclusion_depth = static_cast<int>(parse_integer(f[1], line_no, "exclusion_depth"));
      else throw ParseError(line_no, "unknown [global] key '" + std::string(f[0]) + "'");
    }
  }
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(0, e.what());
  }
  return p;
}

std::string write_forcefield(const ForceFieldParams& p) {
  std::string out = "# p5 force field (internal units: amu, Å, step; angles in rad)\n[bondsets]\n";
  for (std::size_t i = 0; i < p.bond_sets.size(); ++i) {
    out += std::to_string(i) + ' ' + format_shortest(p.bond_sets[i].k) + ' ' + format_shortest(p.bond_sets[i].r0) + '\n';
  }
  out += "[anglesets]\n";
  for (std::size_t i = 0; i < p.angle_sets.size(); ++i) {
    out += std::to_string(i) + ' ' + format_shortest(p.angle_sets[i].k) + ' ' +
           format_shortest(p.angle_sets[i].theta0) + '\n';
  }
  out += "[dihedralsets]\n";
  for (std::size_t i = 0; i < p.dihedral_sets.size(); ++i) {
    const auto& d = p.dihedral_sets[i];
    out += std::to_string(i) + ' ' + format_shortest(d.k) + ' ' + std::to_string(d.multiplicity) + ' ' +
           format_shortest(d.phase) + '\n';
  }
  out += "[lj]\n";
  for (std::size_t a = 0; a < kBeadKindCount; ++a) {
    for (std::size_t b = a; b < kBeadKindCount; ++b) {
      out += std::string(bead_type(static_cast<BeadKind>(a)).name) + ' ' +
             std::string(bead_type(static_cast<BeadKind>(b)).name) + ' ' + format_shortest(p.lj[a][b].epsilon) +
             ' ' + format_shortest(p.lj[a][b].sigma) + '\n';
    }
  }
  out += "[global]\ncutoff " + format_shortest(p.cutoff) + "\nexclusion_depth " + std::to_string(p.exclusion_depth) +
         '\n';
  return out;
}

ForceField::ForceField(const Topology& topo, ForceFieldParams params) : topo_(topo), params_(std::move(params)) {
  params_.validate();
  params_.check_covers(topo_);

  const std::size_t n = topo_.bead_count();
  const auto adj = topo_.bond_graph();
  exclusions_.assign(n, {});
  const auto depth = static_cast<std::size_t>(params_.exclusion_depth);
  std::vector<std::size_t> dist(n, static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> touched{i};
    std::deque<std::size_t> queue{i};
    dist[i] = 0;
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      if (dist[u] == depth) continue;
      for (std::size_t v : adj[u]) {
        if (dist[v] != static_cast<std::size_t>(-1)) continue;
        dist[v] = dist[u] + 1;
        touched.push_back(v);
        queue.push_back(v);
        if (v > i) exclusions_[i].push_back(v);
      }
    }
    std::sort(exclusions_[i].begin(), exclusions_[i].end());
    for (std::size_t t : touched) dist[t] = static_cast<std::size_t>(-1);
  }

  for (std::size_t a = 0; a < kBeadKindCount; ++a) {
    for (std::size_t b = 0; b < kBeadKindCount; ++b) {
      shift_[a][b] = lj_energy(params_.lj[a][b], params_.cutoff * params_.cutoff);
    }
  }
}

bool ForceField::excluded(std::size_t i, std::size_t j) const {
  if (i == j) return true;
  if (j < i) std::swap(i, j);
  const auto& list = exclusions_[i];
  return std::binary_search(list.begin(), list.end(), j);
}

EnergyForces ForceField::bonded(std::span<const Vec3> x) const {
  const std::size_t n = topo_.bead_count();
  if (x.size() != n) throw InvalidArgument("positions length does not match bead count");
  EnergyForces ef = EnergyForces::zeros(n);
  auto& comp = ef.components;
  auto& f = ef.forces;

  for (std::size_t t = 0; t < topo_.terms.size(); ++t) {
    const BondedTerm& term = topo_.terms[t];
    const auto& id = term.beads;
    switch (term.kind) {
      case TermKind::Bond: {
        const BondParams& p = params_.bond_sets[term.paramset];
        const Vec3 d = x[id[1]] - x[id[0]];
        const double r = norm(d);
        if (!(r > 0.0)) throw DegenerateGeometry("zero-length bond in " + term_label(term, t));
        const double dr = r - p.r0;
        comp[0] += 0.5 * p.k * dr * dr;
        const Vec3 fi = d * (p.k * dr / r);
        f[id[0]] += fi;
        f[id[1]] -= fi;
        break;
      }
      case TermKind::Angle: {
        const AngleParams& p = params_.angle_sets[term.paramset];
        const Vec3 a = x[id[0]] - x[id[1]];
        const Vec3 b = x[id[2]] - x[id[1]];
        const double la = norm(a);
        const double lb = norm(b);
        const double s = norm(cross(a, b));
        if (!(la > 0.0) || !(lb > 0.0) || !(s > 1e-12 * la * lb)) {
          throw DegenerateGeometry("collinear or zero-length angle in " + term_label(term, t));
        }
        const double c = dot(a, b);
        const double theta = std::atan2(s, c);
        const double dtheta = theta - p.theta0;
        comp[1] += 0.5 * p.k * dtheta * dtheta;
        const double sin_t = s / (la * lb);
        const double cos_t = c / (la * lb);
        // F = dE/dθ / sinθ · ∂cosθ/∂r
        const double pref = p.k * dtheta / sin_t;
        const Vec3 fi = (b / (la * lb) - a * (cos_t / (la * la))) * pref;
        const Vec3 fk = (a / (la * lb) - b * (cos_t / (lb * lb))) * pref;
        f[id[0]] += fi;
        f[id[2]] += fk;
        f[id[1]] -= fi + fk;
        break;
      }
      case TermKind::Dihedral: {
        const DihedralParams& p = params_.dihedral_sets[term.paramset];
        if (p.k == 0.0) break;
        const Vec3 b1 = x[id[1]] - x[id[0]];
        const Vec3 b2 = x[id[2]] - x[id[1]];
        const Vec3 b3 = x[id[3]] - x[id[2]];
        const Vec3 m = cross(b1, b2);
        const Vec3 nn = cross(b2, b3);
        const double m2 = norm2(m);
        const double n2 = norm2(nn);
        const double lb2 = norm(b2);
        if (!(lb2 > 0.0) || !(m2 > 1e-24 * norm2(b1) * lb2 * lb2) || !(n2 > 1e-24 * norm2(b3) * lb2 * lb2)) {
          throw DegenerateGeometry("collinear or zero-length dihedral in " + term_label(term, t));
        }
        const double phi = std::atan2(lb2 * dot(b1, nn), dot(m, nn));
        const double arg = p.multiplicity * phi - p.phase;
        comp[2] += p.k * (1.0 + std::cos(arg));
        const double dE_dphi = -p.k * p.multiplicity * std::sin(arg);
        const Vec3 dphi_di = m * (-lb2 / m2);
        const Vec3 dphi_dl = nn * (lb2 / n2);
        // projections of the outer bonds onto the central one, measured from j and k
        const double c1 = -dot(b1, b2) / (lb2 * lb2);
        const double c3 = -dot(b3, b2) / (lb2 * lb2);
        const Vec3 dphi_dj = dphi_di * (c1 - 1.0) - dphi_dl * c3;
        const Vec3 dphi_dk = dphi_dl * (c3 - 1.0) - dphi_di * c1;
        f[id[0]] -= dphi_di * dE_dphi;
        f[id[1]] -= dphi_dj * dE_dphi;
        f[id[2]] -= dphi_dk * dE_dphi;
        f[id[3]] -= dphi_dl * dE_dphi;
        break;
      }
    }
  }
  finalize(ef);
  return ef;
}

void ForceField::add_pair(std::size_t i, std::size_t j, const Vec3& ri, const Vec3& rj, EnergyForces& out) const {
  const Vec3 d = ri - rj;
  const double r2 = norm2(d);
  const double rc2 = params_.cutoff * params_.cutoff;
  if (r2 >= rc2) return;
  if (excluded(i, j)) return;
  const auto ti = kind_index(topo_.beads[i].type);
  const auto tj = kind_index(topo_.beads[j].type);
  const LjPair& p = params_.lj[ti][tj];
  if (r2 < 0.0025 * p.sigma * p.sigma) {
    throw OverlapError("beads " + std::to_string(i) + " and " + std::to_string(j) + " overlap (r = " +
                       format_shortest(std::sqrt(r2)) + " Å < 0.05 sigma)");
  }
  const double sr2 = p.sigma * p.sigma / r2;
  const double sr6 = sr2 * sr2 * sr2;
  out.components[3] += 4.0 * p.epsilon * (sr6 * sr6 - sr6) - shift_[ti][tj];
  const Vec3 fij = d * (24.0 * p.epsilon * (2.0 * sr6 * sr6 - sr6) / r2);
  out.forces[i] += fij;
  out.forces[j] -= fij;
}

EnergyForces ForceField::lj_all_pairs(std::span<const Vec3> x) const {
  const std::size_t n = topo_.bead_count();
  if (x.size() != n) throw InvalidArgument("positions length does not match bead count");
  EnergyForces ef = EnergyForces::zeros(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) add_pair(i, j, x[i], x[j], ef);
  }
  finalize(ef);
  return ef;
}

EnergyForces ForceField::lj(std::span<const Vec3> x) const {
  const std::size_t n = topo_.bead_count();
  if (x.size() != n) throw InvalidArgument("positions length does not match bead count");
  EnergyForces ef = EnergyForces::zeros(n);
  if (n < 2) return ef;
  for (const Vec3& r : x) {
    if (!is_finite(r)) throw IntegrationError("non-finite position in LJ evaluation");
  }

  Vec3 lo = x[0];
  Vec3 hi = x[0];
  for (const Vec3& r : x) {
    for (std::size_t a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], r[a]);
      hi[a] = std::max(hi[a], r[a]);
    }
  }
  // Cell edge >= cutoff; coarsen if the grid would be much sparser than the beads.
  double edge = params_.cutoff;
  std::array<std::size_t, 3> dims{};
  for (;;) {
    std::size_t total = 1;
    for (std::size_t a = 0; a < 3; ++a) {
      dims[a] = std::max<std::size_t>(1, static_cast<std::size_t>((hi[a] - lo[a]) / edge));
      total *= dims[a];
    }
    if (total <= std::max<std::size_t>(64, 4 * n)) break;
    edge *= 1.25;
  }
  std::array<double, 3> cell{};
  for (std::size_t a = 0; a < 3; ++a) cell[a] = std::max(edge, (hi[a] - lo[a]) / static_cast<double>(dims[a]));

  auto coord = [&](const Vec3& r, std::size_t a) {
    const auto c = static_cast<std::size_t>((r[a] - lo[a]) / cell[a]);
    return std::min(c, dims[a] - 1);
  };
  const std::size_t ncell = dims[0] * dims[1] * dims[2];
  std::vector<std::size_t> head(ncell, static_cast<std::size_t>(-1));
  std::vector<std::size_t> next(n, static_cast<std::size_t>(-1));
  std::vector<std::size_t> cell_of(n);
  // Insert in reverse so each cell's list is in ascending bead order.
  for (std::size_t i = n; i-- > 0;) {
    const std::size_t c = (coord(x[i], 2) * dims[1] + coord(x[i], 1)) * dims[0] + coord(x[i], 0);
    cell_of[i] = c;
    next[i] = head[c];
    head[c] = i;
  }

  static constexpr std::array<std::array<int, 3>, 13> kHalfShell{{{1, 0, 0},
                                                                   {-1, 1, 0},
                                                                   {0, 1, 0},
                                                                   {1, 1, 0},
                                                                   {-1, -1, 1},
                                                                   {0, -1, 1},
                                                                   {1, -1, 1},
                                                                   {-1, 0, 1},
                                                                   {0, 0, 1},
                                                                   {1, 0, 1},
                                                                   {-1, 1, 1},
                                                                   {0, 1, 1},
                                                                   {1, 1, 1}}};
  constexpr std::size_t kEnd = static_cast<std::size_t>(-1);
  for (std::size_t cz = 0; cz < dims[2]; ++cz) {
    for (std::size_t cy = 0; cy < dims[1]; ++cy) {
      for (std::size_t cx = 0; cx < dims[0]; ++cx) {
        const std::size_t c = (cz * dims[1] + cy) * dims[0] + cx;
        for (std::size_t i = head[c]; i != kEnd; i = next[i]) {
          for (std::size_t j = next[i]; j != kEnd; j = next[j]) add_pair(i, j, x[i], x[j], ef);
        }
        for (const auto& off : kHalfShell) {
          const long nx = static_cast<long>(cx) + off[0];
          const long ny = static_cast<long>(cy) + off[1];
          const long nz = static_cast<long>(cz) + off[2];
          if (nx < 0 || ny < 0 || nz < 0 || nx >= static_cast<long>(dims[0]) || ny >= static_cast<long>(dims[1]) ||
              nz >= static_cast<long>(dims[2])) {
            continue;
          }
          const std::size_t c2 =
              (static_cast<std::size_t>(nz) * dims[1] + static_cast<std::size_t>(ny)) * dims[0] + static_cast<std::size_t>(nx);
          for (std::size_t i = head[c]; i != kEnd; i = next[i]) {
            for (std::size_t j = head[c2]; j != kEnd; j = next[j]) {
              if (i < j) add_pair(i, j, x[i], x[j], ef);
              else add_pair(j, i, x[j], x[i], ef);
            }
          }
        }
      }
    }
  }
  finalize(ef);
  return ef;
}

EnergyForces ForceField::total(std::span<const Vec3> x) const {
  EnergyForces ef = bonded(x);
  const EnergyForces nb = lj(x);
  for (std::size_t i = 0; i < ef.forces.size(); ++i) ef.forces[i] += nb.forces[i];
  ef.components[3] = nb.components[3];
  finalize(ef);
  return ef;
}

EnergyForces compute_bonded(const Topology& topo, std::span<const Vec3> positions, const ForceFieldParams& params) {
  return ForceField(topo, params).bonded(positions);
}

EnergyForces compute_lj(const Topology& topo, std::span<const Vec3> positions, const ForceFieldParams& params) {
  return ForceField(topo, params).lj(positions);
}

EnergyForces total_energy_forces(const Topology& topo, std::span<const Vec3> positions,
                                 const ForceFieldParams& params) {
  return ForceField(topo, params).total(positions);
}

bool has_bond_breakage(std::span<const Vec3> positions, const Topology& topo, const ForceFieldParams& params,
                       const AnomalyThresholds& th) {
  for (const BondedTerm& t : topo.terms) {
    if (t.kind != TermKind::Bond) continue;
    const double r0 = params.bond_sets[t.paramset].r0;
    const double r = norm(positions[t.beads[1]] - positions[t.beads[0]]);
    if (r < th.compress_factor * r0 || r > th.stretch_factor * r0) return true;
  }
  return false;
}

AnomalyReport detect_anomalies(std::span<const AnomalyFrame> frames, const Topology& topo,
                               const ForceFieldParams& params, const AnomalyThresholds& th) {
  params.check_covers(topo);
  AnomalyReport report;
  std::vector<double> window;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const AnomalyFrame& frame = frames[f];
    if (f > 0 && frame.step <= frames[f - 1].step) throw InvalidArgument("frame steps must be strictly increasing");
    if (frame.positions.size() != topo.bead_count()) throw InvalidArgument("frame positions do not match bead count");

    for (const BondedTerm& t : topo.terms) {
      if (t.kind != TermKind::Bond) continue;
      const double r0 = params.bond_sets[t.paramset].r0;
      const double r = norm(frame.positions[t.beads[1]] - frame.positions[t.beads[0]]);
      if (r < th.compress_factor * r0 || r > th.stretch_factor * r0) {
        report.events.push_back({frame.step, AnomalyKind::BondBreakage, {t.beads[0], t.beads[1]}, r / r0});
      }
    }

    // Median over the preceding window (current frame excluded).
    const std::size_t first = f >= th.spike_window ? f - th.spike_window : 0;
    if (f > first) {
      window.clear();
      for (std::size_t g = first; g < f; ++g) window.push_back(std::abs(frames[g].potential_energy));
      std::sort(window.begin(), window.end());
      const std::size_t w = window.size();
      const double median = w % 2 ? window[w / 2] : 0.5 * (window[w / 2 - 1] + window[w / 2]);
      const double pe = std::abs(frame.potential_energy);
      if (pe > th.spike_factor * median) {
        report.events.push_back(
            {frame.step, AnomalyKind::EnergySpike, {}, median > 0.0 ? pe / median : std::numeric_limits<double>::infinity()});
      }
    }
  }
  return report;
}

}  // namespace p5
