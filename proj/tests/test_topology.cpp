#include <doctest.h>

#include <numeric>

#include "p5/error.hpp"
#include "p5/topology.hpp"

using namespace p5;

TEST_CASE("bead types carry the Martini diameters") {
  CHECK(bead_type(BeadKind::Na).vdw_diameter == 5.2);
  CHECK(bead_type(BeadKind::P3).vdw_diameter == 5.2);
  CHECK(bead_type(BeadKind::SP1).vdw_diameter == 4.7);
  CHECK(parse_bead_kind("P3") == BeadKind::P3);
  CHECK_FALSE(parse_bead_kind("C1").has_value());
}

TEST_CASE("one-bead file") {
  const Topology t = parse_topology("[beads]\n0 Na 72 0 1\n");
  CHECK(t.bead_count() == 1);
  CHECK(t.terms.empty());
  CHECK(t.n_monomers == 1);
  CHECK(t.backbone_order == std::vector<std::size_t>{0});
  CHECK(parse_topology(write_topology(t)) == t);
}

TEST_CASE("75-monomer chain") {
  const Topology t = build_cellulose_acetate_chain(75);
  CHECK(t.bead_count() == 525);
  CHECK(t.backbone_order.size() == 75);
  for (std::size_t m = 0; m < 75; ++m) {
    double mass = 0.0;
    for (std::size_t id : t.monomer_beads(m)) mass += t.beads[id].mass;
    CHECK(mass == doctest::Approx(458.0).epsilon(1e-12));
    CHECK(t.beads[t.backbone_order[m]].is_backbone);
    CHECK(t.beads[t.backbone_order[m]].monomer == m);
  }
  CHECK(t.total_mass() == doctest::Approx(75 * 458.0).epsilon(1e-12));

  // Independent count: bonds joining different monomers.
  std::size_t inter = 0;
  for (const auto& term : t.terms_of(TermKind::Bond)) {
    inter += t.beads[term.beads[0]].monomer != t.beads[term.beads[1]].monomer ? 1 : 0;
  }
  CHECK(inter == 74);
  CHECK(t.terms_of(TermKind::Angle).size() == 73);
  CHECK(t.terms_of(TermKind::Dihedral).size() == 72);

  const std::string text = write_topology(t);
  CHECK(text == write_topology(t));
  CHECK(parse_topology(text) == t);
}

TEST_CASE("single monomer") {
  const Topology t = build_cellulose_acetate_chain(1);
  CHECK(t.bead_count() == 7);
  CHECK(t.total_mass() == doctest::Approx(458.0).epsilon(1e-12));
  CHECK(t.terms_of(TermKind::Angle).empty());
  std::size_t ring = 0;
  for (const auto& b : t.beads) ring += b.type == BeadKind::SP1 ? 1 : 0;
  CHECK(ring == 3);
  CHECK_THROWS_AS(build_cellulose_acetate_chain(0), InvalidArgument);
}

TEST_CASE("parse errors name the line") {
  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse_topology(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  const std::string beads = "[beads]\n0 SP1 65 0 1\n1 Na 65 0 0\n";
  // dangling reference
  std::string big = write_topology(build_cellulose_acetate_chain(75));
  const std::size_t lines = static_cast<std::size_t>(std::count(big.begin(), big.end(), '\n'));
  big += "[bonds]\n0 999 0\n";
  CHECK(line_of(big) == lines + 2);
  try {
    parse_topology(big);
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("999") != std::string::npos);
  }
  CHECK(line_of(beads + "1 P3 65 0 0\n") == 4);                // duplicate id
  CHECK(line_of(beads + "[bonds]\n0 1\n") == 5);               // arity
  CHECK(line_of(beads + "[angles]\n0 1 0\n") == 5);            // too few fields for an angle
  CHECK(line_of("[beads]\n0 XX 65 0 1\n") == 2);               // unknown type
  CHECK(line_of(beads + "[bonds]\n0 0 0\n") == 5);             // repeated bead
  CHECK(line_of("[beads]\n0 Na 0 0 1\n") == 2);                // mass
  CHECK_THROWS_AS(parse_topology("[beads]\n0 Na 65 0 0\n"), ParseError);  // no backbone
  CHECK_THROWS_AS(parse_topology(beads), ParseError);                      // disconnected
  CHECK_THROWS_AS(parse_topology("[beads]\n0 Na 65 0 1\n1 Na 65 0 1\n[bonds]\n0 1 0\n"), ParseError);  // two backbones
}

TEST_CASE("comments, blank lines and repeated sections") {
  const Topology t = parse_topology(
      "# header\n[beads]\n0 SP1 65 0 1  # backbone\n\n[bonds]\n[beads]\n1 Na 70.5 0 0\n[bonds]\n0 1 2\n");
  CHECK(t.bead_count() == 2);
  CHECK(t.beads[1].mass == 70.5);
  CHECK(t.terms.size() == 1);
  CHECK(t.terms[0].paramset == 2);
  CHECK(parse_topology(write_topology(t)) == t);
}
