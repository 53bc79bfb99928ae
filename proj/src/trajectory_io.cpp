#include "p5/trajectory_io.hpp"

#include "p5/error.hpp"
#include "p5/text.hpp"

namespace p5 {

std::string write_xyz_frame(const TrajectoryFrame& f, const Topology& topo) {
  if (f.positions.size() != topo.bead_count() || f.velocities.size() != topo.bead_count()) {
    throw InvalidArgument("trajectory frame does not match topology");
  }
  std::string out = std::to_string(f.positions.size()) + '\n';
  out += "step=" + std::to_string(f.step) + " rg=" + format_sci10(f.rg) + " pe=" + format_sci10(f.potential_energy) +
         " reward=" + format_sci10(f.reward_total) + '\n';
  for (std::size_t i = 0; i < f.positions.size(); ++i) {
    const Vec3& r = f.positions[i];
    const Vec3& v = f.velocities[i];
    out += std::string(bead_type(topo.beads[i].type).name);
    for (double x : {r.x, r.y, r.z, v.x, v.y, v.z}) out += ' ' + format_sci10(x);
    out += '\n';
  }
  return out;
}

std::string write_xyz(std::span<const TrajectoryFrame> frames, const Topology& topo) {
  std::string out;
  for (const auto& f : frames) out += write_xyz_frame(f, topo);
  return out;
}

XyzTrajectory read_xyz(std::string_view text) {
  const auto lines = split_lines(text);
  XyzTrajectory traj;
  std::size_t i = 0;
  while (i < lines.size()) {
    if (trim(lines[i]).empty()) {
      ++i;
      continue;
    }
    const std::size_t line_no = i + 1;
    const std::size_t n = parse_index(trim(lines[i]), line_no, "bead count");
    if (i + 2 + n > lines.size()) {
      throw ParseError(line_no, "frame declares " + std::to_string(n) + " beads but the file ends early");
    }
    TrajectoryFrame f;
    bool have_step = false;
    for (std::string_view field : split_fields(lines[i + 1])) {
      const std::size_t eq = field.find('=');
      if (eq == std::string_view::npos) throw ParseError(i + 2, "expected key=value, got '" + std::string(field) + "'");
      const std::string_view key = field.substr(0, eq);
      const std::string_view val = field.substr(eq + 1);
      if (key == "step") {
        f.step = parse_index(val, i + 2, "step");
        have_step = true;
      } else if (key == "rg") {
        f.rg = parse_real(val, i + 2, "rg");
      } else if (key == "pe") {
        f.potential_energy = parse_real(val, i + 2, "pe");
      } else if (key == "reward") {
        f.reward_total = parse_real(val, i + 2, "reward");
      } else {
        throw ParseError(i + 2, "unknown frame field '" + std::string(key) + "'");
      }
    }
    if (!have_step) throw ParseError(i + 2, "frame comment lacks step=");
    if (!traj.frames.empty() && f.step <= traj.frames.back().step) {
      throw ParseError(i + 2, "steps must increase strictly");
    }
    const bool first = traj.frames.empty();
    if (!first && n != traj.types.size()) throw ParseError(line_no, "bead count changes between frames");
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t ln = i + 3 + b;
      const auto fields = split_fields(lines[i + 2 + b]);
      if (fields.size() != 7) throw ParseError(ln, "expected TYPE x y z vx vy vz");
      const auto parsed = parse_bead_kind(fields[0]);
      if (!parsed) throw ParseError(ln, "unknown bead type '" + std::string(fields[0]) + "'");
      const BeadKind kind = *parsed;
      if (first) {
        traj.types.push_back(kind);
      } else if (traj.types[b] != kind) {
        throw ParseError(ln, "bead type changes between frames");
      }
      double v[6];
      for (int k = 0; k < 6; ++k) v[k] = parse_real(fields[static_cast<std::size_t>(k) + 1], ln, "coordinate");
      f.positions.push_back({v[0], v[1], v[2]});
      f.velocities.push_back({v[3], v[4], v[5]});
    }
    f.angular_velocities.assign(n, Vec3{});
    traj.frames.push_back(std::move(f));
    i += 2 + n;
  }
  return traj;
}

}  // namespace p5
