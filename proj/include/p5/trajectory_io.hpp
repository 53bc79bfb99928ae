#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "p5/analysis.hpp"

namespace p5 {

// Extended-XYZ: bead count, then `step=<n> rg=<v> pe=<v> reward=<v>`, then
// `TYPE x y z vx vy vz` per bead. Numbers use %.10e.
std::string write_xyz_frame(const TrajectoryFrame& frame, const Topology& topo);
std::string write_xyz(std::span<const TrajectoryFrame> frames, const Topology& topo);

struct XyzTrajectory {
  std::vector<BeadKind> types;
  std::vector<TrajectoryFrame> frames;
};

// Throws ParseError with the offending line number.
XyzTrajectory read_xyz(std::string_view text);

}  // namespace p5
