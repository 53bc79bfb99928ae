#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "p5/config.hpp"
#include "p5/forcefield.hpp"

namespace p5 {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// args excludes the program name. Results go to `out`, diagnostics to `err`.
int run_subcommand(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Resolved simulation inputs shared by the subcommands.
struct Setup {
  Config config;
  Topology topology;
  ForceFieldParams forcefield;
  LangevinParams dynamics;
};

// Topology from topology.file (or the built-in chain with topology.monomers),
// force field defaults overlaid with ff.file, Langevin parameters from dyn.*.
Setup make_setup(const Config& config);

}  // namespace p5
