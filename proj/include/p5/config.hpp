#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "p5/dynamics.hpp"
#include "p5/environment.hpp"
#include "p5/training.hpp"

namespace p5 {

struct Config {
  EnvConfig env;
  double dt = 0.002;
  double gamma = 0.1;
  std::optional<double> kT;  // internal energy units; default derived from the timescale block
  TimescaleParams timescale;
  TrainConfig train;
  std::string ff_file;        // optional force-field overlay (.p5f)
  std::string topology_file;  // optional topology (.p5t); empty builds the default chain
  std::size_t monomers = 75;
  std::uint64_t seed = 0;
  std::size_t perturb_episodes = 10;
  double perturb_sigma = 2.5;
  bool eval_deterministic = false;
  double bin_width = 1.0;
  std::uint64_t msd_lag_min = 100;
  std::uint64_t msd_lag_max = 1000;

  // Where each key got its value: "default", "<file>:<line>" or "--set".
  std::map<std::string, std::string, std::less<>> source;

  double resolved_kT() const;
};

struct ConfigKey {
  std::string_view name;
  std::string_view default_value;
  std::string_view doc;
};

// Every accepted key with its documented default.
const std::vector<ConfigKey>& config_keys();

// One `key=value` override with a human-readable origin.
struct ConfigOverride {
  std::string key;
  std::string value;
  std::string origin = "--set";
};

// Resolves defaults, then `file_text` (`key = value` lines, # comments), then
// overrides, and validates the result. Errors are ConfigError naming the key(s)
// and where they were set.
Config parse_config(std::string_view file_text, std::string_view file_name,
                    const std::vector<ConfigOverride>& overrides = {});

// "key=value" -> override; throws ConfigError on a missing '='.
ConfigOverride parse_override(std::string_view assignment);

// "  key  default  doc" lines for --help.
std::string config_help();

}  // namespace p5
