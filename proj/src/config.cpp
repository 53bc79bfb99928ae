#include "p5/config.hpp"

#include <algorithm>
#include <functional>

#include "p5/error.hpp"
#include "p5/text.hpp"

namespace p5 {

double Config::resolved_kT() const { return kT ? *kT : thermal_energy_internal(timescale); }

namespace {

using Setter = std::function<void(Config&, std::string_view)>;

struct KeyDef {
  ConfigKey key;
  Setter set;
};

double real_value(std::string_view v) { return parse_real(v, 0, "value"); }

std::size_t count_value(std::string_view v) { return parse_index(v, 0, "value"); }

bool bool_value(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidArgument("expected true or false, got '" + std::string(v) + "'");
}

std::vector<std::size_t> list_value(std::string_view v) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const std::size_t comma = std::min(v.find(',', start), v.size());
    out.push_back(parse_index(trim(v.substr(start, comma - start)), 0, "list element"));
    start = comma + 1;
  }
  return out;
}

#define P5_REAL(field) [](Config& c, std::string_view v) { c.field = real_value(v); }
#define P5_COUNT(field) [](Config& c, std::string_view v) { c.field = count_value(v); }

const std::vector<KeyDef>& key_defs() {
  static const std::vector<KeyDef> defs = {
      {{"env.target_rg_min", "0", "lower edge of the target RG band (Å)"}, P5_REAL(env.target_rg_min)},
      {{"env.target_rg_max", "200", "upper edge of the target RG band (Å)"}, P5_REAL(env.target_rg_max)},
      {{"env.episode_length", "20000", "steps per episode"}, P5_COUNT(env.episode_length)},
      {{"env.f_coef", "0.5", "scale of the learned force (internal force units)"}, P5_REAL(env.f_coef)},
      {{"env.theta_max", "0.0873", "largest rotation per step (rad)"}, P5_REAL(env.theta_max)},
      {{"env.obs_radius", "12", "neighbour search radius of the observation (Å)"}, P5_REAL(env.obs_radius)},
      {{"env.k_neighbors", "4", "neighbours listed per backbone bead"}, P5_COUNT(env.k_neighbors)},
      {{"env.init_noise_sigma", "0.5", "Gaussian noise on the initial conformation (Å)"}, P5_REAL(env.init_noise_sigma)},
      {{"env.k_d", "0.001", "distance penalty gain (per Å²)"}, P5_REAL(env.k_d)},
      {{"env.k_r", "1", "in-band bonus"}, P5_REAL(env.k_r)},
      {{"env.k_s", "0.5", "shaping gain"}, P5_REAL(env.k_s)},
      {{"env.mass_weighted_rg", "false", "use the mass-weighted RG"},
       [](Config& c, std::string_view v) { c.env.mass_weighted_rg = bool_value(v); }},
      {{"dyn.dt", "0.002", "time step (dimensionless units)"}, P5_REAL(dt)},
      {{"dyn.gamma", "0.1", "friction per time unit"}, P5_REAL(gamma)},
      {{"dyn.kT", "auto", "thermal energy in internal units; auto derives it from timescale.*"},
       [](Config& c, std::string_view v) {
         if (v == "auto") {
           c.kT.reset();
         } else {
           c.kT = real_value(v);
         }
       }},
      {{"timescale.length_m", "1e-10", "characteristic length (m)"}, P5_REAL(timescale.length_m)},
      {{"timescale.monomer_molar_mass", "458", "monomer molar mass (g/mol)"}, P5_REAL(timescale.monomer_molar_mass)},
      {{"timescale.beads_per_monomer", "7", "beads per monomer"}, P5_REAL(timescale.beads_per_monomer)},
      {{"timescale.temperature", "298", "temperature (K)"}, P5_REAL(timescale.temperature)},
      {{"timescale.boltzmann", "1.380649e-23", "Boltzmann constant (J/K)"}, P5_REAL(timescale.boltzmann)},
      {{"timescale.avogadro", "6.022e23", "Avogadro constant (1/mol)"}, P5_REAL(timescale.avogadro)},
      {{"ppo.clip_epsilon", "0.2", "surrogate clipping range"}, P5_REAL(train.hyper.clip_epsilon)},
      {{"ppo.gamma", "0.99", "discount"}, P5_REAL(train.hyper.gamma)},
      {{"ppo.gae_lambda", "0.95", "GAE lambda"}, P5_REAL(train.hyper.gae_lambda)},
      {{"ppo.learning_rate", "3e-4", "SGD learning rate"}, P5_REAL(train.hyper.learning_rate)},
      {{"ppo.epochs", "4", "passes over each rollout"}, P5_COUNT(train.hyper.epochs)},
      {{"ppo.minibatch_size", "256", "samples per gradient step"}, P5_COUNT(train.hyper.minibatch_size)},
      {{"ppo.value_coef", "0.5", "value-loss weight"}, P5_REAL(train.hyper.value_coef)},
      {{"ppo.entropy_coef", "0", "entropy bonus weight"}, P5_REAL(train.hyper.entropy_coef)},
      {{"ppo.max_grad_norm", "0.5", "global gradient-norm clip"}, P5_REAL(train.hyper.max_grad_norm)},
      {{"ppo.hidden", "128,128", "hidden layer widths"},
       [](Config& c, std::string_view v) { c.train.hidden = list_value(v); }},
      {{"ppo.log_std_init", "-0.5", "initial log standard deviation"}, P5_REAL(train.log_std_init)},
      {{"ppo.num_envs", "4", "environments per rollout"}, P5_COUNT(train.num_envs)},
      {{"ppo.rollout_steps", "512", "steps per environment per update"}, P5_COUNT(train.rollout_steps)},
      {{"ppo.normalizer_warmup", "200", "unsteered steps used to seed observation statistics"},
       P5_COUNT(train.normalizer_warmup)},
      {{"ff.file", "", "force-field overlay file (empty: built-in defaults)"},
       [](Config& c, std::string_view v) { c.ff_file = std::string(v); }},
      {{"topology.file", "", "topology file (empty: build the default chain)"},
       [](Config& c, std::string_view v) { c.topology_file = std::string(v); }},
      {{"topology.monomers", "75", "chain length when no topology file is given"}, P5_COUNT(monomers)},
      {{"run.seed", "0", "master seed"}, [](Config& c, std::string_view v) { c.seed = count_value(v); }},
      {{"run.workers", "1", "parallel environment workers"}, P5_COUNT(train.workers)},
      {{"perturb.episodes", "10", "episodes in the perturbation experiment"}, P5_COUNT(perturb_episodes)},
      {{"perturb.sigma", "2.5", "initial-state noise of the perturbation experiment (Å)"}, P5_REAL(perturb_sigma)},
      {{"eval.deterministic", "false", "steer with the policy mean instead of sampling"},
       [](Config& c, std::string_view v) { c.eval_deterministic = bool_value(v); }},
      {{"analysis.bin_width", "1", "RG histogram bin width (Å)"}, P5_REAL(bin_width)},
      {{"analysis.msd_lag_min", "100", "first lag of the MSD fit (steps)"}, P5_COUNT(msd_lag_min)},
      {{"analysis.msd_lag_max", "1000", "last lag of the MSD fit (steps)"}, P5_COUNT(msd_lag_max)},
  };
  return defs;
}

#undef P5_REAL
#undef P5_COUNT

const KeyDef* find_key(std::string_view name) {
  for (const auto& d : key_defs()) {
    if (d.key.name == name) return &d;
  }
  return nullptr;
}

void assign(Config& c, std::string_view key, std::string_view value, const std::string& origin) {
  const KeyDef* def = find_key(key);
  if (!def) throw ConfigError(origin + ": unknown key '" + std::string(key) + "'");
  try {
    def->set(c, value);
  } catch (const Error& e) {
    std::string what = e.what();
    if (what.rfind("line 0: ", 0) == 0) what = what.substr(8);
    throw ConfigError(origin + ": " + std::string(key) + ": " + what);
  }
  c.source[std::string(key)] = origin;
}

std::string where(const Config& c, std::string_view key) {
  const auto it = c.source.find(key);
  return std::string(key) + " (" + (it == c.source.end() ? "default" : it->second) + ")";
}

void validate(const Config& c) {
  auto fail = [&](std::string_view key, const std::string& msg) { throw ConfigError(where(c, key) + ": " + msg); };
  if (!(c.env.target_rg_min < c.env.target_rg_max)) {
    throw ConfigError(where(c, "env.target_rg_min") + " must be smaller than " + where(c, "env.target_rg_max"));
  }
  if (c.env.target_rg_min < 0.0) fail("env.target_rg_min", "must be non-negative");
  if (c.env.episode_length < 1) fail("env.episode_length", "must be at least 1");
  if (!(c.env.theta_max > 0.0)) fail("env.theta_max", "must be positive");
  if (!(c.env.f_coef >= 0.0)) fail("env.f_coef", "must be non-negative");
  if (!(c.env.obs_radius > 0.0)) fail("env.obs_radius", "must be positive");
  if (!(c.env.init_noise_sigma >= 0.0)) fail("env.init_noise_sigma", "must be non-negative");
  if (!(c.dt > 0.0)) fail("dyn.dt", "must be positive");
  if (!(c.gamma >= 0.0)) fail("dyn.gamma", "must be non-negative");
  if (c.kT && !(*c.kT >= 0.0)) fail("dyn.kT", "must be non-negative");
  try {
    c.timescale.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("timescale.*: ") + e.what());
  }
  const auto& h = c.train.hyper;
  if (!(h.clip_epsilon > 0.0 && h.clip_epsilon < 1.0)) fail("ppo.clip_epsilon", "must lie in (0,1)");
  if (!(h.gamma >= 0.0 && h.gamma <= 1.0)) fail("ppo.gamma", "must lie in [0,1]");
  if (!(h.gae_lambda >= 0.0 && h.gae_lambda <= 1.0)) fail("ppo.gae_lambda", "must lie in [0,1]");
  if (!(h.learning_rate > 0.0)) fail("ppo.learning_rate", "must be positive");
  if (h.epochs == 0) fail("ppo.epochs", "must be positive");
  if (h.minibatch_size == 0) fail("ppo.minibatch_size", "must be positive");
  if (!(h.value_coef >= 0.0)) fail("ppo.value_coef", "must be non-negative");
  if (!(h.entropy_coef >= 0.0)) fail("ppo.entropy_coef", "must be non-negative");
  if (!(h.max_grad_norm > 0.0)) fail("ppo.max_grad_norm", "must be positive");
  if (c.train.hidden.empty() || std::count(c.train.hidden.begin(), c.train.hidden.end(), 0u) > 0) {
    fail("ppo.hidden", "needs positive widths");
  }
  if (c.train.num_envs == 0) fail("ppo.num_envs", "must be positive");
  if (c.train.rollout_steps == 0) fail("ppo.rollout_steps", "must be positive");
  if (c.train.workers == 0) fail("run.workers", "must be positive");
  if (c.monomers == 0) fail("topology.monomers", "must be positive");
  if (!(c.perturb_sigma >= 0.0)) fail("perturb.sigma", "must be non-negative");
  if (!(c.bin_width > 0.0)) fail("analysis.bin_width", "must be positive");
  if (c.msd_lag_min == 0 || c.msd_lag_min > c.msd_lag_max) {
    throw ConfigError(where(c, "analysis.msd_lag_min") + " must be positive and not exceed " +
                      where(c, "analysis.msd_lag_max"));
  }
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& d : key_defs()) k.push_back(d.key);
    return k;
  }();
  return keys;
}

ConfigOverride parse_override(std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("--set expects key=value, got '" + std::string(assignment) + "'");
  }
  return {std::string(trim(assignment.substr(0, eq))), std::string(trim(assignment.substr(eq + 1))), "--set"};
}

Config parse_config(std::string_view file_text, std::string_view file_name, const std::vector<ConfigOverride>& overrides) {
  Config c;
  for (const auto& d : key_defs()) {
    if (!d.key.default_value.empty()) d.set(c, d.key.default_value);
  }
  c.source.clear();
  for (const auto& d : key_defs()) c.source[std::string(d.key.name)] = "default";

  const auto lines = split_lines(file_text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = trim(strip_comment(lines[i]));
    if (line.empty()) continue;
    const std::string origin = std::string(file_name.empty() ? "config" : file_name) + ":" + std::to_string(i + 1);
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(origin + ": expected 'key = value'");
    assign(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), origin);
  }
  for (const auto& o : overrides) assign(c, o.key, o.value, o.origin);
  validate(c);
  return c;
}

std::string config_help() {
  std::size_t w = 0;
  for (const auto& k : config_keys()) w = std::max(w, k.name.size());
  std::string out = "Config keys (set in a file via --config or P5_CONFIG, or with --set key=value):\n";
  for (const auto& k : config_keys()) {
    const std::string def = k.default_value.empty() ? "\"\"" : std::string(k.default_value);
    out += "  " + std::string(k.name) + std::string(w - k.name.size() + 2, ' ') + "[" + def + "]  " +
           std::string(k.doc) + '\n';
  }
  return out;
}

}  // namespace p5
