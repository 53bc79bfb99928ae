#include "p5/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <memory>
#include <optional>
#include <ostream>

#include "p5/analysis.hpp"
#include "p5/error.hpp"
#include "p5/fileio.hpp"
#include "p5/policy.hpp"
#include "p5/text.hpp"
#include "p5/training.hpp"
#include "p5/trajectory_io.hpp"

namespace p5 {

Setup make_setup(const Config& config) {
  Setup s{config, {}, {}, {}};
  s.topology = config.topology_file.empty() ? build_cellulose_acetate_chain(config.monomers)
                                            : parse_topology(read_file(config.topology_file));
  s.forcefield = default_forcefield(energy_unit_kj_mol(config.timescale));
  if (!config.ff_file.empty()) s.forcefield = parse_forcefield(read_file(config.ff_file), s.forcefield);
  s.forcefield.check_covers(s.topology);
  s.dynamics = make_langevin_params(s.topology, config.dt, config.gamma, config.resolved_kT());
  return s;
}

namespace {

// Thrown for problems with the command line itself (exit code 1).
struct UsageError : Error {
  using Error::Error;
};

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_file, "key = value config file (default: $P5_CONFIG)");
  app->add_option("--set", c.sets, "override a config key, key=value (repeatable)");
  app->footer(config_help());
}

Config resolve_config(const Common& c, std::vector<ConfigOverride> flag_overrides) {
  std::string path = c.config_file;
  if (path.empty()) {
    if (const char* env = std::getenv("P5_CONFIG"); env && *env) path = env;
  }
  std::string text;
  if (!path.empty()) {
    try {
      text = read_file(path);
    } catch (const Error& e) {
      throw UsageError(std::string("cannot read config: ") + e.what());
    }
  }
  std::vector<ConfigOverride> overrides;
  for (const auto& s : c.sets) overrides.push_back(parse_override(s));
  // Dedicated flags are overrides too, after --set.
  overrides.insert(overrides.end(), flag_overrides.begin(), flag_overrides.end());
  return parse_config(text, path, overrides);
}

template <typename T>
void flag_override(std::vector<ConfigOverride>& out, const std::optional<T>& v, std::string key, std::string flag) {
  if (!v) return;
  std::string text;
  if constexpr (std::is_same_v<T, double>) {
    text = format_shortest(*v);
  } else if constexpr (std::is_same_v<T, std::string>) {
    text = *v;
  } else {
    text = std::to_string(*v);
  }
  out.push_back({std::move(key), std::move(text), std::move(flag)});
}

}  // namespace

int run_subcommand(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"p5: coarse-grained polymer dynamics with learned steering", "p5"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  Common common;

  // build
  auto* build = app.add_subcommand("build", "write a cellulose acetate chain topology");
  std::optional<std::size_t> build_monomers;
  std::string build_out;
  std::string build_ff_out;
  build->add_option("--monomers", build_monomers, "number of monomers (default: topology.monomers)");
  build->add_option("--out", build_out, "topology file to write (.p5t)")->required();
  build->add_option("--ff-out", build_ff_out, "also write the resolved force field (.p5ff)");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "run unsteered (md) or policy-steered dynamics");
  std::string sim_mode;
  std::string sim_policy;
  std::optional<std::size_t> sim_steps;
  std::optional<std::uint64_t> sim_seed;
  std::string sim_traj;
  std::optional<std::string> sim_topology;
  simulate->add_option("--mode", sim_mode, "md or steered")->required()->check(CLI::IsMember({"md", "steered"}));
  simulate->add_option("--policy", sim_policy, "checkpoint (.p5c), required for --mode steered");
  simulate->add_option("--steps", sim_steps, "steps to simulate (env.episode_length)");
  simulate->add_option("--seed", sim_seed, "seed (run.seed)");
  simulate->add_option("--traj", sim_traj, "extended-XYZ trajectory to write")->required();
  simulate->add_option("--topology", sim_topology, "topology file (topology.file)");

  // train
  auto* train = app.add_subcommand("train", "train a steering policy with PPO");
  std::optional<std::size_t> train_episodes;
  std::optional<std::uint64_t> train_seed;
  std::string train_out;
  std::string train_curve;
  std::optional<std::string> train_topology;
  train->add_option("--episodes", train_episodes, "episodes to complete (default 100)");
  train->add_option("--seed", train_seed, "seed (run.seed)");
  train->add_option("--out", train_out, "checkpoint to write (.p5c)")->required();
  train->add_option("--curve", train_curve, "learning-curve CSV (default: <out>.curve.csv)");
  train->add_option("--topology", train_topology, "topology file (topology.file)");

  // eval
  auto* eval = app.add_subcommand("eval", "occupancy of the target band in a trajectory");
  std::string eval_traj;
  std::optional<double> eval_lo;
  std::optional<double> eval_hi;
  std::string eval_csv;
  std::string eval_hist;
  std::optional<std::string> eval_topology;
  eval->add_option("--traj", eval_traj, "extended-XYZ trajectory")->required();
  eval->add_option("--lo", eval_lo, "band lower edge (env.target_rg_min)");
  eval->add_option("--hi", eval_hi, "band upper edge (env.target_rg_max)");
  eval->add_option("--csv", eval_csv, "write the metric,value report here");
  eval->add_option("--histogram", eval_hist, "write RG histogram CSV here (analysis.bin_width)");
  eval->add_option("--topology", eval_topology, "topology for bond/energy anomaly checks (topology.file)");

  // compare
  auto* compare = app.add_subcommand("compare", "relative occupancy improvement of steered over baseline");
  std::string cmp_baseline;
  std::string cmp_steered;
  std::optional<double> cmp_lo;
  std::optional<double> cmp_hi;
  std::string cmp_csv;
  compare->add_option("--baseline", cmp_baseline, "unsteered trajectory")->required();
  compare->add_option("--steered", cmp_steered, "steered trajectory")->required();
  compare->add_option("--lo", cmp_lo, "band lower edge (env.target_rg_min)");
  compare->add_option("--hi", cmp_hi, "band upper edge (env.target_rg_max)");
  compare->add_option("--csv", cmp_csv, "write the metric,value report here");

  // perturb
  auto* perturb = app.add_subcommand("perturb", "recovery from perturbed initial states");
  std::string pert_policy;
  std::optional<std::size_t> pert_episodes;
  std::optional<double> pert_sigma;
  std::optional<std::uint64_t> pert_seed;
  std::string pert_csv;
  std::optional<std::string> pert_topology;
  perturb->add_option("--policy", pert_policy, "checkpoint (.p5c); omitted: unsteered only");
  perturb->add_option("--episodes", pert_episodes, "episodes (perturb.episodes)");
  perturb->add_option("--sigma", pert_sigma, "initial-state noise in Å (perturb.sigma)");
  perturb->add_option("--seed", pert_seed, "seed (run.seed)");
  perturb->add_option("--csv", pert_csv, "write per-episode CSV here");
  perturb->add_option("--topology", pert_topology, "topology file (topology.file)");

  for (auto* sub : {build, simulate, train, eval, compare, perturb}) add_common(sub, common);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    std::vector<ConfigOverride> flags;
    if (build->parsed()) {
      flag_override(flags, build_monomers, "topology.monomers", "--monomers");
      const Setup s = make_setup(resolve_config(common, flags));
      write_file_atomic(build_out, write_topology(s.topology));
      if (!build_ff_out.empty()) write_file_atomic(build_ff_out, write_forcefield(s.forcefield));
      out << "wrote " << build_out << ": " << s.topology.n_monomers << " monomers, " << s.topology.bead_count()
          << " beads, " << s.topology.terms.size() << " bonded terms\n";
      return kExitOk;
    }

    if (simulate->parsed()) {
      if (sim_mode == "steered" && sim_policy.empty()) throw UsageError("--mode steered requires --policy");
      if (sim_mode == "md" && !sim_policy.empty()) throw UsageError("--policy only applies to --mode steered");
      flag_override(flags, sim_steps, "env.episode_length", "--steps");
      flag_override(flags, sim_seed, "run.seed", "--seed");
      flag_override(flags, sim_topology, "topology.file", "--topology");
      const Setup s = make_setup(resolve_config(common, flags));
      const Config& cfg = s.config;
      std::optional<PolicyParams> policy;
      if (!sim_policy.empty()) policy = load_checkpoint(sim_policy);
      Environment env(s.topology, cfg.env, s.forcefield, s.dynamics);
      if (policy && (policy->obs_dim() != env.observation_size() || policy->action_dim() != env.action_size())) {
        throw InvalidArgument("policy dimensions (" + std::to_string(policy->obs_dim()) + " -> " +
                              std::to_string(policy->action_dim()) + ") do not match this system (" +
                              std::to_string(env.observation_size()) + " -> " + std::to_string(env.action_size()) +
                              ")");
      }
      const auto t0 = std::chrono::steady_clock::now();
      env.reset(cfg.seed);
      Rng action_rng = Rng(cfg.seed).split(2);
      const Episode ep = run_episode(env, cfg.env.episode_length, policy ? &*policy : nullptr, action_rng,
                                     cfg.eval_deterministic);
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      write_file_atomic(sim_traj, write_xyz(ep.frames, s.topology));
      const OccupancyStats occ = occupancy_fraction(ep.frames, cfg.env.target_rg_min, cfg.env.target_rg_max);
      out << "wrote " << sim_traj << ": " << ep.frames.size() << " frames (" << sim_mode << ", seed " << cfg.seed
          << ")\n";
      out << occupancy_report(occ, cfg.env.target_rg_min, cfg.env.target_rg_max).text("occupancy");
      // Wall-clock numbers are hardware-dependent, so they stay off the result stream.
      if (occ.n_inside > 0) {
        err << "wall-clock per in-band conformation: " << wall / static_cast<double>(occ.n_inside) << " s\n";
      }
      return kExitOk;
    }

    if (train->parsed()) {
      flag_override(flags, train_seed, "run.seed", "--seed");
      flag_override(flags, train_topology, "topology.file", "--topology");
      const Setup s = make_setup(resolve_config(common, flags));
      TrainConfig tc = s.config.train;
      tc.seed = s.config.seed;
      tc.episodes = train_episodes.value_or(100);
      if (tc.episodes == 0) throw UsageError("--episodes must be positive");
      const TrainResult r = train_policy(s.topology, s.config.env, s.forcefield, s.dynamics, tc,
                                         [&](const UpdateLog& u) {
                                           err << "update " << u.update << ": episodes " << u.episodes_done
                                               << ", policy loss " << u.stats.policy_loss << ", value loss "
                                               << u.stats.value_loss << ", approx KL " << u.stats.approx_kl << '\n';
                                         });
      save_checkpoint(r.params, train_out);
      const std::string curve_path = train_curve.empty() ? train_out + ".curve.csv" : train_curve;
      write_file_atomic(curve_path, learning_curve_csv(r.curve));
      Report rep;
      rep.add("episodes", std::to_string(r.curve.size()));
      rep.add("steps", std::to_string(r.total_steps));
      rep.add("updates", std::to_string(r.updates.size()));
      rep.add("aborted_episodes", std::to_string(r.aborted_episodes));
      rep.add("final_mean_cumulative_reward", r.curve.empty() ? "none" : format_sci10(r.curve.back().mean_cumulative_reward));
      out << "wrote " << train_out << " and " << curve_path << '\n' << rep.text("training");
      return kExitOk;
    }

    if (eval->parsed()) {
      flag_override(flags, eval_lo, "env.target_rg_min", "--lo");
      flag_override(flags, eval_hi, "env.target_rg_max", "--hi");
      flag_override(flags, eval_topology, "topology.file", "--topology");
      const Config cfg = resolve_config(common, flags);
      const XyzTrajectory traj = read_xyz(read_file(eval_traj));
      if (traj.frames.empty()) throw InvalidArgument(eval_traj + ": no frames");
      const double lo = cfg.env.target_rg_min;
      const double hi = cfg.env.target_rg_max;
      const OccupancyStats occ = occupancy_fraction(traj.frames, lo, hi);
      Report rep = occupancy_report(occ, lo, hi);
      const std::uint64_t span = traj.frames.back().step - traj.frames.front().step;
      if (traj.frames.size() > 1 && span >= cfg.msd_lag_min) {
        const double d = msd_diffusion_coefficient(traj.frames, cfg.msd_lag_min, cfg.msd_lag_max);
        rep.add("msd_diffusion_A2_per_step", format_sci10(d));
      } else {
        rep.add("msd_diffusion_A2_per_step", "none (trajectory shorter than analysis.msd_lag_min)");
      }
      if (!cfg.topology_file.empty()) {
        const Setup s = make_setup(cfg);
        if (s.topology.bead_count() != traj.types.size()) throw InvalidArgument("topology does not match trajectory");
        std::vector<AnomalyFrame> frames;
        for (const auto& f : traj.frames) frames.push_back({f.step, f.positions, f.potential_energy});
        const AnomalyReport anomalies = detect_anomalies(frames, s.topology, s.forcefield);
        std::size_t bonds = 0;
        for (const auto& e : anomalies.events) bonds += e.kind == AnomalyKind::BondBreakage ? 1 : 0;
        rep.add("bond_anomalies", std::to_string(bonds));
        rep.add("energy_spikes", std::to_string(anomalies.events.size() - bonds));
        constexpr std::size_t kListed = 10;
        for (std::size_t i = 0; i < std::min(kListed, anomalies.events.size()); ++i) {
          const auto& e = anomalies.events[i];
          err << (e.kind == AnomalyKind::BondBreakage ? "bond anomaly" : "energy spike") << " at step " << e.step
              << " (magnitude " << e.magnitude << ")\n";
        }
        if (anomalies.events.size() > kListed) err << "... " << anomalies.events.size() - kListed << " more\n";
      }
      out << rep.text("occupancy");
      if (!eval_csv.empty()) write_file_atomic(eval_csv, rep.csv());
      if (!eval_hist.empty()) {
        std::vector<double> rg;
        for (const auto& f : traj.frames) rg.push_back(f.rg);
        double top = 0.0;
        for (double v : rg) top = std::max(top, v);
        const double hist_hi = std::max(top, cfg.bin_width);
        std::string csv = "bin_lower,count\n";
        for (const auto& [edge, count] : rg_histogram(rg, cfg.bin_width, 0.0, hist_hi)) {
          csv += format_shortest(edge) + ',' + std::to_string(count) + '\n';
        }
        write_file_atomic(eval_hist, csv);
      }
      return kExitOk;
    }

    if (compare->parsed()) {
      flag_override(flags, cmp_lo, "env.target_rg_min", "--lo");
      flag_override(flags, cmp_hi, "env.target_rg_max", "--hi");
      const Config cfg = resolve_config(common, flags);
      const double lo = cfg.env.target_rg_min;
      const double hi = cfg.env.target_rg_max;
      const OccupancyStats base = occupancy_fraction(read_xyz(read_file(cmp_baseline)).frames, lo, hi);
      const OccupancyStats steer = occupancy_fraction(read_xyz(read_file(cmp_steered)).frames, lo, hi);
      Report rep;
      rep.add("metric", "relative occupancy improvement 100*(steered-baseline)/baseline");
      rep.add("baseline_fraction", format_sci10(base.fraction));
      rep.add("steered_fraction", format_sci10(steer.fraction));
      if (!(base.fraction > 0.0)) {
        out << rep.text("comparison");
        err << "improvement: infinite (baseline occupancy is zero; the relative improvement is undefined)\n";
        return kExitRuntime;
      }
      const double pct = improvement_percent(base, steer);
      rep.add("improvement_percent", format_percent(pct));
      out << rep.text("comparison");
      if (!cmp_csv.empty()) write_file_atomic(cmp_csv, rep.csv());
      return kExitOk;
    }

    if (perturb->parsed()) {
      flag_override(flags, pert_episodes, "perturb.episodes", "--episodes");
      flag_override(flags, pert_sigma, "perturb.sigma", "--sigma");
      flag_override(flags, pert_seed, "run.seed", "--seed");
      flag_override(flags, pert_topology, "topology.file", "--topology");
      const Setup s = make_setup(resolve_config(common, flags));
      const Config& cfg = s.config;
      std::optional<PolicyParams> policy;
      if (!pert_policy.empty()) policy = load_checkpoint(pert_policy);
      const PerturbationReport base = perturbation_experiment(s.topology, cfg.env, s.forcefield, s.dynamics, nullptr,
                                                              cfg.perturb_episodes, cfg.perturb_sigma, cfg.seed);
      out << perturbation_summary(base).text("unsteered");
      auto tag_rows = [](const std::string& body, std::string_view tag) {
        std::string rows;
        std::size_t start = body.find('\n') + 1;
        while (start < body.size()) {
          const std::size_t end = body.find('\n', start);
          rows += std::string(tag) + ',' + body.substr(start, end - start + 1);
          start = end + 1;
        }
        return rows;
      };
      std::string csv = "run,episode,seed,first_entry,occupancy,broken\n" + tag_rows(perturbation_episodes_csv(base), "unsteered");
      if (policy) {
        const PerturbationReport steer = perturbation_experiment(s.topology, cfg.env, s.forcefield, s.dynamics,
                                                                 &*policy, cfg.perturb_episodes, cfg.perturb_sigma,
                                                                 cfg.seed, cfg.eval_deterministic);
        out << perturbation_summary(steer).text("steered");
        csv += tag_rows(perturbation_episodes_csv(steer), "steered");
      }
      if (!pert_csv.empty()) write_file_atomic(pert_csv, csv);
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace p5
