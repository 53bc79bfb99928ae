#include "p5/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "p5/error.hpp"
#include "p5/text.hpp"
#include "p5/training.hpp"

namespace p5 {

SystemState TrajectoryFrame::state() const {
  SystemState s{positions, velocities, angular_velocities, step};
  if (s.angular_velocities.empty()) s.angular_velocities.assign(positions.size(), Vec3{});
  return s;
}

TrajectoryFrame make_frame(const Environment& env, double reward_total) {
  const SystemState& s = env.state();
  return {s.step, s.positions, s.velocities, s.angular_velocities, env.rg(), env.forces().potential_energy,
          reward_total};
}

Episode run_episode(Environment& env, std::size_t steps, const PolicyParams* policy, Rng& action_rng,
                    bool deterministic) {
  Episode ep;
  ep.frames.push_back(make_frame(env, 0.0));
  const std::vector<double> zero(env.action_size(), 0.0);
  for (std::size_t t = 0; t < steps && !env.done(); ++t) {
    std::vector<double> action = zero;
    if (policy) {
      action = deterministic ? mean_action(*policy, env.observation()).action
                             : sample_action(*policy, env.observation(), action_rng).action;
    }
    const StepResult r = env.step(action);
    ep.frames.push_back(make_frame(env, policy ? r.reward.total : 0.0));
    ep.actions.push_back(std::move(action));
  }
  return ep;
}

OccupancyStats occupancy_fraction(std::span<const double> rg_values, double lo, double hi) {
  if (rg_values.empty()) throw InvalidArgument("occupancy_fraction: no frames");
  if (!(lo <= hi)) throw InvalidArgument("occupancy_fraction: need lo <= hi");
  OccupancyStats s;
  s.n_frames = rg_values.size();
  for (double rg : rg_values) s.n_inside += (rg >= lo && rg <= hi) ? 1 : 0;
  s.fraction = static_cast<double>(s.n_inside) / static_cast<double>(s.n_frames);
  return s;
}

OccupancyStats occupancy_fraction(std::span<const TrajectoryFrame> frames, double lo, double hi) {
  std::vector<double> rg(frames.size());
  std::transform(frames.begin(), frames.end(), rg.begin(), [](const TrajectoryFrame& f) { return f.rg; });
  return occupancy_fraction(rg, lo, hi);
}

double improvement_percent(const OccupancyStats& baseline, const OccupancyStats& steered) {
  if (!(baseline.fraction > 0.0)) {
    throw InvalidArgument("undefined baseline: baseline occupancy is zero, improvement is not a finite number");
  }
  return 100.0 * (steered.fraction - baseline.fraction) / baseline.fraction;
}

std::string format_percent(double percent) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.2f%%", percent);
  return buf;
}

std::vector<std::pair<double, std::size_t>> rg_histogram(std::span<const double> rg_values, double bin_width, double lo,
                                                         double hi) {
  if (!(bin_width > 0.0) || !std::isfinite(bin_width)) throw InvalidArgument("rg_histogram: bin_width must be positive");
  if (!(hi > lo)) throw InvalidArgument("rg_histogram: hi must exceed lo");
  const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / bin_width));
  std::vector<std::pair<double, std::size_t>> bins(std::max<std::size_t>(n, 1));
  for (std::size_t i = 0; i < bins.size(); ++i) bins[i].first = lo + static_cast<double>(i) * bin_width;
  for (double rg : rg_values) {
    if (!(rg >= lo && rg <= hi)) continue;
    auto idx = std::min(static_cast<std::size_t>((rg - lo) / bin_width), bins.size() - 1);
    // Settle against the stored edges so rounding in the division cannot misplace edge values.
    while (idx > 0 && rg < bins[idx].first) --idx;
    while (idx + 1 < bins.size() && rg >= bins[idx + 1].first) ++idx;
    ++bins[idx].second;
  }
  return bins;
}

double trajectory_log_prob(std::span<const TrajectoryFrame> frames, std::span<const std::vector<double>> actions,
                           const TrajectoryModel& model, const InitialDensity* initial) {
  if (!model.topology || !model.forcefield || !model.env || !model.dynamics) {
    throw InvalidArgument("trajectory_log_prob: incomplete model");
  }
  if (frames.empty()) throw InvalidArgument("trajectory_log_prob: no frames");
  if (!actions.empty() && actions.size() + 1 != frames.size()) {
    throw InvalidArgument("trajectory_log_prob: need one action per transition");
  }
  if (model.policy && actions.empty() && frames.size() > 1) {
    throw InvalidArgument("trajectory_log_prob: a policy term needs the recorded actions");
  }
  const LangevinParams& dyn = *model.dynamics;
  if (!(dyn.kT > 0.0) || !(dyn.gamma > 0.0)) {
    throw DegenerateTransition("trajectory density needs stochastic dynamics (kT > 0, gamma > 0)");
  }
  const ForceField ff(*model.topology, *model.forcefield);
  double logp = initial ? initial->log_density(frames.front().positions) : 0.0;
  for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
    const SystemState prev = frames[t].state();
    std::vector<Vec3> force = ff.total(prev.positions).forces;
    if (!actions.empty()) {
      const std::vector<Vec3> kicks = learned_forces(actions[t], *model.topology, *model.env);
      for (std::size_t i = 0; i < force.size(); ++i) force[i] += kicks[i];
      if (model.policy) {
        const PolicyOutput out = forward(*model.policy, observe(prev, *model.topology, *model.env));
        logp += action_log_density(out.means, out.log_std, actions[t]);
      }
    }
    logp += transition_log_density(prev, frames[t + 1].state(), force, dyn);
  }
  return logp;
}

double msd_diffusion_coefficient(std::span<const TrajectoryFrame> frames, std::uint64_t lag_min,
                                 std::uint64_t lag_max) {
  if (frames.size() < 2) throw InvalidArgument("msd: need at least two frames");
  if (lag_min == 0 || lag_max < lag_min) throw InvalidArgument("msd: degenerate fit range");
  const std::uint64_t stride = frames[1].step - frames[0].step;
  if (frames[1].step <= frames[0].step) throw InvalidArgument("msd: steps must increase");
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].step - frames[i - 1].step != stride || frames[i].step <= frames[i - 1].step) {
      throw InvalidArgument("msd: frames must be evenly spaced");
    }
  }
  const std::size_t beads = frames.front().positions.size();
  std::vector<double> lags;
  std::vector<double> msd;
  for (std::size_t k = 1; k < frames.size(); ++k) {
    const std::uint64_t lag = k * stride;
    if (lag < lag_min) continue;
    if (lag > lag_max) break;
    double sum = 0.0;
    for (std::size_t i = 0; i + k < frames.size(); ++i) {
      for (std::size_t b = 0; b < beads; ++b) sum += norm2(frames[i + k].positions[b] - frames[i].positions[b]);
    }
    lags.push_back(static_cast<double>(lag));
    msd.push_back(sum / static_cast<double>((frames.size() - k) * beads));
  }
  if (lags.empty()) throw InvalidArgument("msd: no lag falls inside the fit range");
  if (lags.size() == 1) return msd[0] / lags[0] / 6.0;
  const double n = static_cast<double>(lags.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lags.size(); ++i) {
    mx += lags[i];
    my += msd[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lags.size(); ++i) {
    sxy += (lags[i] - mx) * (msd[i] - my);
    sxx += (lags[i] - mx) * (lags[i] - mx);
  }
  return sxy / sxx / 6.0;
}

std::uint64_t evaluation_seed(std::uint64_t seed, std::size_t episode) {
  return episode_seed(seed, 0xe7a1, episode);
}

std::optional<double> median_with_none(std::span<const std::optional<std::size_t>> values) {
  if (values.empty()) return std::nullopt;
  std::vector<double> v;
  for (const auto& x : values) v.push_back(x ? static_cast<double>(*x) : INFINITY);
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double m = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  if (!std::isfinite(m)) return std::nullopt;
  return m;
}

PerturbationReport perturbation_experiment(const Topology& topo, const EnvConfig& cfg, const ForceFieldParams& ff,
                                           const LangevinParams& dyn, const PolicyParams* policy,
                                           std::size_t n_episodes, double perturb_sigma, std::uint64_t seed,
                                           bool deterministic) {
  if (!(perturb_sigma >= 0.0)) throw InvalidArgument("perturb_sigma must be non-negative");
  PerturbationReport report;
  report.perturb_sigma = perturb_sigma;
  Environment env(topo, cfg, ff, dyn);
  std::vector<std::optional<std::size_t>> entries;
  for (std::size_t e = 0; e < n_episodes; ++e) {
    PerturbationRecord rec;
    rec.episode = e;
    rec.seed = evaluation_seed(seed, e);
    env.reset(rec.seed, perturb_sigma);
    Rng action_rng = Rng(rec.seed).split(2);
    const Episode ep = run_episode(env, cfg.episode_length, policy, action_rng, deterministic);
    for (const auto& f : ep.frames) {
      rec.rg_trace.push_back(f.rg);
      if (!rec.first_entry && f.rg >= cfg.target_rg_min && f.rg <= cfg.target_rg_max) rec.first_entry = f.step;
    }
    rec.broken = has_bond_breakage(ep.frames.back().positions, topo, ff);
    report.broken_episodes += rec.broken ? 1 : 0;
    rec.occupancy = occupancy_fraction(rec.rg_trace, cfg.target_rg_min, cfg.target_rg_max).fraction;
    report.mean_occupancy += rec.occupancy / static_cast<double>(n_episodes);
    entries.push_back(rec.first_entry);
    report.records.push_back(std::move(rec));
  }
  report.median_first_entry = median_with_none(entries);
  return report;
}

std::string Report::text(std::string_view title) const {
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.first.size());
  std::string out = std::string(title) + '\n';
  for (const auto& r : rows) out += "  " + r.first + std::string(width - r.first.size() + 2, ' ') + r.second + '\n';
  return out;
}

std::string Report::csv() const {
  std::string out = "metric,value\n";
  for (const auto& r : rows) out += r.first + ',' + r.second + '\n';
  return out;
}

Report occupancy_report(const OccupancyStats& s, double lo, double hi) {
  Report r;
  r.add("target_rg_min", format_shortest(lo));
  r.add("target_rg_max", format_shortest(hi));
  r.add("n_frames", std::to_string(s.n_frames));
  r.add("n_inside", std::to_string(s.n_inside));
  r.add("fraction", format_sci10(s.fraction));
  return r;
}

Report perturbation_summary(const PerturbationReport& rep) {
  Report r;
  r.add("episodes", std::to_string(rep.records.size()));
  r.add("perturb_sigma", format_shortest(rep.perturb_sigma));
  std::size_t entered = 0;
  for (const auto& rec : rep.records) entered += rec.first_entry ? 1 : 0;
  r.add("episodes_entering_band", std::to_string(entered));
  r.add("median_first_entry", rep.median_first_entry ? format_shortest(*rep.median_first_entry) : "none");
  r.add("mean_occupancy", format_sci10(rep.mean_occupancy));
  r.add("episodes_with_broken_bonds", std::to_string(rep.broken_episodes));
  return r;
}

std::string perturbation_episodes_csv(const PerturbationReport& rep) {
  std::string out = "episode,seed,first_entry,occupancy,broken\n";
  for (const auto& rec : rep.records) {
    out += std::to_string(rec.episode) + ',' + std::to_string(rec.seed) + ',' +
           (rec.first_entry ? std::to_string(*rec.first_entry) : std::string("none")) + ',' +
           format_sci10(rec.occupancy) + ',' +
           (rec.broken ? "1" : "0") + '\n';
  }
  return out;
}

}  // namespace p5
