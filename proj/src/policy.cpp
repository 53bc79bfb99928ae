#include "p5/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>
#include <numeric>
#include <sstream>

#include "p5/error.hpp"
#include "p5/fileio.hpp"
#include "p5/text.hpp"

namespace p5 {

namespace {

constexpr double kHalfLogTwoPi = 0.91893853320467274178;  // ½·log(2π)

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

bool same_bits(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

bool same_bits(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

// --- Mlp -------------------------------------------------------------------

Mlp Mlp::zeros(std::span<const std::size_t> dims) {
  if (dims.size() < 2) throw InvalidArgument("an MLP needs at least input and output dims");
  Mlp m;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    if (dims[l] == 0 || dims[l + 1] == 0) throw InvalidArgument("MLP layer dims must be positive");
    m.weights.push_back(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dims[l + 1]), static_cast<Eigen::Index>(dims[l])));
    m.biases.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dims[l + 1])));
  }
  return m;
}

Mlp Mlp::random(std::span<const std::size_t> dims, Rng& rng, double output_gain) {
  Mlp m = zeros(dims);
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    const double gain = l + 1 == m.weights.size() ? output_gain : 1.0;
    const double sd = gain / std::sqrt(static_cast<double>(m.weights[l].cols()));
    // Fill row-major so the draw order does not depend on storage order.
    for (Eigen::Index r = 0; r < m.weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < m.weights[l].cols(); ++c) m.weights[l](r, c) = sd * rng.normal();
    }
  }
  return m;
}

std::vector<std::size_t> Mlp::dims() const {
  std::vector<std::size_t> d{input_dim()};
  for (const auto& w : weights) d.push_back(static_cast<std::size_t>(w.rows()));
  return d;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  return n;
}

Eigen::VectorXd Mlp::operator()(const Eigen::VectorXd& x) const {
  Eigen::VectorXd h = x;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    Eigen::VectorXd z = weights[l] * h + biases[l];
    h = l + 1 < weights.size() ? Eigen::VectorXd(z.array().tanh()) : z;
  }
  return h;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, std::vector<Eigen::MatrixXd>* activations) const {
  if (static_cast<std::size_t>(x.rows()) != input_dim()) throw InvalidArgument("MLP input dimension mismatch");
  if (activations) {
    activations->clear();
    activations->push_back(x);
  }
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    Eigen::MatrixXd z = weights[l] * h;
    z.colwise() += biases[l];
    if (l + 1 < weights.size()) {
      h = z.array().tanh();
      if (activations) activations->push_back(h);
    } else {
      h = std::move(z);
    }
  }
  return h;
}

void Mlp::backward(const std::vector<Eigen::MatrixXd>& activations, const Eigen::MatrixXd& d_output, Mlp& grad) const {
  Eigen::MatrixXd delta = d_output;  // dLoss/dz of the current layer
  for (std::size_t l = weights.size(); l-- > 0;) {
    const Eigen::MatrixXd& input = activations[l];
    grad.weights[l].noalias() += delta * input.transpose();
    grad.biases[l] += delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd d_input = weights[l].transpose() * delta;
    delta = d_input.array() * (1.0 - input.array().square());
  }
}

void Mlp::axpy(double alpha, const Mlp& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += alpha * other.weights[l];
    biases[l] += alpha * other.biases[l];
  }
}

double Mlp::squared_norm() const {
  double s = 0.0;
  for (std::size_t l = 0; l < weights.size(); ++l) s += weights[l].squaredNorm() + biases[l].squaredNorm();
  return s;
}

void Mlp::scale(double s) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] *= s;
    biases[l] *= s;
  }
}

bool Mlp::all_finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  }
  return true;
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (a.weights.size() != b.weights.size() || a.biases.size() != b.biases.size()) return false;
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    if (!same_bits(a.weights[l], b.weights[l]) || !same_bits(a.biases[l], b.biases[l])) return false;
  }
  return true;
}

// --- observation normalization ---------------------------------------------

ObsNormalizer ObsNormalizer::identity(std::size_t dim) {
  const auto n = static_cast<Eigen::Index>(dim);
  return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Ones(n), 0.0};
}

void ObsNormalizer::update(std::span<const std::vector<double>> batch) {
  if (batch.empty()) return;
  const Eigen::Index d = mean.size();
  Eigen::VectorXd bmean = Eigen::VectorXd::Zero(d);
  for (const auto& o : batch) {
    if (static_cast<Eigen::Index>(o.size()) != d) throw InvalidArgument("normalizer: observation size mismatch");
    bmean += Eigen::Map<const Eigen::VectorXd>(o.data(), d);
  }
  const double n = static_cast<double>(batch.size());
  bmean /= n;
  Eigen::VectorXd bvar = Eigen::VectorXd::Zero(d);
  for (const auto& o : batch) bvar += (Eigen::Map<const Eigen::VectorXd>(o.data(), d) - bmean).array().square().matrix();
  bvar /= n;

  if (count == 0.0) {
    mean = bmean;
    var = bvar;
    count = n;
    return;
  }
  const double total = count + n;
  const Eigen::VectorXd delta = bmean - mean;
  mean += delta * (n / total);
  var = (var * count + bvar * n + delta.array().square().matrix() * (count * n / total)) / total;
  count = total;
}

Eigen::VectorXd ObsNormalizer::normalize(std::span<const double> obs) const {
  if (static_cast<Eigen::Index>(obs.size()) != mean.size()) {
    throw InvalidArgument("observation has length " + std::to_string(obs.size()) + ", policy expects " +
                          std::to_string(mean.size()));
  }
  const Eigen::Map<const Eigen::VectorXd> x(obs.data(), mean.size());
  Eigen::VectorXd z = (x - mean).array() / (var.array() + 1e-8).sqrt();
  return z.cwiseMax(-10.0).cwiseMin(10.0);
}

bool operator==(const ObsNormalizer& a, const ObsNormalizer& b) {
  return same_bits(a.mean, b.mean) && same_bits(a.var, b.var) && std::bit_cast<std::uint64_t>(a.count) == std::bit_cast<std::uint64_t>(b.count);
}

// --- squashing ---------------------------------------------------------------

std::vector<Squash> squash_layout(std::size_t action_dim) {
  std::vector<Squash> kinds(action_dim, Squash::Tanh);
  for (std::size_t i = 3; i < action_dim; i += 5) kinds[i] = Squash::Sigmoid;
  return kinds;
}

double squash(Squash kind, double u) {
  return kind == Squash::Tanh ? std::tanh(u) : 1.0 / (1.0 + std::exp(-u));
}

double unsquash(Squash kind, double a) {
  return kind == Squash::Tanh ? std::atanh(a) : std::log(a) - std::log1p(-a);
}

double log_squash_derivative(Squash kind, double u) {
  if (kind == Squash::Tanh) return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u));
  return -softplus(u) - softplus(-u);
}

// --- policy ------------------------------------------------------------------

PolicyParams PolicyParams::create(std::size_t obs_dim, std::size_t action_dim, std::span<const std::size_t> hidden,
                                  std::uint64_t seed, double log_std_init) {
  std::vector<std::size_t> actor_dims{obs_dim};
  actor_dims.insert(actor_dims.end(), hidden.begin(), hidden.end());
  std::vector<std::size_t> critic_dims = actor_dims;
  actor_dims.push_back(action_dim);
  critic_dims.push_back(1);
  Rng rng(seed);
  Rng actor_rng = rng.split(0);
  Rng critic_rng = rng.split(1);
  PolicyParams p;
  p.actor = Mlp::random(actor_dims, actor_rng, 0.01);
  p.critic = Mlp::random(critic_dims, critic_rng, 1.0);
  p.log_std = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(action_dim), log_std_init);
  p.normalizer = ObsNormalizer::identity(obs_dim);
  return p;
}

void PolicyParams::validate() const {
  if (actor.weights.empty() || critic.weights.empty()) throw InvalidArgument("policy networks are empty");
  if (actor.input_dim() != critic.input_dim()) throw InvalidArgument("actor and critic input dims differ");
  if (actor.output_dim() != action_dim()) throw InvalidArgument("actor output does not match log_std length");
  if (critic.output_dim() != 1) throw InvalidArgument("critic must have a single output");
  if (static_cast<std::size_t>(normalizer.mean.size()) != obs_dim() ||
      static_cast<std::size_t>(normalizer.var.size()) != obs_dim()) {
    throw InvalidArgument("normalizer statistics do not match observation dim");
  }
  for (const Mlp* m : {&actor, &critic}) {
    for (std::size_t l = 0; l < m->weights.size(); ++l) {
      if (m->biases[l].size() != m->weights[l].rows() || (l > 0 && m->weights[l].cols() != m->weights[l - 1].rows())) {
        throw InvalidArgument("inconsistent layer dimensions");
      }
    }
  }
  if (!actor.all_finite() || !critic.all_finite() || !log_std.allFinite()) {
    throw InvalidArgument("policy parameters must be finite");
  }
}

std::size_t PolicyParams::parameter_count() const {
  return actor.parameter_count() + critic.parameter_count() + static_cast<std::size_t>(log_std.size());
}

bool operator==(const PolicyParams& a, const PolicyParams& b) {
  return a.actor == b.actor && a.critic == b.critic && same_bits(a.log_std, b.log_std) && a.normalizer == b.normalizer;
}

PolicyOutput forward_normalized(const PolicyParams& params, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != params.obs_dim()) throw InvalidArgument("policy input dimension mismatch");
  return {params.actor(x), params.log_std, params.critic(x)(0)};
}

PolicyOutput forward(const PolicyParams& params, std::span<const double> obs) {
  return forward_normalized(params, params.normalizer.normalize(obs));
}

double squashed_log_prob(const Eigen::VectorXd& means, const Eigen::VectorXd& log_std, std::span<const double> raw) {
  const auto kinds = squash_layout(raw.size());
  double logp = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double z = (raw[i] - means(k)) * std::exp(-log_std(k));
    logp += -0.5 * z * z - log_std(k) - kHalfLogTwoPi - log_squash_derivative(kinds[i], raw[i]);
  }
  return logp;
}

double action_log_density(const Eigen::VectorXd& means, const Eigen::VectorXd& log_std, std::span<const double> action) {
  const auto kinds = squash_layout(action.size());
  std::vector<double> raw(action.size());
  for (std::size_t i = 0; i < action.size(); ++i) raw[i] = unsquash(kinds[i], action[i]);
  return squashed_log_prob(means, log_std, raw);
}

double log_prob_of_raw(const PolicyParams& params, std::span<const double> obs, std::span<const double> raw) {
  if (raw.size() != params.action_dim()) throw InvalidArgument("raw action dimension mismatch");
  const PolicyOutput out = forward(params, obs);
  return squashed_log_prob(out.means, out.log_std, raw);
}

ActionSample sample_action(const PolicyParams& params, std::span<const double> obs, Rng& rng) {
  ActionSample s;
  s.normalized_obs = params.normalizer.normalize(obs);
  const PolicyOutput out = forward_normalized(params, s.normalized_obs);
  const auto kinds = squash_layout(params.action_dim());
  s.raw.resize(params.action_dim());
  s.action.resize(params.action_dim());
  for (std::size_t i = 0; i < s.raw.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    s.raw[i] = out.means(k) + std::exp(out.log_std(k)) * rng.normal();
    s.action[i] = squash(kinds[i], s.raw[i]);
  }
  s.log_prob = squashed_log_prob(out.means, out.log_std, s.raw);
  s.value = out.value;
  return s;
}

ActionSample mean_action(const PolicyParams& params, std::span<const double> obs) {
  ActionSample s;
  s.normalized_obs = params.normalizer.normalize(obs);
  const PolicyOutput out = forward_normalized(params, s.normalized_obs);
  const auto kinds = squash_layout(params.action_dim());
  s.raw.assign(out.means.data(), out.means.data() + out.means.size());
  s.action.resize(s.raw.size());
  for (std::size_t i = 0; i < s.raw.size(); ++i) s.action[i] = squash(kinds[i], s.raw[i]);
  s.log_prob = squashed_log_prob(out.means, out.log_std, s.raw);
  s.value = out.value;
  return s;
}

// --- advantages ----------------------------------------------------------------

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double bootstrap_value, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) throw InvalidArgument("compute_gae: sequence lengths differ");
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double not_done = dones[t] ? 0.0 : 1.0;
    const double next_value = t + 1 < n ? values[t + 1] : bootstrap_value;
    const double delta = rewards[t] + gamma * next_value * not_done - values[t];
    next_adv = delta + gamma * lambda * not_done * next_adv;
    out.advantages[t] = next_adv;
    out.returns[t] = next_adv + values[t];
  }
  return out;
}

std::vector<double> normalize_advantages(std::span<const double> adv) {
  if (adv.empty()) return {};
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> out(adv.size());
  for (std::size_t i = 0; i < adv.size(); ++i) out[i] = (adv[i] - mean) / (sd + 1e-8);
  return out;
}

void RolloutBuffer::append(const RolloutBuffer& o) {
  auto cat = [](auto& a, const auto& b) { a.insert(a.end(), b.begin(), b.end()); };
  cat(observations, o.observations);
  cat(raw_actions, o.raw_actions);
  cat(actions, o.actions);
  cat(log_probs, o.log_probs);
  cat(rewards, o.rewards);
  cat(values, o.values);
  cat(dones, o.dones);
  cat(advantages, o.advantages);
  cat(returns, o.returns);
}

void RolloutBuffer::validate() const {
  const std::size_t n = observations.size();
  if (raw_actions.size() != n || log_probs.size() != n || rewards.size() != n || values.size() != n ||
      dones.size() != n || advantages.size() != n || returns.size() != n || (!actions.empty() && actions.size() != n)) {
    throw InvalidArgument("rollout buffer sequences are misaligned");
  }
  for (double lp : log_probs) {
    if (!std::isfinite(lp)) throw InvalidArgument("rollout buffer holds a non-finite log-probability");
  }
}

void PpoHyper::validate() const {
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) throw InvalidArgument("clip_epsilon must be in (0,1)");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidArgument("gamma must be in [0,1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw InvalidArgument("gae_lambda must be in [0,1]");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  if (epochs == 0 || minibatch_size == 0) throw InvalidArgument("epochs and minibatch_size must be positive");
  if (!(value_coef >= 0.0) || !(entropy_coef >= 0.0) || !(max_grad_norm > 0.0)) {
    throw InvalidArgument("loss coefficients must be non-negative and max_grad_norm positive");
  }
}

// --- PPO ---------------------------------------------------------------------

PolicyGradient PolicyGradient::zeros_like(const PolicyParams& p) {
  const auto ad = p.actor.dims();
  const auto cd = p.critic.dims();
  return {Mlp::zeros(ad), Mlp::zeros(cd), Eigen::VectorXd::Zero(p.log_std.size())};
}

double PolicyGradient::norm() const {
  return std::sqrt(actor.squared_norm() + critic.squared_norm() + log_std.squaredNorm());
}

PpoLoss ppo_loss(const PolicyParams& params, const PpoBatch& batch, const PpoHyper& hyper, PolicyGradient* grad) {
  const Eigen::Index n = batch.observations.cols();
  if (n == 0) throw InvalidArgument("ppo_loss: empty batch");
  const double inv_n = 1.0 / static_cast<double>(n);
  const double eps = hyper.clip_epsilon;
  const Eigen::Index a_dim = params.log_std.size();
  const auto kinds = squash_layout(static_cast<std::size_t>(a_dim));

  std::vector<Eigen::MatrixXd> actor_acts;
  std::vector<Eigen::MatrixXd> critic_acts;
  const Eigen::MatrixXd means = params.actor.forward(batch.observations, grad ? &actor_acts : nullptr);
  const Eigen::MatrixXd values = params.critic.forward(batch.observations, grad ? &critic_acts : nullptr);

  const Eigen::VectorXd inv_std = (-params.log_std).array().exp();
  const Eigen::MatrixXd z = (batch.raw_actions - means).array().colwise() * inv_std.array();
  double log_std_sum = params.log_std.sum();

  PpoLoss loss;
  Eigen::VectorXd dlogp = Eigen::VectorXd::Zero(n);  // dL/dlogp per sample
  std::size_t clipped = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    double jac = 0.0;
    for (Eigen::Index i = 0; i < a_dim; ++i) jac += log_squash_derivative(kinds[static_cast<std::size_t>(i)], batch.raw_actions(i, j));
    const double logp = -0.5 * z.col(j).squaredNorm() - log_std_sum - kHalfLogTwoPi * static_cast<double>(a_dim) - jac;
    const double log_ratio = logp - batch.old_log_probs(j);
    const double ratio = std::exp(log_ratio);
    const double adv = batch.advantages(j);
    const double unclipped = ratio * adv;
    const double clipped_ratio = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
    const double clipped_obj = clipped_ratio * adv;
    loss.policy -= std::min(unclipped, clipped_obj) * inv_n;
    if (unclipped <= clipped_obj) dlogp(j) = -unclipped * inv_n;
    if (std::abs(ratio - 1.0) > eps) ++clipped;
    loss.approx_kl += ((ratio - 1.0) - log_ratio) * inv_n;
  }
  loss.clip_fraction = static_cast<double>(clipped) * inv_n;

  const Eigen::VectorXd v_err = values.row(0).transpose() - batch.returns;
  loss.value = v_err.squaredNorm() * inv_n;
  loss.entropy = log_std_sum + (0.5 + kHalfLogTwoPi) * static_cast<double>(a_dim);
  loss.total = loss.policy + hyper.value_coef * loss.value - hyper.entropy_coef * loss.entropy;

  if (grad) {
    // d logp / d mean = z / σ ; d logp / d log_std = z² − 1
    const Eigen::MatrixXd d_means = (z.array().colwise() * inv_std.array()).rowwise() * dlogp.transpose().array();
    params.actor.backward(actor_acts, d_means, grad->actor);
    grad->log_std += (z.array().square() - 1.0).matrix() * dlogp;
    grad->log_std.array() -= hyper.entropy_coef;
    const Eigen::MatrixXd d_values = (2.0 * hyper.value_coef * inv_n) * v_err.transpose();
    params.critic.backward(critic_acts, d_values, grad->critic);
  }
  return loss;
}

PpoUpdateResult ppo_update(const PolicyParams& params, const RolloutBuffer& buffer, const PpoHyper& hyper, Rng& rng) {
  hyper.validate();
  buffer.validate();
  const std::size_t n = buffer.size();
  if (n == 0) throw InvalidArgument("ppo_update: empty rollout buffer");
  const std::vector<double> adv = normalize_advantages(buffer.advantages);

  PpoUpdateResult result{params, {}};
  PolicyParams& p = result.params;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto obs_dim = static_cast<Eigen::Index>(p.obs_dim());
  const auto act_dim = static_cast<Eigen::Index>(p.action_dim());
  const std::size_t mb = std::min(hyper.minibatch_size, n);

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.next_u64() % i]);
    for (std::size_t start = 0; start < n; start += mb) {
      const std::size_t end = std::min(n, start + mb);
      const auto m = static_cast<Eigen::Index>(end - start);
      PpoBatch batch{Eigen::MatrixXd(obs_dim, m), Eigen::MatrixXd(act_dim, m), Eigen::VectorXd(m), Eigen::VectorXd(m),
                     Eigen::VectorXd(m)};
      for (Eigen::Index c = 0; c < m; ++c) {
        const std::size_t k = order[start + static_cast<std::size_t>(c)];
        batch.observations.col(c) = buffer.observations[k];
        batch.raw_actions.col(c) = buffer.raw_actions[k];
        batch.old_log_probs(c) = buffer.log_probs[k];
        batch.advantages(c) = adv[k];
        batch.returns(c) = buffer.returns[k];
      }
      PolicyGradient g = PolicyGradient::zeros_like(p);
      const PpoLoss loss = ppo_loss(p, batch, hyper, &g);
      const double gnorm = g.norm();
      if (!std::isfinite(loss.total) || !std::isfinite(gnorm)) {
        throw TrainingError("non-finite PPO loss; update aborted and parameters left unchanged");
      }
      const double clip = gnorm > hyper.max_grad_norm ? hyper.max_grad_norm / gnorm : 1.0;
      const double step = -hyper.learning_rate * clip;
      p.actor.axpy(step, g.actor);
      p.critic.axpy(step, g.critic);
      p.log_std += step * g.log_std;

      auto& s = result.stats;
      s.policy_loss += loss.policy;
      s.value_loss += loss.value;
      s.entropy += loss.entropy;
      s.clip_fraction += loss.clip_fraction;
      s.approx_kl += loss.approx_kl;
      s.grad_norm += gnorm;
      ++s.minibatches;
    }
  }
  auto& s = result.stats;
  const double k = static_cast<double>(s.minibatches);
  s.policy_loss /= k;
  s.value_loss /= k;
  s.entropy /= k;
  s.clip_fraction /= k;
  s.approx_kl /= k;
  s.grad_norm /= k;
  if (!p.actor.all_finite() || !p.critic.all_finite() || !p.log_std.allFinite()) {
    throw TrainingError("PPO update produced non-finite parameters; update aborted");
  }
  return result;
}

// --- checkpoints ---------------------------------------------------------------

namespace {

constexpr std::string_view kMagic = "P5CKPT";
constexpr int kCheckpointVersion = 1;

void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

std::uint64_t get_u64(std::string_view in, std::size_t offset) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + static_cast<std::size_t>(b)])) << (8 * b);
  return v;
}

void put_dims(std::string& out, std::string_view name, const std::vector<std::size_t>& dims) {
  out += std::string(name) + ' ' + std::to_string(dims.size());
  for (std::size_t d : dims) out += ' ' + std::to_string(d);
  out += '\n';
}

template <typename F>
void for_each_array(PolicyParams& p, F&& f) {
  for (Mlp* m : {&p.actor, &p.critic}) {
    for (std::size_t l = 0; l < m->weights.size(); ++l) {
      // Weights row-major, then biases.
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = m->weights[l];
      f(w.data(), static_cast<std::size_t>(w.size()));
      m->weights[l] = w;
      f(m->biases[l].data(), static_cast<std::size_t>(m->biases[l].size()));
    }
  }
  f(p.log_std.data(), static_cast<std::size_t>(p.log_std.size()));
  f(p.normalizer.mean.data(), static_cast<std::size_t>(p.normalizer.mean.size()));
  f(p.normalizer.var.data(), static_cast<std::size_t>(p.normalizer.var.size()));
  f(&p.normalizer.count, 1);
}

}  // namespace

std::string serialize_checkpoint(const PolicyParams& params) {
  params.validate();
  std::string out = std::string(kMagic) + ' ' + std::to_string(kCheckpointVersion) + '\n';
  put_dims(out, "actor", params.actor.dims());
  put_dims(out, "critic", params.critic.dims());
  put_dims(out, "action_dim", {params.action_dim()});
  put_dims(out, "normalizer", {static_cast<std::size_t>(params.normalizer.mean.size()),
                               static_cast<std::size_t>(params.normalizer.var.size()), 1});
  out += "end\n";
  PolicyParams copy = params;
  std::uint64_t count = 0;
  for_each_array(copy, [&](double* data, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i) put_u64(out, std::bit_cast<std::uint64_t>(data[i]));
    count += len;
  });
  put_u64(out, count);
  return out;
}

PolicyParams deserialize_checkpoint(std::string_view bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string_view {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) throw CheckpointError("truncated checkpoint header");
    std::string_view line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  auto read_dims = [&](std::string_view expected) {
    const auto f = split_fields(next_line());
    if (f.size() < 2 || f[0] != expected) throw CheckpointError("checkpoint header: expected '" + std::string(expected) + "'");
    std::vector<std::size_t> dims;
    try {
      const std::size_t count = parse_index(f[1], 0, "dim count");
      if (f.size() != count + 2) throw CheckpointError("checkpoint header: dim count mismatch for " + std::string(expected));
      for (std::size_t i = 0; i < count; ++i) dims.push_back(parse_index(f[i + 2], 0, "dim"));
    } catch (const ParseError& e) {
      throw CheckpointError(std::string("checkpoint header: ") + e.what());
    }
    return dims;
  };

  const auto magic = split_fields(next_line());
  if (magic.size() != 2 || magic[0] != kMagic) throw CheckpointError("not a p5 checkpoint (bad magic)");
  if (magic[1] != std::to_string(kCheckpointVersion)) {
    throw CheckpointError("checkpoint version mismatch: file has " + std::string(magic[1]) + ", expected " +
                          std::to_string(kCheckpointVersion));
  }
  const auto actor_dims = read_dims("actor");
  const auto critic_dims = read_dims("critic");
  const auto action = read_dims("action_dim");
  const auto norm = read_dims("normalizer");
  if (next_line() != "end") throw CheckpointError("checkpoint header: missing 'end'");
  if (actor_dims.size() < 2 || critic_dims.size() < 2 || action.size() != 1 || norm.size() != 3 ||
      actor_dims.back() != action[0] || critic_dims.back() != 1 || actor_dims.front() != critic_dims.front() ||
      norm[0] != actor_dims.front() || norm[1] != actor_dims.front() || norm[2] != 1) {
    throw CheckpointError("checkpoint header dimensions are inconsistent");
  }

  PolicyParams p;
  try {
    p.actor = Mlp::zeros(actor_dims);
    p.critic = Mlp::zeros(critic_dims);
  } catch (const InvalidArgument& e) {
    throw CheckpointError(std::string("checkpoint header: ") + e.what());
  }
  p.log_std = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(action[0]));
  p.normalizer = ObsNormalizer::identity(norm[0]);

  const std::uint64_t expected = p.parameter_count() + 2 * norm[0] + 1;
  const std::size_t payload = bytes.size() - pos;
  if (payload < 8 * (expected + 1)) throw CheckpointError("checkpoint payload truncated");
  if (payload > 8 * (expected + 1)) throw CheckpointError("checkpoint payload larger than its header declares");
  if (get_u64(bytes, pos + 8 * expected) != expected) {
    throw CheckpointError("checkpoint length checksum does not match the header");
  }
  std::size_t cursor = pos;
  for_each_array(p, [&](double* data, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i, cursor += 8) data[i] = std::bit_cast<double>(get_u64(bytes, cursor));
  });
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    throw CheckpointError(std::string("checkpoint contents invalid: ") + e.what());
  }
  return p;
}

void save_checkpoint(const PolicyParams& params, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(params));
}

PolicyParams load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file(path)); }

}  // namespace p5
