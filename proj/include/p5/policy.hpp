#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "p5/rng.hpp"

namespace p5 {

// Fully connected network with tanh hidden layers and a linear output layer.
struct Mlp {
  std::vector<Eigen::MatrixXd> weights;  // layer l maps dims[l] -> dims[l+1]; shape (out, in)
  std::vector<Eigen::VectorXd> biases;

  static Mlp zeros(std::span<const std::size_t> dims);
  // Gaussian weights with std gain/sqrt(fan_in); the output layer uses output_gain.
  static Mlp random(std::span<const std::size_t> dims, Rng& rng, double output_gain);

  std::vector<std::size_t> dims() const;
  std::size_t input_dim() const { return static_cast<std::size_t>(weights.front().cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(weights.back().rows()); }
  std::size_t parameter_count() const;

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const;
  // Columns are samples. `activations` receives the input and every hidden layer output.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, std::vector<Eigen::MatrixXd>* activations = nullptr) const;
  // Accumulates parameter gradients into `grad` given dLoss/dOutput.
  void backward(const std::vector<Eigen::MatrixXd>& activations, const Eigen::MatrixXd& d_output, Mlp& grad) const;

  void axpy(double alpha, const Mlp& other);  // this += alpha * other
  double squared_norm() const;
  void scale(double s);
  bool all_finite() const;

  friend bool operator==(const Mlp&, const Mlp&);
};

// Running mean/variance of raw observations; normalized inputs are clamped to ±10.
struct ObsNormalizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
  double count = 0.0;

  static ObsNormalizer identity(std::size_t dim);
  void update(std::span<const std::vector<double>> batch);
  Eigen::VectorXd normalize(std::span<const double> obs) const;

  friend bool operator==(const ObsNormalizer&, const ObsNormalizer&);
};

// How each raw Gaussian action dimension is mapped onto its bounded range.
enum class Squash { Tanh, Sigmoid };

// Action layout of the polymer environment: every fifth slot (offset 3) is a
// magnitude in [0,1], all others are directions in [-1,1].
std::vector<Squash> squash_layout(std::size_t action_dim);
double squash(Squash kind, double u);
double unsquash(Squash kind, double a);
// log |d squash / du|
double log_squash_derivative(Squash kind, double u);

struct PolicyParams {
  Mlp actor;   // observation -> action means
  Mlp critic;  // observation -> value
  Eigen::VectorXd log_std;
  ObsNormalizer normalizer;

  static PolicyParams create(std::size_t obs_dim, std::size_t action_dim, std::span<const std::size_t> hidden,
                             std::uint64_t seed, double log_std_init = -0.5);

  std::size_t obs_dim() const { return actor.input_dim(); }
  std::size_t action_dim() const { return static_cast<std::size_t>(log_std.size()); }
  void validate() const;
  std::size_t parameter_count() const;

  friend bool operator==(const PolicyParams&, const PolicyParams&);
};

struct PolicyOutput {
  Eigen::VectorXd means;
  Eigen::VectorXd log_std;
  double value = 0.0;
};

// Normalizes the observation with the stored statistics, then evaluates both heads.
PolicyOutput forward(const PolicyParams& params, std::span<const double> obs);
PolicyOutput forward_normalized(const PolicyParams& params, const Eigen::VectorXd& normalized_obs);

struct ActionSample {
  std::vector<double> action;  // squashed, within bounds
  std::vector<double> raw;     // pre-squash Gaussian draw
  double log_prob = 0.0;       // log density of `action`, including the squash correction
  double value = 0.0;
  Eigen::VectorXd normalized_obs;
};

ActionSample sample_action(const PolicyParams& params, std::span<const double> obs, Rng& rng);
// Squashed mean; log_prob is evaluated at the mean.
ActionSample mean_action(const PolicyParams& params, std::span<const double> obs);

// Log density of the squashed action whose pre-squash value is `raw`.
double squashed_log_prob(const Eigen::VectorXd& means, const Eigen::VectorXd& log_std, std::span<const double> raw);
// Log density evaluated directly at a bounded action (inverts the squash).
double action_log_density(const Eigen::VectorXd& means, const Eigen::VectorXd& log_std, std::span<const double> action);
double log_prob_of_raw(const PolicyParams& params, std::span<const double> obs, std::span<const double> raw);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Generalized advantage estimation; `bootstrap_value` is V(s_T) after the final step.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double bootstrap_value, double gamma, double lambda);

struct RolloutBuffer {
  std::vector<Eigen::VectorXd> observations;  // normalized, as seen by the policy
  std::vector<Eigen::VectorXd> raw_actions;
  std::vector<std::vector<double>> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> dones;
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return observations.size(); }
  void append(const RolloutBuffer& other);
  void validate() const;
};

struct PpoHyper {
  double clip_epsilon = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double learning_rate = 3e-4;
  std::size_t epochs = 4;
  std::size_t minibatch_size = 256;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  double max_grad_norm = 0.5;

  void validate() const;
};

struct PolicyGradient {
  Mlp actor;
  Mlp critic;
  Eigen::VectorXd log_std;

  static PolicyGradient zeros_like(const PolicyParams& p);
  double norm() const;
};

struct PpoLoss {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double total = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

// Samples as columns. Advantages are used as given (no normalization here).
struct PpoBatch {
  Eigen::MatrixXd observations;
  Eigen::MatrixXd raw_actions;
  Eigen::VectorXd old_log_probs;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

// Clipped surrogate + value regression − entropy bonus, averaged over the batch.
// Writes exact gradients into `grad` when non-null.
PpoLoss ppo_loss(const PolicyParams& params, const PpoBatch& batch, const PpoHyper& hyper, PolicyGradient* grad);

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double grad_norm = 0.0;
  std::size_t minibatches = 0;
};

struct PpoUpdateResult {
  PolicyParams params;
  PpoStats stats;
};

// Several epochs of minibatch SGD with global gradient-norm clipping. Throws
// TrainingError (leaving the input untouched) if the loss becomes non-finite.
PpoUpdateResult ppo_update(const PolicyParams& params, const RolloutBuffer& buffer, const PpoHyper& hyper, Rng& rng);

// Advantages standardized to mean 0, std 1 (population std, 1e-8 guard).
std::vector<double> normalize_advantages(std::span<const double> advantages);

void save_checkpoint(const PolicyParams& params, const std::filesystem::path& path);
PolicyParams load_checkpoint(const std::filesystem::path& path);
std::string serialize_checkpoint(const PolicyParams& params);
PolicyParams deserialize_checkpoint(std::string_view bytes);

}  // namespace p5
