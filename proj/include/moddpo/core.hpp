#pragma once

// Closed-form mathematics of modality-decoupled preference optimization:
// KL divergence, the decoupled objective, its Gibbs-form maximizer, reward
// margins and the Bradley-Terry pair losses built on them.
//
// Everything here is a pure function of its arguments.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace moddpo {

// Which temperature to use for the decoupled objective.
//   stationary: tau = beta + beta_inv - beta_sens  (follows from stationarity)
//   additive:   tau = beta + beta_inv + beta_sens  (does not maximize the objective)
enum class TauMode { stationary, additive };

std::string_view to_string(TauMode mode);
TauMode tau_mode_from_string(std::string_view name);

struct Hyperparams {
  double beta = 0.1;        // reference-KL strength
  double beta_inv = 0.02;   // invariance to irrelevant-modality corruption
  double beta_sens = 0.05;  // sensitivity to relevant-modality corruption
  double gamma_lpd = 0.05;  // language-prior debiasing strength
  TauMode tau_mode = TauMode::stationary;

  double tau() const noexcept;
  // Temperature of the audiovisual objective, where the invariance term is
  // dropped: beta - beta_sens.
  double tau_av() const noexcept;

  bool well_posed() const noexcept;
  // Throws ConfigError on negative strengths or tau <= 0.
  void validate() const;
};

// A strictly positive probability vector over the response vocabulary.
class PolicyDistribution {
 public:
  static constexpr double kSumTolerance = 1e-9;

  // Throws DomainError unless every entry is finite and > 0 and the entries
  // sum to 1 within kSumTolerance.
  explicit PolicyDistribution(std::vector<double> probs);

  static PolicyDistribution uniform(std::size_t size);
  // exp() of a normalized log-probability vector.
  static PolicyDistribution from_log_probs(std::span<const double> log_probs);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const noexcept { return probs_; }

 private:
  std::vector<double> probs_;
};

// One reward per response. Normalizers such as Z(x) or W(a, v, x) are never
// stored: they cancel in every margin.
class RewardVector {
 public:
  explicit RewardVector(std::vector<double> values);
  static RewardVector zeros(std::size_t size);

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::vector<double> values_;
};

struct LogProbPair {
  double chosen = 0.0;
  double rejected = 0.0;

  double delta() const noexcept { return chosen - rejected; }
};

// Log-probabilities of the chosen and rejected response for one preference
// pair under every model/input combination the losses need.
struct PairLogProbs {
  LogProbPair policy;              // policy, clean input
  LogProbPair reference;           // reference, clean input
  LogProbPair policy_irrelevant;   // policy, prompt-irrelevant modality corrupted
  LogProbPair policy_relevant;     // policy, prompt-relevant modality corrupted
  LogProbPair reference_text;      // reference, text-only input
  LogProbPair policy_both;         // policy, both modalities corrupted

  // Throws DomainError unless every entry is finite and <= 0.
  void validate() const;
};

// sum_y p(y) ln(p(y)/q(y)) in nats. Zero entries of p contribute nothing; a
// zero entry of q under positive p is a DomainError.
double kl_divergence(std::span<const double> p, std::span<const double> q);
double kl_divergence(const PolicyDistribution& p, const PolicyDistribution& q);

// E_p[r] - beta KL(p||p_ref) - beta_inv KL(p||q_inv) + beta_sens KL(p||q_sens).
// p may sit on the simplex boundary; the fixed distributions may not.
double mod_objective_value(std::span<const double> p, const RewardVector& reward,
                           const PolicyDistribution& reference,
                           const PolicyDistribution& q_inv,
                           const PolicyDistribution& q_sens, const Hyperparams& hp);
double mod_objective_value(const PolicyDistribution& p, const RewardVector& reward,
                           const PolicyDistribution& reference,
                           const PolicyDistribution& q_inv,
                           const PolicyDistribution& q_sens, const Hyperparams& hp);

// Normalized exp(r/tau) p_ref^(beta/tau) q_inv^(beta_inv/tau) q_sens^(-beta_sens/tau),
// evaluated in log space with a max shift.
PolicyDistribution closed_form_policy(const RewardVector& reward,
                                      const PolicyDistribution& reference,
                                      const PolicyDistribution& q_inv,
                                      const PolicyDistribution& q_sens,
                                      const Hyperparams& hp);

// Unnormalized log-kernel of closed_form_policy (log W not subtracted).
std::vector<double> closed_form_log_kernel(const RewardVector& reward,
                                           const PolicyDistribution& reference,
                                           const PolicyDistribution& q_inv,
                                           const PolicyDistribution& q_sens,
                                           const Hyperparams& hp);

// beta * (dlog pi_theta - dlog pi_ref).
double dpo_margin(const PairLogProbs& pl, double beta);

// tau dlog pi_theta - beta dlog pi_ref - beta_inv dlog pi'_irrelevant
//   + beta_sens dlog pi'_relevant.
// Audio prompts reuse this unchanged: the caller fills the irrelevant and
// relevant slots according to the prompt's modality.
double mod_margin(const PairLogProbs& pl, const Hyperparams& hp);

// -gamma_lpd * (log pi_ref(y_w|x) - log pi_ref(y_l|x)) on text-only input.
double lpd_margin(const PairLogProbs& pl, const Hyperparams& hp);

// tau_av dlog pi_theta - beta dlog pi_ref + beta_sens dlog pi'_both.
// Throws ConfigError when tau_av <= 0.
double av_margin(const PairLogProbs& pl, const Hyperparams& hp);

double sigmoid(double x) noexcept;
// -ln sigmoid(margin), as softplus(-margin).
double pair_loss(double margin) noexcept;
// d pair_loss / d margin = -sigmoid(-margin).
double pair_loss_slope(double margin) noexcept;

enum class LpdPlacement { inside, outside };

std::string_view to_string(LpdPlacement placement);
LpdPlacement lpd_placement_from_string(std::string_view name);

double dpo_pair_loss(const PairLogProbs& pl, double beta);
double mod_pair_loss(const PairLogProbs& pl, const Hyperparams& hp);
// inside:  pair_loss(mod_margin + lpd_margin)
// outside: pair_loss(mod_margin) + lpd_margin
double modpp_pair_loss(const PairLogProbs& pl, const Hyperparams& hp,
                       LpdPlacement placement = LpdPlacement::inside);
double av_pair_loss(const PairLogProbs& pl, const Hyperparams& hp);

}  // namespace moddpo
