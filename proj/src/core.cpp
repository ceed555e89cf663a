#include "moddpo/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "moddpo/errors.hpp"

namespace moddpo {

namespace {

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": size mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
  }
}

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw DomainError(std::string(what) + " is not finite");
}

}  // namespace

std::string_view to_string(TauMode mode) {
  return mode == TauMode::stationary ? "stationary" : "additive";
}

TauMode tau_mode_from_string(std::string_view name) {
  if (name == "stationary") return TauMode::stationary;
  if (name == "additive") return TauMode::additive;
  throw ConfigError("unknown tau_mode '" + std::string(name) + "'");
}

double Hyperparams::tau() const noexcept {
  return tau_mode == TauMode::stationary ? beta + beta_inv - beta_sens
                                       : beta + beta_inv + beta_sens;
}

double Hyperparams::tau_av() const noexcept { return beta - beta_sens; }

bool Hyperparams::well_posed() const noexcept {
  const bool finite = std::isfinite(beta) && std::isfinite(beta_inv) &&
                      std::isfinite(beta_sens) && std::isfinite(gamma_lpd);
  return finite && beta >= 0 && beta_inv >= 0 && beta_sens >= 0 && gamma_lpd >= 0 &&
         tau() > 0;
}

void Hyperparams::validate() const {
  if (!(beta >= 0 && beta_inv >= 0 && beta_sens >= 0 && gamma_lpd >= 0)) {
    throw ConfigError("hyperparameter strengths must be finite and non-negative");
  }
  if (!(tau() > 0)) {
    throw ConfigError("temperature tau must be positive (got " + std::to_string(tau()) +
                      " under tau_mode=" + std::string(to_string(tau_mode)) + ")");
  }
}

PolicyDistribution::PolicyDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw DimensionError("PolicyDistribution: empty vocabulary");
  double sum = 0.0;
  for (double p : probs_) {
    if (!std::isfinite(p) || !(p > 0.0)) {
      throw DomainError("PolicyDistribution: entries must be finite and strictly positive");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw DomainError("PolicyDistribution: entries sum to " + std::to_string(sum));
  }
}

PolicyDistribution PolicyDistribution::uniform(std::size_t size) {
  if (size == 0) throw DimensionError("PolicyDistribution: empty vocabulary");
  return PolicyDistribution(std::vector<double>(size, 1.0 / static_cast<double>(size)));
}

PolicyDistribution PolicyDistribution::from_log_probs(std::span<const double> log_probs) {
  std::vector<double> probs(log_probs.size());
  std::transform(log_probs.begin(), log_probs.end(), probs.begin(),
                 [](double lp) { return std::exp(lp); });
  return PolicyDistribution(std::move(probs));
}

RewardVector::RewardVector(std::vector<double> values) : values_(std::move(values)) {
  for (double v : values_) require_finite(v, "reward");
}

RewardVector RewardVector::zeros(std::size_t size) {
  return RewardVector(std::vector<double>(size, 0.0));
}

void PairLogProbs::validate() const {
  for (const LogProbPair* pair :
       {&policy, &reference, &policy_irrelevant, &policy_relevant, &reference_text,
        &policy_both}) {
    for (double lp : {pair->chosen, pair->rejected}) {
      if (!std::isfinite(lp) || lp > 0.0) {
        throw DomainError("PairLogProbs: log-probabilities must be finite and <= 0");
      }
    }
  }
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  require_same_size(p.size(), q.size(), "kl_divergence");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] <= 0.0) throw DomainError("kl_divergence: q has zero mass where p does not");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  // Rounding can leave a tiny negative value when p and q nearly coincide.
  return std::max(kl, 0.0);
}

double kl_divergence(const PolicyDistribution& p, const PolicyDistribution& q) {
  return kl_divergence(p.probs(), q.probs());
}

double mod_objective_value(std::span<const double> p, const RewardVector& reward,
                           const PolicyDistribution& reference,
                           const PolicyDistribution& q_inv,
                           const PolicyDistribution& q_sens, const Hyperparams& hp) {
  require_same_size(p.size(), reward.size(), "mod_objective_value");
  require_same_size(p.size(), reference.size(), "mod_objective_value");
  require_same_size(p.size(), q_inv.size(), "mod_objective_value");
  require_same_size(p.size(), q_sens.size(), "mod_objective_value");
  double expected_reward = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) expected_reward += p[i] * reward[i];
  return expected_reward - hp.beta * kl_divergence(p, reference.probs()) -
         hp.beta_inv * kl_divergence(p, q_inv.probs()) +
         hp.beta_sens * kl_divergence(p, q_sens.probs());
}

double mod_objective_value(const PolicyDistribution& p, const RewardVector& reward,
                           const PolicyDistribution& reference,
                           const PolicyDistribution& q_inv,
                           const PolicyDistribution& q_sens, const Hyperparams& hp) {
  return mod_objective_value(p.probs(), reward, reference, q_inv, q_sens, hp);
}

std::vector<double> closed_form_log_kernel(const RewardVector& reward,
                                           const PolicyDistribution& reference,
                                           const PolicyDistribution& q_inv,
                                           const PolicyDistribution& q_sens,
                                           const Hyperparams& hp) {
  hp.validate();
  const std::size_t n = reward.size();
  require_same_size(n, reference.size(), "closed_form_policy");
  require_same_size(n, q_inv.size(), "closed_form_policy");
  require_same_size(n, q_sens.size(), "closed_form_policy");

  const double tau = hp.tau();
  std::vector<double> log_kernel(n);
  for (std::size_t i = 0; i < n; ++i) {
    log_kernel[i] = (reward[i] + hp.beta * std::log(reference[i]) +
                     hp.beta_inv * std::log(q_inv[i]) - hp.beta_sens * std::log(q_sens[i])) /
                    tau;
  }
  return log_kernel;
}

PolicyDistribution closed_form_policy(const RewardVector& reward,
                                      const PolicyDistribution& reference,
                                      const PolicyDistribution& q_inv,
                                      const PolicyDistribution& q_sens,
                                      const Hyperparams& hp) {
  std::vector<double> log_kernel = closed_form_log_kernel(reward, reference, q_inv, q_sens, hp);
  const double shift = *std::max_element(log_kernel.begin(), log_kernel.end());
  double total = 0.0;
  for (double& lk : log_kernel) {
    lk = std::exp(lk - shift);
    total += lk;
  }
  for (double& p : log_kernel) {
    p /= total;
    // Entries more than ~745 nats below the mode underflow; the result would
    // not be a strictly positive distribution.
    if (!(p > 0.0)) {
      throw DomainError("closed_form_policy: probability underflow; inputs too extreme");
    }
  }
  return PolicyDistribution(std::move(log_kernel));
}

double dpo_margin(const PairLogProbs& pl, double beta) {
  return beta * (pl.policy.delta() - pl.reference.delta());
}

double mod_margin(const PairLogProbs& pl, const Hyperparams& hp) {
  // Grouped as the DPO margin plus corrections so that zero invariance and
  // sensitivity strengths reproduce dpo_margin bit for bit.
  const double excess_tau = hp.tau() - hp.beta;
  return dpo_margin(pl, hp.beta) + excess_tau * pl.policy.delta() -
         hp.beta_inv * pl.policy_irrelevant.delta() +
         hp.beta_sens * pl.policy_relevant.delta();
}

double lpd_margin(const PairLogProbs& pl, const Hyperparams& hp) {
  return -hp.gamma_lpd * pl.reference_text.delta();
}

double av_margin(const PairLogProbs& pl, const Hyperparams& hp) {
  const double tau_av = hp.tau_av();
  if (!(tau_av > 0)) {
    throw ConfigError("audiovisual temperature beta - beta_sens must be positive");
  }
  return dpo_margin(pl, hp.beta) - hp.beta_sens * pl.policy.delta() +
         hp.beta_sens * pl.policy_both.delta();
}

double sigmoid(double x) noexcept {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double pair_loss(double margin) noexcept {
  const double x = -margin;
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double pair_loss_slope(double margin) noexcept { return -sigmoid(-margin); }

std::string_view to_string(LpdPlacement placement) {
  return placement == LpdPlacement::inside ? "inside" : "outside";
}

LpdPlacement lpd_placement_from_string(std::string_view name) {
  if (name == "inside") return LpdPlacement::inside;
  if (name == "outside") return LpdPlacement::outside;
  throw ConfigError("unknown lpd_placement '" + std::string(name) + "'");
}

double dpo_pair_loss(const PairLogProbs& pl, double beta) {
  return pair_loss(dpo_margin(pl, beta));
}

double mod_pair_loss(const PairLogProbs& pl, const Hyperparams& hp) {
  return pair_loss(mod_margin(pl, hp));
}

double modpp_pair_loss(const PairLogProbs& pl, const Hyperparams& hp,
                       LpdPlacement placement) {
  const double mod = mod_margin(pl, hp);
  const double lpd = lpd_margin(pl, hp);
  return placement == LpdPlacement::inside ? pair_loss(mod + lpd) : pair_loss(mod) + lpd;
}

double av_pair_loss(const PairLogProbs& pl, const Hyperparams& hp) {
  return pair_loss(av_margin(pl, hp));
}

}  // namespace moddpo
