#include "moddpo/corrupt.hpp"

#include <cmath>
#include <random>
#include <string>

#include "moddpo/errors.hpp"

namespace moddpo {

std::string_view to_string(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::zeros: return "zeros";
    case CorruptionKind::gaussian: return "gaussian";
    case CorruptionKind::random_swap: return "random_swap";
    case CorruptionKind::diffusion: return "diffusion";
  }
  return "unknown";
}

CorruptionKind corruption_kind_from_string(std::string_view name) {
  if (name == "zeros") return CorruptionKind::zeros;
  if (name == "gaussian") return CorruptionKind::gaussian;
  if (name == "random_swap") return CorruptionKind::random_swap;
  if (name == "diffusion") return CorruptionKind::diffusion;
  throw ConfigError("unknown corruption kind '" + std::string(name) + "'");
}

NoiseSchedule::NoiseSchedule(int steps, double beta_start, double beta_end)
    : steps_(steps), beta_start_(beta_start), beta_end_(beta_end) {
  if (steps < 1) throw ConfigError("noise schedule needs at least one step");
  if (!(beta_start > 0 && beta_end >= beta_start && beta_end < 1)) {
    throw ConfigError("noise schedule needs 0 < beta_start <= beta_end < 1");
  }
  alpha_bar_.resize(static_cast<std::size_t>(steps) + 1);
  alpha_bar_[0] = 1.0;
  for (int s = 1; s <= steps; ++s) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(s - 1) / (steps - 1);
    const double beta_s = beta_start + (beta_end - beta_start) * frac;
    alpha_bar_[s] = alpha_bar_[s - 1] * (1.0 - beta_s);
  }
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > steps_) {
    throw ConfigError("diffusion step " + std::to_string(t) + " outside [0, " +
                      std::to_string(steps_) + "]");
  }
  return alpha_bar_[static_cast<std::size_t>(t)];
}

const NoiseSchedule& default_noise_schedule() {
  static const NoiseSchedule schedule;
  return schedule;
}

double alpha_bar(const NoiseSchedule& schedule, int t) { return schedule.alpha_bar(t); }

void CorruptionSpec::validate(int max_t) const {
  if (kind == CorruptionKind::diffusion && (t < 0 || t > max_t)) {
    throw ConfigError("diffusion step " + std::to_string(t) + " outside [0, " +
                      std::to_string(max_t) + "]");
  }
  if (kind == CorruptionKind::gaussian && !(sigma > 0)) {
    throw ConfigError("gaussian corruption needs sigma > 0");
  }
}

Eigen::VectorXd corrupt(const Eigen::VectorXd& features, const CorruptionSpec& spec,
                        const FeaturePool* pool, const NoiseSchedule& schedule) {
  spec.validate(schedule.steps());
  if (!features.allFinite()) throw DomainError("corrupt: non-finite features");
  const Eigen::Index dim = features.size();
  std::mt19937_64 gen(spec.seed);

  switch (spec.kind) {
    case CorruptionKind::zeros:
      return Eigen::VectorXd::Zero(dim);

    case CorruptionKind::gaussian: {
      std::normal_distribution<double> noise(0.0, spec.sigma);
      Eigen::VectorXd out(dim);
      for (Eigen::Index i = 0; i < dim; ++i) out[i] = noise(gen);
      return out;
    }

    case CorruptionKind::random_swap: {
      if (pool == nullptr || pool->members.empty()) {
        throw ContractError("random_swap corruption needs a non-empty feature pool");
      }
      const std::size_t n = pool->members.size();
      const bool exclude = pool->self_index.has_value() && *pool->self_index < n;
      const std::size_t candidates = exclude ? n - 1 : n;
      if (candidates == 0) {
        throw ContractError("random_swap: pool has no member other than the input itself");
      }
      std::uniform_int_distribution<std::size_t> pick(0, candidates - 1);
      std::size_t idx = pick(gen);
      if (exclude && idx >= *pool->self_index) ++idx;
      const Eigen::VectorXd& chosen = pool->members[idx];
      if (chosen.size() != dim) throw DimensionError("random_swap: pool member has wrong size");
      return chosen;
    }

    case CorruptionKind::diffusion: {
      const double ab = schedule.alpha_bar(spec.t);
      if (spec.t == 0) return features;
      std::normal_distribution<double> noise(0.0, 1.0);
      const double signal = std::sqrt(ab);
      const double spread = std::sqrt(1.0 - ab);
      Eigen::VectorXd out(dim);
      for (Eigen::Index i = 0; i < dim; ++i) out[i] = signal * features[i] + spread * noise(gen);
      return out;
    }
  }
  throw ConfigError("unknown corruption kind");
}

}  // namespace moddpo
