#pragma once

// Corruption of audio/visual feature vectors: all zeros, Gaussian noise,
// a random substitute from a pool, or forward diffusion to step t.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace moddpo {

enum class CorruptionKind { zeros, gaussian, random_swap, diffusion };

std::string_view to_string(CorruptionKind kind);
CorruptionKind corruption_kind_from_string(std::string_view name);

// Linear-beta forward-noising schedule with precomputed alpha_bar.
class NoiseSchedule {
 public:
  static constexpr int kDefaultSteps = 1000;

  NoiseSchedule(int steps = kDefaultSteps, double beta_start = 1e-4, double beta_end = 0.02);

  int steps() const noexcept { return steps_; }
  double beta_start() const noexcept { return beta_start_; }
  double beta_end() const noexcept { return beta_end_; }
  // prod_{s=1..t} (1 - beta_s); alpha_bar(0) == 1.
  double alpha_bar(int t) const;

 private:
  int steps_;
  double beta_start_;
  double beta_end_;
  std::vector<double> alpha_bar_;
};

const NoiseSchedule& default_noise_schedule();
double alpha_bar(const NoiseSchedule& schedule, int t);

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::diffusion;
  int t = 500;         // diffusion step, used by kind == diffusion
  double sigma = 1.0;  // noise scale, used by kind == gaussian
  std::uint64_t seed = 0;

  // Throws ConfigError when t is outside [0, max_t] or sigma <= 0.
  void validate(int max_t = NoiseSchedule::kDefaultSteps) const;
};

// Candidates for random_swap. self_index, when set, is never drawn.
struct FeaturePool {
  std::span<const Eigen::VectorXd> members;
  std::optional<std::size_t> self_index;
};

Eigen::VectorXd corrupt(const Eigen::VectorXd& features, const CorruptionSpec& spec,
                        const FeaturePool* pool = nullptr,
                        const NoiseSchedule& schedule = default_noise_schedule());

}  // namespace moddpo
