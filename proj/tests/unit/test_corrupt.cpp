#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "moddpo/corrupt.hpp"
#include "moddpo/errors.hpp"

using namespace moddpo;

namespace {

Eigen::VectorXd unit_vector(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = n(rng);
  return v.normalized();
}

double mean_correlation(int t, int trials) {
  std::mt19937_64 rng(99);
  double total = 0;
  for (int k = 0; k < trials; ++k) {
    const Eigen::VectorXd x = unit_vector(16, rng);
    CorruptionSpec spec;
    spec.kind = CorruptionKind::diffusion;
    spec.t = t;
    spec.seed = static_cast<std::uint64_t>(k);
    const Eigen::VectorXd y = corrupt(x, spec);
    total += x.dot(y) / y.norm();
  }
  return total / trials;
}

}  // namespace

TEST_CASE("noise schedule") {
  const NoiseSchedule& s = default_noise_schedule();
  CHECK(s.steps() == 1000);
  CHECK(alpha_bar(s, 0) == 1.0);
  CHECK(alpha_bar(s, 1) == doctest::Approx(1.0 - 1e-4).epsilon(1e-15));
  // Product of (1 - beta_s) for the first two linearly spaced steps.
  const double beta2 = 1e-4 + (0.02 - 1e-4) / 999.0;
  CHECK(alpha_bar(s, 2) == doctest::Approx((1 - 1e-4) * (1 - beta2)).epsilon(1e-15));
  CHECK(std::sqrt(alpha_bar(s, 1)) == doctest::Approx(0.99995).epsilon(1e-6));
  for (int t = 1; t <= 1000; ++t) CHECK(alpha_bar(s, t) < alpha_bar(s, t - 1));
  CHECK(alpha_bar(s, 500) < alpha_bar(s, 50));
  CHECK(alpha_bar(s, 1000) > 0.0);
  CHECK_THROWS_AS(alpha_bar(s, -1), ConfigError);
  CHECK_THROWS_AS(alpha_bar(s, 1001), ConfigError);
  CHECK_THROWS_AS(NoiseSchedule(10, 0.5, 0.1), ConfigError);
}

TEST_CASE("zeros and identity diffusion") {
  std::mt19937_64 rng(1);
  const Eigen::VectorXd x = unit_vector(8, rng);
  CorruptionSpec zeros;
  zeros.kind = CorruptionKind::zeros;
  CHECK(corrupt(x, zeros) == Eigen::VectorXd::Zero(8));
  CorruptionSpec diff;
  diff.kind = CorruptionKind::diffusion;
  diff.t = 0;
  CHECK(corrupt(x, diff) == x);
}

TEST_CASE("diffusion at one step scales the signal by sqrt(1 - 1e-4)") {
  std::mt19937_64 rng(2);
  const Eigen::VectorXd x = unit_vector(8, rng);
  CorruptionSpec spec;
  spec.t = 1;
  spec.seed = 5;
  const Eigen::VectorXd y = corrupt(x, spec);
  // The same seed on a zero input isolates the noise term.
  CorruptionSpec zero_signal = spec;
  zero_signal.t = 1;
  const Eigen::VectorXd origin = corrupt(Eigen::VectorXd::Zero(8), zero_signal);
  const Eigen::VectorXd signal = y - origin;
  for (int i = 0; i < 8; ++i) CHECK(signal[i] == doctest::Approx(0.99995 * x[i]).epsilon(1e-6));
}

TEST_CASE("corruption is deterministic and dimension preserving") {
  std::mt19937_64 rng(3);
  const Eigen::VectorXd x = unit_vector(8, rng);
  std::vector<Eigen::VectorXd> pool{unit_vector(8, rng), x, unit_vector(8, rng)};
  const FeaturePool fp{pool, std::size_t{1}};
  for (CorruptionKind kind : {CorruptionKind::zeros, CorruptionKind::gaussian,
                              CorruptionKind::random_swap, CorruptionKind::diffusion}) {
    CorruptionSpec spec;
    spec.kind = kind;
    spec.seed = 11;
    const Eigen::VectorXd a = corrupt(x, spec, &fp);
    const Eigen::VectorXd b = corrupt(x, spec, &fp);
    CHECK(a == b);
    CHECK(a.size() == 8);
    CHECK(a.allFinite());
  }
  CHECK(corruption_kind_from_string("random_swap") == CorruptionKind::random_swap);
  CHECK_THROWS_AS(corruption_kind_from_string("blur"), ConfigError);
}

TEST_CASE("gaussian corruption replaces the input") {
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(20000, 100.0);
  CorruptionSpec spec;
  spec.kind = CorruptionKind::gaussian;
  spec.sigma = 2.0;
  const Eigen::VectorXd y = corrupt(x, spec);
  const double mean = y.mean();
  const double var = (y.array() - mean).square().mean();
  CHECK(std::abs(mean) < 0.1);
  CHECK(var == doctest::Approx(4.0).epsilon(0.05));
  spec.sigma = 0;
  CHECK_THROWS_AS(corrupt(x, spec), ConfigError);
}

TEST_CASE("random swap never returns the input's own source") {
  std::mt19937_64 rng(4);
  std::vector<Eigen::VectorXd> pool;
  for (int i = 0; i < 4; ++i) pool.push_back(unit_vector(8, rng));
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    CorruptionSpec spec;
    spec.kind = CorruptionKind::random_swap;
    spec.seed = seed;
    const FeaturePool fp{pool, std::size_t{2}};
    CHECK(corrupt(pool[2], spec, &fp) != pool[2]);
  }
  CorruptionSpec spec;
  spec.kind = CorruptionKind::random_swap;
  CHECK_THROWS_AS(corrupt(pool[0], spec), ContractError);
  const std::vector<Eigen::VectorXd> only_self{pool[0]};
  const FeaturePool self_pool{only_self, std::size_t{0}};
  CHECK_THROWS_AS(corrupt(pool[0], spec, &self_pool), ContractError);
}

TEST_CASE("larger diffusion steps keep less of the signal") {
  const double c10 = mean_correlation(10, 1000);
  const double c50 = mean_correlation(50, 1000);
  const double c500 = mean_correlation(500, 1000);
  CHECK(c10 > c50);
  CHECK(c50 > c500);
  CorruptionSpec bad;
  bad.t = 1001;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
