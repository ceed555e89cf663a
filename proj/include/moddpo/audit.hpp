#pragma once

// Independent oracles behind the `verify` command: simplex search for the
// decoupled objective, finite-difference gradient checks, the frozen-surrogate
// stop-gradient check, pass accounting, dataset round trips and metric
// identities.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "moddpo/core.hpp"
#include "moddpo/policy.hpp"
#include "moddpo/train.hpp"

namespace moddpo {

// Euclidean projection onto {p : sum p = 1, p_i >= floor}.
std::vector<double> project_to_simplex(std::span<const double> v, double floor = 0.0);

double l1_distance(std::span<const double> a, std::span<const double> b);

struct SimplexSearchResult {
  std::vector<double> argmax;
  double value = 0.0;
  long iterations = 0;
};

// Projected gradient ascent with Armijo backtracking on the decoupled
// objective, started from the uniform distribution.
SimplexSearchResult pga_argmax(const RewardVector& reward, const PolicyDistribution& reference,
                               const PolicyDistribution& q_inv, const PolicyDistribution& q_sens,
                               const Hyperparams& hp, long max_iterations = 200000);

// Exhaustive search over the interior of the 3-simplex at the given step.
SimplexSearchResult grid_argmax3(const RewardVector& reward, const PolicyDistribution& reference,
                                 const PolicyDistribution& q_inv, const PolicyDistribution& q_sens,
                                 const Hyperparams& hp, double step = 1e-3);

// Norm-wise relative error ||a - b|| / max(||a||, ||b||); 0 when both vanish.
double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Central differences of f over the flattened parameters.
Eigen::VectorXd finite_difference_gradient(const PolicyParams& params,
                                           const std::function<double(const PolicyParams&)>& f,
                                           double step = 1e-5);

// Relative error between backward() and central differences of
// upstream . log pi(. | ctx).
double gradient_check(const PolicyParams& params, const ModalityContext& ctx,
                      const Eigen::VectorXd& upstream, double step = 1e-5);

// Batch loss with the detached slots held at `frozen` and only the clean
// policy log-probs recomputed from `params`.
double frozen_surrogate_loss(const PolicyParams& params, const PreferenceDataset& dataset,
                             const Batch& batch, const std::vector<PairLogProbs>& frozen,
                             const TrainConfig& cfg);

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct AuditSizes {
  int closed_form_instances = 200;
  int reduction_instances = 1000;
  int reduction_train_steps = 100;
  int gradient_triples = 100;
  int stop_gradient_steps = 20;
  int pass_count_steps = 100;
  int dataset_seeds = 10;
  int dataset_records = 2000;
  int metric_tables = 1000;

  static AuditSizes full() { return {}; }
  static AuditSizes quick();
};

SuiteResult audit_closed_form(int instances, std::uint64_t seed);
SuiteResult audit_reduction(int instances, int train_steps, std::uint64_t seed);
SuiteResult audit_gradients(int triples, std::uint64_t seed);
SuiteResult audit_stop_gradient(int steps, std::uint64_t seed);
SuiteResult audit_pass_counts(int steps, std::uint64_t seed);
SuiteResult audit_dataset_roundtrip(int seeds, int records, const std::filesystem::path& scratch);
SuiteResult audit_metrics(int tables, std::uint64_t seed);

std::vector<SuiteResult> run_audit_suite(const AuditSizes& sizes,
                                         const std::filesystem::path& scratch,
                                         std::uint64_t seed = 20240601);

}  // namespace moddpo
