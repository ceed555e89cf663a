#pragma once

// Preference optimization over a synthetic dataset: reference warm-up,
// modality-alternating batches, composed losses with detached corrupted passes
// and per-pair pass accounting.

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "moddpo/core.hpp"
#include "moddpo/corrupt.hpp"
#include "moddpo/policy.hpp"
#include "moddpo/synth.hpp"

namespace moddpo {

enum class LossVariant { dpo, mod, modpp, mod_with_av };

std::string_view to_string(LossVariant variant);
LossVariant loss_variant_from_string(std::string_view name);

// Forward and backward passes, counted per scored response.
struct PassCounter {
  long fwd_policy = 0;
  long fwd_ref = 0;
  long bwd_policy = 0;
  long bwd_ref = 0;

  PassCounter& operator+=(const PassCounter& other);
  bool operator==(const PassCounter&) const = default;
};

// Per-pair counts the variant is expected to spend on a pair with this tag.
PassCounter expected_pair_passes(LossVariant variant, ModalityTag tag);

struct TrainConfig {
  Hyperparams hp;
  LossVariant loss_variant = LossVariant::modpp;
  CorruptionSpec corruption;
  double lr = 3e-7;
  int epochs = 1;
  int batch_size = 8;
  std::uint64_t seed = 1;
  bool alternate_batches = true;
  LpdPlacement lpd_placement = LpdPlacement::inside;

  void validate() const;
};

struct Batch {
  std::vector<std::size_t> indices;  // into the dataset's pairs
  ModalityTag tag = ModalityTag::visual_related;
  bool homogeneous = true;
};

// Batches of one epoch. Under alternation the visual and audio streams are
// interleaved strictly; the shorter stream restarts from its first batch so
// that every pair of the longer one is visited once. Audiovisual batches join
// only under mod_with_av, one after each visual/audio round.
std::vector<Batch> epoch_schedule(const PreferenceDataset& dataset, const TrainConfig& cfg,
                                  int epoch);

// Corruption sources for random_swap: every feature vector of the dataset.
struct FeatureBank {
  std::vector<Eigen::VectorXd> audio;
  std::vector<Eigen::VectorXd> visual;

  static FeatureBank from(const PreferenceDataset& dataset);
};

// Log-probabilities of one pair in every slot the variant needs. Slots the
// variant does not use are left at zero.
struct PairEvaluation {
  PairLogProbs logprobs;
  PassCounter passes;
};

PairEvaluation evaluate_pair(const PolicyParams& params, const PolicyParams& reference,
                             const PreferencePair& pair, std::size_t pair_index,
                             const TrainConfig& cfg, std::uint64_t step,
                             const FeatureBank& bank);

// Loss of one pair and its derivative with respect to delta log pi_theta on
// the clean input, the only gradient-carrying quantity.
struct PairObjective {
  double loss = 0.0;
  double dloss_ddelta = 0.0;
};

PairObjective pair_objective(const PairLogProbs& logprobs, ModalityTag tag,
                             const TrainConfig& cfg);

struct BatchGradient {
  double loss = 0.0;  // batch mean
  GradAccumulator grad;
  PassCounter passes;
  bool uniform_passes = true;  // every pair of the batch spent the same passes
  std::vector<PairLogProbs> logprobs;
};

BatchGradient batch_gradient(const PolicyParams& params, const PolicyParams& reference,
                             const PreferenceDataset& dataset, const Batch& batch,
                             const TrainConfig& cfg, std::uint64_t step,
                             const FeatureBank& bank);

struct StepRecord {
  std::uint64_t step = 0;
  int epoch = 0;
  ModalityTag tag = ModalityTag::visual_related;
  double loss = 0.0;
  int pairs = 0;
  PassCounter passes;
  bool uniform_passes = true;

  PassCounter per_pair() const;
};

// One plain gradient-descent update. Throws ContractError for a mixed batch
// while alternation is enabled.
StepRecord train_step(PolicyParams& params, const PolicyParams& reference,
                      const PreferenceDataset& dataset, const Batch& batch,
                      const TrainConfig& cfg, std::uint64_t step, const FeatureBank& bank);

struct TrainResult {
  PolicyParams params;
  std::vector<StepRecord> trace;
  PassCounter totals;
};

using StepObserver = std::function<void(const PolicyParams& before, const Batch& batch,
                                        std::uint64_t step)>;

// Starts from a copy of the reference. `observer`, when set, sees the
// parameters before every update.
TrainResult train(const PreferenceDataset& dataset, const PolicyParams& reference,
                  const TrainConfig& cfg, const StepObserver& observer = {},
                  int max_steps = -1);

struct WarmupConfig {
  int steps = 500;
  int batch_size = 16;
  double lr = 0.5;
  int hidden = 16;
  double init_scale = 0.1;
  bool matched_only = true;  // fit the reference on matched contexts only
  std::uint64_t seed = 1;

  void validate() const;
};

// Supervised fit of log pi(y_w) from a seeded initialization. With
// steps == 0 the initialization is returned unchanged.
PolicyParams warmup_reference(const PreferenceDataset& dataset, const WarmupConfig& cfg);
PolicyParams warmup_reference(const PreferenceDataset& dataset, int steps, std::uint64_t seed);

// Mean log pi(y_w) over the dataset's clean contexts.
double mean_chosen_logprob(const PolicyParams& params, const PreferenceDataset& dataset);

// Text-only input: audio and visual zeroed, prompt kept.
ModalityContext text_only(const ModalityContext& ctx);

}  // namespace moddpo
