#pragma once

// Scoring of yes/no presence probes, corruption-driven log-likelihood shifts
// and side-by-side model comparison.
//
// Precision and recall follow the hallucination-benchmark convention: they
// are the accuracies on the ground-truth "yes" and "no" strata (sensitivity
// and specificity), not the usual retrieval quantities. pa and hr carry the
// same two numbers under their perception-accuracy / hallucination-resistance
// names.

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "moddpo/corrupt.hpp"
#include "moddpo/policy.hpp"
#include "moddpo/synth.hpp"

namespace moddpo {

// Argmax over the yes/no log-probabilities; an exact tie answers "no".
Answer predict_from_logprobs(double log_yes, double log_no);
Answer predict(const PolicyParams& params, const EvalItem& item);
std::vector<Answer> predict_all(const PolicyParams& params, std::span<const EvalItem> items);

struct StratumCounts {
  long yes_correct = 0;
  long yes_total = 0;
  long no_correct = 0;
  long no_total = 0;

  long total() const { return yes_total + no_total; }
  bool operator==(const StratumCounts&) const = default;
};

// Percentages in [0, 100]. A metric over an empty stratum is nullopt. When
// precision and recall are both zero, f1 is 0 and f1_degenerate is set.
struct MetricsReport {
  StratumCounts counts;
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::optional<double> pa;
  std::optional<double> hr;
  bool f1_degenerate = false;
};

MetricsReport score_counts(const StratumCounts& counts);
MetricsReport score(std::span<const Answer> predictions, std::span<const EvalItem> items);

enum class ShiftTarget { relevant, irrelevant };

std::string_view to_string(ShiftTarget target);

struct ShiftHistogram {
  static constexpr int kBins = 41;
  static constexpr double kLow = -5.0;
  static constexpr double kHigh = 5.0;

  std::array<long, kBins> counts{};
  long underflow = 0;
  long overflow = 0;

  void add(double value);
  double bin_low(int bin) const;
  double bin_high(int bin) const;
};

struct ShiftStats {
  long items = 0;
  double mean = 0.0;
  double mean_abs = 0.0;
  ShiftHistogram histogram;
};

// delta = log pi(truth | clean) - log pi(truth | corrupted), where the
// relevant modality follows each item's tag (both streams for audiovisual
// items). Corruption draws are seeded per item from spec.seed; random_swap
// draws from the other items' features.
ShiftStats loglik_shift(const PolicyParams& params, std::span<const EvalItem> items,
                        const CorruptionSpec& spec, ShiftTarget which);

struct NamedModel {
  std::string name;
  PolicyParams params;
};

struct ComparisonRow {
  std::string model;
  std::string group;  // a task group name or "all"
  MetricsReport metrics;
  ShiftStats relevant_shift;
  ShiftStats irrelevant_shift;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;

  std::string to_csv() const;
  std::string to_table() const;
};

// One "all" row per model followed by one row per task group present.
ComparisonReport compare(std::span<const NamedModel> models, std::span<const EvalItem> items,
                         const CorruptionSpec& shift_spec);

// Loads each checkpoint (named by its file stem); throws IoError when one is
// unreadable.
ComparisonReport compare_checkpoints(std::span<const std::filesystem::path> checkpoints,
                                     std::span<const EvalItem> items,
                                     const CorruptionSpec& shift_spec);

std::string histogram_csv(const ShiftStats& stats);

}  // namespace moddpo
