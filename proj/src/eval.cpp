#include "moddpo/eval.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "moddpo/errors.hpp"
#include "moddpo/rng.hpp"

namespace moddpo {

namespace {

std::optional<double> percent(long num, long den) {
  if (den <= 0) return std::nullopt;
  return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v);
  return buf;
}

std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

bool relevant_is_visual(ModalityTag tag) { return tag == ModalityTag::visual_related; }

}  // namespace

Answer predict_from_logprobs(double log_yes, double log_no) {
  return log_yes > log_no ? Answer::yes : Answer::no;
}

Answer predict(const PolicyParams& params, const EvalItem& item) {
  const Eigen::VectorXd lp = forward_logprobs(params, item.context);
  return predict_from_logprobs(lp[kYesToken], lp[kNoToken]);
}

std::vector<Answer> predict_all(const PolicyParams& params, std::span<const EvalItem> items) {
  std::vector<Answer> out;
  out.reserve(items.size());
  for (const EvalItem& item : items) out.push_back(predict(params, item));
  return out;
}

MetricsReport score_counts(const StratumCounts& c) {
  if (c.yes_correct < 0 || c.no_correct < 0 || c.yes_correct > c.yes_total ||
      c.no_correct > c.no_total) {
    throw DomainError("score: inconsistent stratum counts");
  }
  MetricsReport r;
  r.counts = c;
  r.accuracy = percent(c.yes_correct + c.no_correct, c.total());
  r.precision = percent(c.yes_correct, c.yes_total);
  r.recall = percent(c.no_correct, c.no_total);
  r.pa = r.precision;
  r.hr = r.recall;
  if (r.precision && r.recall) {
    const double sum = *r.precision + *r.recall;
    if (sum > 0) {
      r.f1 = 2.0 * *r.precision * *r.recall / sum;
    } else {
      r.f1 = 0.0;
      r.f1_degenerate = true;
    }
  }
  return r;
}

MetricsReport score(std::span<const Answer> predictions, std::span<const EvalItem> items) {
  if (predictions.size() != items.size()) {
    throw DimensionError("score: predictions and items differ in length");
  }
  StratumCounts c;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const bool correct = predictions[i] == items[i].ground_truth;
    if (items[i].ground_truth == Answer::yes) {
      ++c.yes_total;
      c.yes_correct += correct;
    } else {
      ++c.no_total;
      c.no_correct += correct;
    }
  }
  return score_counts(c);
}

std::string_view to_string(ShiftTarget target) {
  return target == ShiftTarget::relevant ? "relevant" : "irrelevant";
}

void ShiftHistogram::add(double value) {
  if (value < kLow) {
    ++underflow;
  } else if (value > kHigh) {
    ++overflow;
  } else {
    const double width = (kHigh - kLow) / kBins;
    int bin = static_cast<int>(std::floor((value - kLow) / width));
    bin = std::clamp(bin, 0, kBins - 1);
    ++counts[static_cast<std::size_t>(bin)];
  }
}

double ShiftHistogram::bin_low(int bin) const { return kLow + bin * (kHigh - kLow) / kBins; }
double ShiftHistogram::bin_high(int bin) const { return kLow + (bin + 1) * (kHigh - kLow) / kBins; }

ShiftStats loglik_shift(const PolicyParams& params, std::span<const EvalItem> items,
                        const CorruptionSpec& spec, ShiftTarget which) {
  spec.validate();
  std::vector<Eigen::VectorXd> audio_pool, visual_pool;
  if (spec.kind == CorruptionKind::random_swap) {
    for (const EvalItem& item : items) {
      audio_pool.push_back(item.context.audio);
      visual_pool.push_back(item.context.visual);
    }
  }
  ShiftStats stats;
  double sum = 0, sum_abs = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const EvalItem& item = items[i];
    const int truth = answer_token(item.ground_truth);
    ModalityContext corrupted = item.context;
    const FeaturePool audio_fp{audio_pool, i};
    const FeaturePool visual_fp{visual_pool, i};
    CorruptionSpec s = spec;
    const auto corrupt_audio = [&] {
      s.seed = derive_seed(spec.seed, {i, 0});
      corrupted.audio = corrupt(item.context.audio, s, &audio_fp);
    };
    const auto corrupt_visual = [&] {
      s.seed = derive_seed(spec.seed, {i, 1});
      corrupted.visual = corrupt(item.context.visual, s, &visual_fp);
    };
    if (item.context.tag == ModalityTag::audiovisual) {
      if (which == ShiftTarget::relevant) {
        corrupt_audio();
        corrupt_visual();
      }
    } else if (relevant_is_visual(item.context.tag) == (which == ShiftTarget::relevant)) {
      corrupt_visual();
    } else {
      corrupt_audio();
    }
    const double delta = forward_logprobs(params, item.context)[truth] -
                         forward_logprobs(params, corrupted)[truth];
    sum += delta;
    sum_abs += std::abs(delta);
    stats.histogram.add(delta);
    ++stats.items;
  }
  if (stats.items > 0) {
    stats.mean = sum / static_cast<double>(stats.items);
    stats.mean_abs = sum_abs / static_cast<double>(stats.items);
  }
  return stats;
}

ComparisonReport compare(std::span<const NamedModel> models, std::span<const EvalItem> items,
                         const CorruptionSpec& shift_spec) {
  if (models.empty()) throw ConfigError("compare: at least one model is required");
  ComparisonReport report;
  std::vector<std::string> groups{"all"};
  for (TaskGroup g : {TaskGroup::adv_hallucination, TaskGroup::vda_hallucination,
                      TaskGroup::matching, TaskGroup::dominance}) {
    for (const EvalItem& item : items) {
      if (item.task_group == g) {
        groups.emplace_back(to_string(g));
        break;
      }
    }
  }
  for (const NamedModel& model : models) {
    for (const std::string& group : groups) {
      std::vector<EvalItem> subset;
      for (const EvalItem& item : items) {
        if (group == "all" || to_string(item.task_group) == group) subset.push_back(item);
      }
      ComparisonRow row;
      row.model = model.name;
      row.group = group;
      row.metrics = score(predict_all(model.params, subset), subset);
      row.relevant_shift = loglik_shift(model.params, subset, shift_spec, ShiftTarget::relevant);
      row.irrelevant_shift =
          loglik_shift(model.params, subset, shift_spec, ShiftTarget::irrelevant);
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

ComparisonReport compare_checkpoints(std::span<const std::filesystem::path> checkpoints,
                                     std::span<const EvalItem> items,
                                     const CorruptionSpec& shift_spec) {
  std::vector<NamedModel> models;
  for (const auto& path : checkpoints) {
    models.push_back({path.stem().string(), load_checkpoint(path)});
  }
  return compare(models, items, shift_spec);
}

std::string ComparisonReport::to_csv() const {
  std::ostringstream out;
  out << "model,group,items,accuracy,precision,recall,f1,pa,hr,f1_degenerate,"
         "yes_correct,yes_total,no_correct,no_total,"
         "relevant_shift_mean,relevant_shift_mean_abs,irrelevant_shift_mean,"
         "irrelevant_shift_mean_abs\n";
  for (const ComparisonRow& r : rows) {
    const StratumCounts& c = r.metrics.counts;
    out << r.model << ',' << r.group << ',' << c.total() << ',' << fmt(r.metrics.accuracy) << ','
        << fmt(r.metrics.precision) << ',' << fmt(r.metrics.recall) << ',' << fmt(r.metrics.f1)
        << ',' << fmt(r.metrics.pa) << ',' << fmt(r.metrics.hr) << ','
        << (r.metrics.f1_degenerate ? 1 : 0) << ',' << c.yes_correct << ',' << c.yes_total << ','
        << c.no_correct << ',' << c.no_total << ',' << fmt_real(r.relevant_shift.mean) << ','
        << fmt_real(r.relevant_shift.mean_abs) << ',' << fmt_real(r.irrelevant_shift.mean) << ','
        << fmt_real(r.irrelevant_shift.mean_abs) << '\n';
  }
  return out.str();
}

std::string ComparisonReport::to_table() const {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-14s %-18s %6s %9s %9s %9s %9s %10s %10s\n", "model",
                "group", "items", "acc", "pre(pa)", "rec(hr)", "f1", "|d|_rel", "|d|_irr");
  out << line;
  for (const ComparisonRow& r : rows) {
    std::snprintf(line, sizeof line, "%-14s %-18s %6ld %9s %9s %9s %9s %10s %10s\n",
                  r.model.c_str(), r.group.c_str(), r.metrics.counts.total(),
                  fmt(r.metrics.accuracy).c_str(), fmt(r.metrics.precision).c_str(),
                  fmt(r.metrics.recall).c_str(), fmt(r.metrics.f1).c_str(),
                  fmt_real(r.relevant_shift.mean_abs).c_str(),
                  fmt_real(r.irrelevant_shift.mean_abs).c_str());
    out << line;
  }
  return out.str();
}

std::string histogram_csv(const ShiftStats& stats) {
  std::ostringstream out;
  out << "bin_low,bin_high,count\n";
  out << "-inf," << fmt_real(ShiftHistogram::kLow) << ',' << stats.histogram.underflow << '\n';
  for (int b = 0; b < ShiftHistogram::kBins; ++b) {
    out << fmt_real(stats.histogram.bin_low(b)) << ',' << fmt_real(stats.histogram.bin_high(b))
        << ',' << stats.histogram.counts[static_cast<std::size_t>(b)] << '\n';
  }
  out << fmt_real(ShiftHistogram::kHigh) << ",inf," << stats.histogram.overflow << '\n';
  return out.str();
}

}  // namespace moddpo
