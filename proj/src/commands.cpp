#include "moddpo/commands.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "moddpo/audit.hpp"
#include "moddpo/errors.hpp"
#include "moddpo/eval.hpp"

namespace moddpo {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void snapshot(const RunConfig& config, const std::string& stem) {
  write_text(config.out_dir / (stem + ".resolved.json"), to_json(config).dump(2) + "\n");
}

fs::path require(const fs::path& path, const char* produced_by) {
  if (!fs::exists(path)) {
    throw IoError("missing input " + path.string() + " (run `" + produced_by + "` first)");
  }
  return path;
}

ordered_json counter_json(const PassCounter& c) {
  return {{"fwd_policy", c.fwd_policy}, {"fwd_ref", c.fwd_ref}, {"bwd_policy", c.bwd_policy},
          {"bwd_ref", c.bwd_ref}};
}

std::string loss_trace_csv(const TrainResult& result) {
  std::ostringstream out;
  out << "step,epoch,modality,pairs,loss,fwd_policy,fwd_ref,bwd_policy,bwd_ref\n";
  char loss[32];
  for (const StepRecord& r : result.trace) {
    std::snprintf(loss, sizeof loss, "%.17g", r.loss);
    out << r.step << ',' << r.epoch << ',' << to_string(r.tag) << ',' << r.pairs << ',' << loss
        << ',' << r.passes.fwd_policy << ',' << r.passes.fwd_ref << ',' << r.passes.bwd_policy
        << ',' << r.passes.bwd_ref << '\n';
  }
  return out.str();
}

ordered_json counters_summary(const RunConfig& config, const TrainResult& result) {
  ordered_json j;
  j["model"] = config.model_name;
  j["loss_variant"] = to_string(config.train.loss_variant);
  j["steps"] = result.trace.size();
  long pairs = 0;
  bool uniform = !result.trace.empty();
  for (const StepRecord& r : result.trace) {
    pairs += r.pairs;
    if (!r.uniform_passes || !(r.per_pair() == result.trace.front().per_pair())) uniform = false;
  }
  j["pairs"] = pairs;
  j["uniform_per_pair"] = uniform;
  j["per_pair"] = uniform ? counter_json(result.trace.front().per_pair()) : ordered_json(nullptr);
  j["totals"] = counter_json(result.totals);
  if (!result.trace.empty()) {
    j["first_step_loss"] = result.trace.front().loss;
    const int last_epoch = result.trace.back().epoch;
    double sum = 0;
    int n = 0;
    for (const StepRecord& r : result.trace) {
      if (r.epoch == last_epoch) {
        sum += r.loss;
        ++n;
      }
    }
    j["final_epoch_mean_loss"] = sum / n;
  }
  return j;
}

std::vector<NamedModel> load_models(const RunConfig& config) {
  std::vector<std::string> names = config.eval_models;
  if (names.empty()) {
    if (fs::exists(config.out_dir)) {
      for (const auto& entry : fs::directory_iterator(config.out_dir)) {
        if (entry.path().extension() == ".ckpt") names.push_back(entry.path().stem().string());
      }
    }
    std::sort(names.begin(), names.end());
    // The reference leads the table when present.
    auto it = std::find(names.begin(), names.end(), "reference");
    if (it != names.end()) std::rotate(names.begin(), it, it + 1);
  }
  if (names.empty()) throw IoError("no checkpoints in " + config.out_dir.string() + " (run `train` first)");
  std::vector<NamedModel> models;
  for (const std::string& name : names) {
    models.push_back({name, load_checkpoint(require(config.out_dir / (name + ".ckpt"), "train"))});
  }
  return models;
}

}  // namespace

int run_synth(const RunConfig& config, std::ostream& out) {
  const fs::path path = config.out_dir / "dataset.jsonl";
  const DatasetStats stats = write_dataset(path, assemble_dataset(config.synth));
  snapshot(config, "synth");
  out << "wrote " << path.string() << ": " << stats.records << " records over " << stats.scenes
      << " scenes, matched ratio " << stats.matched_ratio() << "\n";
  for (const auto& [task, n] : stats.per_task) out << "  " << task << ": " << n << "\n";
  return kExitOk;
}

int run_train(const RunConfig& config, std::ostream& out) {
  const PreferenceDataset dataset = read_dataset(require(config.out_dir / "dataset.jsonl", "synth"));
  const PolicyParams reference = warmup_reference(dataset, config.warmup);
  save_checkpoint(config.out_dir / "reference.ckpt", reference);
  out << "reference: " << config.warmup.steps << " warm-up steps, mean log pi(y_w) "
      << mean_chosen_logprob(reference, dataset) << "\n";

  const TrainResult result = train(dataset, reference, config.train);
  const std::string& name = config.model_name;
  save_checkpoint(config.out_dir / (name + ".ckpt"), result.params);
  write_text(config.out_dir / (name + ".loss.csv"), loss_trace_csv(result));
  const ordered_json counters = counters_summary(config, result);
  write_text(config.out_dir / (name + ".counters.json"), counters.dump(2) + "\n");
  snapshot(config, name);
  out << name << ": " << result.trace.size() << " steps, first-step loss "
      << counters.value("first_step_loss", 0.0) << ", final-epoch mean loss "
      << counters.value("final_epoch_mean_loss", 0.0) << "\n";
  return kExitOk;
}

int run_eval(const RunConfig& config, std::ostream& out) {
  const fs::path eval_path = config.out_dir / "eval.jsonl";
  const EvalSet set = assemble_eval_set(config.eval_set);
  write_eval_set(eval_path, set);
  const std::vector<NamedModel> models = load_models(config);
  const ComparisonReport report = compare(models, set.items, config.shift);
  write_text(config.out_dir / "metrics.csv", report.to_csv());
  write_text(config.out_dir / "metrics.txt", report.to_table());
  for (const NamedModel& m : models) {
    for (ShiftTarget which : {ShiftTarget::relevant, ShiftTarget::irrelevant}) {
      const ShiftStats stats = loglik_shift(m.params, set.items, config.shift, which);
      write_text(config.out_dir / "shift" / (m.name + "_" + std::string(to_string(which)) + ".csv"),
                 histogram_csv(stats));
    }
  }
  snapshot(config, "eval");
  out << report.to_table();
  return kExitOk;
}

int run_report(const RunConfig& config, std::ostream& out) {
  std::vector<fs::path> counter_files;
  if (fs::exists(config.out_dir)) {
    for (const auto& entry : fs::directory_iterator(config.out_dir)) {
      const std::string file = entry.path().filename().string();
      if (file.ends_with(".counters.json")) counter_files.push_back(entry.path());
    }
  }
  std::sort(counter_files.begin(), counter_files.end());
  const fs::path metrics = config.out_dir / "metrics.txt";
  if (counter_files.empty() && !fs::exists(metrics)) {
    throw IoError("nothing to report in " + config.out_dir.string() + " (run `train` / `eval` first)");
  }

  std::ostringstream text;
  if (!counter_files.empty()) {
    text << "Pass counters per pair (fwd_policy,fwd_ref,bwd_policy,bwd_ref)\n";
    for (const fs::path& path : counter_files) {
      ordered_json j;
      try {
        j = ordered_json::parse(read_text(path));
      } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
      }
      text << "  " << j.value("model", "?") << " [" << j.value("loss_variant", "?") << "] ";
      const ordered_json& pp = j["per_pair"];
      if (pp.is_object()) {
        text << pp["fwd_policy"].get<long>() << "," << pp["fwd_ref"].get<long>() << ","
             << pp["bwd_policy"].get<long>() << "," << pp["bwd_ref"].get<long>();
      } else {
        text << "varies by pair";
      }
      text << "  over " << j.value("steps", 0) << " steps\n";
    }
  }
  if (fs::exists(metrics)) {
    if (!counter_files.empty()) text << "\n";
    text << "Evaluation\n" << read_text(metrics);
  }
  write_text(config.out_dir / "report.txt", text.str());
  snapshot(config, "report");
  out << text.str();
  return kExitOk;
}

int run_verify(bool quick, const fs::path& scratch, std::ostream& out) {
  const AuditSizes sizes = quick ? AuditSizes::quick() : AuditSizes::full();
  const std::vector<SuiteResult> results = run_audit_suite(sizes, scratch);
  bool all = true;
  for (const SuiteResult& r : results) {
    out << (r.passed ? "PASS  " : "FAIL  ") << r.name << ": " << r.detail << "\n";
    all = all && r.passed;
  }
  out << (all ? "verify: all suites passed\n" : "verify: FAILED\n");
  return all ? kExitOk : kExitVerification;
}

}  // namespace moddpo
