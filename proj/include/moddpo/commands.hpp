#pragma once

// The five pipeline commands behind the CLI. Artifacts live in
// RunConfig::out_dir:
//   dataset.jsonl (+ .stats.json)            synth
//   reference.ckpt, <name>.ckpt,
//   <name>.loss.csv, <name>.counters.json     train
//   eval.jsonl, metrics.csv, metrics.txt,
//   shift/<model>_<relevant|irrelevant>.csv   eval
//   report.txt                                report
// Each command also writes <command>.resolved.json (train: <name>.resolved.json).

#include <filesystem>
#include <ostream>

#include "moddpo/config.hpp"

namespace moddpo {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitIo = 3,
  kExitVerification = 4,
  kExitConfig = 5,
};

int run_synth(const RunConfig& config, std::ostream& out);
int run_train(const RunConfig& config, std::ostream& out);
int run_eval(const RunConfig& config, std::ostream& out);
int run_report(const RunConfig& config, std::ostream& out);
// Runs the oracle suite in `scratch`; returns kExitVerification on any failure.
int run_verify(bool quick, const std::filesystem::path& scratch, std::ostream& out);

}  // namespace moddpo
