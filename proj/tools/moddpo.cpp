// moddpo: synth -> train -> eval -> report pipeline and the oracle `verify` suite.

#include <unistd.h>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "moddpo/commands.hpp"
#include "moddpo/config.hpp"
#include "moddpo/errors.hpp"

namespace {

using namespace moddpo;

struct Invocation {
  std::string config_path;
  std::vector<std::string> sets;
  std::vector<std::string> positional;
  bool quick = false;
  std::string scratch;
};

RunConfig resolve(const Invocation& inv) {
  std::optional<std::filesystem::path> path;
  if (!inv.config_path.empty()) path = inv.config_path;
  std::vector<std::string> overrides = inv.sets;
  overrides.insert(overrides.end(), inv.positional.begin(), inv.positional.end());
  return load_run_config(path, overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Modality-decoupled preference optimization lab"};
  app.require_subcommand(1);
  app.fallthrough();
  Invocation inv;
  app.add_option("-c,--config", inv.config_path, "JSON run configuration")
      ->envname(kConfigEnvVar);
  app.add_option("--set", inv.sets, "Override a config value: dotted.key=value (repeatable)")
      ->allow_extra_args(false);
  app.footer(
      "Exit codes: 0 ok, 1 runtime failure, 2 usage error, 3 missing or unreadable input,\n"
      "            4 verification failed, 5 invalid configuration");

  const auto add_pipeline_command = [&](const char* name, const char* help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("overrides", inv.positional, "dotted.key=value overrides");
    return sub;
  };
  CLI::App* synth = add_pipeline_command("synth", "Generate the preference dataset");
  CLI::App* train = add_pipeline_command("train", "Warm up the reference and train a policy");
  CLI::App* eval = add_pipeline_command("eval", "Score checkpoints on the synthetic benchmark");
  CLI::App* report = add_pipeline_command("report", "Summarize counters and metrics");
  CLI::App* verify = app.add_subcommand("verify", "Run the oracle audit suite");
  verify->add_flag("--quick", inv.quick, "Smaller instance counts");
  verify->add_option("--scratch", inv.scratch, "Directory for temporary dataset files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (verify->parsed()) {
      std::filesystem::path scratch = inv.scratch;
      if (scratch.empty()) {
        scratch = std::filesystem::temp_directory_path() /
                  ("moddpo-verify-" + std::to_string(::getpid()));
      }
      const int code = run_verify(inv.quick, scratch, std::cout);
      std::filesystem::remove_all(scratch);
      return code;
    }
    const RunConfig config = resolve(inv);
    if (synth->parsed()) return run_synth(config, std::cout);
    if (train->parsed()) return run_train(config, std::cout);
    if (eval->parsed()) return run_eval(config, std::cout);
    if (report->parsed()) return run_report(config, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
