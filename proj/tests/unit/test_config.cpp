#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "moddpo/config.hpp"
#include "moddpo/errors.hpp"

using namespace moddpo;
using nlohmann::ordered_json;

namespace {

std::filesystem::path write_config(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << text;
  return path;
}

}  // namespace

TEST_CASE("defaults") {
  const RunConfig cfg = load_run_config(std::nullopt, {});
  CHECK(cfg.seed == 1);
  CHECK(cfg.train.hp.beta == 0.1);
  CHECK(cfg.train.hp.beta_inv == 0.02);
  CHECK(cfg.train.hp.beta_sens == 0.05);
  CHECK(cfg.train.hp.gamma_lpd == 0.05);
  CHECK(cfg.train.lr == 3e-7);
  CHECK(cfg.train.loss_variant == LossVariant::modpp);
  CHECK(cfg.train.corruption.kind == CorruptionKind::diffusion);
  CHECK(cfg.train.corruption.t == 500);
  CHECK(cfg.train.alternate_batches);
  CHECK(cfg.synth.matched_ratio == 0.5);
  // Null section seeds inherit the global seed; the eval set is offset.
  CHECK(cfg.synth.seed == cfg.seed);
  CHECK(cfg.train.seed == cfg.seed);
  CHECK(cfg.warmup.seed == cfg.seed);
  CHECK(cfg.eval_set.seed == cfg.seed + 1000);
  CHECK(cfg.model_name == "modpp");
}

TEST_CASE("overrides") {
  const RunConfig cfg = load_run_config(
      std::nullopt, {"seed=7", "train.loss_variant=dpo", "train.hp.beta=0.2",
                     "train.corruption.kind=random_swap", "out_dir=somewhere", "synth.seed=3"});
  CHECK(cfg.seed == 7);
  CHECK(cfg.train.loss_variant == LossVariant::dpo);
  CHECK(cfg.train.hp.beta == 0.2);
  CHECK(cfg.train.corruption.kind == CorruptionKind::random_swap);
  CHECK(cfg.out_dir == "somewhere");
  CHECK(cfg.synth.seed == 3);
  CHECK(cfg.train.seed == 7);
  CHECK(cfg.eval_set.seed == 1007);
  CHECK(cfg.model_name == "dpo");

  ordered_json j = default_config_json();
  CHECK_THROWS_AS(apply_override(j, "train.hp.alpha=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(j, "no_equals_sign"), ConfigError);
  CHECK_THROWS_AS(apply_override(j, "=3"), ConfigError);
}

TEST_CASE("invalid values are configuration errors") {
  CHECK_THROWS_AS(load_run_config(std::nullopt, {"train.loss_variant=ipo"}), ConfigError);
  CHECK_THROWS_AS(load_run_config(std::nullopt, {"train.lr=\"fast\""}), ConfigError);
  CHECK_THROWS_AS(load_run_config(std::nullopt, {"train.corruption.t=2000"}), ConfigError);
  CHECK_THROWS_AS(load_run_config(std::nullopt, {"synth.matched_ratio=2"}), ConfigError);
  // beta + beta_inv - beta_sens must stay positive.
  CHECK_THROWS_AS(load_run_config(std::nullopt, {"train.hp.beta_sens=0.2"}), ConfigError);
}

TEST_CASE("config files") {
  const auto good = write_config("moddpo_unit_good.json",
                                 R"({"seed": 4, "train": {"epochs": 3, "hp": {"gamma_lpd": 0}}})");
  const RunConfig cfg = load_run_config(good, {"train.epochs=5"});
  CHECK(cfg.seed == 4);
  CHECK(cfg.train.epochs == 5);
  CHECK(cfg.train.hp.gamma_lpd == 0.0);
  CHECK(cfg.train.hp.beta == 0.1);

  const auto unknown = write_config("moddpo_unit_unknown.json", R"({"trian": {}})");
  CHECK_THROWS_AS(load_run_config(unknown, {}), ConfigError);
  const auto broken = write_config("moddpo_unit_broken.json", "{");
  CHECK_THROWS_AS(load_run_config(broken, {}), ConfigError);
  CHECK_THROWS_AS(load_run_config(std::filesystem::path("/nonexistent/moddpo.json"), {}),
                  IoError);
  for (const auto& p : {good, unknown, broken}) std::filesystem::remove(p);
}

TEST_CASE("resolved snapshot round trips") {
  const RunConfig cfg = load_run_config(
      std::nullopt, {"seed=9", "train.loss_variant=mod_with_av", "train.lpd_placement=outside",
                     "eval.shift.t=50", "eval.models=[\"reference\",\"modpp\"]"});
  const ordered_json snapshot = to_json(cfg);
  const RunConfig again = parse_run_config(snapshot);
  CHECK(to_json(again) == snapshot);
  CHECK(again.train.loss_variant == LossVariant::mod_with_av);
  CHECK(again.train.lpd_placement == LpdPlacement::outside);
  CHECK(again.shift.t == 50);
  CHECK(again.eval_models == std::vector<std::string>{"reference", "modpp"});
  CHECK(again.synth.seed == 9);
}
