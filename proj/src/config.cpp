#include "moddpo/config.hpp"

#include <fstream>

#include "moddpo/errors.hpp"

namespace moddpo {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json corruption_json(const CorruptionSpec& c) {
  return ordered_json{{"kind", to_string(c.kind)}, {"t", c.t}, {"sigma", c.sigma}, {"seed", c.seed}};
}

CorruptionSpec corruption_from(const ordered_json& j) {
  CorruptionSpec c;
  c.kind = corruption_kind_from_string(j.at("kind").get<std::string>());
  c.t = j.at("t").get<int>();
  c.sigma = j.at("sigma").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

// Every key of `given` must exist in `schema`; objects are checked
// recursively, everything else is taken as a leaf.
void check_keys(const ordered_json& given, const ordered_json& schema, const std::string& where) {
  if (!given.is_object()) return;
  if (!schema.is_object()) throw ConfigError("config: '" + where + "' is not a section");
  for (const auto& [key, value] : given.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!schema.contains(key)) throw ConfigError("config: unknown key '" + path + "'");
    if (schema.at(key).is_object()) {
      if (!value.is_object()) throw ConfigError("config: '" + path + "' must be a section");
      check_keys(value, schema.at(key), path);
    }
  }
}

void merge(ordered_json& base, const ordered_json& patch) {
  for (const auto& [key, value] : patch.items()) {
    if (value.is_object() && base.contains(key) && base[key].is_object()) {
      merge(base[key], value);
    } else {
      base[key] = value;
    }
  }
}

std::uint64_t seed_or(const ordered_json& j, std::uint64_t fallback) {
  return j.is_null() ? fallback : j.get<std::uint64_t>();
}

}  // namespace

void RunConfig::validate() const {
  if (out_dir.empty()) throw ConfigError("config: out_dir must be set");
  synth.validate();
  train.validate();
  warmup.validate();
  eval_set.validate();
  shift.validate();
  if (model_name.empty() || model_name.find('/') != std::string::npos) {
    throw ConfigError("config: train.name must be a plain file stem");
  }
}

ordered_json default_config_json() {
  const SynthConfig s;
  const TrainConfig t;
  const WarmupConfig w;
  const EvalSetConfig e;
  CorruptionSpec shift;
  shift.seed = 3;
  const WorldConfig& wc = s.world;
  ordered_json j;
  j["seed"] = 1;
  j["out_dir"] = "runs/default";
  j["synth"] = {
      {"num_records", s.num_records},
      {"num_scenes", s.num_scenes},
      {"matched_ratio", s.matched_ratio},
      {"seed", nullptr},
      {"mix",
       {{"visual_presence", s.mix.visual_presence},
        {"audio_presence", s.mix.audio_presence},
        {"visual_caption", s.mix.visual_caption},
        {"audio_caption", s.mix.audio_caption},
        {"audiovisual_caption", s.mix.audiovisual_caption}}},
      {"world",
       {{"num_entities", wc.num_entities},
        {"num_pure_sounds", wc.num_pure_sounds},
        {"audio_dim", wc.audio_dim},
        {"visual_dim", wc.visual_dim},
        {"vocab", wc.vocab},
        {"min_entities", wc.min_entities},
        {"max_entities", wc.max_entities},
        {"feature_noise", wc.feature_noise},
        {"p_visible_and_sounding", wc.p_visible_and_sounding},
        {"p_visible_only", wc.p_visible_only},
        {"p_pure_sound_in_view", wc.p_pure_sound_in_view},
        {"seed", wc.seed}}}};
  j["train"] = {
      {"name", nullptr},
      {"loss_variant", to_string(t.loss_variant)},
      {"lr", t.lr},
      {"epochs", t.epochs},
      {"batch_size", t.batch_size},
      {"seed", nullptr},
      {"alternate_batches", t.alternate_batches},
      {"lpd_placement", to_string(t.lpd_placement)},
      {"hidden", w.hidden},
      {"hp",
       {{"beta", t.hp.beta},
        {"beta_inv", t.hp.beta_inv},
        {"beta_sens", t.hp.beta_sens},
        {"gamma_lpd", t.hp.gamma_lpd},
        {"tau_mode", to_string(t.hp.tau_mode)}}},
      {"corruption", corruption_json(t.corruption)},
      {"warmup",
       {{"steps", w.steps},
        {"batch_size", w.batch_size},
        {"lr", w.lr},
        {"init_scale", w.init_scale},
        {"matched_only", w.matched_only},
        {"seed", nullptr}}}};
  j["eval"] = {{"num_items", e.num_items},
               {"num_scenes", e.num_scenes},
               {"seed", nullptr},
               {"models", ordered_json::array()},
               {"shift", corruption_json(shift)}};
  return j;
}

void apply_override(ordered_json& config, std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  ordered_json value;
  try {
    value = ordered_json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;
  }
  ordered_json* node = &config;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty() || !node->is_object() || !node->contains(part)) {
      throw ConfigError("override: unknown key '" + key + "'");
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw ConfigError("override: '" + key + "' names a section");
  *node = std::move(value);
}

RunConfig parse_run_config(const ordered_json& j) {
  check_keys(j, default_config_json(), "");
  RunConfig c;
  try {
    c.seed = j.at("seed").get<std::uint64_t>();
    c.out_dir = j.at("out_dir").get<std::string>();

    const ordered_json& s = j.at("synth");
    c.synth.num_records = s.at("num_records").get<int>();
    c.synth.num_scenes = s.at("num_scenes").get<int>();
    c.synth.matched_ratio = s.at("matched_ratio").get<double>();
    c.synth.seed = seed_or(s.at("seed"), c.seed);
    const ordered_json& mix = s.at("mix");
    c.synth.mix.visual_presence = mix.at("visual_presence").get<double>();
    c.synth.mix.audio_presence = mix.at("audio_presence").get<double>();
    c.synth.mix.visual_caption = mix.at("visual_caption").get<double>();
    c.synth.mix.audio_caption = mix.at("audio_caption").get<double>();
    c.synth.mix.audiovisual_caption = mix.at("audiovisual_caption").get<double>();
    const ordered_json& w = s.at("world");
    WorldConfig& wc = c.synth.world;
    wc.num_entities = w.at("num_entities").get<int>();
    wc.num_pure_sounds = w.at("num_pure_sounds").get<int>();
    wc.audio_dim = w.at("audio_dim").get<int>();
    wc.visual_dim = w.at("visual_dim").get<int>();
    wc.vocab = w.at("vocab").get<int>();
    wc.min_entities = w.at("min_entities").get<int>();
    wc.max_entities = w.at("max_entities").get<int>();
    wc.feature_noise = w.at("feature_noise").get<double>();
    wc.p_visible_and_sounding = w.at("p_visible_and_sounding").get<double>();
    wc.p_visible_only = w.at("p_visible_only").get<double>();
    wc.p_pure_sound_in_view = w.at("p_pure_sound_in_view").get<double>();
    wc.seed = w.at("seed").get<std::uint64_t>();

    const ordered_json& t = j.at("train");
    c.train.loss_variant = loss_variant_from_string(t.at("loss_variant").get<std::string>());
    c.model_name = t.at("name").is_null() ? std::string(to_string(c.train.loss_variant))
                                          : t.at("name").get<std::string>();
    c.train.lr = t.at("lr").get<double>();
    c.train.epochs = t.at("epochs").get<int>();
    c.train.batch_size = t.at("batch_size").get<int>();
    c.train.seed = seed_or(t.at("seed"), c.seed);
    c.train.alternate_batches = t.at("alternate_batches").get<bool>();
    c.train.lpd_placement = lpd_placement_from_string(t.at("lpd_placement").get<std::string>());
    const ordered_json& hp = t.at("hp");
    c.train.hp.beta = hp.at("beta").get<double>();
    c.train.hp.beta_inv = hp.at("beta_inv").get<double>();
    c.train.hp.beta_sens = hp.at("beta_sens").get<double>();
    c.train.hp.gamma_lpd = hp.at("gamma_lpd").get<double>();
    c.train.hp.tau_mode = tau_mode_from_string(hp.at("tau_mode").get<std::string>());
    c.train.corruption = corruption_from(t.at("corruption"));
    const ordered_json& wu = t.at("warmup");
    c.warmup.steps = wu.at("steps").get<int>();
    c.warmup.batch_size = wu.at("batch_size").get<int>();
    c.warmup.lr = wu.at("lr").get<double>();
    c.warmup.init_scale = wu.at("init_scale").get<double>();
    c.warmup.matched_only = wu.at("matched_only").get<bool>();
    c.warmup.seed = seed_or(wu.at("seed"), c.seed);
    c.warmup.hidden = t.at("hidden").get<int>();

    const ordered_json& e = j.at("eval");
    c.eval_set.world = c.synth.world;
    c.eval_set.num_items = e.at("num_items").get<int>();
    c.eval_set.num_scenes = e.at("num_scenes").get<int>();
    c.eval_set.seed = seed_or(e.at("seed"), c.seed + 1000);
    c.eval_models = e.at("models").get<std::vector<std::string>>();
    c.shift = corruption_from(e.at("shift"));
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  }
  c.validate();
  return c;
}

ordered_json to_json(const RunConfig& c) {
  ordered_json j = default_config_json();
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir.string();
  auto& s = j["synth"];
  s["num_records"] = c.synth.num_records;
  s["num_scenes"] = c.synth.num_scenes;
  s["matched_ratio"] = c.synth.matched_ratio;
  s["seed"] = c.synth.seed;
  s["mix"]["visual_presence"] = c.synth.mix.visual_presence;
  s["mix"]["audio_presence"] = c.synth.mix.audio_presence;
  s["mix"]["visual_caption"] = c.synth.mix.visual_caption;
  s["mix"]["audio_caption"] = c.synth.mix.audio_caption;
  s["mix"]["audiovisual_caption"] = c.synth.mix.audiovisual_caption;
  const WorldConfig& wc = c.synth.world;
  s["world"] = {{"num_entities", wc.num_entities},
                {"num_pure_sounds", wc.num_pure_sounds},
                {"audio_dim", wc.audio_dim},
                {"visual_dim", wc.visual_dim},
                {"vocab", wc.vocab},
                {"min_entities", wc.min_entities},
                {"max_entities", wc.max_entities},
                {"feature_noise", wc.feature_noise},
                {"p_visible_and_sounding", wc.p_visible_and_sounding},
                {"p_visible_only", wc.p_visible_only},
                {"p_pure_sound_in_view", wc.p_pure_sound_in_view},
                {"seed", wc.seed}};
  auto& t = j["train"];
  t["name"] = c.model_name;
  t["loss_variant"] = to_string(c.train.loss_variant);
  t["lr"] = c.train.lr;
  t["epochs"] = c.train.epochs;
  t["batch_size"] = c.train.batch_size;
  t["seed"] = c.train.seed;
  t["alternate_batches"] = c.train.alternate_batches;
  t["lpd_placement"] = to_string(c.train.lpd_placement);
  t["hidden"] = c.warmup.hidden;
  t["hp"] = {{"beta", c.train.hp.beta},
             {"beta_inv", c.train.hp.beta_inv},
             {"beta_sens", c.train.hp.beta_sens},
             {"gamma_lpd", c.train.hp.gamma_lpd},
             {"tau_mode", to_string(c.train.hp.tau_mode)}};
  t["corruption"] = corruption_json(c.train.corruption);
  t["warmup"] = {{"steps", c.warmup.steps},
                 {"batch_size", c.warmup.batch_size},
                 {"lr", c.warmup.lr},
                 {"init_scale", c.warmup.init_scale},
                 {"matched_only", c.warmup.matched_only},
                 {"seed", c.warmup.seed}};
  auto& e = j["eval"];
  e["num_items"] = c.eval_set.num_items;
  e["num_scenes"] = c.eval_set.num_scenes;
  e["seed"] = c.eval_set.seed;
  e["models"] = c.eval_models;
  e["shift"] = corruption_json(c.shift);
  return j;
}

ordered_json resolve_config_json(const std::optional<std::filesystem::path>& path,
                                 const std::vector<std::string>& overrides) {
  ordered_json config = default_config_json();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw IoError("cannot read config " + path->string());
    ordered_json file;
    try {
      file = ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("config " + path->string() + ": " + e.what());
    }
    check_keys(file, config, "");
    merge(config, file);
  }
  for (const std::string& o : overrides) apply_override(config, o);
  return config;
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& path,
                          const std::vector<std::string>& overrides) {
  return parse_run_config(resolve_config_json(path, overrides));
}

}  // namespace moddpo
