#include "moddpo/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "moddpo/errors.hpp"
#include "moddpo/rng.hpp"

namespace moddpo {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kDatasetFormat = "moddpo-preferences";
constexpr int kDatasetVersion = 1;
constexpr int kMaxSampleAttempts = 10000;

bool contains(const std::vector<int>& ids, int id) {
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

std::vector<Eigen::VectorXd> make_signatures(int count, int dim, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::VectorXd> sigs;
  sigs.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = normal(gen);
    // Gram-Schmidt while the catalog fits in the feature space.
    if (k < dim) {
      for (const Eigen::VectorXd& prev : sigs) v -= prev.dot(v) * prev;
    }
    v.normalize();
    sigs.push_back(std::move(v));
  }
  return sigs;
}

int min_or(const std::vector<int>& ids, int fallback) {
  return ids.empty() ? fallback : *std::min_element(ids.begin(), ids.end());
}

std::vector<int> objects_only(const World& world, std::vector<int> ids) {
  std::erase_if(ids, [&](int id) { return world.kind_of(id) != EntityKind::object; });
  return ids;
}

int next_caption(const World& world, int token) {
  const int captions = world.config().vocab - kFirstCaptionToken;
  return kFirstCaptionToken + (token - kFirstCaptionToken + 1) % captions;
}

ordered_json vector_to_json(const Eigen::VectorXd& v) {
  ordered_json arr = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const ordered_json& arr) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

ordered_json world_to_json(const WorldConfig& w) {
  ordered_json j;
  j["num_entities"] = w.num_entities;
  j["num_pure_sounds"] = w.num_pure_sounds;
  j["audio_dim"] = w.audio_dim;
  j["visual_dim"] = w.visual_dim;
  j["vocab"] = w.vocab;
  j["min_entities"] = w.min_entities;
  j["max_entities"] = w.max_entities;
  j["feature_noise"] = w.feature_noise;
  j["p_visible_and_sounding"] = w.p_visible_and_sounding;
  j["p_visible_only"] = w.p_visible_only;
  j["p_pure_sound_in_view"] = w.p_pure_sound_in_view;
  j["seed"] = w.seed;
  return j;
}

WorldConfig world_from_json(const ordered_json& j) {
  WorldConfig w;
  w.num_entities = j.at("num_entities").get<int>();
  w.num_pure_sounds = j.at("num_pure_sounds").get<int>();
  w.audio_dim = j.at("audio_dim").get<int>();
  w.visual_dim = j.at("visual_dim").get<int>();
  w.vocab = j.at("vocab").get<int>();
  w.min_entities = j.at("min_entities").get<int>();
  w.max_entities = j.at("max_entities").get<int>();
  w.feature_noise = j.at("feature_noise").get<double>();
  w.p_visible_and_sounding = j.at("p_visible_and_sounding").get<double>();
  w.p_visible_only = j.at("p_visible_only").get<double>();
  w.p_pure_sound_in_view = j.at("p_pure_sound_in_view").get<double>();
  w.seed = j.at("seed").get<std::uint64_t>();
  return w;
}

ordered_json header_to_json(const DatasetHeader& h) {
  ordered_json j;
  j["format"] = kDatasetFormat;
  j["version"] = kDatasetVersion;
  j["kind"] = h.kind;
  j["scene_seed"] = h.scene_seed;
  j["num_scenes"] = h.num_scenes;
  j["world"] = world_to_json(h.world);
  return j;
}

DatasetHeader header_from_json(const ordered_json& j) {
  if (j.value("format", "") != kDatasetFormat) throw IoError("dataset: missing header line");
  if (j.at("version").get<int>() != kDatasetVersion) {
    throw IoError("dataset: unsupported version");
  }
  DatasetHeader h;
  h.kind = j.at("kind").get<std::string>();
  h.scene_seed = j.at("scene_seed").get<std::uint64_t>();
  h.num_scenes = j.at("num_scenes").get<int>();
  h.world = world_from_json(j.at("world"));
  h.world.validate();
  return h;
}

// Field order of a record line is part of the file format.
ordered_json pair_to_json(const PreferencePair& p) {
  ordered_json j;
  j["visual_scene"] = p.visual_scene;
  j["audio_scene"] = p.audio_scene;
  j["question_kind"] = to_string(p.question_kind);
  j["prompt_id"] = p.context.prompt_id;
  j["modality_tag"] = to_string(p.context.tag);
  j["matched"] = p.matched;
  j["chosen"] = p.chosen;
  j["rejected"] = p.rejected;
  j["audio"] = vector_to_json(p.context.audio);
  j["visual"] = vector_to_json(p.context.visual);
  return j;
}

PreferencePair pair_from_json(const ordered_json& j) {
  PreferencePair p;
  p.visual_scene = j.at("visual_scene").get<int>();
  p.audio_scene = j.at("audio_scene").get<int>();
  p.question_kind = question_kind_from_string(j.at("question_kind").get<std::string>());
  p.context.prompt_id = j.at("prompt_id").get<int>();
  p.context.tag = modality_tag_from_string(j.at("modality_tag").get<std::string>());
  p.matched = j.at("matched").get<bool>();
  p.chosen = j.at("chosen").get<int>();
  p.rejected = j.at("rejected").get<int>();
  p.context.audio = vector_from_json(j.at("audio"));
  p.context.visual = vector_from_json(j.at("visual"));
  return p;
}

template <class Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    fn(number, line);
  }
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

PreferencePair make_pair_record(const World& world, const Scene& visual, const Scene& audio,
                                QuestionKind kind, int entity, int chosen, int rejected) {
  PreferencePair p;
  p.question_kind = kind;
  p.context.audio = audio.audio_feat;
  p.context.visual = visual.visual_feat;
  p.context.tag = modality_tag_for(kind);
  p.context.prompt_id =
      is_presence(kind) ? world.presence_prompt(kind, entity) : world.caption_prompt(kind);
  p.chosen = chosen;
  p.rejected = rejected;
  p.visual_scene = visual.scene_id;
  p.audio_scene = audio.scene_id;
  p.matched = visual.scene_id == audio.scene_id;
  return p;
}

// Picks two scene indices: equal when matched, distinct otherwise.
std::pair<int, int> pick_scenes(int num_scenes, bool matched, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, num_scenes - 1);
  const int v = pick(rng);
  if (matched) return {v, v};
  std::uniform_int_distribution<int> other(0, num_scenes - 2);
  int a = other(rng);
  if (a >= v) ++a;
  return {v, a};
}

}  // namespace

std::string_view to_string(EntityCategory category) {
  switch (category) {
    case EntityCategory::in_view_sound_source: return "in_view_sound_source";
    case EntityCategory::in_view_sound: return "in_view_sound";
    case EntityCategory::in_view_silent_object: return "in_view_silent_object";
    case EntityCategory::out_of_view_sound_source: return "out_of_view_sound_source";
    case EntityCategory::out_of_view_sound: return "out_of_view_sound";
  }
  return "unknown";
}

std::string_view to_string(QuestionKind kind) {
  switch (kind) {
    case QuestionKind::visual_presence: return "visual_presence";
    case QuestionKind::audio_presence: return "audio_presence";
    case QuestionKind::visual_caption: return "visual_caption";
    case QuestionKind::audio_caption: return "audio_caption";
    case QuestionKind::audiovisual_caption: return "audiovisual_caption";
  }
  return "unknown";
}

std::string_view to_string(Answer answer) { return answer == Answer::yes ? "yes" : "no"; }

QuestionKind question_kind_from_string(std::string_view name) {
  for (QuestionKind k : {QuestionKind::visual_presence, QuestionKind::audio_presence,
                         QuestionKind::visual_caption, QuestionKind::audio_caption,
                         QuestionKind::audiovisual_caption}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown question kind '" + std::string(name) + "'");
}

Answer answer_from_string(std::string_view name) {
  if (name == "yes") return Answer::yes;
  if (name == "no") return Answer::no;
  throw ConfigError("unknown answer '" + std::string(name) + "'");
}

ModalityTag modality_tag_for(QuestionKind kind) {
  switch (kind) {
    case QuestionKind::visual_presence:
    case QuestionKind::visual_caption: return ModalityTag::visual_related;
    case QuestionKind::audio_presence:
    case QuestionKind::audio_caption: return ModalityTag::audio_related;
    case QuestionKind::audiovisual_caption: return ModalityTag::audiovisual;
  }
  return ModalityTag::audiovisual;
}

bool is_presence(QuestionKind kind) {
  return kind == QuestionKind::visual_presence || kind == QuestionKind::audio_presence;
}

EntityCategory classify_entity(const Entity& e, EntityKind kind) {
  if (kind == EntityKind::object) {
    if (e.visible && e.sounding) return EntityCategory::in_view_sound_source;
    if (e.visible) return EntityCategory::in_view_silent_object;
    if (e.sounding) return EntityCategory::out_of_view_sound_source;
    throw ContractError("classify_entity: object is neither visible nor sounding");
  }
  if (!e.sounding) throw ContractError("classify_entity: a pure sound must be sounding");
  return e.visible ? EntityCategory::in_view_sound : EntityCategory::out_of_view_sound;
}

std::optional<Answer> answer_for(EntityCategory category, QuestionKind question) {
  if (question == QuestionKind::visual_presence) {
    switch (category) {
      case EntityCategory::in_view_sound_source: return Answer::yes;
      case EntityCategory::out_of_view_sound_source:
      case EntityCategory::out_of_view_sound: return Answer::no;
      default: return std::nullopt;
    }
  }
  if (question == QuestionKind::audio_presence) {
    switch (category) {
      case EntityCategory::in_view_sound_source:
      case EntityCategory::in_view_sound: return Answer::yes;
      case EntityCategory::in_view_silent_object: return Answer::no;
      default: return std::nullopt;
    }
  }
  return std::nullopt;
}

int answer_token(Answer answer) { return answer == Answer::yes ? kYesToken : kNoToken; }

void WorldConfig::validate() const {
  if (num_entities < 1 || num_pure_sounds < 0 || num_pure_sounds > num_entities) {
    throw ConfigError("world: need 0 <= num_pure_sounds <= num_entities and num_entities >= 1");
  }
  if (audio_dim < 1 || visual_dim < 1) throw ConfigError("world: feature dims must be positive");
  if (vocab < kFirstCaptionToken + 1) throw ConfigError("world: vocab must hold yes, no and a caption");
  if (min_entities < 1 || max_entities < min_entities) {
    throw ConfigError("world: need 1 <= min_entities <= max_entities");
  }
  if (!(feature_noise >= 0)) throw ConfigError("world: feature_noise must be >= 0");
  if (!(p_visible_and_sounding >= 0 && p_visible_only >= 0 &&
        p_visible_and_sounding + p_visible_only <= 1 && p_pure_sound_in_view >= 0 &&
        p_pure_sound_in_view <= 1)) {
    throw ConfigError("world: flag probabilities must form a distribution");
  }
}

std::vector<int> WorldOracleAnnotator::visible_entities(const Scene& scene) const {
  std::vector<int> ids;
  for (const Entity& e : scene.entities)
    if (e.visible) ids.push_back(e.entity_id);
  return ids;
}

std::vector<int> WorldOracleAnnotator::sounding_entities(const Scene& scene) const {
  std::vector<int> ids;
  for (const Entity& e : scene.entities)
    if (e.sounding) ids.push_back(e.entity_id);
  return ids;
}

World::World(WorldConfig config) : config_(config) {
  config_.validate();
  audio_sigs_ = make_signatures(config_.num_entities, config_.audio_dim,
                                derive_seed(config_.seed, {1}));
  visual_sigs_ = make_signatures(config_.num_entities, config_.visual_dim,
                                 derive_seed(config_.seed, {2}));
}

EntityKind World::kind_of(int entity_id) const {
  if (entity_id < 0 || entity_id >= config_.num_entities) {
    throw DimensionError("unknown entity id " + std::to_string(entity_id));
  }
  return entity_id >= config_.num_entities - config_.num_pure_sounds ? EntityKind::pure_sound
                                                                      : EntityKind::object;
}

const Eigen::VectorXd& World::audio_signature(int entity_id) const {
  kind_of(entity_id);
  return audio_sigs_[static_cast<std::size_t>(entity_id)];
}

const Eigen::VectorXd& World::visual_signature(int entity_id) const {
  kind_of(entity_id);
  return visual_sigs_[static_cast<std::size_t>(entity_id)];
}

Scene World::make_scene(std::uint64_t scene_seed, int scene_id) const {
  std::mt19937_64 rng(derive_seed(config_.seed, {scene_seed, static_cast<std::uint64_t>(scene_id)}));
  const int upper = std::min(config_.max_entities, config_.num_entities);
  const int lower = std::min(config_.min_entities, upper);
  const int count = std::uniform_int_distribution<int>(lower, upper)(rng);

  std::vector<int> ids(static_cast<std::size_t>(config_.num_entities));
  std::iota(ids.begin(), ids.end(), 0);
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(static_cast<std::size_t>(count));
  std::sort(ids.begin(), ids.end());

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Scene scene;
  scene.scene_id = scene_id;
  for (int id : ids) {
    Entity e{id, false, false};
    const double u = unit(rng);
    if (kind_of(id) == EntityKind::object) {
      e.visible = u < config_.p_visible_and_sounding + config_.p_visible_only;
      e.sounding = u < config_.p_visible_and_sounding ||
                   u >= config_.p_visible_and_sounding + config_.p_visible_only;
    } else {
      e.sounding = true;
      e.visible = u < config_.p_pure_sound_in_view;
    }
    scene.entities.push_back(e);
  }

  std::normal_distribution<double> noise(0.0, config_.feature_noise > 0 ? config_.feature_noise : 1.0);
  const double noise_scale = config_.feature_noise > 0 ? 1.0 : 0.0;
  scene.audio_feat = Eigen::VectorXd::Zero(config_.audio_dim);
  scene.visual_feat = Eigen::VectorXd::Zero(config_.visual_dim);
  for (const Entity& e : scene.entities) {
    if (e.sounding) scene.audio_feat += audio_signature(e.entity_id);
    if (e.visible && kind_of(e.entity_id) == EntityKind::object) {
      scene.visual_feat += visual_signature(e.entity_id);
    }
  }
  for (Eigen::Index i = 0; i < scene.audio_feat.size(); ++i) scene.audio_feat[i] += noise_scale * noise(rng);
  for (Eigen::Index i = 0; i < scene.visual_feat.size(); ++i) scene.visual_feat[i] += noise_scale * noise(rng);
  return scene;
}

std::vector<Entity> World::context_entities(const Scene& visual, const Scene& audio,
                                            const Annotator& annotator) const {
  const std::vector<int> seen = annotator.visible_entities(visual);
  const std::vector<int> heard = annotator.sounding_entities(audio);
  std::set<int> ids(seen.begin(), seen.end());
  ids.insert(heard.begin(), heard.end());
  std::vector<Entity> out;
  for (int id : ids) {
    Entity e{id, contains(seen, id), contains(heard, id)};
    // An in-view sound whose audio stream is missing is not an entity of
    // this context.
    if (kind_of(id) == EntityKind::pure_sound && !e.sounding) continue;
    out.push_back(e);
  }
  return out;
}

int World::presence_prompt(QuestionKind kind, int entity_id) const {
  kind_of(entity_id);
  if (kind == QuestionKind::visual_presence) return entity_id;
  if (kind == QuestionKind::audio_presence) return config_.num_entities + entity_id;
  throw ContractError("presence_prompt: not a presence question");
}

int World::caption_prompt(QuestionKind kind) const {
  const int base = 2 * config_.num_entities;
  switch (kind) {
    case QuestionKind::visual_caption: return base;
    case QuestionKind::audio_caption: return base + 1;
    case QuestionKind::audiovisual_caption: return base + 2;
    default: throw ContractError("caption_prompt: not a caption question");
  }
}

std::pair<QuestionKind, int> World::decode_prompt(int prompt_id) const {
  const int k = config_.num_entities;
  if (prompt_id < 0 || prompt_id >= num_prompts()) {
    throw DimensionError("prompt id " + std::to_string(prompt_id) + " outside the table");
  }
  if (prompt_id < k) return {QuestionKind::visual_presence, prompt_id};
  if (prompt_id < 2 * k) return {QuestionKind::audio_presence, prompt_id - k};
  static constexpr QuestionKind captions[] = {QuestionKind::visual_caption,
                                              QuestionKind::audio_caption,
                                              QuestionKind::audiovisual_caption};
  return {captions[prompt_id - 2 * k], -1};
}

int World::caption_token(int entity_id) const {
  kind_of(entity_id);
  return kFirstCaptionToken + entity_id % (config_.vocab - kFirstCaptionToken);
}

PolicyConfig World::policy_config(int hidden) const {
  return PolicyConfig{config_.vocab, hidden, config_.audio_dim, config_.visual_dim,
                      num_prompts()};
}

std::optional<int> oracle_answer(const World& world, const Scene& visual, const Scene& audio,
                                 QuestionKind kind, int entity_id,
                                 const Annotator& annotator) {
  if (is_presence(kind)) {
    for (const Entity& e : world.context_entities(visual, audio, annotator)) {
      if (e.entity_id != entity_id) continue;
      const auto answer = answer_for(classify_entity(e, world.kind_of(e.entity_id)), kind);
      if (!answer) return std::nullopt;
      return answer_token(*answer);
    }
    return std::nullopt;
  }
  const std::vector<int> seen = objects_only(world, annotator.visible_entities(visual));
  const std::vector<int> heard = annotator.sounding_entities(audio);
  int entity = -1;
  switch (kind) {
    case QuestionKind::visual_caption: entity = min_or(seen, -1); break;
    case QuestionKind::audio_caption: entity = min_or(heard, -1); break;
    case QuestionKind::audiovisual_caption:
      entity = std::min(min_or(seen, world.config().num_entities),
                        min_or(heard, world.config().num_entities));
      if (entity == world.config().num_entities) entity = -1;
      break;
    default: break;
  }
  if (entity < 0) return std::nullopt;
  return world.caption_token(entity);
}

std::optional<int> hard_negative(const World& world, const Scene& visual, const Scene& audio,
                                 QuestionKind kind, int entity_id,
                                 const Annotator& annotator) {
  const std::optional<int> truth = oracle_answer(world, visual, audio, kind, entity_id, annotator);
  if (!truth) return std::nullopt;
  const std::vector<int> seen = objects_only(world, annotator.visible_entities(visual));
  const std::vector<int> heard = annotator.sounding_entities(audio);

  auto invert_answer = [&](int token) {
    return token == *truth ? (token == kYesToken ? kNoToken : kYesToken) : token;
  };
  auto other_caption = [&](int entity) {
    const int token = entity < 0 ? *truth : world.caption_token(entity);
    return token == *truth ? next_caption(world, *truth) : token;
  };

  switch (kind) {
    case QuestionKind::visual_presence:
      return invert_answer(contains(heard, entity_id) ? kYesToken : kNoToken);
    case QuestionKind::audio_presence:
      return invert_answer(contains(annotator.visible_entities(visual), entity_id) ? kYesToken
                                                                                    : kNoToken);
    case QuestionKind::visual_caption: return other_caption(min_or(heard, -1));
    case QuestionKind::audio_caption: return other_caption(min_or(seen, -1));
    case QuestionKind::audiovisual_caption: {
      // A summary of only one stream: the one that lost the union's minimum.
      const int a = min_or(seen, -1);
      const int b = min_or(heard, -1);
      return other_caption(std::max(a, b));
    }
  }
  return std::nullopt;
}

std::optional<PreferencePair> build_pair(const World& world, const Scene& visual_scene,
                                         const Scene& audio_scene, QuestionKind kind,
                                         std::mt19937_64& rng, const Annotator& annotator) {
  int entity = -1;
  if (is_presence(kind)) {
    std::vector<int> eligible;
    for (const Entity& e : world.context_entities(visual_scene, audio_scene, annotator)) {
      if (answer_for(classify_entity(e, world.kind_of(e.entity_id)), kind)) {
        eligible.push_back(e.entity_id);
      }
    }
    if (eligible.empty()) return std::nullopt;
    std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
    entity = eligible[pick(rng)];
  }
  const auto chosen = oracle_answer(world, visual_scene, audio_scene, kind, entity, annotator);
  const auto rejected = hard_negative(world, visual_scene, audio_scene, kind, entity, annotator);
  if (!chosen || !rejected) return std::nullopt;
  return make_pair_record(world, visual_scene, audio_scene, kind, entity, *chosen, *rejected);
}

void SynthConfig::validate() const {
  world.validate();
  if (num_records < 0) throw ConfigError("synth: num_records must be >= 0");
  if (num_scenes < 1) throw ConfigError("synth: infeasible config, num_scenes must be >= 1");
  if (!(matched_ratio >= 0 && matched_ratio <= 1)) {
    throw ConfigError("synth: matched_ratio must lie in [0, 1]");
  }
  if (matched_ratio < 1 && num_scenes < 2 && num_records > 0) {
    throw ConfigError("synth: mismatched contexts need at least two scenes");
  }
  const auto w = mix.weights();
  double total = 0;
  for (double x : w) {
    if (!(x >= 0)) throw ConfigError("synth: task mix weights must be >= 0");
    total += x;
  }
  if (!(total > 0)) throw ConfigError("synth: task mix must have positive total weight");
}

DatasetStats compute_stats(const PreferenceDataset& dataset) {
  DatasetStats stats;
  stats.scenes = dataset.header.num_scenes;
  for (const PreferencePair& p : dataset.pairs) {
    ++stats.records;
    if (p.matched) ++stats.matched;
    ++stats.per_task[std::string(to_string(p.question_kind))];
    const char* answer = p.chosen == kYesToken ? "yes" : p.chosen == kNoToken ? "no" : "caption";
    ++stats.per_answer[answer];
  }
  return stats;
}

PreferenceDataset assemble_dataset(const SynthConfig& cfg) {
  cfg.validate();
  const World world(cfg.world);
  PreferenceDataset dataset;
  dataset.header = DatasetHeader{"preferences", cfg.world, cfg.seed, cfg.num_scenes};

  std::vector<Scene> scenes;
  scenes.reserve(static_cast<std::size_t>(cfg.num_scenes));
  for (int s = 0; s < cfg.num_scenes; ++s) scenes.push_back(world.make_scene(cfg.seed, s));

  const int n_matched = static_cast<int>(std::lround(cfg.num_records * cfg.matched_ratio));
  std::vector<char> matched(static_cast<std::size_t>(cfg.num_records), 0);
  std::fill_n(matched.begin(), n_matched, 1);
  std::mt19937_64 flag_rng(derive_seed(cfg.seed, {0xF1A6}));
  std::shuffle(matched.begin(), matched.end(), flag_rng);

  const auto weights = cfg.mix.weights();
  static constexpr QuestionKind kinds[] = {
      QuestionKind::visual_presence, QuestionKind::audio_presence, QuestionKind::visual_caption,
      QuestionKind::audio_caption, QuestionKind::audiovisual_caption};

  dataset.pairs.reserve(static_cast<std::size_t>(cfg.num_records));
  for (int i = 0; i < cfg.num_records; ++i) {
    std::mt19937_64 rng(derive_seed(cfg.seed, {0x5EC0, static_cast<std::uint64_t>(i)}));
    std::discrete_distribution<int> task(weights.begin(), weights.end());
    const QuestionKind kind = kinds[task(rng)];
    std::optional<PreferencePair> pair;
    for (int attempt = 0; attempt < kMaxSampleAttempts && !pair; ++attempt) {
      const auto [v, a] = pick_scenes(cfg.num_scenes, matched[static_cast<std::size_t>(i)], rng);
      pair = build_pair(world, scenes[static_cast<std::size_t>(v)],
                        scenes[static_cast<std::size_t>(a)], kind, rng);
    }
    if (!pair) {
      throw ConfigError("synth: infeasible config, no scene supports a " +
                        std::string(to_string(kind)) + " question");
    }
    dataset.pairs.push_back(std::move(*pair));
  }
  return dataset;
}

DatasetStats write_dataset(const std::filesystem::path& path, const PreferenceDataset& dataset) {
  {
    std::ofstream out = open_for_write(path);
    out << header_to_json(dataset.header).dump() << '\n';
    for (const PreferencePair& p : dataset.pairs) out << pair_to_json(p).dump() << '\n';
    if (!out) throw IoError("failed writing " + path.string());
  }
  const DatasetStats stats = compute_stats(dataset);
  ordered_json j;
  j["records"] = stats.records;
  j["scenes"] = stats.scenes;
  j["matched"] = stats.matched;
  j["matched_ratio"] = stats.matched_ratio();
  j["per_task"] = stats.per_task;
  j["per_answer"] = stats.per_answer;
  std::filesystem::path stats_path = path;
  stats_path += ".stats.json";
  std::ofstream out = open_for_write(stats_path);
  out << j.dump(2) << '\n';
  return stats;
}

PreferenceDataset read_dataset(const std::filesystem::path& path) {
  PreferenceDataset dataset;
  bool have_header = false;
  for_each_line(path, [&](int number, const std::string& line) {
    try {
      const ordered_json j = ordered_json::parse(line);
      if (!have_header) {
        dataset.header = header_from_json(j);
        have_header = true;
        return;
      }
      dataset.pairs.push_back(pair_from_json(j));
    } catch (const std::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  });
  if (!have_header) throw IoError(path.string() + ": empty dataset file");
  return dataset;
}

VerificationReport verify_dataset(const std::filesystem::path& path, const Annotator& annotator) {
  VerificationReport report;
  std::optional<DatasetHeader> header;
  std::optional<World> world;
  std::map<int, Scene> scene_cache;
  auto scene = [&](int id) -> const Scene& {
    auto it = scene_cache.find(id);
    if (it == scene_cache.end()) {
      it = scene_cache.emplace(id, world->make_scene(header->scene_seed, id)).first;
    }
    return it->second;
  };

  for_each_line(path, [&](int number, const std::string& line) {
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const std::exception& e) {
      report.parse_errors.push_back({number, e.what()});
      return;
    }
    if (!header) {
      try {
        header = header_from_json(j);
        world.emplace(header->world);
        return;
      } catch (const std::exception& e) {
        ++report.records;
        report.parse_errors.push_back({number, std::string("no valid header: ") + e.what()});
        return;
      }
    }
    ++report.records;
    PreferencePair p;
    try {
      p = pair_from_json(j);
    } catch (const std::exception& e) {
      report.parse_errors.push_back({number, e.what()});
      return;
    }

    std::vector<std::string> problems;
    if (p.visual_scene < 0 || p.visual_scene >= header->num_scenes || p.audio_scene < 0 ||
        p.audio_scene >= header->num_scenes) {
      report.violations.push_back({number, "scene reference outside the dataset"});
      return;
    }
    std::pair<QuestionKind, int> decoded;
    try {
      decoded = world->decode_prompt(p.context.prompt_id);
    } catch (const std::exception& e) {
      report.violations.push_back({number, e.what()});
      return;
    }
    const Scene& vs = scene(p.visual_scene);
    const Scene& as = scene(p.audio_scene);
    if (decoded.first != p.question_kind) problems.push_back("prompt does not match question kind");
    if (p.context.tag != modality_tag_for(p.question_kind)) {
      problems.push_back("modality tag inconsistent with question kind");
    }
    if (p.matched != (p.visual_scene == p.audio_scene)) {
      problems.push_back("matched flag disagrees with scene references");
    }
    if (p.context.visual != vs.visual_feat || p.context.audio != as.audio_feat) {
      problems.push_back("features differ from the referenced scenes");
    }
    if (p.chosen == p.rejected) problems.push_back("chosen equals rejected");
    const auto truth =
        oracle_answer(*world, vs, as, p.question_kind, decoded.second, annotator);
    if (!truth) {
      problems.push_back("question not answerable in this context");
    } else {
      if (p.chosen != *truth) problems.push_back("chosen response contradicts the oracle");
      const bool rejected_is_answer_kind =
          is_presence(p.question_kind) ? (p.rejected == kYesToken || p.rejected == kNoToken)
                                       : (p.rejected >= kFirstCaptionToken &&
                                          p.rejected < header->world.vocab);
      if (p.rejected == *truth || !rejected_is_answer_kind) {
        problems.push_back("rejected response is not refuted by the relevant modality");
      }
    }
    if (!problems.empty()) {
      std::string reason = problems.front();
      for (std::size_t k = 1; k < problems.size(); ++k) reason += "; " + problems[k];
      report.violations.push_back({number, reason});
    }
  });
  return report;
}

std::string_view to_string(TaskGroup group) {
  switch (group) {
    case TaskGroup::adv_hallucination: return "adv_hallucination";
    case TaskGroup::vda_hallucination: return "vda_hallucination";
    case TaskGroup::matching: return "matching";
    case TaskGroup::dominance: return "dominance";
  }
  return "unknown";
}

TaskGroup task_group_from_string(std::string_view name) {
  for (TaskGroup g : {TaskGroup::adv_hallucination, TaskGroup::vda_hallucination,
                      TaskGroup::matching, TaskGroup::dominance}) {
    if (to_string(g) == name) return g;
  }
  throw ConfigError("unknown task group '" + std::string(name) + "'");
}

void EvalSetConfig::validate() const {
  world.validate();
  if (num_items < 0) throw ConfigError("eval set: num_items must be >= 0");
  if (num_scenes < 2) throw ConfigError("eval set: needs at least two scenes");
}

EvalSet assemble_eval_set(const EvalSetConfig& cfg) {
  cfg.validate();
  const World world(cfg.world);
  const WorldOracleAnnotator oracle;
  EvalSet set;
  set.header = DatasetHeader{"eval", cfg.world, cfg.seed, cfg.num_scenes};

  std::vector<Scene> scenes;
  scenes.reserve(static_cast<std::size_t>(cfg.num_scenes));
  for (int s = 0; s < cfg.num_scenes; ++s) scenes.push_back(world.make_scene(cfg.seed, s));

  const int per_group = cfg.num_items / 3;
  for (int i = 0; i < cfg.num_items; ++i) {
    const int group_index = std::min(i / std::max(per_group, 1), 2);
    const int within = i - group_index * per_group;
    const TaskGroup group = group_index == 0   ? TaskGroup::adv_hallucination
                            : group_index == 1 ? TaskGroup::vda_hallucination
                                               : TaskGroup::dominance;
    const Answer target = within % 2 == 0 ? Answer::yes : Answer::no;
    const bool matched = group != TaskGroup::dominance;
    QuestionKind kind = QuestionKind::visual_presence;
    if (group == TaskGroup::vda_hallucination) kind = QuestionKind::audio_presence;
    if (group == TaskGroup::dominance && (within / 2) % 2 == 1) kind = QuestionKind::audio_presence;

    std::mt19937_64 rng(derive_seed(cfg.seed, {0xE7A1, static_cast<std::uint64_t>(i)}));
    bool done = false;
    for (int attempt = 0; attempt < kMaxSampleAttempts && !done; ++attempt) {
      const auto [v, a] = pick_scenes(cfg.num_scenes, matched, rng);
      const Scene& vs = scenes[static_cast<std::size_t>(v)];
      const Scene& as = scenes[static_cast<std::size_t>(a)];
      std::vector<int> candidates;
      for (const Entity& e : world.context_entities(vs, as, oracle)) {
        const auto ans = answer_for(classify_entity(e, world.kind_of(e.entity_id)), kind);
        if (ans && *ans == target) candidates.push_back(e.entity_id);
      }
      if (candidates.empty()) continue;
      std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
      const int entity = candidates[pick(rng)];
      const int negative = *hard_negative(world, vs, as, kind, entity, oracle);
      const PreferencePair p =
          make_pair_record(world, vs, as, kind, entity, answer_token(target), negative);
      EvalItem item;
      item.context = p.context;
      item.question_kind = kind;
      item.ground_truth = target;
      item.task_group = group;
      item.matched = p.matched;
      item.visual_scene = p.visual_scene;
      item.audio_scene = p.audio_scene;
      item.hard_negative = negative;
      set.items.push_back(std::move(item));
      done = true;
    }
    if (!done) throw ConfigError("eval set: infeasible config for group " +
                                 std::string(to_string(group)));
  }
  return set;
}

void write_eval_set(const std::filesystem::path& path, const EvalSet& set) {
  std::ofstream out = open_for_write(path);
  out << header_to_json(set.header).dump() << '\n';
  for (const EvalItem& item : set.items) {
    PreferencePair p;
    p.context = item.context;
    p.question_kind = item.question_kind;
    p.chosen = answer_token(item.ground_truth);
    p.rejected = item.hard_negative;
    p.matched = item.matched;
    p.visual_scene = item.visual_scene;
    p.audio_scene = item.audio_scene;
    ordered_json j = pair_to_json(p);
    j["ground_truth"] = to_string(item.ground_truth);
    j["task_group"] = to_string(item.task_group);
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

EvalSet read_eval_set(const std::filesystem::path& path) {
  EvalSet set;
  bool have_header = false;
  for_each_line(path, [&](int number, const std::string& line) {
    try {
      const ordered_json j = ordered_json::parse(line);
      if (!have_header) {
        set.header = header_from_json(j);
        have_header = true;
        return;
      }
      const PreferencePair p = pair_from_json(j);
      EvalItem item;
      item.context = p.context;
      item.question_kind = p.question_kind;
      item.ground_truth = answer_from_string(j.at("ground_truth").get<std::string>());
      item.task_group = task_group_from_string(j.at("task_group").get<std::string>());
      item.matched = p.matched;
      item.visual_scene = p.visual_scene;
      item.audio_scene = p.audio_scene;
      item.hard_negative = p.rejected;
      if (!is_presence(item.question_kind)) throw IoError("eval items must be presence questions");
      set.items.push_back(std::move(item));
    } catch (const std::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  });
  if (!have_header) throw IoError(path.string() + ": empty eval file");
  return set;
}

}  // namespace moddpo
