#pragma once

// Synthetic preference data with a ground-truth world standing in for the
// captioning / tagging models of a real pipeline:
//   stage 1: disentangled audio and visual annotation of each scene,
//   stage 2: presence and caption questions with oracle answers,
//   stage 3: hard-negative rejected responses built from the irrelevant
//            modality, over matched and mismatched audiovisual contexts.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "moddpo/policy.hpp"

namespace moddpo {

enum class EntityKind { object, pure_sound };

enum class EntityCategory {
  in_view_sound_source,
  in_view_sound,
  in_view_silent_object,
  out_of_view_sound_source,
  out_of_view_sound,
};

enum class QuestionKind {
  visual_presence,
  audio_presence,
  visual_caption,
  audio_caption,
  audiovisual_caption,
};

enum class Answer { yes, no };

std::string_view to_string(EntityCategory category);
std::string_view to_string(QuestionKind kind);
std::string_view to_string(Answer answer);
QuestionKind question_kind_from_string(std::string_view name);
Answer answer_from_string(std::string_view name);

ModalityTag modality_tag_for(QuestionKind kind);
bool is_presence(QuestionKind kind);

// For a pure sound, `visible` means the sound is attached to the visible
// scene (an in-view sound); it never contributes visual features.
struct Entity {
  int entity_id = 0;
  bool visible = false;
  bool sounding = false;
};

// Throws ContractError for flag combinations outside the taxonomy: an entity
// that is neither visible nor sounding, or a silent pure sound.
EntityCategory classify_entity(const Entity& entity, EntityKind kind);

// Answer for a presence question about an entity of the given category, or
// nullopt when that (category, question) pair is never asked.
std::optional<Answer> answer_for(EntityCategory category, QuestionKind question);

struct Scene {
  int scene_id = 0;
  std::vector<Entity> entities;
  Eigen::VectorXd audio_feat;
  Eigen::VectorXd visual_feat;
};

struct WorldConfig {
  int num_entities = 6;
  int num_pure_sounds = 2;  // the last ids of the catalog
  int audio_dim = 8;
  int visual_dim = 8;
  int vocab = 8;
  int min_entities = 1;
  int max_entities = 4;
  double feature_noise = 0.05;
  // Flag distribution for objects in a scene; the remainder is sounding-only.
  double p_visible_and_sounding = 0.6;
  double p_visible_only = 0.25;
  double p_pure_sound_in_view = 0.5;
  std::uint64_t seed = 7;

  void validate() const;
  bool operator==(const WorldConfig&) const = default;
};

// Stage-1 annotation interface. The world oracle reads ground truth; a real
// captioner or tagger could be substituted.
class Annotator {
 public:
  virtual ~Annotator() = default;
  virtual std::vector<int> visible_entities(const Scene& scene) const = 0;
  virtual std::vector<int> sounding_entities(const Scene& scene) const = 0;
};

class WorldOracleAnnotator final : public Annotator {
 public:
  std::vector<int> visible_entities(const Scene& scene) const override;
  std::vector<int> sounding_entities(const Scene& scene) const override;
};

inline constexpr int kYesToken = 0;
inline constexpr int kNoToken = 1;
inline constexpr int kFirstCaptionToken = 2;

int answer_token(Answer answer);

class World {
 public:
  explicit World(WorldConfig config);

  const WorldConfig& config() const noexcept { return config_; }
  EntityKind kind_of(int entity_id) const;

  const Eigen::VectorXd& audio_signature(int entity_id) const;
  const Eigen::VectorXd& visual_signature(int entity_id) const;

  // Deterministic in (world seed, scene_seed, scene_id).
  Scene make_scene(std::uint64_t scene_seed, int scene_id) const;

  // Effective entity flags of an audiovisual context whose visual stream
  // comes from `visual` and audio stream from `audio` (the same scene when
  // the context is matched).
  std::vector<Entity> context_entities(const Scene& visual, const Scene& audio,
                                       const Annotator& annotator) const;

  int num_prompts() const noexcept { return 2 * config_.num_entities + 3; }
  int presence_prompt(QuestionKind kind, int entity_id) const;
  int caption_prompt(QuestionKind kind) const;
  // Inverse of presence_prompt / caption_prompt: (kind, entity or -1).
  std::pair<QuestionKind, int> decode_prompt(int prompt_id) const;

  int caption_token(int entity_id) const;
  PolicyConfig policy_config(int hidden = 16) const;

 private:
  WorldConfig config_;
  std::vector<Eigen::VectorXd> audio_sigs_;
  std::vector<Eigen::VectorXd> visual_sigs_;
};

struct PreferencePair {
  ModalityContext context;
  QuestionKind question_kind = QuestionKind::visual_presence;
  int chosen = 0;    // y_w
  int rejected = 1;  // y_l
  bool matched = true;
  int visual_scene = 0;
  int audio_scene = 0;
};

// Ground truth (token id) for a question in a context, from the relevant
// modality only. nullopt when the question is not askable there.
std::optional<int> oracle_answer(const World& world, const Scene& visual, const Scene& audio,
                                 QuestionKind kind, int entity_id,
                                 const Annotator& annotator);

// The response the irrelevant modality alone would support, inverted when it
// coincides with the ground truth.
std::optional<int> hard_negative(const World& world, const Scene& visual, const Scene& audio,
                                 QuestionKind kind, int entity_id,
                                 const Annotator& annotator);

// nullopt when no entity in the context is eligible for the question.
std::optional<PreferencePair> build_pair(const World& world, const Scene& visual_scene,
                                         const Scene& audio_scene, QuestionKind kind,
                                         std::mt19937_64& rng,
                                         const Annotator& annotator = WorldOracleAnnotator{});

struct TaskMix {
  double visual_presence = 0.35;
  double audio_presence = 0.35;
  double visual_caption = 0.15;
  double audio_caption = 0.15;
  double audiovisual_caption = 0.0;

  std::array<double, 5> weights() const {
    return {visual_presence, audio_presence, visual_caption, audio_caption,
            audiovisual_caption};
  }
};

struct SynthConfig {
  WorldConfig world;
  int num_records = 2000;
  int num_scenes = 500;
  double matched_ratio = 0.5;
  TaskMix mix;
  std::uint64_t seed = 1;  // scene and record sampling

  void validate() const;
};

struct DatasetHeader {
  std::string kind = "preferences";  // or "eval"
  WorldConfig world;
  std::uint64_t scene_seed = 0;
  int num_scenes = 0;
};

struct DatasetStats {
  int records = 0;
  int matched = 0;
  int scenes = 0;
  std::map<std::string, int> per_task;
  std::map<std::string, int> per_answer;  // chosen response: yes / no / caption
  double matched_ratio() const { return records ? static_cast<double>(matched) / records : 0.0; }
};

struct PreferenceDataset {
  DatasetHeader header;
  std::vector<PreferencePair> pairs;
};

DatasetStats compute_stats(const PreferenceDataset& dataset);

PreferenceDataset assemble_dataset(const SynthConfig& cfg);

// Writes the dataset (line-delimited JSON, header line first) and a sidecar
// "<path>.stats.json". Returns the stats.
DatasetStats write_dataset(const std::filesystem::path& path, const PreferenceDataset& dataset);
PreferenceDataset read_dataset(const std::filesystem::path& path);

struct Violation {
  int line = 0;  // 1-based line number in the file
  std::string reason;
};

struct VerificationReport {
  int records = 0;
  std::vector<Violation> violations;
  std::vector<Violation> parse_errors;

  bool clean() const { return violations.empty() && parse_errors.empty(); }
};

// Re-derives every record from the world oracle named in the header.
VerificationReport verify_dataset(const std::filesystem::path& path,
                                  const Annotator& annotator = WorldOracleAnnotator{});

// ---- evaluation items -------------------------------------------------------

enum class TaskGroup { adv_hallucination, vda_hallucination, matching, dominance };

std::string_view to_string(TaskGroup group);
TaskGroup task_group_from_string(std::string_view name);

struct EvalItem {
  ModalityContext context;
  QuestionKind question_kind = QuestionKind::visual_presence;
  Answer ground_truth = Answer::no;
  TaskGroup task_group = TaskGroup::adv_hallucination;
  bool matched = true;
  int visual_scene = 0;
  int audio_scene = 0;
  int hard_negative = kYesToken;
};

struct EvalSetConfig {
  WorldConfig world;
  int num_items = 2000;
  int num_scenes = 1000;
  std::uint64_t seed = 1001;

  void validate() const;
};

struct EvalSet {
  DatasetHeader header;
  std::vector<EvalItem> items;
};

// Balanced yes/no presence probes in three groups of equal size:
//   adv_hallucination  visual presence, matched context
//   vda_hallucination  audio presence, matched context
//   dominance          either presence kind, mismatched context
EvalSet assemble_eval_set(const EvalSetConfig& cfg);
void write_eval_set(const std::filesystem::path& path, const EvalSet& set);
EvalSet read_eval_set(const std::filesystem::path& path);

}  // namespace moddpo
