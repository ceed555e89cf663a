#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "moddpo/errors.hpp"
#include "moddpo/synth.hpp"

using namespace moddpo;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "moddpo_unit_synth";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  for (const auto& l : lines) out << l << '\n';
}

// Visual stream: object 0 sounding, object 1 silent, pure sound 4 in view.
// Object 2 sounds off screen.
Scene hand_scene() {
  Scene s;
  s.scene_id = 0;
  s.entities = {{0, true, true}, {1, true, false}, {2, false, true}, {4, true, true}};
  s.audio_feat = Eigen::VectorXd::Zero(8);
  s.visual_feat = Eigen::VectorXd::Zero(8);
  return s;
}

SynthConfig small_config(std::uint64_t seed, int records = 300) {
  SynthConfig cfg;
  cfg.num_records = records;
  cfg.num_scenes = 80;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("taxonomy table for presence questions") {
  using C = EntityCategory;
  using Q = QuestionKind;
  CHECK(answer_for(C::in_view_sound_source, Q::visual_presence) == Answer::yes);
  CHECK(answer_for(C::out_of_view_sound_source, Q::visual_presence) == Answer::no);
  CHECK(answer_for(C::out_of_view_sound, Q::visual_presence) == Answer::no);
  CHECK_FALSE(answer_for(C::in_view_sound, Q::visual_presence).has_value());
  CHECK_FALSE(answer_for(C::in_view_silent_object, Q::visual_presence).has_value());

  CHECK(answer_for(C::in_view_sound_source, Q::audio_presence) == Answer::yes);
  CHECK(answer_for(C::in_view_sound, Q::audio_presence) == Answer::yes);
  CHECK(answer_for(C::in_view_silent_object, Q::audio_presence) == Answer::no);
  CHECK_FALSE(answer_for(C::out_of_view_sound_source, Q::audio_presence).has_value());
  CHECK_FALSE(answer_for(C::out_of_view_sound, Q::audio_presence).has_value());

  CHECK_FALSE(answer_for(C::in_view_sound_source, Q::visual_caption).has_value());
}

TEST_CASE("entity classification") {
  using K = EntityKind;
  CHECK(classify_entity({0, true, true}, K::object) == EntityCategory::in_view_sound_source);
  CHECK(classify_entity({0, true, false}, K::object) == EntityCategory::in_view_silent_object);
  CHECK(classify_entity({0, false, true}, K::object) == EntityCategory::out_of_view_sound_source);
  CHECK(classify_entity({0, true, true}, K::pure_sound) == EntityCategory::in_view_sound);
  CHECK(classify_entity({0, false, true}, K::pure_sound) == EntityCategory::out_of_view_sound);
  CHECK_THROWS_AS(classify_entity({0, false, false}, K::object), ContractError);
  CHECK_THROWS_AS(classify_entity({0, true, false}, K::pure_sound), ContractError);
}

TEST_CASE("names round trip") {
  for (auto k : {QuestionKind::visual_presence, QuestionKind::audio_presence,
                 QuestionKind::visual_caption, QuestionKind::audio_caption,
                 QuestionKind::audiovisual_caption}) {
    CHECK(question_kind_from_string(to_string(k)) == k);
  }
  for (auto g : {TaskGroup::adv_hallucination, TaskGroup::vda_hallucination, TaskGroup::matching,
                 TaskGroup::dominance}) {
    CHECK(task_group_from_string(to_string(g)) == g);
  }
  CHECK(answer_from_string("yes") == Answer::yes);
  CHECK_THROWS_AS(question_kind_from_string("smell"), ConfigError);
}

TEST_CASE("prompt table") {
  const World world(WorldConfig{});
  CHECK(world.num_prompts() == 15);
  for (int p = 0; p < world.num_prompts(); ++p) {
    const auto [kind, entity] = world.decode_prompt(p);
    if (is_presence(kind)) {
      CHECK(world.presence_prompt(kind, entity) == p);
    } else {
      CHECK(entity == -1);
      CHECK(world.caption_prompt(kind) == p);
    }
  }
  CHECK_THROWS_AS(world.decode_prompt(15), DimensionError);
  CHECK(modality_tag_for(QuestionKind::visual_caption) == ModalityTag::visual_related);
  CHECK(modality_tag_for(QuestionKind::audio_presence) == ModalityTag::audio_related);
  CHECK(modality_tag_for(QuestionKind::audiovisual_caption) == ModalityTag::audiovisual);
}

TEST_CASE("oracle answers and hard negatives on a hand-built scene") {
  const World world(WorldConfig{});
  const WorldOracleAnnotator oracle;
  const Scene s = hand_scene();
  using Q = QuestionKind;

  CHECK(oracle_answer(world, s, s, Q::visual_presence, 0, oracle) == kYesToken);
  CHECK(oracle_answer(world, s, s, Q::visual_presence, 2, oracle) == kNoToken);
  CHECK(oracle_answer(world, s, s, Q::audio_presence, 1, oracle) == kNoToken);
  CHECK(oracle_answer(world, s, s, Q::audio_presence, 4, oracle) == kYesToken);
  CHECK_FALSE(oracle_answer(world, s, s, Q::visual_presence, 1, oracle).has_value());
  CHECK_FALSE(oracle_answer(world, s, s, Q::visual_presence, 3, oracle).has_value());

  // Audio says object 2 is there, so the audio-driven answer is "yes".
  CHECK(hard_negative(world, s, s, Q::visual_presence, 2, oracle) == kYesToken);
  // Object 1 is visible, so the vision-driven answer is "yes".
  CHECK(hard_negative(world, s, s, Q::audio_presence, 1, oracle) == kYesToken);
  // Agreement between modalities falls back to the inverted answer.
  CHECK(hard_negative(world, s, s, Q::visual_presence, 0, oracle) == kNoToken);

  CHECK(oracle_answer(world, s, s, Q::visual_caption, -1, oracle) == world.caption_token(0));
  CHECK(oracle_answer(world, s, s, Q::audio_caption, -1, oracle) == world.caption_token(0));
  const int neg = *hard_negative(world, s, s, Q::visual_caption, -1, oracle);
  CHECK(neg != world.caption_token(0));
  CHECK(neg >= kFirstCaptionToken);
}

TEST_CASE("mismatched contexts take each stream from its own scene") {
  const World world(WorldConfig{});
  const WorldOracleAnnotator oracle;
  const Scene v = hand_scene();
  Scene a;
  a.scene_id = 1;
  a.entities = {{3, false, true}};
  const auto ents = world.context_entities(v, a, oracle);
  std::set<int> ids;
  for (const Entity& e : ents) ids.insert(e.entity_id);
  // Pure sound 4 has no audio here, so it drops out; 0 becomes silent.
  CHECK(ids == std::set<int>{0, 1, 3});
  CHECK(oracle_answer(world, v, a, QuestionKind::audio_presence, 0, oracle) == kNoToken);
  CHECK(oracle_answer(world, v, a, QuestionKind::visual_presence, 3, oracle) == kNoToken);
}

TEST_CASE("build_pair emits distinct, oracle-consistent responses") {
  const World world(WorldConfig{});
  std::mt19937_64 rng(5);
  for (int s = 0; s < 100; ++s) {
    const Scene v = world.make_scene(9, s);
    const Scene a = world.make_scene(9, (s + 1) % 100);
    for (auto kind : {QuestionKind::visual_presence, QuestionKind::audio_presence,
                      QuestionKind::visual_caption, QuestionKind::audio_caption}) {
      for (const Scene* audio : {&v, &a}) {
        const auto p = build_pair(world, v, *audio, kind, rng);
        if (!p) continue;
        CHECK(p->chosen != p->rejected);
        CHECK(p->matched == (audio == &v));
        CHECK(p->context.tag == modality_tag_for(kind));
        CHECK(p->context.audio == audio->audio_feat);
        CHECK(p->context.visual == v.visual_feat);
      }
    }
  }
}

TEST_CASE("scenes are deterministic and features follow the signatures") {
  WorldConfig cfg;
  cfg.feature_noise = 0.0;
  const World world(cfg);
  const Scene a = world.make_scene(3, 17);
  const Scene b = world.make_scene(3, 17);
  CHECK(a.audio_feat == b.audio_feat);
  CHECK(a.visual_feat == b.visual_feat);
  Eigen::VectorXd audio = Eigen::VectorXd::Zero(8), visual = Eigen::VectorXd::Zero(8);
  for (const Entity& e : a.entities) {
    if (e.sounding) audio += world.audio_signature(e.entity_id);
    if (e.visible && world.kind_of(e.entity_id) == EntityKind::object) {
      visual += world.visual_signature(e.entity_id);
    }
  }
  CHECK((a.audio_feat - audio).norm() < 1e-12);
  CHECK((a.visual_feat - visual).norm() < 1e-12);
  for (int i = 0; i < 6; ++i) {
    CHECK(world.audio_signature(i).norm() == doctest::Approx(1.0));
  }
}

TEST_CASE("dataset assembly is deterministic and honours the matched ratio") {
  const PreferenceDataset a = assemble_dataset(small_config(4));
  const PreferenceDataset b = assemble_dataset(small_config(4));
  const PreferenceDataset c = assemble_dataset(small_config(5));
  REQUIRE(a.pairs.size() == 300);
  bool same = true, differs = false;
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    same = same && a.pairs[i].context.audio == b.pairs[i].context.audio &&
           a.pairs[i].chosen == b.pairs[i].chosen && a.pairs[i].rejected == b.pairs[i].rejected;
    differs = differs || a.pairs[i].context.audio != c.pairs[i].context.audio;
  }
  CHECK(same);
  CHECK(differs);
  const DatasetStats stats = compute_stats(a);
  CHECK(stats.matched == 150);
  for (const auto& p : a.pairs) CHECK(p.matched == (p.visual_scene == p.audio_scene));
  CHECK(stats.per_task.count("visual_presence"));
  CHECK(stats.per_task.count("audio_caption"));
  CHECK_FALSE(stats.per_task.count("audiovisual_caption"));
}

TEST_CASE("infeasible synth configurations") {
  SynthConfig cfg = small_config(1);
  cfg.num_scenes = 1;
  CHECK_THROWS_AS(assemble_dataset(cfg), ConfigError);
  cfg = small_config(1);
  cfg.mix = TaskMix{0, 0, 0, 0, 0};
  CHECK_THROWS_AS(assemble_dataset(cfg), ConfigError);
  cfg = small_config(1);
  cfg.matched_ratio = 1.5;
  CHECK_THROWS_AS(assemble_dataset(cfg), ConfigError);
  // Only off-screen sound sources: no audio-presence question is askable.
  cfg = small_config(1, 20);
  cfg.world.num_pure_sounds = 0;
  cfg.world.p_visible_and_sounding = 0.0;
  cfg.world.p_visible_only = 0.0;
  cfg.mix = TaskMix{0, 1.0, 0, 0, 0};
  CHECK_THROWS_AS(assemble_dataset(cfg), ConfigError);
}

TEST_CASE("dataset file round trip and verification") {
  const PreferenceDataset ds = assemble_dataset(small_config(6, 200));
  const fs::path path = scratch("roundtrip.jsonl");
  const DatasetStats stats = write_dataset(path, ds);
  CHECK(stats.records == 200);
  CHECK(fs::exists(fs::path(path.string() + ".stats.json")));

  const PreferenceDataset back = read_dataset(path);
  REQUIRE(back.pairs.size() == ds.pairs.size());
  CHECK(back.header.world == ds.header.world);
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
    const auto& x = ds.pairs[i];
    const auto& y = back.pairs[i];
    CHECK(x.context.audio == y.context.audio);
    CHECK(x.context.visual == y.context.visual);
    CHECK(x.context.prompt_id == y.context.prompt_id);
    CHECK(x.context.tag == y.context.tag);
    CHECK(x.chosen == y.chosen);
    CHECK(x.rejected == y.rejected);
    CHECK(x.question_kind == y.question_kind);
  }
  const VerificationReport clean = verify_dataset(path);
  CHECK(clean.records == 200);
  CHECK(clean.clean());
}

TEST_CASE("verification localizes injected faults") {
  const PreferenceDataset ds = assemble_dataset(small_config(7, 50));
  const fs::path path = scratch("faulty.jsonl");
  write_dataset(path, ds);
  std::vector<std::string> lines = read_lines(path);

  std::vector<std::string> swapped = lines;
  {
    PreferenceDataset one = ds;
    std::swap(one.pairs[9].chosen, one.pairs[9].rejected);
    const fs::path tmp = scratch("faulty_tmp.jsonl");
    write_dataset(tmp, one);
    swapped[10] = read_lines(tmp)[10];
  }
  write_lines(path, swapped);
  VerificationReport r = verify_dataset(path);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0].line == 11);
  CHECK(r.parse_errors.empty());

  std::vector<std::string> broken = lines;
  broken[3] = "{not json";
  write_lines(path, broken);
  r = verify_dataset(path);
  REQUIRE(r.parse_errors.size() == 1);
  CHECK(r.parse_errors[0].line == 4);
  CHECK(r.violations.empty());
  CHECK_THROWS_AS(read_dataset(path), IoError);

  write_lines(path, {});
  r = verify_dataset(path);
  CHECK(r.records == 0);
  CHECK(r.clean());
  CHECK_THROWS_AS(read_dataset(scratch("missing.jsonl")), IoError);
}

TEST_CASE("evaluation items are balanced and re-derivable") {
  EvalSetConfig cfg;
  cfg.num_items = 300;
  cfg.num_scenes = 120;
  cfg.seed = 12;
  const EvalSet set = assemble_eval_set(cfg);
  REQUIRE(set.items.size() == 300);
  const World world(cfg.world);
  const WorldOracleAnnotator oracle;
  std::map<TaskGroup, int> groups;
  std::map<TaskGroup, int> yes;
  for (const EvalItem& item : set.items) {
    ++groups[item.task_group];
    if (item.ground_truth == Answer::yes) ++yes[item.task_group];
    CHECK(item.matched == (item.task_group != TaskGroup::dominance));
    if (item.task_group == TaskGroup::adv_hallucination) {
      CHECK(item.question_kind == QuestionKind::visual_presence);
    }
    if (item.task_group == TaskGroup::vda_hallucination) {
      CHECK(item.question_kind == QuestionKind::audio_presence);
    }
    const Scene v = world.make_scene(cfg.seed, item.visual_scene);
    const Scene a = world.make_scene(cfg.seed, item.audio_scene);
    const int entity = world.decode_prompt(item.context.prompt_id).second;
    CHECK(oracle_answer(world, v, a, item.question_kind, entity, oracle) ==
          answer_token(item.ground_truth));
    CHECK(item.hard_negative != answer_token(item.ground_truth));
  }
  CHECK(groups[TaskGroup::adv_hallucination] == 100);
  CHECK(groups[TaskGroup::vda_hallucination] == 100);
  CHECK(groups[TaskGroup::dominance] == 100);
  CHECK(groups.count(TaskGroup::matching) == 0);
  for (auto g : {TaskGroup::adv_hallucination, TaskGroup::vda_hallucination,
                 TaskGroup::dominance}) {
    CHECK(yes[g] == 50);
  }

  const fs::path path = scratch("eval.jsonl");
  write_eval_set(path, set);
  const EvalSet back = read_eval_set(path);
  REQUIRE(back.items.size() == set.items.size());
  for (std::size_t i = 0; i < set.items.size(); ++i) {
    CHECK(back.items[i].ground_truth == set.items[i].ground_truth);
    CHECK(back.items[i].task_group == set.items[i].task_group);
    CHECK(back.items[i].context.visual == set.items[i].context.visual);
  }
}
