#include "moddpo/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "moddpo/errors.hpp"
#include "moddpo/rng.hpp"

namespace moddpo {

namespace {

enum CorruptionSlot : std::uint64_t { kAudioSlot = 0, kVisualSlot = 1 };

bool uses_corruption(LossVariant v) { return v != LossVariant::dpo; }
bool uses_lpd(LossVariant v) { return v == LossVariant::modpp || v == LossVariant::mod_with_av; }

bool is_av_pair(ModalityTag tag, LossVariant v) {
  return tag == ModalityTag::audiovisual && v == LossVariant::mod_with_av;
}

LogProbPair score(const PolicyParams& params, const ModalityContext& ctx,
                  const PreferencePair& pair, long& counter) {
  const Eigen::VectorXd lp = forward_detached(params, ctx);
  counter += 2;
  return {lp[pair.chosen], lp[pair.rejected]};
}

Eigen::VectorXd corrupt_slot(const Eigen::VectorXd& features, const std::vector<Eigen::VectorXd>& pool,
                             std::size_t pair_index, const TrainConfig& cfg, std::uint64_t step,
                             CorruptionSlot slot) {
  CorruptionSpec spec = cfg.corruption;
  spec.seed = derive_seed(cfg.seed, {cfg.corruption.seed, step, pair_index, slot});
  const FeaturePool fp{pool, pair_index};
  return corrupt(features, spec, &fp);
}

std::vector<Batch> chunk(const std::vector<std::size_t>& indices, int batch_size, ModalityTag tag,
                         bool homogeneous) {
  std::vector<Batch> out;
  for (std::size_t i = 0; i < indices.size(); i += static_cast<std::size_t>(batch_size)) {
    Batch b;
    b.tag = tag;
    b.homogeneous = homogeneous;
    const std::size_t end = std::min(indices.size(), i + static_cast<std::size_t>(batch_size));
    b.indices.assign(indices.begin() + static_cast<std::ptrdiff_t>(i),
                     indices.begin() + static_cast<std::ptrdiff_t>(end));
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace

std::string_view to_string(LossVariant variant) {
  switch (variant) {
    case LossVariant::dpo: return "dpo";
    case LossVariant::mod: return "mod";
    case LossVariant::modpp: return "modpp";
    case LossVariant::mod_with_av: return "mod_with_av";
  }
  return "unknown";
}

LossVariant loss_variant_from_string(std::string_view name) {
  for (LossVariant v : {LossVariant::dpo, LossVariant::mod, LossVariant::modpp,
                        LossVariant::mod_with_av}) {
    if (to_string(v) == name) return v;
  }
  throw ConfigError("unknown loss variant '" + std::string(name) + "'");
}

PassCounter& PassCounter::operator+=(const PassCounter& other) {
  fwd_policy += other.fwd_policy;
  fwd_ref += other.fwd_ref;
  bwd_policy += other.bwd_policy;
  bwd_ref += other.bwd_ref;
  return *this;
}

PassCounter expected_pair_passes(LossVariant variant, ModalityTag tag) {
  if (is_av_pair(tag, variant)) return {4, 2, 2, 0};
  switch (variant) {
    case LossVariant::dpo: return {2, 2, 2, 0};
    case LossVariant::mod: return {6, 2, 2, 0};
    case LossVariant::modpp:
    case LossVariant::mod_with_av: return {6, 4, 2, 0};
  }
  return {};
}

void TrainConfig::validate() const {
  hp.validate();
  if (loss_variant == LossVariant::mod_with_av && !(hp.tau_av() > 0)) {
    throw ConfigError("train: mod_with_av needs beta - beta_sens > 0");
  }
  corruption.validate();
  if (!(lr > 0) || !std::isfinite(lr)) throw ConfigError("train: lr must be > 0");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
}

std::vector<Batch> epoch_schedule(const PreferenceDataset& dataset, const TrainConfig& cfg,
                                  int epoch) {
  std::vector<std::size_t> visual, audio, av;
  for (std::size_t i = 0; i < dataset.pairs.size(); ++i) {
    switch (dataset.pairs[i].context.tag) {
      case ModalityTag::visual_related: visual.push_back(i); break;
      case ModalityTag::audio_related: audio.push_back(i); break;
      case ModalityTag::audiovisual:
        if (cfg.loss_variant == LossVariant::mod_with_av) av.push_back(i);
        break;
    }
  }
  const auto shuffled = [&](std::vector<std::size_t> v, std::uint64_t stream) {
    std::mt19937_64 rng(derive_seed(cfg.seed, {0xBA7C, static_cast<std::uint64_t>(epoch), stream}));
    std::shuffle(v.begin(), v.end(), rng);
    return v;
  };

  if (!cfg.alternate_batches) {
    std::vector<std::size_t> all = visual;
    all.insert(all.end(), audio.begin(), audio.end());
    all.insert(all.end(), av.begin(), av.end());
    std::sort(all.begin(), all.end());
    std::vector<Batch> batches = chunk(shuffled(all, 3), cfg.batch_size,
                                       ModalityTag::visual_related, false);
    for (Batch& b : batches) {
      const ModalityTag first = dataset.pairs[b.indices.front()].context.tag;
      b.tag = first;
      b.homogeneous = std::all_of(b.indices.begin(), b.indices.end(), [&](std::size_t i) {
        return dataset.pairs[i].context.tag == first;
      });
    }
    return batches;
  }

  if (visual.empty() || audio.empty()) {
    throw ConfigError("train: alternating batches need both visual- and audio-related pairs");
  }
  const std::vector<Batch> vb = chunk(shuffled(visual, 0), cfg.batch_size,
                                      ModalityTag::visual_related, true);
  const std::vector<Batch> ab = chunk(shuffled(audio, 1), cfg.batch_size,
                                      ModalityTag::audio_related, true);
  const std::vector<Batch> avb = chunk(shuffled(av, 2), cfg.batch_size,
                                       ModalityTag::audiovisual, true);
  const std::size_t rounds = std::max(vb.size(), ab.size());
  std::vector<Batch> out;
  out.reserve(2 * rounds + avb.size());
  for (std::size_t r = 0; r < rounds; ++r) {
    out.push_back(vb[r % vb.size()]);
    out.push_back(ab[r % ab.size()]);
    if (r < avb.size()) out.push_back(avb[r]);
  }
  for (std::size_t r = rounds; r < avb.size(); ++r) out.push_back(avb[r]);
  return out;
}

FeatureBank FeatureBank::from(const PreferenceDataset& dataset) {
  FeatureBank bank;
  bank.audio.reserve(dataset.pairs.size());
  bank.visual.reserve(dataset.pairs.size());
  for (const PreferencePair& p : dataset.pairs) {
    bank.audio.push_back(p.context.audio);
    bank.visual.push_back(p.context.visual);
  }
  return bank;
}

ModalityContext text_only(const ModalityContext& ctx) {
  ModalityContext out = ctx;
  out.audio.setZero();
  out.visual.setZero();
  return out;
}

PairEvaluation evaluate_pair(const PolicyParams& params, const PolicyParams& reference,
                             const PreferencePair& pair, std::size_t pair_index,
                             const TrainConfig& cfg, std::uint64_t step,
                             const FeatureBank& bank) {
  PairEvaluation ev;
  PairLogProbs& pl = ev.logprobs;
  PassCounter& pc = ev.passes;
  const ModalityContext& ctx = pair.context;
  const ModalityTag tag = ctx.tag;

  pl.policy = score(params, ctx, pair, pc.fwd_policy);
  pl.reference = score(reference, ctx, pair, pc.fwd_ref);
  if (!uses_corruption(cfg.loss_variant)) return ev;

  const auto corrupted_audio = [&] {
    return corrupt_slot(ctx.audio, bank.audio, pair_index, cfg, step, kAudioSlot);
  };
  const auto corrupted_visual = [&] {
    return corrupt_slot(ctx.visual, bank.visual, pair_index, cfg, step, kVisualSlot);
  };

  if (is_av_pair(tag, cfg.loss_variant)) {
    ModalityContext both = ctx;
    both.audio = corrupted_audio();
    both.visual = corrupted_visual();
    pl.policy_both = score(params, both, pair, pc.fwd_policy);
    return ev;
  }
  if (tag == ModalityTag::audiovisual) {
    throw ContractError("train: audiovisual pairs are only trained under mod_with_av");
  }

  // Visual prompts: audio is irrelevant. Audio prompts swap the roles.
  ModalityContext irrelevant = ctx;
  ModalityContext relevant = ctx;
  if (tag == ModalityTag::visual_related) {
    irrelevant.audio = corrupted_audio();
    relevant.visual = corrupted_visual();
  } else {
    irrelevant.visual = corrupted_visual();
    relevant.audio = corrupted_audio();
  }
  pl.policy_irrelevant = score(params, irrelevant, pair, pc.fwd_policy);
  pl.policy_relevant = score(params, relevant, pair, pc.fwd_policy);
  if (uses_lpd(cfg.loss_variant)) {
    pl.reference_text = score(reference, text_only(ctx), pair, pc.fwd_ref);
  }
  return ev;
}

PairObjective pair_objective(const PairLogProbs& pl, ModalityTag tag, const TrainConfig& cfg) {
  const Hyperparams& hp = cfg.hp;
  if (is_av_pair(tag, cfg.loss_variant)) {
    const double m = av_margin(pl, hp);
    return {pair_loss(m), pair_loss_slope(m) * hp.tau_av()};
  }
  switch (cfg.loss_variant) {
    case LossVariant::dpo: {
      const double m = dpo_margin(pl, hp.beta);
      return {pair_loss(m), pair_loss_slope(m) * hp.beta};
    }
    case LossVariant::mod: {
      const double m = mod_margin(pl, hp);
      return {pair_loss(m), pair_loss_slope(m) * hp.tau()};
    }
    case LossVariant::modpp:
    case LossVariant::mod_with_av: {
      const double mm = mod_margin(pl, hp);
      // Outside placement adds a constant, so the slope is taken at mm alone.
      const double m = cfg.lpd_placement == LpdPlacement::inside ? mm + lpd_margin(pl, hp) : mm;
      return {modpp_pair_loss(pl, hp, cfg.lpd_placement), pair_loss_slope(m) * hp.tau()};
    }
  }
  return {};
}

BatchGradient batch_gradient(const PolicyParams& params, const PolicyParams& reference,
                             const PreferenceDataset& dataset, const Batch& batch,
                             const TrainConfig& cfg, std::uint64_t step,
                             const FeatureBank& bank) {
  if (batch.indices.empty()) throw ContractError("train: empty batch");
  BatchGradient out{0.0, GradAccumulator(params.config()), {}, true, {}};
  const double inv_n = 1.0 / static_cast<double>(batch.indices.size());
  std::optional<PassCounter> first;
  for (std::size_t idx : batch.indices) {
    const PreferencePair& pair = dataset.pairs.at(idx);
    if (cfg.alternate_batches && pair.context.tag != batch.tag) {
      throw ContractError("train: mixed-modality batch under alternation");
    }
    PairEvaluation ev = evaluate_pair(params, reference, pair, idx, cfg, step, bank);
    const PairObjective obj = pair_objective(ev.logprobs, pair.context.tag, cfg);
    out.loss += obj.loss * inv_n;

    // d loss / d log pi(y_w) = +slope, d loss / d log pi(y_l) = -slope.
    Eigen::VectorXd upstream = Eigen::VectorXd::Zero(params.out_bias.size());
    upstream[pair.chosen] += obj.dloss_ddelta * inv_n;
    upstream[pair.rejected] -= obj.dloss_ddelta * inv_n;
    backward(params, pair.context, upstream, out.grad);
    ev.passes.bwd_policy += 2;

    if (!first) first = ev.passes;
    else if (!(*first == ev.passes)) out.uniform_passes = false;
    out.passes += ev.passes;
    out.logprobs.push_back(ev.logprobs);
  }
  return out;
}

PassCounter StepRecord::per_pair() const {
  if (pairs <= 0) return {};
  return {passes.fwd_policy / pairs, passes.fwd_ref / pairs, passes.bwd_policy / pairs,
          passes.bwd_ref / pairs};
}

StepRecord train_step(PolicyParams& params, const PolicyParams& reference,
                      const PreferenceDataset& dataset, const Batch& batch,
                      const TrainConfig& cfg, std::uint64_t step, const FeatureBank& bank) {
  if (cfg.alternate_batches && !batch.homogeneous) {
    throw ContractError("train: mixed-modality batch under alternation");
  }
  const BatchGradient bg = batch_gradient(params, reference, dataset, batch, cfg, step, bank);
  if (!bg.grad.all_finite()) throw DomainError("train: non-finite gradient");
  apply_update(params, bg.grad, cfg.lr);
  StepRecord rec;
  rec.step = step;
  rec.tag = batch.tag;
  rec.loss = bg.loss;
  rec.pairs = static_cast<int>(batch.indices.size());
  rec.passes = bg.passes;
  rec.uniform_passes = bg.uniform_passes;
  return rec;
}

TrainResult train(const PreferenceDataset& dataset, const PolicyParams& reference,
                  const TrainConfig& cfg, const StepObserver& observer, int max_steps) {
  cfg.validate();
  if (dataset.pairs.empty()) throw ConfigError("train: empty dataset");
  const FeatureBank bank = FeatureBank::from(dataset);
  TrainResult result{reference, {}, {}};
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const Batch& batch : epoch_schedule(dataset, cfg, epoch)) {
      if (max_steps >= 0 && step >= static_cast<std::uint64_t>(max_steps)) return result;
      if (observer) observer(result.params, batch, step);
      StepRecord rec = train_step(result.params, reference, dataset, batch, cfg, step, bank);
      rec.epoch = epoch;
      result.totals += rec.passes;
      result.trace.push_back(rec);
      ++step;
    }
  }
  return result;
}

void WarmupConfig::validate() const {
  if (steps < 0) throw ConfigError("warmup: steps must be >= 0");
  if (batch_size < 1) throw ConfigError("warmup: batch_size must be >= 1");
  if (!(lr > 0)) throw ConfigError("warmup: lr must be > 0");
  if (hidden < 1) throw ConfigError("warmup: hidden must be >= 1");
  if (!(init_scale >= 0)) throw ConfigError("warmup: init_scale must be >= 0");
}

PolicyParams warmup_reference(const PreferenceDataset& dataset, const WarmupConfig& cfg) {
  cfg.validate();
  if (dataset.pairs.empty()) throw ConfigError("warmup: empty dataset");
  const World world(dataset.header.world);
  PolicyParams params = PolicyParams::random_init(world.policy_config(cfg.hidden),
                                                  derive_seed(cfg.seed, {0x1A17}), cfg.init_scale);
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < dataset.pairs.size(); ++i) {
    if (!cfg.matched_only || dataset.pairs[i].matched) pool.push_back(i);
  }
  if (pool.empty()) throw ConfigError("warmup: no matched pairs to fit");

  const double inv_n = 1.0 / cfg.batch_size;
  for (int s = 0; s < cfg.steps; ++s) {
    std::mt19937_64 rng(derive_seed(cfg.seed, {0x3A3, static_cast<std::uint64_t>(s)}));
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    GradAccumulator grad(params.config());
    for (int b = 0; b < cfg.batch_size; ++b) {
      const PreferencePair& pair = dataset.pairs[pool[pick(rng)]];
      Eigen::VectorXd upstream = Eigen::VectorXd::Zero(params.out_bias.size());
      upstream[pair.chosen] = -inv_n;
      backward(params, pair.context, upstream, grad);
    }
    apply_update(params, grad, cfg.lr);
  }
  return params;
}

PolicyParams warmup_reference(const PreferenceDataset& dataset, int steps, std::uint64_t seed) {
  WarmupConfig cfg;
  cfg.steps = steps;
  cfg.seed = seed;
  return warmup_reference(dataset, cfg);
}

double mean_chosen_logprob(const PolicyParams& params, const PreferenceDataset& dataset) {
  if (dataset.pairs.empty()) return 0.0;
  double total = 0;
  for (const PreferencePair& p : dataset.pairs) {
    total += forward_logprobs(params, p.context)[p.chosen];
  }
  return total / static_cast<double>(dataset.pairs.size());
}

}  // namespace moddpo
