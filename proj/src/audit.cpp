#include "moddpo/audit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "moddpo/errors.hpp"
#include "moddpo/eval.hpp"
#include "moddpo/rng.hpp"
#include "moddpo/synth.hpp"

namespace moddpo {

namespace {

// Expected per-pair passes (fwd policy, fwd ref, bwd policy, bwd ref).
constexpr PassCounter kExpectedDpo{2, 2, 2, 0};
constexpr PassCounter kExpectedMod{6, 2, 2, 0};
constexpr PassCounter kExpectedModpp{6, 4, 2, 0};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

std::vector<double> objective_gradient(std::span<const double> p, const RewardVector& r,
                                       const PolicyDistribution& ref,
                                       const PolicyDistribution& qi,
                                       const PolicyDistribution& qs, const Hyperparams& hp) {
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double lp = std::log(p[i]);
    g[i] = r[i] - hp.beta * (lp - std::log(ref[i]) + 1) - hp.beta_inv * (lp - std::log(qi[i]) + 1) +
           hp.beta_sens * (lp - std::log(qs[i]) + 1);
  }
  return g;
}

PolicyDistribution random_distribution(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  for (double& x : v) x /= s;
  // Renormalize once more so the sum sits inside the validation tolerance.
  const double s2 = std::accumulate(v.begin(), v.end(), 0.0);
  for (double& x : v) x /= s2;
  return PolicyDistribution(std::move(v));
}

template <class Fn>
SuiteResult timed(std::string name, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  SuiteResult r;
  r.name = std::move(name);
  try {
    fn(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

PreferenceDataset small_dataset(int records, int scenes, std::uint64_t seed) {
  SynthConfig sc;
  sc.num_records = records;
  sc.num_scenes = scenes;
  sc.seed = seed;
  return assemble_dataset(sc);
}

}  // namespace

std::vector<double> project_to_simplex(std::span<const double> v, double floor) {
  const std::size_t n = v.size();
  if (n == 0) throw DimensionError("project_to_simplex: empty vector");
  const double mass = 1.0 - static_cast<double>(n) * floor;
  if (mass < 0) throw DomainError("project_to_simplex: floor too large for the dimension");
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = v[i] - floor;
  std::vector<double> sorted = u;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0, theta = 0;
  for (std::size_t j = 0; j < n; ++j) {
    cumulative += sorted[j];
    const double t = (cumulative - mass) / static_cast<double>(j + 1);
    if (sorted[j] - t > 0) theta = t;
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::max(u[i] - theta, 0.0) + floor;
  return out;
}

double l1_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("l1_distance: length mismatch");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

SimplexSearchResult pga_argmax(const RewardVector& reward, const PolicyDistribution& reference,
                               const PolicyDistribution& q_inv, const PolicyDistribution& q_sens,
                               const Hyperparams& hp, long max_iterations) {
  constexpr double kFloor = 1e-12;
  const std::size_t n = reward.size();
  std::vector<double> p(n, 1.0 / static_cast<double>(n));
  double value = mod_objective_value(p, reward, reference, q_inv, q_sens, hp);
  double step = 1.0;
  long it = 0;
  for (; it < max_iterations; ++it) {
    const std::vector<double> g = objective_gradient(p, reward, reference, q_inv, q_sens, hp);
    bool accepted = false;
    while (step > 1e-20) {
      std::vector<double> trial(n);
      for (std::size_t i = 0; i < n; ++i) trial[i] = p[i] + step * g[i];
      trial = project_to_simplex(trial, kFloor);
      double ascent = 0;
      for (std::size_t i = 0; i < n; ++i) ascent += g[i] * (trial[i] - p[i]);
      const double trial_value = mod_objective_value(trial, reward, reference, q_inv, q_sens, hp);
      if (ascent > 0 && trial_value >= value + 1e-4 * ascent) {
        const double moved = l1_distance(trial, p);
        p = std::move(trial);
        value = trial_value;
        step = std::min(step * 2.0, 1e3);
        accepted = true;
        if (moved < 1e-15) it = max_iterations;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return {p, value, it};
}

SimplexSearchResult grid_argmax3(const RewardVector& reward, const PolicyDistribution& reference,
                                 const PolicyDistribution& q_inv, const PolicyDistribution& q_sens,
                                 const Hyperparams& hp, double step) {
  if (reward.size() != 3) throw DimensionError("grid_argmax3: needs a 3-way vocabulary");
  const long cells = std::lround(1.0 / step);
  SimplexSearchResult best;
  best.value = -std::numeric_limits<double>::infinity();
  std::vector<double> p(3);
  for (long i = 1; i < cells; ++i) {
    for (long j = 1; i + j < cells; ++j) {
      p[0] = static_cast<double>(i) / static_cast<double>(cells);
      p[1] = static_cast<double>(j) / static_cast<double>(cells);
      p[2] = static_cast<double>(cells - i - j) / static_cast<double>(cells);
      const double v = mod_objective_value(p, reward, reference, q_inv, q_sens, hp);
      ++best.iterations;
      if (v > best.value) {
        best.value = v;
        best.argmax = p;
      }
    }
  }
  return best;
}

double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max(a.norm(), b.norm());
  if (scale == 0) return 0.0;
  return (a - b).norm() / scale;
}

Eigen::VectorXd finite_difference_gradient(const PolicyParams& params,
                                           const std::function<double(const PolicyParams&)>& f,
                                           double step) {
  const Eigen::VectorXd flat = params.flatten();
  Eigen::VectorXd grad(flat.size());
  PolicyParams probe = params;
  Eigen::VectorXd x = flat;
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    x[i] = flat[i] + step;
    probe.assign_flat(x);
    const double up = f(probe);
    x[i] = flat[i] - step;
    probe.assign_flat(x);
    const double down = f(probe);
    x[i] = flat[i];
    grad[i] = (up - down) / (2 * step);
  }
  return grad;
}

double gradient_check(const PolicyParams& params, const ModalityContext& ctx,
                      const Eigen::VectorXd& upstream, double step) {
  GradAccumulator acc(params.config());
  backward(params, ctx, upstream, acc);
  const Eigen::VectorXd fd = finite_difference_gradient(
      params, [&](const PolicyParams& p) { return upstream.dot(forward_logprobs(p, ctx)); }, step);
  return relative_error(acc.grads().flatten(), fd);
}

double frozen_surrogate_loss(const PolicyParams& params, const PreferenceDataset& dataset,
                             const Batch& batch, const std::vector<PairLogProbs>& frozen,
                             const TrainConfig& cfg) {
  if (frozen.size() != batch.indices.size()) {
    throw DimensionError("frozen_surrogate_loss: one frozen entry per batch pair required");
  }
  double loss = 0;
  for (std::size_t k = 0; k < batch.indices.size(); ++k) {
    const PreferencePair& pair = dataset.pairs.at(batch.indices[k]);
    PairLogProbs pl = frozen[k];
    const Eigen::VectorXd lp = forward_logprobs(params, pair.context);
    pl.policy = {lp[pair.chosen], lp[pair.rejected]};
    loss += pair_objective(pl, pair.context.tag, cfg).loss;
  }
  return loss / static_cast<double>(batch.indices.size());
}

AuditSizes AuditSizes::quick() {
  AuditSizes s;
  s.closed_form_instances = 40;
  s.reduction_instances = 200;
  s.reduction_train_steps = 20;
  s.gradient_triples = 10;
  s.stop_gradient_steps = 4;
  s.pass_count_steps = 20;
  s.dataset_seeds = 2;
  s.dataset_records = 300;
  s.metric_tables = 200;
  return s;
}

SuiteResult audit_closed_form(int instances, std::uint64_t seed) {
  return timed("closed-form vs simplex oracles", [&](SuiteResult& r) {
    static constexpr std::size_t sizes[] = {2, 3, 5, 8};
    std::mt19937_64 rng(derive_seed(seed, {0xC10}));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double worst_pga = 0, worst_grid = 0, worst_gap = -1;
    int grid_cases = 0;
    bool ok = true;
    for (int k = 0; k < instances; ++k) {
      const std::size_t n = sizes[static_cast<std::size_t>(k) % 4];
      Hyperparams hp;
      do {
        hp.beta = 0.05 + 0.25 * u01(rng);
        hp.beta_inv = 0.1 * u01(rng);
        hp.beta_sens = 0.1 * u01(rng);
      } while (hp.tau() < 0.05);
      hp.gamma_lpd = 0;
      std::vector<double> rv(n);
      for (double& x : rv) x = 0.2 * u01(rng) - 0.1;
      const RewardVector reward(rv);
      const PolicyDistribution ref = random_distribution(n, rng);
      const PolicyDistribution qi = random_distribution(n, rng);
      const PolicyDistribution qs = random_distribution(n, rng);

      const PolicyDistribution closed = closed_form_policy(reward, ref, qi, qs, hp);
      const SimplexSearchResult pga = pga_argmax(reward, ref, qi, qs, hp);
      const double d = l1_distance(closed.probs(), pga.argmax);
      worst_pga = std::max(worst_pga, d);
      if (!(d <= 1e-4)) ok = false;

      if (n == 3) {
        const SimplexSearchResult grid = grid_argmax3(reward, ref, qi, qs, hp);
        const double closed_value = mod_objective_value(closed, reward, ref, qi, qs, hp);
        const double gap = grid.value - closed_value;  // must not be positive
        worst_gap = std::max(worst_gap, gap);
        const double dg = l1_distance(closed.probs(), grid.argmax);
        worst_grid = std::max(worst_grid, dg);
        // The grid argmax can sit up to a few cells away from the continuous one.
        if (!(gap <= 1e-12) || !(dg <= 5e-3)) ok = false;
        ++grid_cases;
      }
    }
    r.passed = ok;
    r.detail = std::to_string(instances) + " instances, max L1 vs PGA " + sci(worst_pga) +
               " (tol 1e-4); " + std::to_string(grid_cases) + " grid cases, max L1 " +
               sci(worst_grid) + " (tol 5e-3), max grid-over-closed gap " + sci(worst_gap);
  });
}

SuiteResult audit_reduction(int instances, int train_steps, std::uint64_t seed) {
  return timed("reduction to vanilla DPO", [&](SuiteResult& r) {
    std::mt19937_64 rng(derive_seed(seed, {0x2ED}));
    std::uniform_real_distribution<double> lp(-10.0, 0.0);
    std::uniform_real_distribution<double> beta(0.01, 1.0);
    double worst = 0;
    for (int k = 0; k < instances; ++k) {
      PairLogProbs pl;
      for (LogProbPair* slot : {&pl.policy, &pl.reference, &pl.policy_irrelevant,
                                &pl.policy_relevant, &pl.reference_text, &pl.policy_both}) {
        slot->chosen = lp(rng);
        slot->rejected = lp(rng);
      }
      Hyperparams hp{beta(rng), 0.0, 0.0, 0.0, TauMode::stationary};
      const double dpo = dpo_pair_loss(pl, hp.beta);
      for (double v : {modpp_pair_loss(pl, hp, LpdPlacement::inside),
                       modpp_pair_loss(pl, hp, LpdPlacement::outside), mod_pair_loss(pl, hp)}) {
        worst = std::max(worst, std::abs(v - dpo));
      }
    }
    bool ok = worst <= 1e-12;

    const PreferenceDataset ds = small_dataset(400, 100, seed);
    const PolicyParams ref = warmup_reference(ds, 100, seed);
    TrainConfig dpo_cfg;
    dpo_cfg.loss_variant = LossVariant::dpo;
    dpo_cfg.lr = 1.0;
    dpo_cfg.epochs = 100;
    dpo_cfg.seed = seed;
    TrainConfig zero_cfg = dpo_cfg;
    zero_cfg.loss_variant = LossVariant::modpp;
    zero_cfg.hp.beta_inv = zero_cfg.hp.beta_sens = zero_cfg.hp.gamma_lpd = 0.0;
    const TrainResult a = train(ds, ref, dpo_cfg, {}, train_steps);
    const TrainResult b = train(ds, ref, zero_cfg, {}, train_steps);
    int identical = 0;
    for (std::size_t s = 0; s < std::min(a.trace.size(), b.trace.size()); ++s) {
      if (a.trace[s].loss == b.trace[s].loss) ++identical;
    }
    const bool traces_ok = a.trace.size() == static_cast<std::size_t>(train_steps) &&
                           b.trace.size() == a.trace.size() &&
                           identical == static_cast<int>(a.trace.size()) && a.params == b.params;
    ok = ok && traces_ok;
    r.passed = ok;
    r.detail = std::to_string(instances) + " random pairs, max |loss diff| " + sci(worst) +
               " (tol 1e-12); " + std::to_string(identical) + "/" + std::to_string(train_steps) +
               " training steps identical" + (a.params == b.params ? ", final params equal" : ", final params differ");
  });
}

SuiteResult audit_gradients(int triples, std::uint64_t seed) {
  return timed("finite-difference gradient check", [&](SuiteResult& r) {
    std::mt19937_64 rng(derive_seed(seed, {0x6AD}));
    std::normal_distribution<double> normal(0.0, 1.0);
    const PolicyConfig cfg;
    double worst = 0;
    for (int k = 0; k < triples; ++k) {
      const PolicyParams params =
          PolicyParams::random_init(cfg, derive_seed(seed, {0x6AD, static_cast<std::uint64_t>(k)}), 0.5);
      ModalityContext ctx;
      ctx.audio.resize(cfg.audio_dim);
      ctx.visual.resize(cfg.visual_dim);
      for (Eigen::Index i = 0; i < ctx.audio.size(); ++i) ctx.audio[i] = normal(rng);
      for (Eigen::Index i = 0; i < ctx.visual.size(); ++i) ctx.visual[i] = normal(rng);
      ctx.prompt_id = std::uniform_int_distribution<int>(0, cfg.num_prompts - 1)(rng);
      Eigen::VectorXd upstream(cfg.vocab);
      for (Eigen::Index i = 0; i < upstream.size(); ++i) upstream[i] = normal(rng);
      worst = std::max(worst, gradient_check(params, ctx, upstream));
    }
    r.passed = worst < 1e-5;
    r.detail = std::to_string(triples) + " triples, max relative error " + sci(worst) + " (tol 1e-5)";
  });
}

SuiteResult audit_stop_gradient(int steps, std::uint64_t seed) {
  return timed("stop-gradient frozen-surrogate audit", [&](SuiteResult& r) {
    const PreferenceDataset ds = small_dataset(200, 60, seed);
    const PolicyParams ref = warmup_reference(ds, 200, seed);
    const std::string ref_before = checkpoint_to_string(ref);
    const FeatureBank bank = FeatureBank::from(ds);
    TrainConfig cfg;
    cfg.loss_variant = LossVariant::modpp;
    cfg.lr = 1.0;
    cfg.batch_size = 4;
    cfg.epochs = 100;
    cfg.seed = seed;
    double worst = 0;
    int audited = 0;
    bool nonzero = true;
    train(ds, ref, cfg,
          [&](const PolicyParams& before, const Batch& batch, std::uint64_t step) {
            const BatchGradient bg = batch_gradient(before, ref, ds, batch, cfg, step, bank);
            const Eigen::VectorXd fd = finite_difference_gradient(before, [&](const PolicyParams& p) {
              return frozen_surrogate_loss(p, ds, batch, bg.logprobs, cfg);
            });
            if (bg.grad.is_zero()) nonzero = false;
            worst = std::max(worst, relative_error(bg.grad.grads().flatten(), fd));
            ++audited;
          },
          steps);
    const bool ref_intact = checkpoint_to_string(ref) == ref_before;
    r.passed = audited == steps && worst < 1e-4 && nonzero && ref_intact;
    r.detail = std::to_string(audited) + " steps, max relative error " + sci(worst) +
               " (tol 1e-4)" + (ref_intact ? ", reference unchanged" : ", reference MODIFIED");
  });
}

SuiteResult audit_pass_counts(int steps, std::uint64_t seed) {
  return timed("per-pair pass accounting", [&](SuiteResult& r) {
    const PreferenceDataset ds = small_dataset(1000, 200, seed);
    const PolicyParams ref = warmup_reference(ds, 50, seed);
    bool ok = true;
    std::ostringstream detail;
    const std::pair<LossVariant, PassCounter> table[] = {
        {LossVariant::dpo, kExpectedDpo}, {LossVariant::mod, kExpectedMod},
        {LossVariant::modpp, kExpectedModpp}};
    for (const auto& [variant, expected] : table) {
      TrainConfig cfg;
      cfg.loss_variant = variant;
      cfg.lr = 0.5;
      cfg.epochs = 100;
      cfg.seed = seed;
      const TrainResult res = train(ds, ref, cfg, {}, steps);
      int matching = 0;
      for (const StepRecord& rec : res.trace) {
        if (rec.uniform_passes && rec.per_pair() == expected) ++matching;
      }
      const PassCounter got = res.trace.empty() ? PassCounter{} : res.trace.front().per_pair();
      ok = ok && matching == steps && static_cast<int>(res.trace.size()) == steps;
      if (detail.tellp() > 0) detail << "; ";
      detail << to_string(variant) << " (" << got.fwd_policy << "," << got.fwd_ref << ","
             << got.bwd_policy << "," << got.bwd_ref << ") on " << matching << "/" << steps
             << " steps";
    }
    r.passed = ok;
    r.detail = detail.str();
  });
}

SuiteResult audit_dataset_roundtrip(int seeds, int records, const std::filesystem::path& scratch) {
  return timed("dataset round trip and fault injection", [&](SuiteResult& r) {
    std::filesystem::create_directories(scratch);
    bool ok = true;
    long total_violations = 0;
    for (int s = 1; s <= seeds; ++s) {
      SynthConfig cfg;
      cfg.seed = static_cast<std::uint64_t>(s);
      cfg.num_records = records;
      const auto path = scratch / ("roundtrip_" + std::to_string(s) + ".jsonl");
      write_dataset(path, assemble_dataset(cfg));
      const VerificationReport rep = verify_dataset(path);
      total_violations += static_cast<long>(rep.violations.size() + rep.parse_errors.size());
      if (!rep.clean() || rep.records != records) ok = false;

      if (s == 1) {
        std::vector<std::string> lines;
        {
          std::ifstream in(path);
          for (std::string line; std::getline(in, line);) lines.push_back(line);
        }
        std::mt19937_64 rng(derive_seed(static_cast<std::uint64_t>(records), {0xFA17}));
        const std::size_t target =
            1 + std::uniform_int_distribution<std::size_t>(0, lines.size() - 2)(rng);
        auto j = nlohmann::ordered_json::parse(lines[target]);
        const int chosen = j["chosen"].get<int>();
        j["chosen"] = j["rejected"];
        j["rejected"] = chosen;
        lines[target] = j.dump();
        const auto faulted = scratch / "roundtrip_faulted.jsonl";
        {
          std::ofstream out(faulted);
          for (const std::string& line : lines) out << line << '\n';
        }
        const VerificationReport frep = verify_dataset(faulted);
        const bool exact = frep.violations.size() == 1 && frep.parse_errors.empty() &&
                           frep.violations.front().line == static_cast<int>(target + 1);
        if (!exact) ok = false;
        std::filesystem::remove(faulted);
      }
      std::filesystem::remove(path);
      std::filesystem::path stats = path;
      stats += ".stats.json";
      std::filesystem::remove(stats);
    }
    r.passed = ok;
    r.detail = std::to_string(seeds) + " seeds x " + std::to_string(records) + " records, " +
               std::to_string(total_violations) + " violations; fault injection " +
               (ok ? "flagged exactly one line" : "FAILED");
  });
}

SuiteResult audit_metrics(int tables, std::uint64_t seed) {
  return timed("metric identities", [&](SuiteResult& r) {
    const auto make = [](long yc, long yt, long nc, long nt, std::vector<EvalItem>& items,
                         std::vector<Answer>& preds) {
      items.clear();
      preds.clear();
      for (long i = 0; i < yt; ++i) {
        EvalItem it;
        it.ground_truth = Answer::yes;
        items.push_back(it);
        preds.push_back(i < yc ? Answer::yes : Answer::no);
      }
      for (long i = 0; i < nt; ++i) {
        EvalItem it;
        it.ground_truth = Answer::no;
        items.push_back(it);
        preds.push_back(i < nc ? Answer::no : Answer::yes);
      }
    };
    const auto two = [](const std::optional<double>& v) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.2f", v.value_or(-1));
      return std::string(buf);
    };
    std::vector<EvalItem> items;
    std::vector<Answer> preds;
    make(3, 4, 5, 6, items, preds);
    const MetricsReport hand = score(preds, items);
    const bool hand_ok = two(hand.precision) == "75.00" && two(hand.recall) == "83.33" &&
                         two(hand.accuracy) == "80.00" && two(hand.f1) == "78.95";

    std::mt19937_64 rng(derive_seed(seed, {0x3E7}));
    int failures = 0;
    for (int k = 0; k < tables; ++k) {
      const long yt = std::uniform_int_distribution<long>(0, 40)(rng);
      const long nt = std::uniform_int_distribution<long>(yt == 0 ? 1 : 0, 40)(rng);
      const long yc = std::uniform_int_distribution<long>(0, yt)(rng);
      const long nc = std::uniform_int_distribution<long>(0, nt)(rng);
      make(yc, yt, nc, nt, items, preds);
      std::vector<std::size_t> order(items.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      std::vector<EvalItem> items2;
      std::vector<Answer> preds2;
      for (std::size_t i : order) {
        items2.push_back(items[i]);
        preds2.push_back(preds[i]);
      }
      const MetricsReport m = score(preds, items);
      const MetricsReport m2 = score(preds2, items2);
      bool good = m.counts == StratumCounts{yc, yt, nc, nt} && m2.counts == m.counts;
      good = good && m.accuracy && std::abs(*m.accuracy - 100.0 * (yc + nc) / (yt + nt)) < 1e-9;
      good = good && (yt > 0) == m.precision.has_value() && (nt > 0) == m.recall.has_value();
      good = good && m.pa == m.precision && m.hr == m.recall;
      for (const auto& v : {m.accuracy, m.precision, m.recall, m.f1}) {
        if (v && !(*v >= 0 && *v <= 100)) good = false;
      }
      if (m.precision && m.recall) {
        const double p = *m.precision, q = *m.recall;
        if (p + q > 0) {
          good = good && m.f1 && std::abs(*m.f1 - 2 * p * q / (p + q)) < 1e-9 && !m.f1_degenerate;
        } else {
          good = good && m.f1 == 0.0 && m.f1_degenerate;
        }
      } else {
        good = good && !m.f1;
      }
      good = good && m2.accuracy == m.accuracy && m2.f1 == m.f1;
      if (!good) ++failures;
    }
    r.passed = hand_ok && failures == 0;
    r.detail = std::string("hand tally Pre ") + two(hand.precision) + " Rec " + two(hand.recall) +
               " Acc " + two(hand.accuracy) + " F1 " + two(hand.f1) + "; " +
               std::to_string(tables - failures) + "/" + std::to_string(tables) +
               " random tables consistent";
  });
}

std::vector<SuiteResult> run_audit_suite(const AuditSizes& sizes,
                                         const std::filesystem::path& scratch,
                                         std::uint64_t seed) {
  return {
      audit_closed_form(sizes.closed_form_instances, seed),
      audit_reduction(sizes.reduction_instances, sizes.reduction_train_steps, seed),
      audit_gradients(sizes.gradient_triples, seed),
      audit_stop_gradient(sizes.stop_gradient_steps, seed),
      audit_pass_counts(sizes.pass_count_steps, seed),
      audit_dataset_roundtrip(sizes.dataset_seeds, sizes.dataset_records, scratch),
      audit_metrics(sizes.metric_tables, seed),
  };
}

}  // namespace moddpo
