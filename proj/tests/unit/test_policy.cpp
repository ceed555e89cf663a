#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "moddpo/errors.hpp"
#include "moddpo/policy.hpp"

using namespace moddpo;

namespace {

ModalityContext random_context(const PolicyConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  ModalityContext ctx;
  ctx.audio.resize(cfg.audio_dim);
  ctx.visual.resize(cfg.visual_dim);
  for (Eigen::Index i = 0; i < ctx.audio.size(); ++i) ctx.audio[i] = n(rng);
  for (Eigen::Index i = 0; i < ctx.visual.size(); ++i) ctx.visual[i] = n(rng);
  ctx.prompt_id = std::uniform_int_distribution<int>(0, cfg.num_prompts - 1)(rng);
  return ctx;
}

// Scalar-loop re-evaluation of the forward pass.
std::vector<double> naive_forward(const PolicyParams& p, const ModalityContext& ctx) {
  const int H = static_cast<int>(p.out_proj.cols());
  const int V = static_cast<int>(p.out_proj.rows());
  std::vector<double> h(static_cast<std::size_t>(H));
  for (int i = 0; i < H; ++i) {
    double s = p.prompt_embed(i, ctx.prompt_id);
    for (int j = 0; j < ctx.audio.size(); ++j) s += p.audio_proj(i, j) * ctx.audio[j];
    for (int j = 0; j < ctx.visual.size(); ++j) s += p.visual_proj(i, j) * ctx.visual[j];
    h[static_cast<std::size_t>(i)] = std::tanh(s);
  }
  std::vector<double> logits(static_cast<std::size_t>(V));
  double mx = -1e300;
  for (int v = 0; v < V; ++v) {
    double s = p.out_bias[v];
    for (int i = 0; i < H; ++i) s += p.out_proj(v, i) * h[static_cast<std::size_t>(i)];
    logits[static_cast<std::size_t>(v)] = s;
    mx = std::max(mx, s);
  }
  double z = 0;
  for (double l : logits) z += std::exp(l - mx);
  for (double& l : logits) l = l - mx - std::log(z);
  return logits;
}

double max_relative_fd_error(const PolicyParams& params, const ModalityContext& ctx,
                             const Eigen::VectorXd& upstream) {
  GradAccumulator acc(params.config());
  backward(params, ctx, upstream, acc);
  const Eigen::VectorXd analytic = acc.grads().flatten();
  Eigen::VectorXd flat = params.flatten();
  Eigen::VectorXd numeric(flat.size());
  PolicyParams probe = params;
  const double h = 1e-5;
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    const double keep = flat[i];
    flat[i] = keep + h;
    probe.assign_flat(flat);
    const double up = upstream.dot(forward_logprobs(probe, ctx));
    flat[i] = keep - h;
    probe.assign_flat(flat);
    const double down = upstream.dot(forward_logprobs(probe, ctx));
    flat[i] = keep;
    numeric[i] = (up - down) / (2 * h);
  }
  return (analytic - numeric).norm() / std::max(analytic.norm(), numeric.norm());
}

}  // namespace

TEST_CASE("zero parameters give the uniform distribution") {
  const PolicyConfig cfg;
  const PolicyParams zero = PolicyParams::zeros(cfg);
  std::mt19937_64 rng(1);
  const Eigen::VectorXd lp = forward_logprobs(zero, random_context(cfg, rng));
  for (Eigen::Index i = 0; i < lp.size(); ++i) CHECK(lp[i] == doctest::Approx(-std::log(8.0)));
}

TEST_CASE("a common logit offset leaves the output unchanged") {
  const PolicyConfig cfg;
  PolicyParams p = PolicyParams::random_init(cfg, 4);
  std::mt19937_64 rng(2);
  const ModalityContext ctx = random_context(cfg, rng);
  const Eigen::VectorXd before = forward_logprobs(p, ctx);
  p.out_bias.array() += 3.7;
  const Eigen::VectorXd after = forward_logprobs(p, ctx);
  for (Eigen::Index i = 0; i < before.size(); ++i) CHECK(after[i] == doctest::Approx(before[i]).epsilon(1e-13));
}

TEST_CASE("forward pass agrees with a scalar re-evaluation") {
  const PolicyConfig cfg;
  std::mt19937_64 rng(3);
  for (int k = 0; k < 20; ++k) {
    const PolicyParams p = PolicyParams::random_init(cfg, 100 + k, 0.7);
    const ModalityContext ctx = random_context(cfg, rng);
    const Eigen::VectorXd lp = forward_logprobs(p, ctx);
    const std::vector<double> oracle = naive_forward(p, ctx);
    for (Eigen::Index i = 0; i < lp.size(); ++i) {
      CHECK(std::abs(lp[i] - oracle[static_cast<std::size_t>(i)]) <= 1e-12);
    }
    CHECK(lp.array().exp().sum() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("detached forward pass has identical numerics") {
  const PolicyConfig cfg;
  std::mt19937_64 rng(4);
  const PolicyParams p = PolicyParams::random_init(cfg, 9);
  const ModalityContext ctx = random_context(cfg, rng);
  CHECK(forward_detached(p, ctx) == forward_logprobs(p, ctx));
  CHECK(forward_logprobs(p, ctx) == forward_logprobs(p, ctx));
}

TEST_CASE("backward matches central differences") {
  const PolicyConfig cfg;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 1);
  for (int k = 0; k < 10; ++k) {
    const PolicyParams p = PolicyParams::random_init(cfg, 200 + k, 0.5);
    const ModalityContext ctx = random_context(cfg, rng);
    Eigen::VectorXd upstream(cfg.vocab);
    for (Eigen::Index i = 0; i < upstream.size(); ++i) upstream[i] = n(rng);
    CHECK(max_relative_fd_error(p, ctx, upstream) < 1e-5);
  }
}

TEST_CASE("bias gradient of a single log-probability is one-hot minus softmax") {
  const PolicyConfig cfg;
  std::mt19937_64 rng(6);
  const PolicyParams p = PolicyParams::random_init(cfg, 33, 0.5);
  const ModalityContext ctx = random_context(cfg, rng);
  const int y = 3;
  Eigen::VectorXd upstream = Eigen::VectorXd::Zero(cfg.vocab);
  upstream[y] = 1.0;
  GradAccumulator acc(cfg);
  backward(p, ctx, upstream, acc);
  const Eigen::VectorXd probs = forward_logprobs(p, ctx).array().exp();
  for (int v = 0; v < cfg.vocab; ++v) {
    CHECK(acc.grads().out_bias[v] == doctest::Approx((v == y ? 1.0 : 0.0) - probs[v]).epsilon(1e-12));
  }
}

TEST_CASE("zero upstream and detached-only losses give zero gradients") {
  const PolicyConfig cfg;
  std::mt19937_64 rng(7);
  const PolicyParams p = PolicyParams::random_init(cfg, 1);
  GradAccumulator acc(cfg);
  backward(p, random_context(cfg, rng), Eigen::VectorXd::Zero(cfg.vocab), acc);
  CHECK(acc.is_zero());
  // A loss assembled from detached passes never calls backward().
  GradAccumulator untouched(cfg);
  const double loss = -forward_detached(p, random_context(cfg, rng))[0];
  CHECK(loss > 0);
  CHECK(untouched.is_zero());
}

TEST_CASE("gradient accumulation and update") {
  const PolicyConfig cfg;
  std::mt19937_64 rng(8);
  PolicyParams p = PolicyParams::random_init(cfg, 2);
  const ModalityContext ctx = random_context(cfg, rng);
  Eigen::VectorXd upstream = Eigen::VectorXd::Zero(cfg.vocab);
  upstream[0] = -1.0;
  GradAccumulator a(cfg), b(cfg);
  backward(p, ctx, upstream, a);
  backward(p, ctx, upstream, b);
  a.add(b);
  b.scale(2.0);
  CHECK(a.grads() == b.grads());
  const double before = forward_logprobs(p, ctx)[0];
  apply_update(p, b, 0.01);
  CHECK(forward_logprobs(p, ctx)[0] > before);
}

TEST_CASE("initialization is seeded and bounded") {
  const PolicyConfig cfg;
  const PolicyParams a = PolicyParams::random_init(cfg, 42);
  const PolicyParams b = PolicyParams::random_init(cfg, 42);
  const PolicyParams c = PolicyParams::random_init(cfg, 43);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.flatten().cwiseAbs().maxCoeff() <= 0.1);
  CHECK(a.parameter_count() == 16 * 8 + 16 * 8 + 16 * 15 + 8 * 16 + 8);
  PolicyParams d = PolicyParams::zeros(cfg);
  d.assign_flat(a.flatten());
  CHECK(d == a);
  CHECK_THROWS_AS(d.assign_flat(Eigen::VectorXd::Zero(3)), DimensionError);
}

TEST_CASE("dimension checks") {
  const PolicyConfig cfg;
  const PolicyParams p = PolicyParams::zeros(cfg);
  ModalityContext ctx;
  ctx.audio = Eigen::VectorXd::Zero(3);
  ctx.visual = Eigen::VectorXd::Zero(cfg.visual_dim);
  CHECK_THROWS_AS(forward_logprobs(p, ctx), DimensionError);
  ctx.audio = Eigen::VectorXd::Zero(cfg.audio_dim);
  ctx.prompt_id = cfg.num_prompts;
  CHECK_THROWS_AS(forward_logprobs(p, ctx), DimensionError);
  CHECK_THROWS_AS(PolicyConfig({1, 16, 8, 8, 15}).validate(), ConfigError);
}

TEST_CASE("checkpoint round trip") {
  const PolicyConfig cfg{6, 5, 4, 3, 7};
  const PolicyParams p = PolicyParams::random_init(cfg, 77, 2.0);
  const std::string text = checkpoint_to_string(p);
  CHECK(text.rfind("moddpo-checkpoint 1\n", 0) == 0);
  CHECK(checkpoint_from_string(text) == p);

  const auto path = std::filesystem::temp_directory_path() / "moddpo_unit_ckpt.txt";
  save_checkpoint(path, p);
  CHECK(load_checkpoint(path) == p);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(load_checkpoint(path), IoError);
  CHECK_THROWS_AS(checkpoint_from_string("not a checkpoint"), IoError);
  CHECK_THROWS_AS(checkpoint_from_string("moddpo-checkpoint 2\n"), IoError);
  CHECK_THROWS_AS(checkpoint_from_string(text.substr(0, text.size() / 2)), IoError);
}
