#include "moddpo/policy.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "moddpo/errors.hpp"

namespace moddpo {

namespace {

constexpr const char* kCheckpointMagic = "moddpo-checkpoint";
constexpr int kCheckpointVersion = 1;

void check_context(const PolicyParams& params, const ModalityContext& ctx) {
  if (ctx.audio.size() != params.audio_proj.cols() ||
      ctx.visual.size() != params.visual_proj.cols()) {
    throw DimensionError("policy: feature dimensions do not match the parameters");
  }
  if (ctx.prompt_id < 0 || ctx.prompt_id >= params.prompt_embed.cols()) {
    throw DimensionError("policy: prompt_id " + std::to_string(ctx.prompt_id) +
                         " outside the prompt table");
  }
}

Eigen::VectorXd hidden_state(const PolicyParams& params, const ModalityContext& ctx) {
  Eigen::VectorXd pre = params.audio_proj * ctx.audio + params.visual_proj * ctx.visual +
                        params.prompt_embed.col(ctx.prompt_id);
  return pre.array().tanh().matrix();
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
  const double shift = logits.maxCoeff();
  const double log_norm = std::log((logits.array() - shift).exp().sum());
  return (logits.array() - shift - log_norm).matrix();
}

}  // namespace

std::string_view to_string(ModalityTag tag) {
  switch (tag) {
    case ModalityTag::audio_related: return "audio_related";
    case ModalityTag::visual_related: return "visual_related";
    case ModalityTag::audiovisual: return "audiovisual";
  }
  return "unknown";
}

ModalityTag modality_tag_from_string(std::string_view name) {
  if (name == "audio_related") return ModalityTag::audio_related;
  if (name == "visual_related") return ModalityTag::visual_related;
  if (name == "audiovisual") return ModalityTag::audiovisual;
  throw ConfigError("unknown modality tag '" + std::string(name) + "'");
}

void PolicyConfig::validate() const {
  if (vocab < 2 || hidden < 1 || audio_dim < 1 || visual_dim < 1 || num_prompts < 1) {
    throw ConfigError("policy config: all dimensions must be positive and vocab >= 2");
  }
}

PolicyParams PolicyParams::zeros(const PolicyConfig& config) {
  config.validate();
  PolicyParams p;
  p.audio_proj = Eigen::MatrixXd::Zero(config.hidden, config.audio_dim);
  p.visual_proj = Eigen::MatrixXd::Zero(config.hidden, config.visual_dim);
  p.prompt_embed = Eigen::MatrixXd::Zero(config.hidden, config.num_prompts);
  p.out_proj = Eigen::MatrixXd::Zero(config.vocab, config.hidden);
  p.out_bias = Eigen::VectorXd::Zero(config.vocab);
  return p;
}

PolicyParams PolicyParams::random_init(const PolicyConfig& config, std::uint64_t seed,
                                       double scale) {
  PolicyParams p = zeros(config);
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  p.for_each_tensor([&](std::string_view, Eigen::Ref<Eigen::MatrixXd> t) {
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = dist(gen);
  });
  return p;
}

PolicyConfig PolicyParams::config() const {
  return PolicyConfig{static_cast<int>(out_proj.rows()), static_cast<int>(out_proj.cols()),
                      static_cast<int>(audio_proj.cols()), static_cast<int>(visual_proj.cols()),
                      static_cast<int>(prompt_embed.cols())};
}

Eigen::Index PolicyParams::parameter_count() const {
  return audio_proj.size() + visual_proj.size() + prompt_embed.size() + out_proj.size() +
         out_bias.size();
}

void PolicyParams::for_each_tensor(
    const std::function<void(std::string_view, Eigen::Ref<Eigen::MatrixXd>)>& fn) {
  fn("audio_proj", audio_proj);
  fn("visual_proj", visual_proj);
  fn("prompt_embed", prompt_embed);
  fn("out_proj", out_proj);
  fn("out_bias", out_bias);
}

void PolicyParams::for_each_tensor(
    const std::function<void(std::string_view, const Eigen::Ref<const Eigen::MatrixXd>&)>& fn)
    const {
  fn("audio_proj", audio_proj);
  fn("visual_proj", visual_proj);
  fn("prompt_embed", prompt_embed);
  fn("out_proj", out_proj);
  fn("out_bias", out_bias);
}

Eigen::VectorXd PolicyParams::flatten() const {
  Eigen::VectorXd flat(parameter_count());
  Eigen::Index k = 0;
  for_each_tensor([&](std::string_view, const Eigen::Ref<const Eigen::MatrixXd>& t) {
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) flat[k++] = t(r, c);
  });
  return flat;
}

void PolicyParams::assign_flat(const Eigen::Ref<const Eigen::VectorXd>& flat) {
  if (flat.size() != parameter_count()) throw DimensionError("assign_flat: wrong length");
  Eigen::Index k = 0;
  for_each_tensor([&](std::string_view, Eigen::Ref<Eigen::MatrixXd> t) {
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = flat[k++];
  });
}

bool PolicyParams::all_finite() const {
  return audio_proj.allFinite() && visual_proj.allFinite() && prompt_embed.allFinite() &&
         out_proj.allFinite() && out_bias.allFinite();
}

bool PolicyParams::operator==(const PolicyParams& o) const {
  return config() == o.config() && audio_proj == o.audio_proj &&
         visual_proj == o.visual_proj && prompt_embed == o.prompt_embed &&
         out_proj == o.out_proj && out_bias == o.out_bias;
}

GradAccumulator::GradAccumulator(const PolicyConfig& config)
    : grads_(PolicyParams::zeros(config)) {}

void GradAccumulator::add(const GradAccumulator& other) {
  grads_.audio_proj += other.grads_.audio_proj;
  grads_.visual_proj += other.grads_.visual_proj;
  grads_.prompt_embed += other.grads_.prompt_embed;
  grads_.out_proj += other.grads_.out_proj;
  grads_.out_bias += other.grads_.out_bias;
}

void GradAccumulator::scale(double factor) {
  grads_.audio_proj *= factor;
  grads_.visual_proj *= factor;
  grads_.prompt_embed *= factor;
  grads_.out_proj *= factor;
  grads_.out_bias *= factor;
}

bool GradAccumulator::is_zero() const {
  return grads_.audio_proj.isZero(0) && grads_.visual_proj.isZero(0) &&
         grads_.prompt_embed.isZero(0) && grads_.out_proj.isZero(0) &&
         grads_.out_bias.isZero(0);
}

Eigen::VectorXd forward_logprobs(const PolicyParams& params, const ModalityContext& ctx) {
  check_context(params, ctx);
  const Eigen::VectorXd h = hidden_state(params, ctx);
  return log_softmax(params.out_proj * h + params.out_bias);
}

Eigen::VectorXd forward_detached(const PolicyParams& params, const ModalityContext& ctx) {
  return forward_logprobs(params, ctx);
}

void backward(const PolicyParams& params, const ModalityContext& ctx,
              const Eigen::Ref<const Eigen::VectorXd>& upstream, GradAccumulator& acc) {
  check_context(params, ctx);
  if (upstream.size() != params.out_bias.size()) {
    throw DimensionError("backward: upstream length must equal the vocabulary size");
  }
  const Eigen::VectorXd h = hidden_state(params, ctx);
  const Eigen::VectorXd logp = log_softmax(params.out_proj * h + params.out_bias);
  const Eigen::VectorXd probs = logp.array().exp().matrix();

  // d(u . log_softmax(z)) / dz = u - softmax(z) * sum(u)
  const Eigen::VectorXd d_logits = upstream - probs * upstream.sum();
  const Eigen::VectorXd d_hidden = params.out_proj.transpose() * d_logits;
  const Eigen::VectorXd d_pre = (d_hidden.array() * (1.0 - h.array().square())).matrix();

  PolicyParams& g = acc.grads();
  g.out_bias += d_logits;
  g.out_proj.noalias() += d_logits * h.transpose();
  g.audio_proj.noalias() += d_pre * ctx.audio.transpose();
  g.visual_proj.noalias() += d_pre * ctx.visual.transpose();
  g.prompt_embed.col(ctx.prompt_id) += d_pre;
}

void apply_update(PolicyParams& params, const GradAccumulator& grad, double lr) {
  const PolicyParams& g = grad.grads();
  params.audio_proj -= lr * g.audio_proj;
  params.visual_proj -= lr * g.visual_proj;
  params.prompt_embed -= lr * g.prompt_embed;
  params.out_proj -= lr * g.out_proj;
  params.out_bias -= lr * g.out_bias;
}

std::string checkpoint_to_string(const PolicyParams& params) {
  const PolicyConfig cfg = params.config();
  std::ostringstream out;
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "config " << cfg.vocab << ' ' << cfg.hidden << ' ' << cfg.audio_dim << ' '
      << cfg.visual_dim << ' ' << cfg.num_prompts << '\n';
  char buf[32];
  params.for_each_tensor([&](std::string_view name, const Eigen::Ref<const Eigen::MatrixXd>& t) {
    out << "tensor " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", t(r, c));
        out << (c ? " " : "") << buf;
      }
      out << '\n';
    }
  });
  out << "end\n";
  return out.str();
}

PolicyParams checkpoint_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kCheckpointMagic) {
    throw IoError("checkpoint: missing header");
  }
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  }
  std::string word;
  PolicyConfig cfg;
  if (!(in >> word >> cfg.vocab >> cfg.hidden >> cfg.audio_dim >> cfg.visual_dim >>
        cfg.num_prompts) ||
      word != "config") {
    throw IoError("checkpoint: malformed config line");
  }
  cfg.validate();
  PolicyParams params = PolicyParams::zeros(cfg);
  params.for_each_tensor([&](std::string_view name, Eigen::Ref<Eigen::MatrixXd> t) {
    std::string tag, got_name;
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> tag >> got_name >> rows >> cols) || tag != "tensor" || got_name != name) {
      throw IoError("checkpoint: expected tensor '" + std::string(name) + "'");
    }
    if (rows != t.rows() || cols != t.cols()) {
      throw IoError("checkpoint: tensor '" + std::string(name) + "' has the wrong shape");
    }
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        if (!(in >> t(r, c))) throw IoError("checkpoint: truncated tensor data");
  });
  if (!(in >> word) || word != "end") throw IoError("checkpoint: missing end marker");
  if (!params.all_finite()) throw IoError("checkpoint: non-finite parameter");
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << checkpoint_to_string(params);
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

PolicyParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_string(buf.str());
}

}  // namespace moddpo
