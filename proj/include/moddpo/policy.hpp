#pragma once

// A small differentiable "omni" policy:
//   h = tanh(U_a a + U_v v + E_x[prompt]),  logits = W_out h + b,
//   log pi(. | a, v, x) = log_softmax(logits).
// Responses are single vocabulary items.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace moddpo {

enum class ModalityTag { audio_related, visual_related, audiovisual };

std::string_view to_string(ModalityTag tag);
ModalityTag modality_tag_from_string(std::string_view name);

struct ModalityContext {
  Eigen::VectorXd audio;
  Eigen::VectorXd visual;
  int prompt_id = 0;
  ModalityTag tag = ModalityTag::visual_related;
};

struct PolicyConfig {
  int vocab = 8;
  int hidden = 16;
  int audio_dim = 8;
  int visual_dim = 8;
  int num_prompts = 15;

  void validate() const;
  bool operator==(const PolicyConfig&) const = default;
};

struct PolicyParams {
  Eigen::MatrixXd audio_proj;    // hidden x audio_dim
  Eigen::MatrixXd visual_proj;   // hidden x visual_dim
  Eigen::MatrixXd prompt_embed;  // hidden x num_prompts, one column per prompt
  Eigen::MatrixXd out_proj;      // vocab x hidden
  Eigen::VectorXd out_bias;      // vocab

  static PolicyParams zeros(const PolicyConfig& config);
  // Entries i.i.d. uniform(-scale, scale) from a seeded generator.
  static PolicyParams random_init(const PolicyConfig& config, std::uint64_t seed,
                                  double scale = 0.1);

  PolicyConfig config() const;
  Eigen::Index parameter_count() const;

  // Visits every tensor in a fixed order with its checkpoint name. Vectors are
  // exposed as single-column matrices.
  void for_each_tensor(const std::function<void(std::string_view, Eigen::Ref<Eigen::MatrixXd>)>& fn);
  void for_each_tensor(
      const std::function<void(std::string_view, const Eigen::Ref<const Eigen::MatrixXd>&)>& fn)
      const;

  Eigen::VectorXd flatten() const;
  void assign_flat(const Eigen::Ref<const Eigen::VectorXd>& flat);

  bool all_finite() const;
  bool operator==(const PolicyParams& other) const;
};

// Gradient buffer with the same layout as PolicyParams.
class GradAccumulator {
 public:
  explicit GradAccumulator(const PolicyConfig& config);

  PolicyParams& grads() { return grads_; }
  const PolicyParams& grads() const { return grads_; }

  void add(const GradAccumulator& other);
  void scale(double factor);
  bool is_zero() const;
  bool all_finite() const { return grads_.all_finite(); }

 private:
  PolicyParams grads_;
};

// Log-probabilities over the vocabulary on a gradient-tracked path.
Eigen::VectorXd forward_logprobs(const PolicyParams& params, const ModalityContext& ctx);

// Same numerics as forward_logprobs. Values from this path may enter a loss
// but must never be passed through backward().
Eigen::VectorXd forward_detached(const PolicyParams& params, const ModalityContext& ctx);

// Accumulates d(upstream . log pi(.|ctx)) / d params into acc.
void backward(const PolicyParams& params, const ModalityContext& ctx,
              const Eigen::Ref<const Eigen::VectorXd>& upstream, GradAccumulator& acc);

// params -= lr * grad
void apply_update(PolicyParams& params, const GradAccumulator& grad, double lr);

// Checkpoint text format (version 1):
//   moddpo-checkpoint 1
//   config <vocab> <hidden> <audio_dim> <visual_dim> <num_prompts>
//   tensor <name> <rows> <cols>
//   <rows lines of cols space-separated %.17g values>
//   ... one block per tensor: audio_proj visual_proj prompt_embed out_proj out_bias
//   end
void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params);
PolicyParams load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_to_string(const PolicyParams& params);
PolicyParams checkpoint_from_string(const std::string& text);

}  // namespace moddpo
