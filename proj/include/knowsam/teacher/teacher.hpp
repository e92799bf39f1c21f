#pragma once

#include <torch/torch.h>

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "knowsam/core/config.hpp"
#include "knowsam/core/types.hpp"

namespace knowsam {

/// Encoder feature map Z: [B,D,H',W'] with H'=H/stride.
struct TeacherEmbedding {
  torch::Tensor z;

  int64_t batch() const { return z.size(0); }
  int64_t dim() const { return z.size(1); }
};

/// Learnable dense prompt P_b: [B,N_b,L].
struct PromptEmbedding {
  torch::Tensor p;

  static PromptEmbedding make(torch::Tensor p);
  int64_t count() const { return p.size(1); }
  int64_t dim() const { return p.size(2); }
};

struct TeacherConfig {
  int64_t in_channels = 1;
  int64_t num_classes = 2;
  int64_t embed_dim = 64;   // D (a real foundation encoder would use 256)
  int64_t stride = 4;       // power of two
  int64_t num_prompts = 4;  // N_b; prompt dim L equals embed_dim
  int64_t decoder_layers = 2;
  std::string variant = "conv-standin";
};

/// Lightweight prompt decoder psi: two conv blocks, spatial pooling, linear
/// projection to N_b x L.
struct PromptDecoderImpl : torch::nn::Module {
  PromptDecoderImpl(int64_t embed_dim, int64_t num_prompts);
  PromptEmbedding forward(const TeacherEmbedding& z);

  int64_t embed_dim, num_prompts;
  torch::nn::Sequential blocks{nullptr};
  torch::nn::Linear proj{nullptr};
};
TORCH_MODULE(PromptDecoder);

/// Foundation-teacher stand-in: a frozen convolutional encoder with trainable
/// bottleneck adapters after every stage, plus a prompt-conditioned
/// cross-attention mask decoder. Encoder weights never receive gradients;
/// the mask prompt is detached on entry so no teacher loss can reach the
/// subnets or the aggregation module through it.
struct TeacherImpl : torch::nn::Module {
  explicit TeacherImpl(TeacherConfig cfg);

  TeacherEmbedding encode(const torch::Tensor& x);
  std::pair<LogitMap, ProbabilityMap> decode(const TeacherEmbedding& z,
                                             const PromptEmbedding& prompts,
                                             const ProbabilityMap& mask_prompt);
  // Neutral-prompt prediction: zero prompt tokens and a uniform mask prompt.
  std::pair<LogitMap, ProbabilityMap> decode_unconditional(const TeacherEmbedding& z);

  const std::vector<std::string>& frozen_parameter_names() const { return frozen_names_; }
  std::vector<torch::Tensor> trainable_parameters() const;
  nlohmann::json sidecar() const;

  TeacherConfig cfg;

 private:
  void freeze_encoder();

  torch::nn::Sequential patchify_{nullptr};
  torch::nn::ModuleList enc_stages_{nullptr};
  torch::nn::ModuleList enc_adapters_{nullptr};
  torch::nn::Conv2d mask_proj_{nullptr};
  torch::nn::ModuleList dec_layers_{nullptr};
  torch::nn::Sequential upsample_{nullptr};
  std::vector<std::string> frozen_names_;
};
TORCH_MODULE(Teacher);

Teacher make_teacher(const TeacherConfig& cfg);

/// L_sam: segmentation loss of the teacher prediction against ground truth.
torch::Tensor sam_loss(const ProbabilityMap& y_s, const LabelMask& y);

}  // namespace knowsam
