#pragma once

#include <torch/torch.h>

#include "knowsam/core/types.hpp"

namespace knowsam {

// eps inside the entropy log; 0*log(0) evaluates to 0 under this clamp.
inline constexpr double kEntropyEps = 1e-8;

/// Per-pixel prediction entropy, natural log: H(k) = -sum_c p_c log p_c.
/// Returns [..,H,W]; differentiable w.r.t. p.
torch::Tensor entropy_map(const ProbabilityMap& p);

/// Binary map of pixels where the two hard predictions disagree ([..,H,W],
/// float 0/1). Symmetric in its arguments.
torch::Tensor dissimilarity_map(const ProbabilityMap& p_a, const ProbabilityMap& p_b);

UncertaintyBundle make_uncertainty_bundle(const ProbabilityMap& p_a, const ProbabilityMap& p_b);

/// Hybrid aggregation: three Conv-BN-LeakyReLU stems (predictions, entropy
/// pair, dissimilarity) concatenated into a small fusion head that emits C
/// logits per pixel. Optional views can be compiled out for ablations; the
/// prediction stem is always present.
struct HamImpl : torch::nn::Module {
  HamImpl(int64_t num_classes, int64_t width = 16, bool view_entropy = true,
          bool view_dissim = true);

  torch::Tensor forward_logits(const UncertaintyBundle& bundle, const ProbabilityMap& p_a,
                               const ProbabilityMap& p_b);
  ProbabilityMap forward(const UncertaintyBundle& bundle, const ProbabilityMap& p_a,
                         const ProbabilityMap& p_b);

  int64_t num_classes;
  int64_t width;
  bool view_entropy;
  bool view_dissim;
  torch::nn::Sequential pred_stem{nullptr};
  torch::nn::Sequential entropy_stem{nullptr};
  torch::nn::Sequential dissim_stem{nullptr};
  torch::nn::Sequential head{nullptr};
};
TORCH_MODULE(Ham);

/// L_fuse: segmentation loss of the aggregated map against ground truth.
/// Labeled samples only.
torch::Tensor fuse_loss(const ProbabilityMap& y_f, const LabelMask& y);

/// Cross pseudo supervision between the two subnets: CE of each map against
/// the other's hard argmax label, gradients stopped through the pseudo side.
torch::Tensor mutual_loss(const ProbabilityMap& p_a, const ProbabilityMap& p_b);

}  // namespace knowsam
