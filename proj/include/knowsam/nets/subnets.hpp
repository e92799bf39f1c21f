#pragma once

#include <torch/torch.h>

#include <memory>
#include <utility>

#include "knowsam/core/types.hpp"

namespace knowsam {

enum class SubnetVariant {
  kSkipConcat,  // U-Net-like: concatenative skip connections
  kResidual,    // V-Net-like (2D): additive residual skips
};

struct SubnetConfig {
  SubnetVariant variant = SubnetVariant::kSkipConcat;
  int64_t in_channels = 1;
  int64_t num_classes = 2;
  int64_t base_width = 16;
  int64_t depth = 4;  // number of downsamplings; input dims must divide 2^depth
};

/// Common surface of the two co-training views. Both emit C logits at input
/// resolution; their internal structure differs so the views stay distinct.
struct SubnetBase : torch::nn::Module {
  explicit SubnetBase(SubnetConfig cfg) : config(cfg) {}
  ~SubnetBase() override = default;
  virtual torch::Tensor forward(const torch::Tensor& x) = 0;
  SubnetConfig config;
};

std::shared_ptr<SubnetBase> make_subnet(const SubnetConfig& config);

/// Forward with the shape contract enforced; returns logits and softmax
/// probabilities. Accepts [C,H,W] or [B,C,H,W].
std::pair<LogitMap, ProbabilityMap> subnet_forward(SubnetBase& net, const torch::Tensor& x);

}  // namespace knowsam
