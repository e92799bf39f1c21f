#pragma once

#include <torch/torch.h>

#include "knowsam/core/types.hpp"

namespace knowsam {

/// Temperature-softened probability map with its temperature kept for
/// provenance; maps from different temperatures must not be mixed in a loss.
struct SoftMap {
  torch::Tensor probs;  // [..,C,H,W], per-pixel sum 1
  double temperature = 1.0;

  static SoftMap make(torch::Tensor probs, double temperature);
};

/// Per-pixel softmax of logits/T.
SoftMap temp_softmax(const LogitMap& logits, double temperature);

/// KD loss: KL(teacher || student_a) + KL(teacher || student_b), pixel-mean,
/// teacher gradient-stopped. Optionally scaled by T^2 so gradients stay
/// T-stable (standard distillation practice; flag-controlled).
torch::Tensor kd_loss(const SoftMap& soft_a, const SoftMap& soft_b, const SoftMap& soft_teacher,
                      bool t_squared_scale = true);

}  // namespace knowsam
