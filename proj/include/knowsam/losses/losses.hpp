#pragma once

#include <torch/torch.h>

#include <string>

#include "knowsam/core/config.hpp"
#include "knowsam/core/types.hpp"

namespace knowsam {

inline constexpr double kDiceSmooth = 1e-5;

/// Soft Dice loss, smoothing eps in numerator and denominator, averaged over
/// classes (and batch).
torch::Tensor dice_loss(const ProbabilityMap& p, const LabelMask& y, double eps = kDiceSmooth);

/// Pixel-mean cross entropy of a probability map against index targets.
torch::Tensor ce_loss(const ProbabilityMap& p, const LabelMask& y);

/// L_SEG = Dice + CE.
torch::Tensor seg_loss(const ProbabilityMap& p, const LabelMask& y);

/// L_sup = L_SEG(p_a, y) + L_SEG(p_b, y) + L_fuse(y_f, y). Labeled data only.
torch::Tensor sup_loss(const ProbabilityMap& p_a, const ProbabilityMap& p_b,
                       const ProbabilityMap& y_f, const LabelMask& y);

/// L_ent: spatial mean of the summed per-class entropies of both subnets.
torch::Tensor entropy_loss(const ProbabilityMap& p_a, const ProbabilityMap& p_b);

/// Gaussian warm-up: beta * exp(-5 (1 - t/t_max)^2). t beyond t_max clamps
/// to beta; negative t rejects.
double warmup_lambda(int64_t t, int64_t t_max, double beta);

/// Per-iteration scalar record; `total` is the subnet-side objective, `sam`
/// the teacher-side one, `mix` the UGDA mixed-sample seg term (0 when off).
struct LossReport {
  int64_t iteration = 0;
  double sup = 0, fuse = 0, mutual = 0, entropy = 0, kd = 0, sam = 0, mix = 0;
  double total = 0;
  double lambda_e = 0, lambda_m = 0;

  // total == sup + kd + lambda_e*entropy + lambda_m*mutual + mix
  void check_recomposition(double tol = 1e-6) const;
  static std::string csv_header();
  std::string csv_row() const;
};

/// Loss terms as live graph tensors; undefined tensors mean "term disabled".
struct LossTerms {
  torch::Tensor sup, fuse, mutual, entropy, kd, sam, mix;
};

/// Composes the subnet objective per the schedule and toggles and fills the
/// report. Disabled terms contribute exactly zero.
std::pair<torch::Tensor, LossReport> total_loss(const LossTerms& terms,
                                                const ScheduleConfig& schedule,
                                                const ModuleToggles& toggles, int64_t t);

}  // namespace knowsam
