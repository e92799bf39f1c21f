#include "knowsam/losses/losses.hpp"

#include <cmath>
#include <sstream>

#include "knowsam/fusion/fusion.hpp"

namespace knowsam {
namespace {

constexpr double kCeEps = 1e-12;

double item(const torch::Tensor& t) { return t.defined() ? t.item<double>() : 0.0; }

}  // namespace

torch::Tensor dice_loss(const ProbabilityMap& p, const LabelMask& y, double eps) {
  TORCH_CHECK(p.probs.sizes().slice(p.probs.dim() - 2) == y.classes.sizes().slice(y.classes.dim() - 2),
              "dice_loss: spatial shapes differ");
  auto probs = p.batched() ? p.probs : p.probs.unsqueeze(0);
  auto target = one_hot(y).probs;
  if (!y.batched()) target = target.unsqueeze(0);
  // flatten space: [B,C,HW]
  const int64_t B = probs.size(0), C = probs.size(1);
  probs = probs.reshape({B, C, -1});
  target = target.reshape({B, C, -1});
  const auto inter = (probs * target).sum(-1);
  const auto denom = probs.sum(-1) + target.sum(-1);
  const auto dice = (2.0 * inter + eps) / (denom + eps);
  return (1.0 - dice).mean();
}

torch::Tensor ce_loss(const ProbabilityMap& p, const LabelMask& y) {
  auto probs = p.batched() ? p.probs : p.probs.unsqueeze(0);
  auto target = y.batched() ? y.classes : y.classes.unsqueeze(0);
  TORCH_CHECK(probs.size(0) == target.size(0) && probs.sizes().slice(2) == target.sizes().slice(1),
              "ce_loss: shapes incompatible");
  const auto logp = probs.clamp_min(kCeEps).log();
  const auto picked = logp.gather(1, target.unsqueeze(1)).squeeze(1);
  return -picked.mean();
}

torch::Tensor seg_loss(const ProbabilityMap& p, const LabelMask& y) {
  return dice_loss(p, y) + ce_loss(p, y);
}

torch::Tensor sup_loss(const ProbabilityMap& p_a, const ProbabilityMap& p_b,
                       const ProbabilityMap& y_f, const LabelMask& y) {
  return seg_loss(p_a, y) + seg_loss(p_b, y) + fuse_loss(y_f, y);
}

torch::Tensor entropy_loss(const ProbabilityMap& p_a, const ProbabilityMap& p_b) {
  return entropy_map(p_a).mean() + entropy_map(p_b).mean();
}

double warmup_lambda(int64_t t, int64_t t_max, double beta) {
  TORCH_CHECK(t >= 0, "warmup_lambda: t must be nonnegative, got ", t);
  TORCH_CHECK(t_max > 0, "warmup_lambda: t_max must be positive");
  if (t >= t_max) return beta;
  const double r = 1.0 - static_cast<double>(t) / static_cast<double>(t_max);
  return beta * std::exp(-5.0 * r * r);
}

void LossReport::check_recomposition(double tol) const {
  const double rhs = sup + kd + lambda_e * entropy + lambda_m * mutual + mix;
  TORCH_CHECK(std::abs(total - rhs) <= tol, "LossReport recomposition off by ",
              std::abs(total - rhs));
}

std::string LossReport::csv_header() {
  return "iteration,sup,fuse,mutual,entropy,kd,sam,mix,total,lambda_e,lambda_m";
}

std::string LossReport::csv_row() const {
  std::ostringstream os;
  os.precision(10);
  os << iteration << ',' << sup << ',' << fuse << ',' << mutual << ',' << entropy << ',' << kd
     << ',' << sam << ',' << mix << ',' << total << ',' << lambda_e << ',' << lambda_m;
  return os.str();
}

std::pair<torch::Tensor, LossReport> total_loss(const LossTerms& terms,
                                                const ScheduleConfig& schedule,
                                                const ModuleToggles& toggles, int64_t t) {
  TORCH_CHECK(terms.sup.defined(), "total_loss: supervised term is mandatory");
  LossReport report;
  report.iteration = t;
  report.lambda_e = schedule.lambda_e;
  report.lambda_m = warmup_lambda(t, schedule.t_max, schedule.beta);

  // Compose in double so the report's recomposition identity holds at 1e-6
  // regardless of the terms' compute dtype.
  auto total = terms.sup.to(torch::kDouble);
  if (toggles.use_sam_distill && terms.kd.defined()) total = total + terms.kd.to(torch::kDouble);
  if (toggles.use_entropy_loss && terms.entropy.defined()) {
    total = total + schedule.lambda_e * terms.entropy.to(torch::kDouble);
  }
  if (toggles.use_mutual_loss && terms.mutual.defined()) {
    total = total + report.lambda_m * terms.mutual.to(torch::kDouble);
  }
  if (toggles.use_ugda && terms.mix.defined()) total = total + terms.mix.to(torch::kDouble);

  report.sup = item(terms.sup);
  report.fuse = item(terms.fuse);
  report.mutual = (toggles.use_mutual_loss && terms.mutual.defined()) ? item(terms.mutual) : 0.0;
  report.entropy =
      (toggles.use_entropy_loss && terms.entropy.defined()) ? item(terms.entropy) : 0.0;
  report.kd = (toggles.use_sam_distill && terms.kd.defined()) ? item(terms.kd) : 0.0;
  report.sam = (toggles.use_sam_distill && terms.sam.defined()) ? item(terms.sam) : 0.0;
  report.mix = (toggles.use_ugda && terms.mix.defined()) ? item(terms.mix) : 0.0;
  report.total = item(total);
  return {total, report};
}

}  // namespace knowsam
