#include "knowsam/distill/distill.hpp"

namespace knowsam {
namespace {

constexpr double kKlEps = 1e-12;

// KL(P || Q), summed over classes, averaged over pixels (and batch).
torch::Tensor kl_mean(const torch::Tensor& p, const torch::Tensor& q) {
  const auto pc = p.clamp_min(kKlEps);
  const auto qc = q.clamp_min(kKlEps);
  return (p * (pc.log() - qc.log())).sum(-3).mean();
}

}  // namespace

SoftMap SoftMap::make(torch::Tensor probs, double temperature) {
  TORCH_CHECK(temperature > 0.0, "SoftMap temperature must be positive, got ", temperature);
  auto p = ProbabilityMap::make(std::move(probs));
  return SoftMap{std::move(p.probs), temperature};
}

SoftMap temp_softmax(const LogitMap& logits, double temperature) {
  TORCH_CHECK(temperature > 0.0, "temp_softmax: temperature must be positive, got ",
              temperature);
  return SoftMap::make((logits.scores / temperature).softmax(-3), temperature);
}

torch::Tensor kd_loss(const SoftMap& soft_a, const SoftMap& soft_b, const SoftMap& soft_teacher,
                      bool t_squared_scale) {
  TORCH_CHECK(soft_a.temperature == soft_b.temperature &&
                  soft_a.temperature == soft_teacher.temperature,
              "kd_loss: temperature mismatch (", soft_a.temperature, ", ", soft_b.temperature,
              ", ", soft_teacher.temperature, ")");
  TORCH_CHECK(soft_a.probs.sizes() == soft_teacher.probs.sizes() &&
                  soft_b.probs.sizes() == soft_teacher.probs.sizes(),
              "kd_loss: shapes differ");
  const auto teacher = soft_teacher.probs.detach();
  auto loss = kl_mean(teacher, soft_a.probs) + kl_mean(teacher, soft_b.probs);
  if (t_squared_scale) loss = loss * (soft_teacher.temperature * soft_teacher.temperature);
  return loss;
}

}  // namespace knowsam
