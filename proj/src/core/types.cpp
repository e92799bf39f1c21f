#include "knowsam/core/types.hpp"

namespace knowsam {

Image Image::make(torch::Tensor pixels, std::string id) {
  TORCH_CHECK(pixels.dim() == 3, "Image expects [C,H,W], got dim=", pixels.dim());
  TORCH_CHECK(pixels.is_floating_point(), "Image pixels must be floating point");
  const int64_t h = pixels.size(1);
  const int64_t w = pixels.size(2);
  TORCH_CHECK(h > 0 && w > 0, "Image spatial dims must be positive");
  TORCH_CHECK(h % kPatchGridSide == 0 && w % kPatchGridSide == 0,
              "Image dims must be multiples of the patch grid side (", kPatchGridSide,
              "), got ", h, "x", w);
  TORCH_CHECK(pixels.isfinite().all().item<bool>(), "Image contains non-finite values");
  TORCH_CHECK(pixels.min().item<double>() >= 0.0 && pixels.max().item<double>() <= 1.0,
              "Image values must lie in [0,1]");
  return Image{std::move(pixels), std::move(id)};
}

LabelMask LabelMask::make(torch::Tensor classes, int64_t num_classes) {
  TORCH_CHECK(num_classes >= 2, "LabelMask needs at least 2 classes, got ", num_classes);
  TORCH_CHECK(classes.dim() == 2 || classes.dim() == 3,
              "LabelMask expects [H,W] or [B,H,W], got dim=", classes.dim());
  classes = classes.to(torch::kLong);
  if (classes.numel() > 0) {
    const auto bad = (classes < 0).logical_or(classes >= num_classes);
    if (bad.any().item<bool>()) {
      const auto pos = bad.nonzero()[0];
      std::vector<torch::indexing::TensorIndex> at;
      std::string where;
      for (int64_t d = 0; d < pos.size(0); ++d) {
        const auto i = pos[d].item<int64_t>();
        at.emplace_back(i);
        where += (d ? "," : "") + std::to_string(i);
      }
      TORCH_CHECK(false, "LabelMask value ", classes.index(at).item<int64_t>(), " at (",
                  where, ") outside [0,", num_classes, ")");
    }
  }
  return LabelMask{std::move(classes), num_classes};
}

LogitMap LogitMap::make(torch::Tensor scores) {
  TORCH_CHECK(scores.dim() == 3 || scores.dim() == 4,
              "LogitMap expects [C,H,W] or [B,C,H,W], got dim=", scores.dim());
  TORCH_CHECK(scores.is_floating_point(), "LogitMap must be floating point");
  TORCH_CHECK(scores.isfinite().all().item<bool>(), "LogitMap contains non-finite values");
  return LogitMap{std::move(scores)};
}

ProbabilityMap ProbabilityMap::make(torch::Tensor probs) {
  TORCH_CHECK(probs.dim() == 3 || probs.dim() == 4,
              "ProbabilityMap expects [C,H,W] or [B,C,H,W], got dim=", probs.dim());
  TORCH_CHECK(probs.is_floating_point(), "ProbabilityMap must be floating point");
  ProbabilityMap p{std::move(probs)};
#ifndef NDEBUG
  p.validate();
#endif
  return p;
}

void ProbabilityMap::validate() const {
  TORCH_CHECK(probs.isfinite().all().item<bool>(), "ProbabilityMap contains non-finite values");
  TORCH_CHECK(probs.min().item<double>() >= -1e-7, "ProbabilityMap has negative entries");
  const auto sums = probs.sum(-3);
  const double worst = (sums - 1.0).abs().max().item<double>();
  TORCH_CHECK(worst <= kProbSumTolerance,
              "ProbabilityMap per-pixel sums deviate from 1 by ", worst);
}

UncertaintyBundle UncertaintyBundle::make(torch::Tensor entropy_a, torch::Tensor entropy_b,
                                          torch::Tensor dissimilarity, int64_t num_classes) {
  TORCH_CHECK(entropy_a.sizes() == entropy_b.sizes() && entropy_a.sizes() == dissimilarity.sizes(),
              "UncertaintyBundle maps must share a shape");
  const double cap = std::log(static_cast<double>(num_classes)) + 1e-6;
  TORCH_CHECK(entropy_a.min().item<double>() >= 0.0 && entropy_a.max().item<double>() <= cap,
              "entropy_a outside [0, ln C]");
  TORCH_CHECK(entropy_b.min().item<double>() >= 0.0 && entropy_b.max().item<double>() <= cap,
              "entropy_b outside [0, ln C]");
  const auto d = dissimilarity;
  TORCH_CHECK(((d == 0).logical_or(d == 1)).all().item<bool>(),
              "dissimilarity must be binary");
  return UncertaintyBundle{std::move(entropy_a), std::move(entropy_b), std::move(dissimilarity)};
}

void ScheduleConfig::validate() const {
  TORCH_CHECK(lambda_e > 0.0 && lambda_e <= 1.0, "lambda_e must be in (0,1], got ", lambda_e);
  TORCH_CHECK(beta > 0.0, "beta must be positive");
  TORCH_CHECK(temperature > 0.0, "temperature must be positive");
  TORCH_CHECK(t_max > 0, "t_max must be positive");
  TORCH_CHECK(batch_size > 0, "batch_size must be positive");
}

ProbabilityMap one_hot(const LabelMask& mask) {
  auto oh = torch::nn::functional::one_hot(mask.classes, mask.num_classes).to(torch::kFloat32);
  // [..,H,W,C] -> [..,C,H,W]
  oh = mask.batched() ? oh.permute({0, 3, 1, 2}) : oh.permute({2, 0, 1});
  return ProbabilityMap::make(oh.contiguous());
}

LabelMask binarize(const ProbabilityMap& p, double threshold) {
  TORCH_CHECK(threshold > 0.0 && threshold < 1.0, "threshold must be in (0,1), got ", threshold);
  const int64_t C = p.channels();
  torch::Tensor cls;
  if (C == 2) {
    cls = (p.probs.select(-3, 1) > threshold).to(torch::kLong);
  } else {
    cls = p.probs.argmax(-3);
  }
  return LabelMask::make(cls.detach(), C);
}

}  // namespace knowsam
