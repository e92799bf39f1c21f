#include "knowsam/fusion/fusion.hpp"

#include "knowsam/losses/losses.hpp"

namespace knowsam {
namespace {

torch::nn::Sequential cbl_block(int64_t in, int64_t out) {
  return torch::nn::Sequential(
      torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1)),
      torch::nn::BatchNorm2d(out),
      torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.1)));
}

torch::Tensor as_batched(const torch::Tensor& t, int64_t want_dim) {
  return t.dim() == want_dim ? t : t.unsqueeze(0);
}

}  // namespace

torch::Tensor entropy_map(const ProbabilityMap& p) {
  const auto clamped = p.probs.clamp_min(kEntropyEps);
  return -(p.probs * clamped.log()).sum(-3);
}

torch::Tensor dissimilarity_map(const ProbabilityMap& p_a, const ProbabilityMap& p_b) {
  TORCH_CHECK(p_a.probs.sizes() == p_b.probs.sizes(),
              "dissimilarity_map: shapes differ: ", p_a.probs.sizes(), " vs ",
              p_b.probs.sizes());
  const auto ha = binarize(p_a).classes;
  const auto hb = binarize(p_b).classes;
  return (ha != hb).to(p_a.probs.dtype());
}

UncertaintyBundle make_uncertainty_bundle(const ProbabilityMap& p_a, const ProbabilityMap& p_b) {
  return UncertaintyBundle{entropy_map(p_a), entropy_map(p_b), dissimilarity_map(p_a, p_b)};
}

HamImpl::HamImpl(int64_t num_classes_, int64_t width_, bool view_entropy_, bool view_dissim_)
    : num_classes(num_classes_),
      width(width_),
      view_entropy(view_entropy_),
      view_dissim(view_dissim_) {
  pred_stem = register_module("pred_stem", cbl_block(2 * num_classes, width));
  int64_t cat_channels = width;
  if (view_entropy) {
    entropy_stem = register_module("entropy_stem", cbl_block(2, width));
    cat_channels += width;
  }
  if (view_dissim) {
    dissim_stem = register_module("dissim_stem", cbl_block(1, width));
    cat_channels += width;
  }
  auto h = cbl_block(cat_channels, width);
  h->extend(*cbl_block(width, width));
  h->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(width, num_classes, 1)));
  head = register_module("head", h);
}

torch::Tensor HamImpl::forward_logits(const UncertaintyBundle& bundle, const ProbabilityMap& p_a,
                                      const ProbabilityMap& p_b) {
  TORCH_CHECK(p_a.probs.sizes() == p_b.probs.sizes(), "HAM: prediction shapes differ");
  const bool batched = p_a.batched();
  auto pa = as_batched(p_a.probs, 4);
  auto pb = as_batched(p_b.probs, 4);
  TORCH_CHECK(bundle.entropy_a.sizes() == bundle.dissimilarity.sizes(),
              "HAM: bundle shapes differ");
  auto ea = as_batched(bundle.entropy_a, 3).unsqueeze(1);
  auto eb = as_batched(bundle.entropy_b, 3).unsqueeze(1);
  auto di = as_batched(bundle.dissimilarity, 3).unsqueeze(1);
  TORCH_CHECK(ea.size(-1) == pa.size(-1) && ea.size(-2) == pa.size(-2),
              "HAM: spatial shapes of bundle and predictions differ");

  std::vector<torch::Tensor> streams;
  streams.push_back(pred_stem->forward(torch::cat({pa, pb}, 1)));
  if (view_entropy) streams.push_back(entropy_stem->forward(torch::cat({ea, eb}, 1)));
  if (view_dissim) streams.push_back(dissim_stem->forward(di));
  auto logits = head->forward(torch::cat(streams, 1));
  return batched ? logits : logits.squeeze(0);
}

ProbabilityMap HamImpl::forward(const UncertaintyBundle& bundle, const ProbabilityMap& p_a,
                                const ProbabilityMap& p_b) {
  return ProbabilityMap::make(forward_logits(bundle, p_a, p_b).softmax(-3));
}

torch::Tensor fuse_loss(const ProbabilityMap& y_f, const LabelMask& y) {
  return seg_loss(y_f, y);
}

torch::Tensor mutual_loss(const ProbabilityMap& p_a, const ProbabilityMap& p_b) {
  TORCH_CHECK(p_a.probs.sizes() == p_b.probs.sizes(), "mutual_loss: shapes differ");
  const auto pseudo_from = [](const ProbabilityMap& p) {
    return LabelMask::make(p.probs.detach().argmax(-3), p.channels());
  };
  return ce_loss(p_a, pseudo_from(p_b)) + ce_loss(p_b, pseudo_from(p_a));
}

}  // namespace knowsam
