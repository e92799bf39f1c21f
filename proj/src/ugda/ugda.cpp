#include "knowsam/ugda/ugda.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace knowsam {
namespace {

// Uniform double in [0,1) from the top 53 bits; avoids the
// implementation-defined std::uniform_real_distribution.
double next_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double next_uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * next_uniform(rng);
}

GeomRecord sample_geom(std::mt19937_64& rng) {
  GeomRecord g;
  g.flip_h = (rng() & 1) != 0;
  g.flip_v = (rng() & 1) != 0;
  g.rot_quarters = static_cast<int>(rng() % 4);
  return g;
}

torch::Tensor separable_gaussian_blur(const torch::Tensor& img, double sigma) {
  const int64_t radius = std::max<int64_t>(1, static_cast<int64_t>(std::ceil(3.0 * sigma)));
  const int64_t ksize = 2 * radius + 1;
  auto k = torch::empty({ksize}, torch::kFloat32);
  for (int64_t i = 0; i < ksize; ++i) {
    const double x = static_cast<double>(i - radius);
    k[i] = static_cast<float>(std::exp(-0.5 * x * x / (sigma * sigma)));
  }
  k /= k.sum();
  const int64_t c = img.size(0);
  auto x = img.unsqueeze(0);
  namespace F = torch::nn::functional;
  x = F::pad(x, F::PadFuncOptions({radius, radius, radius, radius}).mode(torch::kReflect));
  const auto kx = k.reshape({1, 1, 1, ksize}).repeat({c, 1, 1, 1});
  const auto ky = k.reshape({1, 1, ksize, 1}).repeat({c, 1, 1, 1});
  x = F::conv2d(x, kx, F::Conv2dFuncOptions().groups(c));
  x = F::conv2d(x, ky, F::Conv2dFuncOptions().groups(c));
  return x.squeeze(0);
}

}  // namespace

torch::Tensor apply_geom(const torch::Tensor& t, const GeomRecord& g) {
  auto out = t;
  if (g.flip_h) out = out.flip(-1);
  if (g.flip_v) out = out.flip(-2);
  if (g.rot_quarters % 4 != 0) out = torch::rot90(out, g.rot_quarters, {-2, -1});
  return out.contiguous();
}

torch::Tensor invert_geom(const torch::Tensor& t, const GeomRecord& g) {
  auto out = t;
  if (g.rot_quarters % 4 != 0) out = torch::rot90(out, -g.rot_quarters, {-2, -1});
  if (g.flip_v) out = out.flip(-2);
  if (g.flip_h) out = out.flip(-1);
  return out.contiguous();
}

std::pair<Image, LabelMask> weak_augment(const Image& x, const LabelMask& y, uint64_t seed,
                                         const AugmentOptions& opts) {
  TORCH_CHECK(x.height() == y.height() && x.width() == y.width(),
              "weak_augment: image/mask shapes differ");
  std::mt19937_64 rng(seed);
  const GeomRecord g = opts.geometry ? sample_geom(rng) : GeomRecord{};
  return {Image::make(apply_geom(x.pixels, g), x.id),
          LabelMask::make(apply_geom(y.classes, g), y.num_classes)};
}

StrongAugmented strong_augment(const Image& x, uint64_t seed, const AugmentOptions& opts) {
  std::mt19937_64 rng(seed);
  const GeomRecord g = opts.geometry ? sample_geom(rng) : GeomRecord{};
  auto img = apply_geom(x.pixels, g);

  if (opts.brightness > 0.0) {
    img = img + next_uniform(rng, -opts.brightness, opts.brightness);
  }
  if (opts.contrast > 0.0) {
    const double c = next_uniform(rng, 1.0 - opts.contrast, 1.0 + opts.contrast);
    const auto mean = img.mean();
    img = (img - mean) * c + mean;
  }
  if (opts.blur_sigma_max > 0.0) {
    const double sigma = next_uniform(rng, opts.blur_sigma_min, opts.blur_sigma_max);
    if (sigma > 1e-3) img = separable_gaussian_blur(img, sigma);
  }
  if (opts.noise_sigma > 0.0) {
    auto gen = at::detail::createCPUGenerator(rng());
    img = img + opts.noise_sigma * torch::randn(img.sizes(), gen, img.options());
  }
  return {Image::make(img.clamp(0.0, 1.0), x.id), g};
}

PatchGrid patch_uncertainty(const torch::Tensor& entropy) {
  TORCH_CHECK(entropy.dim() == 2, "patch_uncertainty expects [H,W]");
  const int64_t h = entropy.size(0), w = entropy.size(1);
  TORCH_CHECK(h % kPatchGridSide == 0 && w % kPatchGridSide == 0, "entropy map ", h, "x", w,
              " not divisible by the ", kPatchGridSide, "x", kPatchGridSide, " grid");
  PatchGrid grid;
  grid.patch_h = h / kPatchGridSide;
  grid.patch_w = w / kPatchGridSide;
  const auto means = torch::avg_pool2d(entropy.unsqueeze(0).unsqueeze(0).to(torch::kDouble),
                                       {grid.patch_h, grid.patch_w})
                         .flatten();
  for (int64_t i = 0; i < kPatchGridCells; ++i) {
    grid.mean_uncertainty[static_cast<size_t>(i)] = means[i].item<double>();
  }
  return grid;
}

std::vector<int64_t> select_topk_patches(const PatchGrid& grid, int64_t k) {
  TORCH_CHECK(k >= 1 && k <= kPatchGridCells, "k must be in [1,", kPatchGridCells, "], got ", k);
  std::vector<int64_t> idx(kPatchGridCells);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int64_t a, int64_t b) {
    const double ma = grid.mean_uncertainty[static_cast<size_t>(a)];
    const double mb = grid.mean_uncertainty[static_cast<size_t>(b)];
    if (ma != mb) return ma > mb;
    return a < b;
  });
  idx.resize(static_cast<size_t>(k));
  return idx;
}

torch::Tensor patch_region_mask(int64_t height, int64_t width, const std::vector<int64_t>& patches,
                                const torch::TensorOptions& opts) {
  TORCH_CHECK(height % kPatchGridSide == 0 && width % kPatchGridSide == 0,
              "region mask dims must fit the patch grid");
  const int64_t ph = height / kPatchGridSide, pw = width / kPatchGridSide;
  auto m = torch::zeros({height, width}, opts.dtype(torch::kFloat32));
  for (const int64_t p : patches) {
    TORCH_CHECK(p >= 0 && p < kPatchGridCells, "patch index ", p, " out of range");
    const int64_t r = p / kPatchGridSide, c = p % kPatchGridSide;
    m.index_put_({torch::indexing::Slice(r * ph, (r + 1) * ph),
                  torch::indexing::Slice(c * pw, (c + 1) * pw)},
                 1.0);
  }
  return m;
}

MixedSample copy_paste_mix(const LabeledSample& labeled, const Image& unlabeled_image,
                           const LabelMask& pseudo_label, const std::vector<int64_t>& patches,
                           PasteDirection direction) {
  TORCH_CHECK(labeled.image.pixels.sizes() == unlabeled_image.pixels.sizes(),
              "copy_paste_mix: image shapes differ");
  TORCH_CHECK(pseudo_label.height() == unlabeled_image.height() &&
                  pseudo_label.width() == unlabeled_image.width(),
              "copy_paste_mix: pseudo label shape differs from image");
  TORCH_CHECK(labeled.mask.num_classes == pseudo_label.num_classes,
              "copy_paste_mix: class counts differ");

  const int64_t h = labeled.image.height(), w = labeled.image.width();
  const auto region = patch_region_mask(h, w, patches, labeled.image.pixels.options());
  const auto region_long = region.to(torch::kLong);

  const bool l2u = direction == PasteDirection::kLabeledToUnlabeled;
  const auto& host_img = l2u ? unlabeled_image.pixels : labeled.image.pixels;
  const auto& src_img = l2u ? labeled.image.pixels : unlabeled_image.pixels;
  const auto& host_tgt = l2u ? pseudo_label.classes : labeled.mask.classes;
  const auto& src_tgt = l2u ? labeled.mask.classes : pseudo_label.classes;

  auto mixed_img = host_img * (1.0 - region) + src_img * region;
  auto mixed_tgt = host_tgt * (1 - region_long) + src_tgt * region_long;
  const std::string mix_id =
      (l2u ? "mix-l2u-" : "mix-u2l-") + labeled.image.id + "+" + unlabeled_image.id;
  return MixedSample{Image::make(std::move(mixed_img), mix_id),
                     LabelMask::make(std::move(mixed_tgt), labeled.mask.num_classes), region,
                     labeled.image.id, unlabeled_image.id};
}

}  // namespace knowsam
