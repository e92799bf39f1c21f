#include "knowsam/train/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace knowsam {
namespace {

double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform(rng);
}

torch::Tensor coarse_texture(std::mt19937_64& rng, int64_t size, double amp) {
  const int64_t cells = std::max<int64_t>(size / 8, 2);
  auto gen = at::detail::createCPUGenerator(rng());
  auto coarse = torch::randn({1, 1, cells, cells}, gen, torch::kFloat32);
  auto up = torch::nn::functional::interpolate(
      coarse, torch::nn::functional::InterpolateFuncOptions()
                  .size(std::vector<int64_t>{size, size})
                  .mode(torch::kBilinear)
                  .align_corners(false));
  return amp * up.squeeze(0).squeeze(0);
}

torch::Tensor ellipse_mask(int64_t size, double cx, double cy, double ax, double ay,
                           double theta) {
  auto ys = torch::arange(size, torch::kFloat32).reshape({size, 1}).expand({size, size});
  auto xs = torch::arange(size, torch::kFloat32).reshape({1, size}).expand({size, size});
  const double ct = std::cos(theta), st = std::sin(theta);
  auto dx = xs - cx;
  auto dy = ys - cy;
  auto u = dx * ct + dy * st;
  auto v = -dx * st + dy * ct;
  return ((u / ax).pow(2) + (v / ay).pow(2)) <= 1.0;
}

torch::Tensor polygon_mask(int64_t size, const std::vector<double>& px,
                           const std::vector<double>& py) {
  // even-odd crossing test, vectorized over the pixel grid
  auto ys = torch::arange(size, torch::kFloat32).reshape({size, 1}).expand({size, size});
  auto xs = torch::arange(size, torch::kFloat32).reshape({1, size}).expand({size, size});
  auto inside = torch::zeros({size, size}, torch::kBool);
  const size_t n = px.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const double xi = px[i], yi = py[i], xj = px[j], yj = py[j];
    auto crosses = ((ys < yi) != (ys < yj)) &
                   (xs < (xj - xi) * (ys - yi) / (yj - yi + 1e-12) + xi);
    inside = inside ^ crosses;
  }
  return inside;
}

std::pair<Image, LabelMask> try_sample(const SyntheticSpec& spec, std::mt19937_64& rng,
                                       const std::string& id) {
  const int64_t s = spec.size;
  const double base = uniform(rng, 0.30, 0.50);
  auto img = torch::full({s, s}, base, torch::kFloat32);
  img += coarse_texture(rng, s, 0.15);

  auto fg = torch::zeros({s, s}, torch::kBool);
  const int64_t nshapes =
      spec.min_shapes + static_cast<int64_t>(rng() % static_cast<uint64_t>(
                                                  spec.max_shapes - spec.min_shapes + 1));
  for (int64_t i = 0; i < nshapes; ++i) {
    const double cx = uniform(rng, 0.15, 0.85) * static_cast<double>(s);
    const double cy = uniform(rng, 0.15, 0.85) * static_cast<double>(s);
    torch::Tensor shape;
    if ((rng() & 1) != 0) {
      const double ax = uniform(rng, 0.06, 0.22) * static_cast<double>(s);
      const double ay = uniform(rng, 0.06, 0.22) * static_cast<double>(s);
      shape = ellipse_mask(s, cx, cy, ax, ay, uniform(rng, 0.0, M_PI));
    } else {
      const size_t verts = 5 + static_cast<size_t>(rng() % 4);
      std::vector<double> angles(verts), px(verts), py(verts);
      for (auto& a : angles) a = uniform(rng, 0.0, 2.0 * M_PI);
      std::sort(angles.begin(), angles.end());
      for (size_t v = 0; v < verts; ++v) {
        const double r = uniform(rng, 0.07, 0.22) * static_cast<double>(s);
        px[v] = cx + r * std::cos(angles[v]);
        py[v] = cy + r * std::sin(angles[v]);
      }
      shape = polygon_mask(s, px, py);
    }
    const double offset = spec.contrast * uniform(rng, 0.5, 1.5);
    img = torch::where(shape, img + offset, img);
    fg |= shape;
  }

  // soften boundaries, then speckle
  auto soft = torch::nn::functional::avg_pool2d(
      img.unsqueeze(0).unsqueeze(0),
      torch::nn::functional::AvgPool2dFuncOptions(3).stride(1).padding(1).count_include_pad(false));
  img = soft.squeeze(0).squeeze(0);
  auto gen = at::detail::createCPUGenerator(rng());
  img += spec.noise_sigma * torch::randn({s, s}, gen, torch::kFloat32);

  auto image = Image::make(img.clamp(0.0, 1.0).unsqueeze(0), id);
  auto mask = LabelMask::make(fg.to(torch::kLong), 2);
  return {std::move(image), std::move(mask)};
}

}  // namespace

std::pair<Image, LabelMask> generate_synthetic_sample(const SyntheticSpec& spec, uint64_t seed,
                                                      const std::string& id) {
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < 64; ++attempt) {
    auto [img, mask] = try_sample(spec, rng, id);
    const double frac = mask.classes.to(torch::kDouble).mean().item<double>();
    if (frac >= 0.02 && frac <= 0.6) return {std::move(img), std::move(mask)};
  }
  TORCH_CHECK(false, "synthetic sample ", id, " failed the foreground-fraction gate repeatedly");
}

DatasetSplit generate_synthetic_dataset(const SyntheticSpec& spec, double labeled_fraction,
                                        uint64_t seed) {
  TORCH_CHECK(spec.count >= 10, "synthetic dataset needs n >= 10, got ", spec.count);
  TORCH_CHECK(labeled_fraction > 0.0 && labeled_fraction <= 1.0, "bad labeled fraction");
  TORCH_CHECK(spec.size % kPatchGridSide == 0, "synthetic size must fit the patch grid");
  TORCH_CHECK(spec.min_shapes >= 1 && spec.max_shapes >= spec.min_shapes, "bad shape counts");

  std::vector<std::pair<Image, LabelMask>> samples;
  samples.reserve(static_cast<size_t>(spec.count));
  for (int64_t i = 0; i < spec.count; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "synth-%05lld", static_cast<long long>(i));
    samples.push_back(generate_synthetic_sample(spec, seed * 1000003ull + static_cast<uint64_t>(i), id));
  }

  std::vector<size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  for (size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng() % i]);
  }

  const auto n_labeled = std::max<size_t>(
      1, static_cast<size_t>(std::llround(labeled_fraction * static_cast<double>(samples.size()))));
  std::vector<LabeledSample> labeled;
  std::vector<Image> unlabeled;
  std::vector<LabelMask> sealed;
  for (size_t i = 0; i < order.size(); ++i) {
    auto& [img, mask] = samples[order[i]];
    if (i < n_labeled) {
      labeled.push_back({std::move(img), std::move(mask)});
    } else {
      unlabeled.push_back(std::move(img));
      sealed.push_back(std::move(mask));
    }
  }
  return DatasetSplit(std::move(labeled), std::move(unlabeled), std::move(sealed));
}

}  // namespace knowsam
