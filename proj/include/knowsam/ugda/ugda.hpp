#pragma once

#include <torch/torch.h>

#include <array>
#include <string>
#include <vector>

#include "knowsam/core/config.hpp"
#include "knowsam/core/dataset.hpp"
#include "knowsam/core/types.hpp"

namespace knowsam {

/// Flip/rotation applied by an augmentation, kept so a pseudo-label computed
/// in one frame can be mapped to the other.
struct GeomRecord {
  bool flip_h = false;
  bool flip_v = false;
  int rot_quarters = 0;  // counter-clockwise quarter turns
};

torch::Tensor apply_geom(const torch::Tensor& t, const GeomRecord& g);
torch::Tensor invert_geom(const torch::Tensor& t, const GeomRecord& g);

/// Weak pipeline: random flips (p=0.5 per axis) and a quarter rotation, mask
/// transformed identically. Deterministic per seed.
std::pair<Image, LabelMask> weak_augment(const Image& x, const LabelMask& y, uint64_t seed,
                                         const AugmentOptions& opts = {});

struct StrongAugmented {
  Image image;
  GeomRecord geom;
};

/// Strong pipeline: weak geometry plus brightness/contrast jitter, Gaussian
/// blur and Gaussian noise, clipped back to [0,1].
StrongAugmented strong_augment(const Image& x, uint64_t seed, const AugmentOptions& opts = {});

/// Mean uncertainty of each cell of the fixed 4x4 partition, row-major.
struct PatchGrid {
  std::array<double, kPatchGridCells> mean_uncertainty{};
  int64_t patch_h = 0;
  int64_t patch_w = 0;
};

PatchGrid patch_uncertainty(const torch::Tensor& entropy);

/// Indices of the k largest cell means, most uncertain first; ties resolved
/// toward the lower row-major index.
std::vector<int64_t> select_topk_patches(const PatchGrid& grid, int64_t k = 5);

enum class PasteDirection {
  kLabeledToUnlabeled,  // labeled patches pasted into the unlabeled host
  kUnlabeledToLabeled,
};

struct MixedSample {
  Image image;
  LabelMask target;
  torch::Tensor provenance;  // [H,W] 1 where the pixel came from the pasted source
  std::string labeled_id;
  std::string unlabeled_id;
};

MixedSample copy_paste_mix(const LabeledSample& labeled, const Image& unlabeled_image,
                           const LabelMask& pseudo_label, const std::vector<int64_t>& patches,
                           PasteDirection direction);

/// Binary [H,W] mask covering the listed grid cells.
torch::Tensor patch_region_mask(int64_t height, int64_t width, const std::vector<int64_t>& patches,
                                const torch::TensorOptions& opts = {});

}  // namespace knowsam
