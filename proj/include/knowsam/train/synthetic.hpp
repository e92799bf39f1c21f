#pragma once

#include "knowsam/core/config.hpp"
#include "knowsam/core/dataset.hpp"

namespace knowsam {

/// Deterministic synthetic 2-class dataset: 1-3 random ellipses/polygons over
/// a textured noise background, exact masks, foreground fraction kept inside
/// [0.02, 0.6] by regeneration. Ground truth of unlabeled ids stays sealed.
DatasetSplit generate_synthetic_dataset(const SyntheticSpec& spec, double labeled_fraction,
                                        uint64_t seed);

/// Single sample, exposed for the generator's own tests.
std::pair<Image, LabelMask> generate_synthetic_sample(const SyntheticSpec& spec, uint64_t seed,
                                                      const std::string& id);

}  // namespace knowsam
