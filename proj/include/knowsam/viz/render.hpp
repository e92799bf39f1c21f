#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "knowsam/core/types.hpp"
#include "knowsam/ugda/ugda.hpp"

namespace knowsam {

/// Fig.-3-style panel: inputs, uncertainty grid, selected patches, mixed
/// result. Writes a single PNG.
void write_augment_preview(const Image& labeled_image, const LabelMask& labeled_mask,
                           const Image& unlabeled_image, const torch::Tensor& uncertainty,
                           const std::vector<int64_t>& patches, const MixedSample& mixed,
                           const std::filesystem::path& file);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

void write_line_plot(const std::vector<Series>& series, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::filesystem::path& file);

void write_bar_plot(const std::vector<std::string>& labels, const std::vector<double>& values,
                    const std::string& title, const std::string& y_label,
                    const std::filesystem::path& file);

}  // namespace knowsam
