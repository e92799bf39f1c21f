#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "knowsam/core/types.hpp"

namespace knowsam {

struct LabeledSample {
  Image image;
  LabelMask mask;
};

/// Labeled/unlabeled split. Ground-truth masks of unlabeled ids, when known
/// (synthetic data), are sealed behind a read-counting accessor so a test can
/// prove the training path never touches them.
class DatasetSplit {
 public:
  DatasetSplit() = default;
  DatasetSplit(std::vector<LabeledSample> labeled, std::vector<Image> unlabeled,
               std::vector<LabelMask> sealed_unlabeled_masks = {});

  DatasetSplit(const DatasetSplit& other);
  DatasetSplit& operator=(const DatasetSplit& other);
  DatasetSplit(DatasetSplit&&) = default;
  DatasetSplit& operator=(DatasetSplit&&) = default;

  const std::vector<LabeledSample>& labeled() const { return labeled_; }
  const std::vector<Image>& unlabeled() const { return unlabeled_; }
  size_t labeled_count() const { return labeled_.size(); }
  size_t unlabeled_count() const { return unlabeled_.size(); }
  int64_t num_classes() const;

  bool has_sealed_masks() const { return !sealed_masks_.empty(); }
  // Evaluation-only access; every call is recorded.
  const LabelMask& sealed_unlabeled_mask(size_t i) const;
  size_t sealed_reads() const { return sealed_reads_.load(); }

 private:
  void check_invariants() const;

  std::vector<LabeledSample> labeled_;
  std::vector<Image> unlabeled_;
  std::vector<LabelMask> sealed_masks_;
  mutable std::atomic<size_t> sealed_reads_{0};
};

/// On-disk layout: <root>/images/<id>.png, <root>/masks/<id>.png,
/// <root>/split.json with {"labeled": [...], "unlabeled": [...]}.
DatasetSplit load_dataset_dir(const std::filesystem::path& root);

/// Writes the same layout. Unlabeled masks are emitted only when sealed ones
/// exist (so a synthetic set round-trips); split.json keeps the partition.
void save_dataset_dir(const DatasetSplit& split, const std::filesystem::path& root);

Image load_image_png(const std::filesystem::path& file, const std::string& id);
LabelMask load_mask_png(const std::filesystem::path& file, int64_t num_classes);
void save_image_png(const Image& image, const std::filesystem::path& file);
void save_mask_png(const LabelMask& mask, const std::filesystem::path& file);

}  // namespace knowsam
