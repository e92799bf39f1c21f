#pragma once

#include <torch/torch.h>

#include <string>

namespace knowsam {

// Side length of the patch selection grid used by the augmentation stage.
// Image spatial dims must be divisible by this.
inline constexpr int64_t kPatchGridSide = 4;
inline constexpr int64_t kPatchGridCells = kPatchGridSide * kPatchGridSide;

// Per-pixel class sums of a probability map may drift this far from 1.
inline constexpr double kProbSumTolerance = 1e-5;

/// Normalized input image: float32 [C,H,W] with values in [0,1].
struct Image {
  torch::Tensor pixels;
  std::string id;

  static Image make(torch::Tensor pixels, std::string id);

  int64_t channels() const { return pixels.size(0); }
  int64_t height() const { return pixels.size(1); }
  int64_t width() const { return pixels.size(2); }
};

/// Index-encoded class labels: int64 [H,W] (or [B,H,W]), values in [0, C).
struct LabelMask {
  torch::Tensor classes;
  int64_t num_classes = 0;

  static LabelMask make(torch::Tensor classes, int64_t num_classes);

  int64_t height() const { return classes.size(-2); }
  int64_t width() const { return classes.size(-1); }
  bool batched() const { return classes.dim() == 3; }
};

/// Pre-softmax class scores: float [..,C,H,W], finite.
struct LogitMap {
  torch::Tensor scores;

  static LogitMap make(torch::Tensor scores);

  int64_t channels() const { return scores.size(-3); }
};

/// Per-pixel class distribution: float [..,C,H,W], rows sum to 1.
struct ProbabilityMap {
  torch::Tensor probs;

  // Shape/range checks always; the full sum-to-1 scan only in debug builds.
  static ProbabilityMap make(torch::Tensor probs);

  // Explicit full invariant check, callable from any build type.
  void validate() const;

  int64_t channels() const { return probs.size(-3); }
  int64_t height() const { return probs.size(-2); }
  int64_t width() const { return probs.size(-1); }
  bool batched() const { return probs.dim() == 4; }
};

/// Entropy maps of the two subnets plus their binary disagreement map,
/// all [..,H,W].
struct UncertaintyBundle {
  torch::Tensor entropy_a;
  torch::Tensor entropy_b;
  torch::Tensor dissimilarity;

  static UncertaintyBundle make(torch::Tensor entropy_a, torch::Tensor entropy_b,
                                torch::Tensor dissimilarity, int64_t num_classes);
};

/// Loss-schedule constants shared by the trainer and the loss composition.
struct ScheduleConfig {
  double lambda_e = 0.9;
  double beta = 1.0;
  double temperature = 2.0;  // KD temperature; a knob, not a constant
  int64_t t_max = 50000;
  int64_t batch_size = 24;

  void validate() const;
};

/// Expand an index mask to its one-hot probability view [C,H,W] (or [B,C,H,W]).
ProbabilityMap one_hot(const LabelMask& mask);

/// Hard class map from probabilities. Binary case: class 1 iff foreground
/// prob strictly exceeds `threshold` (ties go to background). C>2: argmax
/// with lowest index winning ties.
LabelMask binarize(const ProbabilityMap& p, double threshold = 0.5);

}  // namespace knowsam
