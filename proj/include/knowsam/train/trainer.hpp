#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "knowsam/core/config.hpp"
#include "knowsam/core/dataset.hpp"
#include "knowsam/fusion/fusion.hpp"
#include "knowsam/losses/losses.hpp"
#include "knowsam/metrics/metrics.hpp"
#include "knowsam/nets/subnets.hpp"
#include "knowsam/teacher/teacher.hpp"

namespace knowsam {

/// Everything a training run owns: data, the four parameter sets, both
/// optimizers, and the RNG streams. Single-threaded mutation; snapshots for
/// evaluation are taken read-only.
struct TrainState {
  ExperimentConfig config;
  DatasetSplit data;
  std::shared_ptr<SubnetBase> subnet_a;
  std::shared_ptr<SubnetBase> subnet_b;
  Ham ham{nullptr};
  Teacher teacher{nullptr};
  PromptDecoder prompt_decoder{nullptr};
  std::unique_ptr<torch::optim::SGD> subnet_opt;
  std::unique_ptr<torch::optim::Adam> teacher_opt;
  int64_t iteration = 0;
  std::mt19937_64 batch_rng;
  std::mt19937_64 augment_rng;

  bool uses_unlabeled() const;
  void set_train_mode(bool train);
};

TrainState make_train_state(const ExperimentConfig& config,
                            std::optional<DatasetSplit> dataset = std::nullopt);

/// One training batch; images already carry their weak/strong augmentation.
struct TrainBatch {
  std::vector<LabeledSample> labeled;
  std::vector<Image> unlabeled;
  torch::Tensor labeled_x;  // [Bl,C,H,W]
  torch::Tensor labeled_y;  // [Bl,H,W]
  torch::Tensor unlabeled_x;  // [Bu,C,H,W] (undefined when Bu = 0)
};

TrainBatch next_batch(TrainState& state);

/// Thrown when a loss goes non-finite; carries the offending report row.
struct TrainingHalted : std::runtime_error {
  explicit TrainingHalted(const std::string& what, LossReport report_)
      : std::runtime_error(what), report(report_) {}
  LossReport report;
};

/// One optimization iteration over the full Fig.-2 graph.
LossReport train_step(TrainState& state, const TrainBatch& batch);

/// Final segmentation = argmax of the aggregated map; the teacher never runs.
std::pair<LabelMask, ProbabilityMap> infer(TrainState& state, const Image& image);

MetricReport evaluate_sample(TrainState& state, const Image& image, const LabelMask& gt);
std::vector<MetricReport> evaluate_set(TrainState& state, const std::vector<LabeledSample>& set);

// ---- checkpointing ----------------------------------------------------

void save_checkpoint(const TrainState& state, const std::filesystem::path& dir);

/// Rebuilds a state from `dir`. When `dataset` is empty, the dataset is
/// regenerated/loaded from the stored config. A missing teacher archive is
/// tolerated: the state then supports inference and subnet-only training.
TrainState load_checkpoint(const std::filesystem::path& dir,
                           std::optional<DatasetSplit> dataset = std::nullopt);

/// Deterministic manifest text (byte-identical across save/load/save).
std::string checkpoint_manifest_text(const TrainState& state);

// ---- full runs ---------------------------------------------------------

struct RunResult {
  std::filesystem::path run_dir;
  nlohmann::json metrics;  // aggregate over the held-out set
  double mean_dice = 0;
};

/// Trains per config, streaming losses.csv, then checkpoints and evaluates on
/// `test_set` (generated from the config when not supplied).
RunResult run_training(const ExperimentConfig& config, const std::filesystem::path& run_dir,
                       std::optional<DatasetSplit> train_set = std::nullopt,
                       const std::vector<LabeledSample>* test_set = nullptr);

/// Held-out synthetic test samples matching the config's generator settings.
std::vector<LabeledSample> make_synthetic_test_set(const ExperimentConfig& config, int64_t count);

}  // namespace knowsam
