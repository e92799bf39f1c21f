#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "knowsam/train/trainer.hpp"

namespace knowsam {

struct AblationRow {
  std::string preset;
  uint64_t seed = 0;
  double dice = 0, iou = 0, hd95 = 0, asd = 0;
};

/// Runs every preset of a family (or one named preset) across the seeds,
/// sharing the same train/test data per seed; writes ablation.csv and a bar
/// plot of per-preset mean Dice under out_dir.
std::vector<AblationRow> run_ablation(const ExperimentConfig& base,
                                      const std::string& family_or_preset,
                                      const std::vector<uint64_t>& seeds,
                                      const std::filesystem::path& out_dir);

/// Aggregates the runs/<name>/metrics.json files below `runs_dir` into
/// report.csv plus bar/line plots (label-ratio sweep when run names carry a
/// "frac" key like `sweep-frac0.10-seed1`).
void write_report(const std::filesystem::path& runs_dir, const std::filesystem::path& out_dir);

}  // namespace knowsam
