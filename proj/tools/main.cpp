#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "knowsam/core/config.hpp"
#include "knowsam/fusion/fusion.hpp"
#include "knowsam/train/ablation.hpp"
#include "knowsam/train/synthetic.hpp"
#include "knowsam/train/trainer.hpp"
#include "knowsam/ugda/ugda.hpp"
#include "knowsam/viz/render.hpp"

namespace fs = std::filesystem;
using namespace knowsam;

namespace {

ExperimentConfig load_or_default(const std::string& config_path) {
  if (config_path.empty()) return ExperimentConfig{};
  return load_config(config_path);
}

int cmd_train(const std::string& config_path, const std::string& preset, int64_t seed,
              bool deterministic, const std::string& out) {
  auto cfg = load_or_default(config_path);
  if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
  if (deterministic) cfg.deterministic = true;
  if (!preset.empty()) cfg = apply_preset(cfg, preset);
  const fs::path run_dir = fs::path(out) / cfg.run_name;
  const auto result = run_training(cfg, run_dir);
  std::cout << "run " << cfg.run_name << " finished: dice="
            << result.metrics["dice"]["mean"].get<double>() << "\n"
            << "artifacts in " << run_dir.string() << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& out) {
  auto state = load_checkpoint(checkpoint);
  const auto split = load_dataset_dir(data);

  std::vector<LabeledSample> samples = split.labeled();
  for (size_t i = 0; i < split.unlabeled_count(); ++i) {
    if (split.has_sealed_masks()) {
      samples.push_back({split.unlabeled()[i], split.sealed_unlabeled_mask(i)});
    }
  }
  const auto reports = evaluate_set(state, samples);
  const auto agg = aggregate_reports(reports);

  fs::create_directories(out);
  std::ofstream csv(fs::path(out) / "per_sample.csv");
  csv << "id,dice,iou,hd95,asd\n";
  for (size_t i = 0; i < samples.size(); ++i) {
    csv << samples[i].image.id << ',' << reports[i].mean_dice() << ',' << reports[i].mean_iou()
        << ',' << reports[i].mean_hd95() << ',' << reports[i].mean_asd() << "\n";
  }
  std::ofstream mj(fs::path(out) / "metrics.json");
  mj << agg.dump(2) << "\n";
  std::cout << agg.dump(2) << "\n";
  return 0;
}

int cmd_augment_preview(const std::string& config_path, int64_t seed, const std::string& out) {
  auto cfg = load_or_default(config_path);
  if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
  auto spec = cfg.synthetic;
  spec.size = cfg.image_size;
  spec.count = std::min<int64_t>(spec.count, 16);
  const auto split = generate_synthetic_dataset(spec, 0.5, cfg.seed);

  auto [lab_img, lab_mask] =
      weak_augment(split.labeled()[0].image, split.labeled()[0].mask, cfg.seed + 1, cfg.augment);
  const auto strong = strong_augment(split.unlabeled()[0], cfg.seed + 2, cfg.augment);

  // model-free preview: intensity variance stands in for prediction entropy
  auto gray = strong.image.pixels.mean(0);
  auto local_mean = torch::nn::functional::avg_pool2d(gray.unsqueeze(0).unsqueeze(0),
                                                      torch::nn::functional::AvgPool2dFuncOptions(5)
                                                          .stride(1)
                                                          .padding(2)
                                                          .count_include_pad(false))
                        .squeeze();
  auto uncertainty = (gray - local_mean).abs();

  const auto grid = patch_uncertainty(uncertainty);
  const auto patches = select_topk_patches(grid, cfg.augment.paste_topk);
  LabeledSample labeled{lab_img, lab_mask};
  const auto pseudo = LabelMask::make(torch::zeros_like(lab_mask.classes), cfg.num_classes);
  const auto mixed = copy_paste_mix(labeled, strong.image, pseudo, patches,
                                    PasteDirection::kLabeledToUnlabeled);
  write_augment_preview(lab_img, lab_mask, strong.image, uncertainty, patches, mixed, out);
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_report(const std::string& runs, const std::string& out) {
  write_report(runs, out);
  std::cout << "report written to " << out << "\n";
  return 0;
}

int cmd_synth(const std::string& config_path, int64_t count, int64_t size, double frac,
              int64_t seed, const std::string& out) {
  auto cfg = load_or_default(config_path);
  if (count > 0) cfg.synthetic.count = count;
  if (size > 0) {
    cfg.synthetic.size = size;
    cfg.image_size = size;
  }
  if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
  if (frac > 0) cfg.labeled_fraction = frac;
  auto spec = cfg.synthetic;
  spec.size = cfg.image_size;
  const auto split = generate_synthetic_dataset(spec, cfg.labeled_fraction, cfg.seed);
  save_dataset_dir(split, out);
  std::cout << "wrote " << split.labeled_count() << " labeled / " << split.unlabeled_count()
            << " unlabeled samples to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"knowsam: semi-supervised segmentation with a promptable distillation teacher"};
  app.require_subcommand(1);

  std::string config_path, preset, out = "runs", checkpoint, data, runs_dir;
  int64_t seed = -1, count = -1, size = -1;
  double frac = -1;
  bool deterministic = false;

  auto* train = app.add_subcommand("train", "train a model from a config");
  train->add_option("--config", config_path, "JSON config file");
  train->add_option("--preset", preset, "ablation preset name");
  train->add_option("--seed", seed, "override config seed");
  train->add_flag("--deterministic", deterministic, "single-thread deterministic mode");
  train->add_option("--out", out, "output directory for runs");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset directory");
  eval->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  eval->add_option("--data", data, "dataset root (images/, masks/, split.json)")->required();
  eval->add_option("--out", out, "output directory");

  auto* prev = app.add_subcommand("augment-preview", "write a Fig.-3-style augmentation panel");
  prev->add_option("--config", config_path, "JSON config file");
  prev->add_option("--seed", seed, "seed");
  prev->add_option("--out", out, "output PNG path")->required();

  auto* report = app.add_subcommand("report", "aggregate runs into CSV + plots");
  report->add_option("--runs", runs_dir, "directory containing run subdirectories")->required();
  report->add_option("--out", out, "output directory");

  auto* synth = app.add_subcommand("synth", "materialize a synthetic dataset directory");
  synth->add_option("--config", config_path, "JSON config file");
  synth->add_option("--count", count, "sample count");
  synth->add_option("--size", size, "image side length");
  synth->add_option("--labeled-fraction", frac, "labeled fraction");
  synth->add_option("--seed", seed, "seed");
  synth->add_option("--out", out, "output dataset root")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(train)) return cmd_train(config_path, preset, seed, deterministic, out);
    if (app.got_subcommand(eval)) return cmd_eval(checkpoint, data, out);
    if (app.got_subcommand(prev)) return cmd_augment_preview(config_path, seed, out);
    if (app.got_subcommand(report)) return cmd_report(runs_dir, out);
    if (app.got_subcommand(synth)) return cmd_synth(config_path, count, size, frac, seed, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
