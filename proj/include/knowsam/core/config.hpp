#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "knowsam/core/types.hpp"

namespace knowsam {

/// Which loss terms and inputs participate in training. Disabled terms must
/// contribute exactly zero to the total loss.
struct ModuleToggles {
  bool use_sam_distill = true;
  bool use_entropy_loss = true;
  bool use_mutual_loss = true;
  bool use_ugda = true;
  bool ham_view_entropy = true;  // H stems; the prediction view is always on
  bool ham_view_dissim = true;   // M stem
};

struct SubnetOptions {
  int64_t depth = 4;
  int64_t base_width = 16;
};

struct TeacherOptions {
  int64_t embed_dim = 64;   // D of the stand-in encoder (256 for a real SAM)
  int64_t stride = 4;       // encoder stride s, feature map H/s x W/s
  int64_t num_prompts = 4;  // N_b
  int64_t decoder_layers = 2;
};

struct DistillOptions {
  bool t_squared_scale = true;  // scale KD loss by T^2
};

struct AugmentOptions {
  bool geometry = true;  // flips + quarter rotations
  double brightness = 0.3;
  double contrast = 0.3;
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 1.0;
  double noise_sigma = 0.02;
  bool bidirectional_paste = true;  // mix both L->U and U->L each step
  int64_t paste_topk = 5;
};

struct SyntheticSpec {
  int64_t count = 500;
  int64_t size = 64;
  int64_t min_shapes = 1;
  int64_t max_shapes = 3;
  double noise_sigma = 0.10;
  double contrast = 0.35;  // mean foreground/background intensity separation
};

struct OptimOptions {
  double sgd_lr = 0.01;
  double sgd_momentum = 0.9;
  double sgd_weight_decay = 1e-4;
  double poly_power = 0.9;
  double adam_lr = 1e-4;
};

struct ExperimentConfig {
  std::string run_name = "run";
  std::string dataset_root;  // empty => synthetic data per `synthetic`
  SyntheticSpec synthetic;
  double labeled_fraction = 0.10;
  int64_t num_classes = 2;
  int64_t in_channels = 1;
  int64_t image_size = 64;  // desk default; 256 is the full-scale setting
  int64_t iterations = 2000;
  uint64_t seed = 1;
  bool deterministic = false;
  ScheduleConfig schedule;
  ModuleToggles toggles;
  SubnetOptions subnets;
  TeacherOptions teacher;
  DistillOptions distill;
  AugmentOptions augment;
  OptimOptions optim;

  void validate() const;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);

  // Canonical serialized form (sorted keys, stable float formatting) and its
  // FNV-1a hash; two configs hash equal iff their canonical JSON matches.
  std::string canonical_json() const;
  uint64_t hash() const;
};

/// Load a JSON config file, then apply KNOWSAM_* environment overrides:
/// KNOWSAM_<PATH> with '_' separating nested keys, e.g.
/// KNOWSAM_SCHEDULE_LAMBDA_E=0.5 or KNOWSAM_ITERATIONS=100.
ExperimentConfig load_config(const std::filesystem::path& file);
ExperimentConfig config_from_json_text(const std::string& text);

/// Ablation presets. Families: "views" (3), "losses" (6), "ugda" (2).
std::vector<std::string> preset_names(const std::string& family);
std::vector<std::string> all_preset_names();
ExperimentConfig apply_preset(ExperimentConfig base, const std::string& preset);

}  // namespace knowsam
