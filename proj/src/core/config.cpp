#include "knowsam/core/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace knowsam {
namespace {

using nlohmann::json;

json toggles_json(const ModuleToggles& t) {
  return {{"use_sam_distill", t.use_sam_distill},
          {"use_entropy_loss", t.use_entropy_loss},
          {"use_mutual_loss", t.use_mutual_loss},
          {"use_ugda", t.use_ugda},
          {"ham_view_entropy", t.ham_view_entropy},
          {"ham_view_dissim", t.ham_view_dissim}};
}

template <typename T>
void get_to_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

// Environment overrides: every leaf of the config JSON maps to
// KNOWSAM_<UPPERCASED_PATH> with path segments joined by '_'.
void apply_env_overrides(json& j, const std::string& prefix) {
  for (auto& [key, value] : j.items()) {
    std::string name = prefix;
    for (char c : key) name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (value.is_object()) {
      apply_env_overrides(value, name + "_");
      continue;
    }
    const char* env = std::getenv(name.c_str());
    if (!env) continue;
    if (value.is_boolean()) {
      std::string v(env);
      value = (v == "1" || v == "true" || v == "on");
    } else if (value.is_number_integer()) {
      value = std::stoll(env);
    } else if (value.is_number_unsigned()) {
      value = static_cast<uint64_t>(std::stoull(env));
    } else if (value.is_number_float()) {
      value = std::stod(env);
    } else if (value.is_string()) {
      value = std::string(env);
    }
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  schedule.validate();
  TORCH_CHECK(labeled_fraction > 0.0 && labeled_fraction <= 1.0,
              "labeled_fraction must be in (0,1], got ", labeled_fraction);
  TORCH_CHECK(num_classes >= 2, "num_classes must be >= 2");
  TORCH_CHECK(in_channels >= 1 && in_channels <= 3, "in_channels must be 1..3");
  TORCH_CHECK(image_size > 0 && image_size % kPatchGridSide == 0,
              "image_size must be a positive multiple of ", kPatchGridSide);
  const int64_t div = int64_t{1} << subnets.depth;
  TORCH_CHECK(image_size % div == 0, "image_size ", image_size,
              " not divisible by subnet downsampling factor ", div);
  TORCH_CHECK(iterations > 0, "iterations must be positive");
  TORCH_CHECK(subnets.depth >= 1 && subnets.base_width >= 1, "bad subnet options");
  TORCH_CHECK(teacher.embed_dim >= 4 && teacher.num_prompts >= 1, "bad teacher options");
  TORCH_CHECK(augment.paste_topk >= 1 && augment.paste_topk <= kPatchGridCells,
              "paste_topk must be in [1,", kPatchGridCells, "]");
}

json ExperimentConfig::to_json() const {
  json j;
  j["run_name"] = run_name;
  j["dataset_root"] = dataset_root;
  j["synthetic"] = {{"count", synthetic.count},       {"size", synthetic.size},
                    {"min_shapes", synthetic.min_shapes}, {"max_shapes", synthetic.max_shapes},
                    {"noise_sigma", synthetic.noise_sigma}, {"contrast", synthetic.contrast}};
  j["labeled_fraction"] = labeled_fraction;
  j["num_classes"] = num_classes;
  j["in_channels"] = in_channels;
  j["image_size"] = image_size;
  j["iterations"] = iterations;
  j["seed"] = seed;
  j["deterministic"] = deterministic;
  j["schedule"] = {{"lambda_e", schedule.lambda_e},
                   {"beta", schedule.beta},
                   {"temperature", schedule.temperature},
                   {"t_max", schedule.t_max},
                   {"batch_size", schedule.batch_size}};
  j["toggles"] = toggles_json(toggles);
  j["subnets"] = {{"depth", subnets.depth}, {"base_width", subnets.base_width}};
  j["teacher"] = {{"embed_dim", teacher.embed_dim},
                  {"stride", teacher.stride},
                  {"num_prompts", teacher.num_prompts},
                  {"decoder_layers", teacher.decoder_layers}};
  j["distill"] = {{"t_squared_scale", distill.t_squared_scale}};
  j["augment"] = {{"geometry", augment.geometry},
                  {"brightness", augment.brightness},
                  {"contrast", augment.contrast},
                  {"blur_sigma_min", augment.blur_sigma_min},
                  {"blur_sigma_max", augment.blur_sigma_max},
                  {"noise_sigma", augment.noise_sigma},
                  {"bidirectional_paste", augment.bidirectional_paste},
                  {"paste_topk", augment.paste_topk}};
  j["optim"] = {{"sgd_lr", optim.sgd_lr},
                {"sgd_momentum", optim.sgd_momentum},
                {"sgd_weight_decay", optim.sgd_weight_decay},
                {"poly_power", optim.poly_power},
                {"adam_lr", optim.adam_lr}};
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  get_to_if(j, "run_name", c.run_name);
  get_to_if(j, "dataset_root", c.dataset_root);
  if (j.contains("synthetic")) {
    const auto& s = j.at("synthetic");
    get_to_if(s, "count", c.synthetic.count);
    get_to_if(s, "size", c.synthetic.size);
    get_to_if(s, "min_shapes", c.synthetic.min_shapes);
    get_to_if(s, "max_shapes", c.synthetic.max_shapes);
    get_to_if(s, "noise_sigma", c.synthetic.noise_sigma);
    get_to_if(s, "contrast", c.synthetic.contrast);
  }
  get_to_if(j, "labeled_fraction", c.labeled_fraction);
  get_to_if(j, "num_classes", c.num_classes);
  get_to_if(j, "in_channels", c.in_channels);
  get_to_if(j, "image_size", c.image_size);
  get_to_if(j, "iterations", c.iterations);
  get_to_if(j, "seed", c.seed);
  get_to_if(j, "deterministic", c.deterministic);
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    get_to_if(s, "lambda_e", c.schedule.lambda_e);
    get_to_if(s, "beta", c.schedule.beta);
    get_to_if(s, "temperature", c.schedule.temperature);
    get_to_if(s, "t_max", c.schedule.t_max);
    get_to_if(s, "batch_size", c.schedule.batch_size);
  }
  if (j.contains("toggles")) {
    const auto& t = j.at("toggles");
    get_to_if(t, "use_sam_distill", c.toggles.use_sam_distill);
    get_to_if(t, "use_entropy_loss", c.toggles.use_entropy_loss);
    get_to_if(t, "use_mutual_loss", c.toggles.use_mutual_loss);
    get_to_if(t, "use_ugda", c.toggles.use_ugda);
    get_to_if(t, "ham_view_entropy", c.toggles.ham_view_entropy);
    get_to_if(t, "ham_view_dissim", c.toggles.ham_view_dissim);
  }
  if (j.contains("subnets")) {
    get_to_if(j.at("subnets"), "depth", c.subnets.depth);
    get_to_if(j.at("subnets"), "base_width", c.subnets.base_width);
  }
  if (j.contains("teacher")) {
    const auto& t = j.at("teacher");
    get_to_if(t, "embed_dim", c.teacher.embed_dim);
    get_to_if(t, "stride", c.teacher.stride);
    get_to_if(t, "num_prompts", c.teacher.num_prompts);
    get_to_if(t, "decoder_layers", c.teacher.decoder_layers);
  }
  if (j.contains("distill")) {
    get_to_if(j.at("distill"), "t_squared_scale", c.distill.t_squared_scale);
  }
  if (j.contains("augment")) {
    const auto& a = j.at("augment");
    get_to_if(a, "geometry", c.augment.geometry);
    get_to_if(a, "brightness", c.augment.brightness);
    get_to_if(a, "contrast", c.augment.contrast);
    get_to_if(a, "blur_sigma_min", c.augment.blur_sigma_min);
    get_to_if(a, "blur_sigma_max", c.augment.blur_sigma_max);
    get_to_if(a, "noise_sigma", c.augment.noise_sigma);
    get_to_if(a, "bidirectional_paste", c.augment.bidirectional_paste);
    get_to_if(a, "paste_topk", c.augment.paste_topk);
  }
  if (j.contains("optim")) {
    const auto& o = j.at("optim");
    get_to_if(o, "sgd_lr", c.optim.sgd_lr);
    get_to_if(o, "sgd_momentum", c.optim.sgd_momentum);
    get_to_if(o, "sgd_weight_decay", c.optim.sgd_weight_decay);
    get_to_if(o, "poly_power", c.optim.poly_power);
    get_to_if(o, "adam_lr", c.optim.adam_lr);
  }
  c.validate();
  return c;
}

std::string ExperimentConfig::canonical_json() const {
  // nlohmann objects keep keys sorted; dump() is stable for a given value.
  return to_json().dump();
}

uint64_t ExperimentConfig::hash() const {
  const std::string s = canonical_json();
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

ExperimentConfig config_from_json_text(const std::string& text) {
  json j = json::parse(text);
  apply_env_overrides(j, "KNOWSAM_");
  return ExperimentConfig::from_json(j);
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

std::vector<std::string> preset_names(const std::string& family) {
  if (family == "views") return {"views-pred", "views-pred+H", "views-pred+H+M"};
  if (family == "losses") {
    return {"losses-sup",    "losses-sup+ent",     "losses-sup+mut",
            "losses-sup+kd", "losses-sup+ent+mut", "losses-all"};
  }
  if (family == "ugda") return {"ugda-on", "ugda-off"};
  std::string all;
  for (const auto& n : all_preset_names()) all += " " + n;
  TORCH_CHECK(false, "unknown preset family '", family, "'; valid presets:", all);
}

std::vector<std::string> all_preset_names() {
  std::vector<std::string> out;
  for (const auto& fam : {"views", "losses", "ugda"}) {
    for (auto& n : preset_names(fam)) out.push_back(std::move(n));
  }
  return out;
}

ExperimentConfig apply_preset(ExperimentConfig c, const std::string& preset) {
  auto& t = c.toggles;
  if (preset == "views-pred") {
    t.ham_view_entropy = false;
    t.ham_view_dissim = false;
  } else if (preset == "views-pred+H") {
    t.ham_view_entropy = true;
    t.ham_view_dissim = false;
  } else if (preset == "views-pred+H+M") {
    t.ham_view_entropy = true;
    t.ham_view_dissim = true;
  } else if (preset == "losses-sup") {
    // Pure supervised baseline: no unlabeled signal of any kind.
    t.use_entropy_loss = false;
    t.use_mutual_loss = false;
    t.use_sam_distill = false;
    t.use_ugda = false;
  } else if (preset == "losses-sup+ent") {
    t.use_entropy_loss = true;
    t.use_mutual_loss = false;
    t.use_sam_distill = false;
  } else if (preset == "losses-sup+mut") {
    t.use_entropy_loss = false;
    t.use_mutual_loss = true;
    t.use_sam_distill = false;
  } else if (preset == "losses-sup+kd") {
    t.use_entropy_loss = false;
    t.use_mutual_loss = false;
    t.use_sam_distill = true;
  } else if (preset == "losses-sup+ent+mut") {
    t.use_entropy_loss = true;
    t.use_mutual_loss = true;
    t.use_sam_distill = false;
  } else if (preset == "losses-all") {
    t.use_entropy_loss = true;
    t.use_mutual_loss = true;
    t.use_sam_distill = true;
  } else if (preset == "ugda-on") {
    t.use_ugda = true;
  } else if (preset == "ugda-off") {
    t.use_ugda = false;
  } else {
    std::string all;
    for (const auto& n : all_preset_names()) all += " " + n;
    TORCH_CHECK(false, "unknown preset '", preset, "'; valid presets:", all);
  }
  c.run_name = c.run_name + "-" + preset;
  return c;
}

}  // namespace knowsam
