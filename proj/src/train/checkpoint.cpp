#include <fstream>
#include <sstream>

#include "knowsam/train/trainer.hpp"

namespace knowsam {
namespace {

constexpr const char* kSubnetsFile = "checkpoint.subnets.pt";
constexpr const char* kTeacherFile = "checkpoint.teacher.pt";
constexpr const char* kOptimFile = "checkpoint.optim.pt";
constexpr const char* kManifestFile = "manifest.json";

std::string hash_hex(uint64_t h) {
  char buf[2 + 16 + 1];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(h));
  return buf;
}

template <typename Rng>
std::string rng_to_string(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

template <typename Rng>
void rng_from_string(Rng& rng, const std::string& s) {
  std::istringstream is(s);
  is >> rng;
}

}  // namespace

std::string checkpoint_manifest_text(const TrainState& state) {
  nlohmann::json j;
  j["version"] = 1;
  j["iteration"] = state.iteration;
  j["config"] = state.config.to_json();
  j["config_hash"] = hash_hex(state.config.hash());
  j["rng"] = {{"batch", rng_to_string(state.batch_rng)},
              {"augment", rng_to_string(state.augment_rng)}};
  j["teacher"] = state.teacher ? state.teacher->sidecar() : nlohmann::json();
  j["files"] = {kSubnetsFile, kTeacherFile, kOptimFile};
  return j.dump(2) + "\n";
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    torch::serialize::OutputArchive ar;
    torch::serialize::OutputArchive a, b, h;
    state.subnet_a->save(a);
    state.subnet_b->save(b);
    state.ham->save(h);
    ar.write("subnet_a", a);
    ar.write("subnet_b", b);
    ar.write("ham", h);
    ar.save_to((dir / kSubnetsFile).string());
  }
  {
    torch::serialize::OutputArchive ar;
    torch::serialize::OutputArchive t, p;
    state.teacher->save(t);
    state.prompt_decoder->save(p);
    ar.write("teacher", t);
    ar.write("prompt_decoder", p);
    ar.save_to((dir / kTeacherFile).string());
  }
  {
    torch::serialize::OutputArchive ar;
    torch::serialize::OutputArchive so, to;
    state.subnet_opt->save(so);
    state.teacher_opt->save(to);
    ar.write("subnet_opt", so);
    ar.write("teacher_opt", to);
    ar.write("torch_rng", at::detail::getDefaultCPUGenerator().get_state());
    ar.save_to((dir / kOptimFile).string());
  }
  std::ofstream mf(dir / kManifestFile, std::ios::binary);
  mf << checkpoint_manifest_text(state);
}

TrainState load_checkpoint(const std::filesystem::path& dir,
                           std::optional<DatasetSplit> dataset) {
  std::ifstream mf(dir / kManifestFile);
  TORCH_CHECK(mf.good(), "no manifest at ", (dir / kManifestFile).string());
  nlohmann::json j;
  mf >> j;

  auto config = ExperimentConfig::from_json(j.at("config"));
  auto state = make_train_state(config, std::move(dataset));
  state.iteration = j.at("iteration").get<int64_t>();
  rng_from_string(state.batch_rng, j.at("rng").at("batch").get<std::string>());
  rng_from_string(state.augment_rng, j.at("rng").at("augment").get<std::string>());

  {
    torch::serialize::InputArchive ar;
    ar.load_from((dir / kSubnetsFile).string());
    torch::serialize::InputArchive a, b, h;
    ar.read("subnet_a", a);
    ar.read("subnet_b", b);
    ar.read("ham", h);
    state.subnet_a->load(a);
    state.subnet_b->load(b);
    state.ham->load(h);
  }
  if (std::filesystem::exists(dir / kTeacherFile)) {
    torch::serialize::InputArchive ar;
    ar.load_from((dir / kTeacherFile).string());
    torch::serialize::InputArchive t, p;
    ar.read("teacher", t);
    ar.read("prompt_decoder", p);
    state.teacher->load(t);
    state.prompt_decoder->load(p);
  }
  if (std::filesystem::exists(dir / kOptimFile)) {
    torch::serialize::InputArchive ar;
    ar.load_from((dir / kOptimFile).string());
    torch::serialize::InputArchive so, to;
    ar.read("subnet_opt", so);
    ar.read("teacher_opt", to);
    state.subnet_opt->load(so);
    state.teacher_opt->load(to);
    torch::Tensor rng_state;
    ar.read("torch_rng", rng_state);
    auto gen = at::detail::getDefaultCPUGenerator();
    gen.set_state(rng_state);
  }
  return state;
}

}  // namespace knowsam
