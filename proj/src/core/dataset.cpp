#include "knowsam/core/dataset.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace knowsam {
namespace {

using nlohmann::json;

json read_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  json j;
  in >> j;
  return j;
}

}  // namespace

DatasetSplit::DatasetSplit(std::vector<LabeledSample> labeled, std::vector<Image> unlabeled,
                           std::vector<LabelMask> sealed_unlabeled_masks)
    : labeled_(std::move(labeled)),
      unlabeled_(std::move(unlabeled)),
      sealed_masks_(std::move(sealed_unlabeled_masks)) {
  check_invariants();
}

DatasetSplit::DatasetSplit(const DatasetSplit& other)
    : labeled_(other.labeled_),
      unlabeled_(other.unlabeled_),
      sealed_masks_(other.sealed_masks_),
      sealed_reads_(other.sealed_reads_.load()) {}

DatasetSplit& DatasetSplit::operator=(const DatasetSplit& other) {
  if (this != &other) {
    labeled_ = other.labeled_;
    unlabeled_ = other.unlabeled_;
    sealed_masks_ = other.sealed_masks_;
    sealed_reads_ = other.sealed_reads_.load();
  }
  return *this;
}

void DatasetSplit::check_invariants() const {
  TORCH_CHECK(!labeled_.empty(), "DatasetSplit needs at least one labeled sample");
  TORCH_CHECK(sealed_masks_.empty() || sealed_masks_.size() == unlabeled_.size(),
              "sealed mask count must match unlabeled count");
  std::set<std::string> ids;
  for (const auto& s : labeled_) ids.insert(s.image.id);
  TORCH_CHECK(ids.size() == labeled_.size(), "duplicate labeled ids");
  for (const auto& u : unlabeled_) {
    TORCH_CHECK(ids.insert(u.id).second, "id '", u.id, "' appears in both partitions");
  }
}

int64_t DatasetSplit::num_classes() const { return labeled_.front().mask.num_classes; }

const LabelMask& DatasetSplit::sealed_unlabeled_mask(size_t i) const {
  TORCH_CHECK(i < sealed_masks_.size(), "no sealed mask for unlabeled index ", i);
  sealed_reads_.fetch_add(1);
  return sealed_masks_[i];
}

Image load_image_png(const std::filesystem::path& file, const std::string& id) {
  cv::Mat m = cv::imread(file.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw std::runtime_error("cannot read image " + file.string());
  if (m.channels() == 4) cv::cvtColor(m, m, cv::COLOR_BGRA2BGR);
  cv::Mat f;
  m.convertTo(f, CV_32F, 1.0 / 255.0);
  torch::Tensor t;
  if (f.channels() == 1) {
    t = torch::from_blob(f.data, {1, f.rows, f.cols}, torch::kFloat32).clone();
  } else {
    cv::cvtColor(f, f, cv::COLOR_BGR2RGB);
    t = torch::from_blob(f.data, {f.rows, f.cols, f.channels()}, torch::kFloat32)
            .permute({2, 0, 1})
            .contiguous()
            .clone();
  }
  return Image::make(std::move(t), id);
}

LabelMask load_mask_png(const std::filesystem::path& file, int64_t num_classes) {
  cv::Mat m = cv::imread(file.string(), cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw std::runtime_error("cannot read mask " + file.string());
  auto t = torch::from_blob(m.data, {m.rows, m.cols}, torch::kUInt8).to(torch::kLong);
  return LabelMask::make(std::move(t), num_classes);
}

void save_image_png(const Image& image, const std::filesystem::path& file) {
  auto t = (image.pixels.clamp(0, 1) * 255.0).round().to(torch::kUInt8).contiguous();
  cv::Mat m;
  if (t.size(0) == 1) {
    m = cv::Mat(static_cast<int>(t.size(1)), static_cast<int>(t.size(2)), CV_8UC1,
                t.data_ptr<uint8_t>())
            .clone();
  } else {
    auto hwc = t.permute({1, 2, 0}).contiguous();
    m = cv::Mat(static_cast<int>(t.size(1)), static_cast<int>(t.size(2)), CV_8UC3,
                hwc.data_ptr<uint8_t>())
            .clone();
    cv::cvtColor(m, m, cv::COLOR_RGB2BGR);
  }
  if (!cv::imwrite(file.string(), m)) throw std::runtime_error("cannot write " + file.string());
}

void save_mask_png(const LabelMask& mask, const std::filesystem::path& file) {
  TORCH_CHECK(!mask.batched(), "save_mask_png expects a single [H,W] mask");
  auto t = mask.classes.to(torch::kUInt8).contiguous();
  cv::Mat m(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)), CV_8UC1,
            t.data_ptr<uint8_t>());
  if (!cv::imwrite(file.string(), m)) throw std::runtime_error("cannot write " + file.string());
}

DatasetSplit load_dataset_dir(const std::filesystem::path& root) {
  const auto j = read_json(root / "split.json");
  const int64_t num_classes = j.value("num_classes", 2);
  std::vector<LabeledSample> labeled;
  for (const auto& id : j.at("labeled")) {
    const std::string s = id.get<std::string>();
    labeled.push_back({load_image_png(root / "images" / (s + ".png"), s),
                       load_mask_png(root / "masks" / (s + ".png"), num_classes)});
  }
  std::vector<Image> unlabeled;
  std::vector<LabelMask> sealed;
  bool any_unlabeled_mask = false;
  for (const auto& id : j.at("unlabeled")) {
    const std::string s = id.get<std::string>();
    unlabeled.push_back(load_image_png(root / "images" / (s + ".png"), s));
    if (std::filesystem::exists(root / "masks" / (s + ".png"))) any_unlabeled_mask = true;
  }
  if (any_unlabeled_mask) {
    for (const auto& u : unlabeled) {
      sealed.push_back(load_mask_png(root / "masks" / (u.id + ".png"), num_classes));
    }
  }
  return DatasetSplit(std::move(labeled), std::move(unlabeled), std::move(sealed));
}

void save_dataset_dir(const DatasetSplit& split, const std::filesystem::path& root) {
  std::filesystem::create_directories(root / "images");
  std::filesystem::create_directories(root / "masks");
  json j;
  j["num_classes"] = split.num_classes();
  auto& lab = j["labeled"] = json::array();
  auto& unl = j["unlabeled"] = json::array();
  for (const auto& s : split.labeled()) {
    lab.push_back(s.image.id);
    save_image_png(s.image, root / "images" / (s.image.id + ".png"));
    save_mask_png(s.mask, root / "masks" / (s.image.id + ".png"));
  }
  for (size_t i = 0; i < split.unlabeled_count(); ++i) {
    const auto& img = split.unlabeled()[i];
    unl.push_back(img.id);
    save_image_png(img, root / "images" / (img.id + ".png"));
    if (split.has_sealed_masks()) {
      save_mask_png(split.sealed_unlabeled_mask(i), root / "masks" / (img.id + ".png"));
    }
  }
  std::ofstream out(root / "split.json");
  out << j.dump(2) << "\n";
}

}  // namespace knowsam
