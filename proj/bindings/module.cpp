#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <torch/torch.h>

#include "knowsam/core/config.hpp"
#include "knowsam/core/types.hpp"
#include "knowsam/distill/distill.hpp"
#include "knowsam/fusion/fusion.hpp"
#include "knowsam/losses/losses.hpp"
#include "knowsam/metrics/metrics.hpp"
#include "knowsam/train/synthetic.hpp"
#include "knowsam/train/trainer.hpp"
#include "knowsam/ugda/ugda.hpp"

namespace py = pybind11;
using namespace knowsam;

namespace {

torch::Tensor to_tensor(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  std::vector<int64_t> shape(a.ndim());
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[static_cast<size_t>(i)] = a.shape(i);
  auto t = torch::from_blob(const_cast<double*>(a.data()), shape, torch::kDouble);
  return t.clone();
}

torch::Tensor to_long_tensor(
    const py::array_t<int64_t, py::array::c_style | py::array::forcecast>& a) {
  std::vector<int64_t> shape(a.ndim());
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[static_cast<size_t>(i)] = a.shape(i);
  auto t = torch::from_blob(const_cast<int64_t*>(a.data()), shape, torch::kLong);
  return t.clone();
}

py::array_t<double> to_array(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kDouble).contiguous();
  std::vector<py::ssize_t> shape(c.sizes().begin(), c.sizes().end());
  py::array_t<double> out(shape);
  std::memcpy(out.mutable_data(), c.data_ptr<double>(),
              sizeof(double) * static_cast<size_t>(c.numel()));
  return out;
}

py::array_t<int64_t> to_long_array(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kLong).contiguous();
  std::vector<py::ssize_t> shape(c.sizes().begin(), c.sizes().end());
  py::array_t<int64_t> out(shape);
  std::memcpy(out.mutable_data(), c.data_ptr<int64_t>(),
              sizeof(int64_t) * static_cast<size_t>(c.numel()));
  return out;
}

py::dict json_to_dict(const nlohmann::json& j) {
  const auto module = py::module_::import("json");
  return module.attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "knowsam core operations";
  m.attr("__version__") = "0.1.0";

  m.def(
      "entropy_map",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& probs) {
        return to_array(entropy_map(ProbabilityMap::make(to_tensor(probs))));
      },
      py::arg("probs"), "Per-pixel prediction entropy of a [C,H,W] probability map.");

  m.def(
      "dissimilarity_map",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
        return to_array(dissimilarity_map(ProbabilityMap::make(to_tensor(a)),
                                          ProbabilityMap::make(to_tensor(b))));
      },
      py::arg("probs_a"), py::arg("probs_b"));

  m.def(
      "one_hot",
      [](const py::array_t<int64_t, py::array::c_style | py::array::forcecast>& mask,
         int64_t num_classes) {
        return to_array(one_hot(LabelMask::make(to_long_tensor(mask), num_classes)).probs);
      },
      py::arg("mask"), py::arg("num_classes"));

  m.def(
      "binarize",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& probs,
         double threshold) {
        return to_long_array(binarize(ProbabilityMap::make(to_tensor(probs)), threshold).classes);
      },
      py::arg("probs"), py::arg("threshold") = 0.5);

  m.def(
      "temp_softmax",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& logits, double T) {
        return to_array(temp_softmax(LogitMap::make(to_tensor(logits)), T).probs);
      },
      py::arg("logits"), py::arg("temperature"));

  m.def(
      "kd_loss",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& b,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& teacher,
         double T, bool t_squared_scale) {
        return kd_loss(SoftMap::make(to_tensor(a), T), SoftMap::make(to_tensor(b), T),
                       SoftMap::make(to_tensor(teacher), T), t_squared_scale)
            .item<double>();
      },
      py::arg("soft_a"), py::arg("soft_b"), py::arg("soft_teacher"), py::arg("temperature") = 1.0,
      py::arg("t_squared_scale") = true);

  m.def(
      "seg_loss",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& probs,
         const py::array_t<int64_t, py::array::c_style | py::array::forcecast>& mask) {
        auto p = ProbabilityMap::make(to_tensor(probs));
        return seg_loss(p, LabelMask::make(to_long_tensor(mask), p.channels())).item<double>();
      },
      py::arg("probs"), py::arg("mask"));

  m.def(
      "mutual_loss",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
        return mutual_loss(ProbabilityMap::make(to_tensor(a)),
                           ProbabilityMap::make(to_tensor(b)))
            .item<double>();
      },
      py::arg("probs_a"), py::arg("probs_b"));

  m.def(
      "entropy_loss",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
        return entropy_loss(ProbabilityMap::make(to_tensor(a)),
                            ProbabilityMap::make(to_tensor(b)))
            .item<double>();
      },
      py::arg("probs_a"), py::arg("probs_b"));

  m.def("warmup_lambda", &warmup_lambda, py::arg("t"), py::arg("t_max"), py::arg("beta") = 1.0);

  m.def(
      "patch_uncertainty",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& entropy) {
        const auto grid = patch_uncertainty(to_tensor(entropy));
        return std::vector<double>(grid.mean_uncertainty.begin(), grid.mean_uncertainty.end());
      },
      py::arg("entropy"), "Mean uncertainty of the 16 grid cells, row-major.");

  m.def(
      "select_topk_patches",
      [](const std::vector<double>& means, int64_t k) {
        PatchGrid grid;
        TORCH_CHECK(means.size() == static_cast<size_t>(kPatchGridCells),
                    "expected 16 cell means");
        std::copy(means.begin(), means.end(), grid.mean_uncertainty.begin());
        return select_topk_patches(grid, k);
      },
      py::arg("means"), py::arg("k") = 5);

  m.def(
      "dice_iou",
      [](const py::array_t<int64_t, py::array::c_style | py::array::forcecast>& pred,
         const py::array_t<int64_t, py::array::c_style | py::array::forcecast>& gt, int64_t cls,
         int64_t num_classes) {
        return dice_iou(LabelMask::make(to_long_tensor(pred), num_classes),
                        LabelMask::make(to_long_tensor(gt), num_classes), cls);
      },
      py::arg("pred"), py::arg("gt"), py::arg("cls") = 1, py::arg("num_classes") = 2);

  m.def(
      "hd95",
      [](const py::array_t<int64_t, py::array::c_style | py::array::forcecast>& pred,
         const py::array_t<int64_t, py::array::c_style | py::array::forcecast>& gt, int64_t cls,
         int64_t num_classes) {
        return hd95(LabelMask::make(to_long_tensor(pred), num_classes),
                    LabelMask::make(to_long_tensor(gt), num_classes), cls);
      },
      py::arg("pred"), py::arg("gt"), py::arg("cls") = 1, py::arg("num_classes") = 2);

  m.def(
      "asd",
      [](const py::array_t<int64_t, py::array::c_style | py::array::forcecast>& pred,
         const py::array_t<int64_t, py::array::c_style | py::array::forcecast>& gt, int64_t cls,
         int64_t num_classes) {
        return asd(LabelMask::make(to_long_tensor(pred), num_classes),
                   LabelMask::make(to_long_tensor(gt), num_classes), cls);
      },
      py::arg("pred"), py::arg("gt"), py::arg("cls") = 1, py::arg("num_classes") = 2);

  m.def(
      "evaluate_masks",
      [](const py::array_t<int64_t, py::array::c_style | py::array::forcecast>& pred,
         const py::array_t<int64_t, py::array::c_style | py::array::forcecast>& gt,
         int64_t num_classes) {
        return json_to_dict(evaluate_pair(LabelMask::make(to_long_tensor(pred), num_classes),
                                          LabelMask::make(to_long_tensor(gt), num_classes))
                                .to_json());
      },
      py::arg("pred"), py::arg("gt"), py::arg("num_classes") = 2);

  m.def(
      "generate_synthetic_dataset",
      [](const std::string& out_dir, int64_t count, int64_t size, double labeled_fraction,
         uint64_t seed) {
        SyntheticSpec spec;
        spec.count = count;
        spec.size = size;
        const auto split = generate_synthetic_dataset(spec, labeled_fraction, seed);
        save_dataset_dir(split, out_dir);
        py::dict out;
        out["labeled"] = split.labeled_count();
        out["unlabeled"] = split.unlabeled_count();
        return out;
      },
      py::arg("out_dir"), py::arg("count") = 100, py::arg("size") = 64,
      py::arg("labeled_fraction") = 0.1, py::arg("seed") = 1);

  m.def(
      "train_run",
      [](const std::string& config_json, const std::string& run_dir) {
        const auto cfg = config_from_json_text(config_json);
        const auto result = run_training(cfg, run_dir);
        return json_to_dict(result.metrics);
      },
      py::arg("config_json"), py::arg("run_dir"),
      "Run a training from a JSON config string; returns the aggregate metrics.");

  m.def(
      "eval_checkpoint",
      [](const std::string& checkpoint_dir, const std::string& data_dir) {
        auto state = load_checkpoint(checkpoint_dir);
        const auto split = load_dataset_dir(data_dir);
        std::vector<LabeledSample> samples = split.labeled();
        for (size_t i = 0; i < split.unlabeled_count(); ++i) {
          if (split.has_sealed_masks()) {
            samples.push_back({split.unlabeled()[i], split.sealed_unlabeled_mask(i)});
          }
        }
        return json_to_dict(aggregate_reports(evaluate_set(state, samples)));
      },
      py::arg("checkpoint_dir"), py::arg("data_dir"));
}
