#pragma once

#include <torch/torch.h>

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "knowsam/core/types.hpp"

namespace knowsam {

/// Overlap metrics for one class. Both-empty convention: (1,1).
std::pair<double, double> dice_iou(const LabelMask& pred, const LabelMask& gt, int64_t cls);

/// 95th percentile (linear interpolation) of the symmetric set of
/// boundary-to-boundary nearest-neighbour Euclidean distances, pixel units.
/// Boundaries come from a 4-connectivity erosion difference.
double hd95(const LabelMask& pred, const LabelMask& gt, int64_t cls);

/// Mean of the same symmetric distance set.
double asd(const LabelMask& pred, const LabelMask& gt, int64_t cls);

struct ClassMetrics {
  int64_t cls = 0;
  double dice = 0, iou = 0, hd95 = 0, asd = 0;
  bool surface_defined = true;  // false => one side empty, diagonal fallback used
};

struct MetricReport {
  std::vector<ClassMetrics> per_class;  // foreground classes 1..C-1

  double mean_dice() const;
  double mean_iou() const;
  double mean_hd95() const;
  double mean_asd() const;
  nlohmann::json to_json() const;
};

MetricReport evaluate_pair(const LabelMask& pred, const LabelMask& gt);

/// Mean +/- std aggregation over per-sample reports.
nlohmann::json aggregate_reports(const std::vector<MetricReport>& reports);

}  // namespace knowsam
