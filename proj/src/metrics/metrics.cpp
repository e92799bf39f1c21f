#include "knowsam/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace knowsam {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<uint8_t> class_bitmap(const LabelMask& m, int64_t cls) {
  TORCH_CHECK(!m.batched(), "metrics expect single [H,W] masks");
  const auto eq = (m.classes == cls).to(torch::kUInt8).contiguous();
  const uint8_t* ptr = eq.data_ptr<uint8_t>();
  return std::vector<uint8_t>(ptr, ptr + eq.numel());
}

// Boundary under 4-connectivity: in-mask pixels with at least one 4-neighbour
// outside the mask; the image border counts as outside.
std::vector<uint8_t> boundary_bitmap(const std::vector<uint8_t>& mask, int64_t h, int64_t w) {
  std::vector<uint8_t> b(static_cast<size_t>(h * w), 0);
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      const size_t i = static_cast<size_t>(y * w + x);
      if (!mask[i]) continue;
      const bool interior = y > 0 && y + 1 < h && x > 0 && x + 1 < w &&
                            mask[i - static_cast<size_t>(w)] && mask[i + static_cast<size_t>(w)] &&
                            mask[i - 1] && mask[i + 1];
      b[i] = interior ? 0 : 1;
    }
  }
  return b;
}

// Lower envelope (Felzenszwalb-Huttenlocher) over the finite parabolas
// q -> f[i] + (q - pos[i])^2; writes n outputs. pos must be increasing.
void edt_envelope(const std::vector<int64_t>& pos, const std::vector<double>& f, int64_t n,
                  std::vector<double>& out) {
  if (pos.empty()) {
    std::fill(out.begin(), out.begin() + static_cast<long>(n), kInf);
    return;
  }
  const auto m = static_cast<int64_t>(pos.size());
  std::vector<int64_t> v(static_cast<size_t>(m));
  std::vector<double> z(static_cast<size_t>(m) + 1);
  int64_t k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  const auto sect = [&](int64_t i, int64_t j) {
    const double pi = static_cast<double>(pos[static_cast<size_t>(i)]);
    const double pj = static_cast<double>(pos[static_cast<size_t>(j)]);
    return ((f[static_cast<size_t>(j)] + pj * pj) - (f[static_cast<size_t>(i)] + pi * pi)) /
           (2.0 * (pj - pi));
  };
  for (int64_t q = 1; q < m; ++q) {
    double s = sect(v[static_cast<size_t>(k)], q);
    while (k > 0 && s <= z[static_cast<size_t>(k)]) {
      --k;
      s = sect(v[static_cast<size_t>(k)], q);
    }
    ++k;
    v[static_cast<size_t>(k)] = q;
    z[static_cast<size_t>(k)] = s;
    z[static_cast<size_t>(k) + 1] = kInf;
  }
  int64_t j = 0;
  for (int64_t q = 0; q < n; ++q) {
    while (z[static_cast<size_t>(j) + 1] < static_cast<double>(q)) ++j;
    const int64_t i = v[static_cast<size_t>(j)];
    const double dq = static_cast<double>(q) - static_cast<double>(pos[static_cast<size_t>(i)]);
    out[static_cast<size_t>(q)] = dq * dq + f[static_cast<size_t>(i)];
  }
}

// Exact squared EDT of a site bitmap ([h*w], 1 = site). Column pass finds the
// vertical pixel distance to the nearest in-column site by two scans; the row
// pass runs the parabola envelope over the finite columns.
std::vector<double> edt_squared(const std::vector<uint8_t>& sites, int64_t h, int64_t w) {
  std::vector<double> g(static_cast<size_t>(h * w), kInf);
  for (int64_t x = 0; x < w; ++x) {
    double d = kInf;
    for (int64_t y = 0; y < h; ++y) {
      d = sites[static_cast<size_t>(y * w + x)] ? 0.0 : d + 1.0;
      g[static_cast<size_t>(y * w + x)] = d;
    }
    d = kInf;
    for (int64_t y = h - 1; y >= 0; --y) {
      d = sites[static_cast<size_t>(y * w + x)] ? 0.0 : d + 1.0;
      auto& cell = g[static_cast<size_t>(y * w + x)];
      cell = std::min(cell, d);
    }
  }
  std::vector<int64_t> pos;
  std::vector<double> fval;
  std::vector<double> rowo(static_cast<size_t>(w));
  for (int64_t y = 0; y < h; ++y) {
    pos.clear();
    fval.clear();
    for (int64_t x = 0; x < w; ++x) {
      const double v = g[static_cast<size_t>(y * w + x)];
      if (v != kInf) {
        pos.push_back(x);
        fval.push_back(v * v);
      }
    }
    edt_envelope(pos, fval, w, rowo);
    for (int64_t x = 0; x < w; ++x) g[static_cast<size_t>(y * w + x)] = rowo[static_cast<size_t>(x)];
  }
  return g;
}

struct SurfaceDistances {
  std::vector<double> values;  // symmetric set, unsorted
  bool defined = true;
  double fallback = 0.0;
};

SurfaceDistances surface_distances(const LabelMask& pred, const LabelMask& gt, int64_t cls) {
  TORCH_CHECK(pred.classes.sizes() == gt.classes.sizes(), "surface metrics: shapes differ");
  const int64_t h = pred.height(), w = pred.width();
  const auto pm = class_bitmap(pred, cls);
  const auto gm = class_bitmap(gt, cls);
  const bool p_empty = std::find(pm.begin(), pm.end(), 1) == pm.end();
  const bool g_empty = std::find(gm.begin(), gm.end(), 1) == gm.end();

  SurfaceDistances out;
  if (p_empty && g_empty) return out;  // both absent: distance 0, defined
  if (p_empty != g_empty) {
    out.defined = false;
    out.fallback = std::sqrt(static_cast<double>(h * h + w * w));
    return out;
  }

  const auto pb = boundary_bitmap(pm, h, w);
  const auto gb = boundary_bitmap(gm, h, w);
  const auto dist_to_g = edt_squared(gb, h, w);
  const auto dist_to_p = edt_squared(pb, h, w);
  for (size_t i = 0; i < pb.size(); ++i) {
    if (pb[i]) out.values.push_back(std::sqrt(dist_to_g[i]));
  }
  for (size_t i = 0; i < gb.size(); ++i) {
    if (gb[i]) out.values.push_back(std::sqrt(dist_to_p[i]));
  }
  return out;
}

double percentile_linear(std::vector<double> v, double q) {
  TORCH_CHECK(!v.empty(), "percentile of empty set");
  std::sort(v.begin(), v.end());
  const double rank = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<size_t>(std::floor(rank));
  const auto hi = static_cast<size_t>(std::ceil(rank));
  const double frac = rank - std::floor(rank);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace

std::pair<double, double> dice_iou(const LabelMask& pred, const LabelMask& gt, int64_t cls) {
  TORCH_CHECK(pred.classes.sizes() == gt.classes.sizes(), "dice_iou: shapes differ");
  const auto p = pred.classes == cls;
  const auto g = gt.classes == cls;
  const double np = p.sum().item<double>();
  const double ng = g.sum().item<double>();
  const double inter = (p & g).sum().item<double>();
  if (np == 0.0 && ng == 0.0) return {1.0, 1.0};
  const double dice = 2.0 * inter / (np + ng);
  const double uni = np + ng - inter;
  const double iou = uni > 0.0 ? inter / uni : 1.0;
  return {dice, iou};
}

double hd95(const LabelMask& pred, const LabelMask& gt, int64_t cls) {
  const auto sd = surface_distances(pred, gt, cls);
  if (!sd.defined) return sd.fallback;
  if (sd.values.empty()) return 0.0;
  return percentile_linear(sd.values, 0.95);
}

double asd(const LabelMask& pred, const LabelMask& gt, int64_t cls) {
  const auto sd = surface_distances(pred, gt, cls);
  if (!sd.defined) return sd.fallback;
  if (sd.values.empty()) return 0.0;
  double sum = 0.0;
  for (const double d : sd.values) sum += d;
  return sum / static_cast<double>(sd.values.size());
}

double MetricReport::mean_dice() const {
  double s = 0;
  for (const auto& c : per_class) s += c.dice;
  return per_class.empty() ? 0.0 : s / static_cast<double>(per_class.size());
}

double MetricReport::mean_iou() const {
  double s = 0;
  for (const auto& c : per_class) s += c.iou;
  return per_class.empty() ? 0.0 : s / static_cast<double>(per_class.size());
}

double MetricReport::mean_hd95() const {
  double s = 0;
  for (const auto& c : per_class) s += c.hd95;
  return per_class.empty() ? 0.0 : s / static_cast<double>(per_class.size());
}

double MetricReport::mean_asd() const {
  double s = 0;
  for (const auto& c : per_class) s += c.asd;
  return per_class.empty() ? 0.0 : s / static_cast<double>(per_class.size());
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& c : per_class) {
    per.push_back({{"class", c.cls},
                   {"dice", c.dice},
                   {"iou", c.iou},
                   {"hd95", c.hd95},
                   {"asd", c.asd},
                   {"surface_defined", c.surface_defined}});
  }
  return {{"dice", mean_dice()},
          {"iou", mean_iou()},
          {"hd95", mean_hd95()},
          {"asd", mean_asd()},
          {"per_class", per}};
}

MetricReport evaluate_pair(const LabelMask& pred, const LabelMask& gt) {
  TORCH_CHECK(pred.num_classes == gt.num_classes, "evaluate_pair: class counts differ");
  MetricReport r;
  for (int64_t cls = 1; cls < gt.num_classes; ++cls) {
    ClassMetrics cm;
    cm.cls = cls;
    std::tie(cm.dice, cm.iou) = dice_iou(pred, gt, cls);
    const auto sd = surface_distances(pred, gt, cls);
    cm.surface_defined = sd.defined;
    if (!sd.defined) {
      cm.hd95 = cm.asd = sd.fallback;
    } else if (sd.values.empty()) {
      cm.hd95 = cm.asd = 0.0;
    } else {
      cm.hd95 = percentile_linear(sd.values, 0.95);
      double sum = 0.0;
      for (const double d : sd.values) sum += d;
      cm.asd = sum / static_cast<double>(sd.values.size());
    }
    r.per_class.push_back(cm);
  }
  return r;
}

nlohmann::json aggregate_reports(const std::vector<MetricReport>& reports) {
  const auto stats = [](const std::vector<double>& v) {
    double mean = 0;
    for (const double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0;
    for (const double x : v) var += (x - mean) * (x - mean);
    var = v.size() > 1 ? var / static_cast<double>(v.size() - 1) : 0.0;
    return nlohmann::json{{"mean", mean}, {"std", std::sqrt(var)}};
  };
  TORCH_CHECK(!reports.empty(), "aggregate_reports: no reports");
  std::vector<double> dice, iou, hd, as;
  for (const auto& r : reports) {
    dice.push_back(r.mean_dice());
    iou.push_back(r.mean_iou());
    hd.push_back(r.mean_hd95());
    as.push_back(r.mean_asd());
  }
  return {{"samples", reports.size()},
          {"dice", stats(dice)},
          {"iou", stats(iou)},
          {"hd95", stats(hd)},
          {"asd", stats(as)}};
}

}  // namespace knowsam
