#include "knowsam/viz/render.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>

namespace knowsam {
namespace {

cv::Mat gray_mat(const torch::Tensor& t) {
  auto x = t.detach().to(torch::kFloat32);
  if (x.dim() == 3) x = x.mean(0);
  const double lo = x.min().item<double>();
  const double hi = x.max().item<double>();
  auto norm = (hi > lo) ? (x - lo) / (hi - lo) : torch::zeros_like(x);
  auto u8 = (norm * 255.0).to(torch::kUInt8).contiguous();
  return cv::Mat(static_cast<int>(u8.size(0)), static_cast<int>(u8.size(1)), CV_8UC1,
                 u8.data_ptr<uint8_t>())
      .clone();
}

cv::Mat to_bgr(const cv::Mat& gray) {
  cv::Mat out;
  cv::cvtColor(gray, out, cv::COLOR_GRAY2BGR);
  return out;
}

cv::Mat heat(const torch::Tensor& t) {
  cv::Mat color;
  cv::applyColorMap(gray_mat(t), color, cv::COLORMAP_JET);
  return color;
}

cv::Mat overlay_mask(const cv::Mat& bgr, const torch::Tensor& mask, const cv::Scalar& color) {
  auto m = mask.detach().to(torch::kUInt8).contiguous();
  cv::Mat mm(static_cast<int>(m.size(0)), static_cast<int>(m.size(1)), CV_8UC1,
             m.data_ptr<uint8_t>());
  cv::Mat out = bgr.clone();
  cv::Mat tint(out.size(), CV_8UC3, color);
  cv::addWeighted(out, 0.65, tint, 0.35, 0.0, out, -1);
  bgr.copyTo(out, mm == 0);
  return out;
}

cv::Mat labeled_panel(cv::Mat img, const std::string& caption, int side) {
  cv::resize(img, img, cv::Size(side, side), 0, 0, cv::INTER_NEAREST);
  const int band = 22;
  cv::Mat panel(side + band, side, CV_8UC3, cv::Scalar(30, 30, 30));
  img.copyTo(panel(cv::Rect(0, band, side, side)));
  cv::putText(panel, caption, {4, band - 7}, cv::FONT_HERSHEY_SIMPLEX, 0.42,
              {220, 220, 220}, 1, cv::LINE_AA);
  return panel;
}

void draw_grid(cv::Mat& img, const std::vector<int64_t>& highlight) {
  const int ph = img.rows / static_cast<int>(kPatchGridSide);
  const int pw = img.cols / static_cast<int>(kPatchGridSide);
  for (int i = 1; i < kPatchGridSide; ++i) {
    cv::line(img, {0, i * ph}, {img.cols, i * ph}, {90, 90, 90}, 1);
    cv::line(img, {i * pw, 0}, {i * pw, img.rows}, {90, 90, 90}, 1);
  }
  for (const int64_t p : highlight) {
    const int r = static_cast<int>(p / kPatchGridSide);
    const int c = static_cast<int>(p % kPatchGridSide);
    cv::rectangle(img, {c * pw, r * ph}, {(c + 1) * pw - 1, (r + 1) * ph - 1}, {0, 220, 255}, 2);
  }
}

}  // namespace

void write_augment_preview(const Image& labeled_image, const LabelMask& labeled_mask,
                           const Image& unlabeled_image, const torch::Tensor& uncertainty,
                           const std::vector<int64_t>& patches, const MixedSample& mixed,
                           const std::filesystem::path& file) {
  const int side = 192;
  auto lab = overlay_mask(to_bgr(gray_mat(labeled_image.pixels)), labeled_mask.classes != 0,
                          {0, 200, 0});
  auto unl = to_bgr(gray_mat(unlabeled_image.pixels));
  auto unc = heat(uncertainty);
  cv::resize(unc, unc, cv::Size(side, side), 0, 0, cv::INTER_NEAREST);
  draw_grid(unc, {});
  auto sel = heat(uncertainty);
  cv::resize(sel, sel, cv::Size(side, side), 0, 0, cv::INTER_NEAREST);
  draw_grid(sel, patches);
  auto mix = overlay_mask(to_bgr(gray_mat(mixed.image.pixels)), mixed.target.classes != 0,
                          {0, 200, 0});
  auto mixed_region = to_bgr(gray_mat(mixed.provenance));

  std::vector<cv::Mat> panels;
  panels.push_back(labeled_panel(lab, "labeled (weak) + gt", side));
  panels.push_back(labeled_panel(unl, "unlabeled (strong)", side));
  panels.push_back(labeled_panel([&] {
                     cv::Mat u = unc.clone();
                     return u;
                   }(),
                   "uncertainty grid", side));
  panels.push_back(labeled_panel(sel, "top-" + std::to_string(patches.size()) + " patches", side));
  panels.push_back(labeled_panel(mix, "mixed + target", side));
  panels.push_back(labeled_panel(mixed_region, "provenance", side));

  cv::Mat canvas;
  cv::hconcat(panels, canvas);
  std::filesystem::create_directories(file.parent_path().empty() ? "." : file.parent_path());
  cv::imwrite(file.string(), canvas);
}

void write_line_plot(const std::vector<Series>& series, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::filesystem::path& file) {
  const int W = 720, H = 480, ml = 70, mr = 160, mt = 50, mb = 55;
  cv::Mat img(H, W, CV_8UC3, cv::Scalar(255, 255, 255));
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series) {
    for (const double v : s.x) xmin = std::min(xmin, v), xmax = std::max(xmax, v);
    for (const double v : s.y) ymin = std::min(ymin, v), ymax = std::max(ymax, v);
  }
  if (!(xmax > xmin)) xmax = xmin + 1;
  if (!(ymax > ymin)) ymax = ymin + 1;
  const double ypad = 0.08 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;
  const auto px = [&](double x) {
    return ml + static_cast<int>((x - xmin) / (xmax - xmin) * (W - ml - mr));
  };
  const auto py = [&](double y) {
    return H - mb - static_cast<int>((y - ymin) / (ymax - ymin) * (H - mt - mb));
  };
  cv::rectangle(img, {ml, mt}, {W - mr, H - mb}, {0, 0, 0}, 1);
  for (int i = 0; i <= 4; ++i) {
    const double y = ymin + (ymax - ymin) * i / 4.0;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", y);
    cv::putText(img, buf, {6, py(y) + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4, {60, 60, 60}, 1,
                cv::LINE_AA);
    cv::line(img, {ml, py(y)}, {W - mr, py(y)}, {230, 230, 230}, 1);
  }
  const cv::Scalar palette[] = {{200, 80, 0}, {0, 120, 220}, {0, 170, 0}, {180, 0, 180},
                                {0, 0, 200},  {120, 120, 0}};
  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const auto color = palette[si % std::size(palette)];
    for (size_t i = 0; i + 1 < s.x.size(); ++i) {
      cv::line(img, {px(s.x[i]), py(s.y[i])}, {px(s.x[i + 1]), py(s.y[i + 1])}, color, 2,
               cv::LINE_AA);
    }
    for (size_t i = 0; i < s.x.size(); ++i) {
      cv::circle(img, {px(s.x[i]), py(s.y[i])}, 3, color, -1, cv::LINE_AA);
    }
    cv::putText(img, s.label, {W - mr + 10, mt + 20 + static_cast<int>(si) * 22},
                cv::FONT_HERSHEY_SIMPLEX, 0.45, color, 1, cv::LINE_AA);
  }
  cv::putText(img, title, {ml, 28}, cv::FONT_HERSHEY_SIMPLEX, 0.6, {0, 0, 0}, 1, cv::LINE_AA);
  cv::putText(img, x_label, {(W - mr + ml) / 2 - 30, H - 16}, cv::FONT_HERSHEY_SIMPLEX, 0.45,
              {0, 0, 0}, 1, cv::LINE_AA);
  cv::putText(img, y_label, {8, mt - 8}, cv::FONT_HERSHEY_SIMPLEX, 0.45, {0, 0, 0}, 1,
              cv::LINE_AA);
  std::filesystem::create_directories(file.parent_path().empty() ? "." : file.parent_path());
  cv::imwrite(file.string(), img);
}

void write_bar_plot(const std::vector<std::string>& labels, const std::vector<double>& values,
                    const std::string& title, const std::string& y_label,
                    const std::filesystem::path& file) {
  const int W = 760, H = 480, ml = 70, mr = 20, mt = 50, mb = 110;
  cv::Mat img(H, W, CV_8UC3, cv::Scalar(255, 255, 255));
  double ymax = 0;
  for (const double v : values) ymax = std::max(ymax, v);
  if (ymax <= 0) ymax = 1;
  ymax *= 1.1;
  const int n = static_cast<int>(values.size());
  const int span = W - ml - mr;
  const int bw = std::max(8, span / std::max(1, n) - 12);
  cv::rectangle(img, {ml, mt}, {W - mr, H - mb}, {0, 0, 0}, 1);
  for (int i = 0; i < n; ++i) {
    const int x0 = ml + 6 + i * span / n;
    const int h = static_cast<int>(values[static_cast<size_t>(i)] / ymax * (H - mt - mb));
    cv::rectangle(img, {x0, H - mb - h}, {x0 + bw, H - mb}, {180, 110, 30}, -1);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", values[static_cast<size_t>(i)]);
    cv::putText(img, buf, {x0, H - mb - h - 6}, cv::FONT_HERSHEY_SIMPLEX, 0.4, {0, 0, 0}, 1,
                cv::LINE_AA);
    cv::putText(img, labels[static_cast<size_t>(i)], {x0 - 4, H - mb + 16 + (i % 2) * 16},
                cv::FONT_HERSHEY_SIMPLEX, 0.38, {60, 60, 60}, 1, cv::LINE_AA);
  }
  cv::putText(img, title, {ml, 28}, cv::FONT_HERSHEY_SIMPLEX, 0.6, {0, 0, 0}, 1, cv::LINE_AA);
  cv::putText(img, y_label, {8, mt - 8}, cv::FONT_HERSHEY_SIMPLEX, 0.45, {0, 0, 0}, 1,
              cv::LINE_AA);
  std::filesystem::create_directories(file.parent_path().empty() ? "." : file.parent_path());
  cv::imwrite(file.string(), img);
}

}  // namespace knowsam
