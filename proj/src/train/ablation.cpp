#include "knowsam/train/ablation.hpp"

#include <fstream>
#include <map>

#include "knowsam/train/synthetic.hpp"
#include "knowsam/viz/render.hpp"

namespace knowsam {
namespace {

bool is_family(const std::string& s) { return s == "views" || s == "losses" || s == "ugda"; }

}  // namespace

std::vector<AblationRow> run_ablation(const ExperimentConfig& base,
                                      const std::string& family_or_preset,
                                      const std::vector<uint64_t>& seeds,
                                      const std::filesystem::path& out_dir) {
  const auto presets =
      is_family(family_or_preset) ? preset_names(family_or_preset)
                                  : std::vector<std::string>{[&] {
                                      // validates the name, throws with the full list otherwise
                                      apply_preset(base, family_or_preset);
                                      return family_or_preset;
                                    }()};
  std::filesystem::create_directories(out_dir);

  std::vector<AblationRow> rows;
  for (const uint64_t seed : seeds) {
    auto seeded = base;
    seeded.seed = seed;
    // one dataset + test set per seed, shared by every preset
    auto spec = seeded.synthetic;
    spec.size = seeded.image_size;
    const auto train = generate_synthetic_dataset(spec, seeded.labeled_fraction, seed);
    const auto test = make_synthetic_test_set(seeded, std::min<int64_t>(64, spec.count));
    for (const auto& preset : presets) {
      auto cfg = apply_preset(seeded, preset);
      cfg.run_name = preset + "-seed" + std::to_string(seed);
      const auto result = run_training(cfg, out_dir / cfg.run_name, train, &test);
      AblationRow row;
      row.preset = preset;
      row.seed = seed;
      row.dice = result.metrics["dice"]["mean"].get<double>();
      row.iou = result.metrics["iou"]["mean"].get<double>();
      row.hd95 = result.metrics["hd95"]["mean"].get<double>();
      row.asd = result.metrics["asd"]["mean"].get<double>();
      rows.push_back(row);
    }
  }

  std::ofstream csv(out_dir / "ablation.csv");
  csv << "preset,seed,dice,iou,hd95,asd\n";
  for (const auto& r : rows) {
    csv << r.preset << ',' << r.seed << ',' << r.dice << ',' << r.iou << ',' << r.hd95 << ','
        << r.asd << "\n";
  }

  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& r : rows) {
    acc[r.preset].first += r.dice;
    acc[r.preset].second += 1;
  }
  std::vector<std::string> labels;
  std::vector<double> means;
  for (const auto& preset : presets) {
    labels.push_back(preset);
    means.push_back(acc[preset].first / std::max(1, acc[preset].second));
  }
  write_bar_plot(labels, means, "mean Dice by preset", "Dice", out_dir / "ablation.png");
  return rows;
}

void write_report(const std::filesystem::path& runs_dir, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  struct Entry {
    std::string name;
    double dice, iou, hd95, asd;
  };
  std::vector<Entry> entries;
  for (const auto& dir : std::filesystem::directory_iterator(runs_dir)) {
    const auto mfile = dir.path() / "metrics.json";
    if (!std::filesystem::exists(mfile)) continue;
    std::ifstream in(mfile);
    nlohmann::json j;
    in >> j;
    entries.push_back({dir.path().filename().string(), j["dice"]["mean"].get<double>(),
                       j["iou"]["mean"].get<double>(), j["hd95"]["mean"].get<double>(),
                       j["asd"]["mean"].get<double>()});
  }
  TORCH_CHECK(!entries.empty(), "no runs with metrics.json under ", runs_dir.string());
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.name < b.name; });

  std::ofstream csv(out_dir / "report.csv");
  csv << "run,dice,iou,hd95,asd\n";
  for (const auto& e : entries) {
    csv << e.name << ',' << e.dice << ',' << e.iou << ',' << e.hd95 << ',' << e.asd << "\n";
  }

  std::vector<std::string> labels;
  std::vector<double> dices;
  for (const auto& e : entries) {
    labels.push_back(e.name);
    dices.push_back(e.dice);
  }
  write_bar_plot(labels, dices, "mean Dice by run", "Dice", out_dir / "report_dice.png");

  // label-ratio sweep view: runs named ...frac<value>... averaged per fraction
  std::map<double, std::pair<double, int>> by_frac;
  for (const auto& e : entries) {
    const auto pos = e.name.find("frac");
    if (pos == std::string::npos) continue;
    try {
      const double f = std::stod(e.name.substr(pos + 4));
      by_frac[f].first += e.dice;
      by_frac[f].second += 1;
    } catch (const std::exception&) {
      continue;
    }
  }
  if (by_frac.size() >= 2) {
    Series s;
    s.label = "mean Dice";
    for (const auto& [frac, agg] : by_frac) {
      s.x.push_back(frac);
      s.y.push_back(agg.first / agg.second);
    }
    write_line_plot({s}, "Dice vs labeled fraction", "labeled fraction", "Dice",
                    out_dir / "label_ratio.png");
  }
}

}  // namespace knowsam
