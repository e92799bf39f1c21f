#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <random>

#include "knowsam/core/config.hpp"
#include "knowsam/core/dataset.hpp"
#include "knowsam/core/types.hpp"
#include "support/oracles.hpp"

using namespace knowsam;

TEST_CASE("one_hot basics") {
  auto m = LabelMask::make(torch::zeros({1, 1}, torch::kLong), 2);
  auto p = one_hot(m);
  CHECK(p.probs.size(0) == 2);
  CHECK(p.probs[0][0][0].item<float>() == doctest::Approx(1.0));
  CHECK(p.probs[1][0][0].item<float>() == doctest::Approx(0.0));

  auto m2 = LabelMask::make(torch::ones({2, 2}, torch::kLong), 3);
  auto p2 = one_hot(m2);
  CHECK(p2.probs[1].sum().item<double>() == doctest::Approx(4.0));
  CHECK(p2.probs[0].sum().item<double>() == doctest::Approx(0.0));
  CHECK(p2.probs[2].sum().item<double>() == doctest::Approx(0.0));
}

TEST_CASE("label mask rejects out-of-range values with position") {
  auto bad = torch::zeros({3, 3}, torch::kLong);
  bad[1][2] = 5;
  CHECK_THROWS_WITH_AS(LabelMask::make(bad, 3), doctest::Contains("5"), c10::Error);
  try {
    LabelMask::make(bad, 3);
  } catch (const c10::Error& e) {
    CHECK(std::string(e.what()).find("1,2") != std::string::npos);
  }
}

TEST_CASE("binarize thresholds and argmax") {
  auto p = ProbabilityMap::make(torch::tensor({{{0.4f}}, {{0.6f}}}));
  CHECK(binarize(p, 0.5).classes.item<int64_t>() == 1);
  auto tie = ProbabilityMap::make(torch::tensor({{{0.5f}}, {{0.5f}}}));
  CHECK(binarize(tie, 0.5).classes.item<int64_t>() == 0);  // strict >
  auto p3 = ProbabilityMap::make(torch::tensor({{{0.2f}}, {{0.5f}}, {{0.3f}}}));
  CHECK(binarize(p3).classes.item<int64_t>() == 1);
}

TEST_CASE("one_hot then argmax-binarize is the identity (property)") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    const int64_t c = 2 + static_cast<int64_t>(rng() % 4);
    auto gen = at::detail::createCPUGenerator(rng());
    auto m = LabelMask::make(torch::randint(0, c, {8, 8}, gen, torch::kLong), c);
    auto back = binarize(one_hot(m));
    CHECK(torch::equal(back.classes, m.classes));
  }
}

TEST_CASE("probability map invariant is enforced on demand") {
  auto bad = torch::full({2, 2, 2}, 0.7f);
  auto p = ProbabilityMap{bad};
  CHECK_THROWS_AS(p.validate(), c10::Error);
  auto good = ProbabilityMap::make(torch::full({2, 2, 2}, 0.5f));
  CHECK_NOTHROW(good.validate());
}

TEST_CASE("image invariants") {
  CHECK_THROWS_AS(Image::make(torch::full({1, 5, 8}, 0.5f), "x"), c10::Error);  // H not /4
  CHECK_THROWS_AS(Image::make(torch::full({1, 8, 8}, 2.0f), "x"), c10::Error);  // range
  CHECK_NOTHROW(Image::make(torch::full({1, 8, 8}, 0.5f), "x"));
}

TEST_CASE("schedule config validation") {
  ScheduleConfig s;
  CHECK_NOTHROW(s.validate());
  s.lambda_e = 0.0;
  CHECK_THROWS_AS(s.validate(), c10::Error);
  s = {};
  s.temperature = -1;
  CHECK_THROWS_AS(s.validate(), c10::Error);
}

TEST_CASE("config json round trip and hash") {
  ExperimentConfig c;
  c.iterations = 123;
  c.toggles.use_ugda = false;
  auto j = c.to_json();
  auto back = ExperimentConfig::from_json(j);
  CHECK(back.iterations == 123);
  CHECK(back.toggles.use_ugda == false);
  CHECK(back.hash() == c.hash());
  back.seed += 1;
  CHECK(back.hash() != c.hash());
}

TEST_CASE("env overrides reach nested keys") {
  setenv("KNOWSAM_SCHEDULE_LAMBDA_E", "0.5", 1);
  setenv("KNOWSAM_ITERATIONS", "77", 1);
  auto cfg = config_from_json_text("{}");
  unsetenv("KNOWSAM_SCHEDULE_LAMBDA_E");
  unsetenv("KNOWSAM_ITERATIONS");
  CHECK(cfg.schedule.lambda_e == doctest::Approx(0.5));
  CHECK(cfg.iterations == 77);
}

TEST_CASE("preset families and hashes") {
  CHECK(preset_names("views").size() == 3);
  CHECK(preset_names("losses").size() == 6);
  CHECK(preset_names("ugda").size() == 2);
  CHECK_THROWS_WITH_AS(preset_names("nope"), doctest::Contains("views-pred"), c10::Error);
  CHECK_THROWS_AS(apply_preset(ExperimentConfig{}, "losses-bogus"), c10::Error);

  ExperimentConfig base;
  std::set<uint64_t> hashes;
  for (const auto& name : all_preset_names()) hashes.insert(apply_preset(base, name).hash());
  CHECK(hashes.size() == all_preset_names().size());

  auto views_off = apply_preset(base, "views-pred");
  CHECK_FALSE(views_off.toggles.ham_view_entropy);
  CHECK_FALSE(views_off.toggles.ham_view_dissim);
  auto sup = apply_preset(base, "losses-sup");
  CHECK_FALSE(sup.toggles.use_sam_distill);
  CHECK_FALSE(sup.toggles.use_ugda);
}

TEST_CASE("dataset split invariants and sealed accessor") {
  auto img = [](const std::string& id) {
    return Image::make(torch::full({1, 8, 8}, 0.5f), id);
  };
  auto msk = [] { return LabelMask::make(torch::zeros({8, 8}, torch::kLong), 2); };

  CHECK_THROWS_AS(DatasetSplit({}, {img("u0")}), c10::Error);  // needs a labeled sample
  CHECK_THROWS_AS(DatasetSplit({{img("a"), msk()}}, {img("a")}), c10::Error);  // id overlap

  DatasetSplit split({{img("a"), msk()}}, {img("u0"), img("u1")}, {msk(), msk()});
  CHECK(split.sealed_reads() == 0);
  (void)split.sealed_unlabeled_mask(0);
  (void)split.sealed_unlabeled_mask(1);
  CHECK(split.sealed_reads() == 2);
  CHECK_THROWS_AS(split.sealed_unlabeled_mask(9), c10::Error);
}

TEST_CASE("dataset directory round trip") {
  std::mt19937_64 rng(3);
  auto gen = at::detail::createCPUGenerator(rng());
  auto pix = torch::rand({1, 8, 8}, gen, torch::kFloat32);
  // quantize so the 8-bit png round trip is exact
  pix = (pix * 255.0).round() / 255.0;
  auto image = Image::make(pix, "s0");
  auto gen2 = at::detail::createCPUGenerator(rng());
  auto mask = LabelMask::make(torch::randint(0, 2, {8, 8}, gen2, torch::kLong), 2);
  DatasetSplit split({{image, mask}}, {Image::make(pix, "u0")}, {mask});

  const auto root = std::filesystem::temp_directory_path() / "knowsam_ds_test";
  std::filesystem::remove_all(root);
  save_dataset_dir(split, root);
  auto loaded = load_dataset_dir(root);
  CHECK(loaded.labeled_count() == 1);
  CHECK(loaded.unlabeled_count() == 1);
  CHECK(loaded.num_classes() == 2);
  CHECK(torch::allclose(loaded.labeled()[0].image.pixels, image.pixels, 1e-6, 1e-6));
  CHECK(torch::equal(loaded.labeled()[0].mask.classes, mask.classes));
  CHECK(loaded.has_sealed_masks());
  CHECK(torch::equal(loaded.sealed_unlabeled_mask(0).classes, mask.classes));
  std::filesystem::remove_all(root);
}
