#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "knowsam/distill/distill.hpp"
#include "support/oracles.hpp"

using namespace knowsam;

TEST_CASE("temp_softmax definitional cases") {
  auto logits = LogitMap::make(torch::tensor({{{2.0}}, {{0.0}}}));

  auto t1 = temp_softmax(logits, 1.0);
  auto plain = logits.scores.softmax(0);
  CHECK(torch::allclose(t1.probs, plain, 0, 0));

  auto hot = temp_softmax(logits, 1000.0);
  CHECK(hot.probs[0][0][0].item<double>() == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(hot.probs[1][0][0].item<double>() == doctest::Approx(0.5).epsilon(1e-3));

  // logits (2,0), T=2 -> (e/(e+1), 1/(e+1))
  auto t2 = temp_softmax(logits, 2.0);
  const double e = std::exp(1.0);
  CHECK(t2.probs[0][0][0].item<double>() == doctest::Approx(e / (e + 1.0)).epsilon(1e-6));
  CHECK(t2.probs[1][0][0].item<double>() == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-6));
  CHECK(t2.temperature == 2.0);

  CHECK_THROWS_AS(temp_softmax(logits, 0.0), c10::Error);
  CHECK_THROWS_AS(temp_softmax(logits, -1.0), c10::Error);
}

TEST_CASE("soft map entropy is nondecreasing in T relative to T=1") {
  std::mt19937_64 rng(61);
  for (int rep = 0; rep < 30; ++rep) {
    auto gen = at::detail::createCPUGenerator(rng());
    auto logits = LogitMap::make(torch::randn({3, 4, 4}, gen, torch::kDouble));
    auto p1 = temp_softmax(logits, 1.0);
    auto p4 = temp_softmax(logits, 4.0);
    const auto ent = [](const torch::Tensor& p) {
      return -(p * p.clamp_min(1e-12).log()).sum(0);
    };
    CHECK((ent(p4.probs) - ent(p1.probs)).min().item<double>() >= -1e-9);
  }
}

TEST_CASE("kd_loss zero at identity, nonnegative, derived one-pixel value") {
  std::mt19937_64 rng(67);
  auto p = SoftMap::make(oracle::random_prob_map(rng, 2, 4, 4), 2.0);
  CHECK(kd_loss(p, p, p).item<double>() == doctest::Approx(0.0).epsilon(1e-9));

  for (int rep = 0; rep < 1000; ++rep) {
    auto a = SoftMap::make(oracle::random_prob_map(rng, 2, 2, 2), 1.0);
    auto b = SoftMap::make(oracle::random_prob_map(rng, 2, 2, 2), 1.0);
    auto s = SoftMap::make(oracle::random_prob_map(rng, 2, 2, 2), 1.0);
    CHECK(kd_loss(a, b, s).item<double>() >= -1e-12);
  }

  // teacher (0.8,0.2), both students (0.6,0.4), T=1:
  // each term = 0.8 ln(0.8/0.6) + 0.2 ln(0.2/0.4); doubled across students
  auto teacher = SoftMap::make(torch::tensor({{{0.8}}, {{0.2}}}), 1.0);
  auto student = SoftMap::make(torch::tensor({{{0.6}}, {{0.4}}}), 1.0);
  const double kl = 0.8 * std::log(0.8 / 0.6) + 0.2 * std::log(0.2 / 0.4);
  CHECK(kl == doctest::Approx(0.0915162218).epsilon(1e-9));
  CHECK(kd_loss(student, student, teacher).item<double>() ==
        doctest::Approx(2.0 * kl).epsilon(1e-9));
}

TEST_CASE("kd_loss T^2 scaling flag") {
  auto teacher = SoftMap::make(torch::tensor({{{0.8}}, {{0.2}}}), 2.0);
  auto student = SoftMap::make(torch::tensor({{{0.6}}, {{0.4}}}), 2.0);
  const double base = kd_loss(student, student, teacher, /*t_squared_scale=*/false).item<double>();
  const double scaled = kd_loss(student, student, teacher, /*t_squared_scale=*/true).item<double>();
  CHECK(scaled == doctest::Approx(4.0 * base).epsilon(1e-9));
}

TEST_CASE("kd_loss rejects temperature mismatch") {
  std::mt19937_64 rng(71);
  auto a = SoftMap::make(oracle::random_prob_map(rng, 2, 2, 2), 2.0);
  auto b = SoftMap::make(oracle::random_prob_map(rng, 2, 2, 2), 2.0);
  auto s = SoftMap::make(oracle::random_prob_map(rng, 2, 2, 2), 3.0);
  CHECK_THROWS_AS(kd_loss(a, b, s), c10::Error);
}

TEST_CASE("kd_loss gradient flows to students only") {
  std::mt19937_64 rng(73);
  auto gen = at::detail::createCPUGenerator(rng());
  auto la = torch::randn({2, 4, 4}, gen, torch::kDouble).requires_grad_(true);
  auto lb = torch::randn({2, 4, 4}, gen, torch::kDouble).requires_grad_(true);
  auto ls = torch::randn({2, 4, 4}, gen, torch::kDouble).requires_grad_(true);
  const double T = 2.0;
  auto loss = kd_loss(temp_softmax(LogitMap::make(la), T), temp_softmax(LogitMap::make(lb), T),
                      temp_softmax(LogitMap::make(ls), T));
  auto grads = torch::autograd::grad({loss}, {la, lb, ls}, {}, false, false, true);
  CHECK(grads[0].defined());
  CHECK(grads[1].defined());
  CHECK(grads[0].abs().sum().item<double>() > 0.0);
  CHECK(grads[1].abs().sum().item<double>() > 0.0);
  // stop-gradient contract: nothing reaches the teacher logits
  CHECK_FALSE(grads[2].defined());
}

TEST_CASE("kd_loss invariant under identical spatial permutation") {
  std::mt19937_64 rng(79);
  auto a = oracle::random_prob_map(rng, 2, 4, 4);
  auto b = oracle::random_prob_map(rng, 2, 4, 4);
  auto s = oracle::random_prob_map(rng, 2, 4, 4);
  auto gen = at::detail::createCPUGenerator(rng());
  auto perm = torch::randperm(16, gen, torch::kLong);
  const auto apply = [&](const torch::Tensor& t) {
    return t.reshape({2, 16}).index_select(1, perm).reshape({2, 4, 4});
  };
  const double before =
      kd_loss(SoftMap::make(a, 1.0), SoftMap::make(b, 1.0), SoftMap::make(s, 1.0))
          .item<double>();
  const double after = kd_loss(SoftMap::make(apply(a), 1.0), SoftMap::make(apply(b), 1.0),
                               SoftMap::make(apply(s), 1.0))
                           .item<double>();
  CHECK(before == doctest::Approx(after).epsilon(1e-12));
}
