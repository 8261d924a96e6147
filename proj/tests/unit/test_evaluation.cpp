#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "../support/support.hpp"
#include "divsample/evaluation.hpp"

using namespace divsample;

namespace {

std::vector<PoseSequence> random_set(std::size_t k, std::size_t rows, std::size_t frames, Rng& rng) {
  std::vector<PoseSequence> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(testing::random_matrix(rows, frames, rng, 2.0));
  return out;
}

double frame_dist(const PoseSequence& a, const PoseSequence& b, std::size_t t) {
  double s = 0;
  for (std::size_t r = 0; r < a.rows; ++r) s += std::pow(a(r, t) - b(r, t), 2);
  return std::sqrt(s);
}

SyntheticConfig small_data() {
  SyntheticConfig c;
  c.n_train = 60;
  c.n_test = 12;
  return c;
}

}  // namespace

TEST_CASE("metrics agree with brute-force definitions") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto preds = random_set(6, 9, 5, rng);
    const auto gt = testing::random_matrix(9, 5, rng, 2.0);
    double pair = 0;
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t j = 0; j < 6; ++j) {
        if (i == j) continue;
        double s = 0;
        for (std::size_t e = 0; e < preds[i].data.size(); ++e) s += std::pow(preds[i].data[e] - preds[j].data[e], 2);
        pair += std::sqrt(s);
      }
    }
    CHECK(apd(preds) == doctest::Approx(pair / 30).epsilon(1e-12));
    double best_a = 1e300, best_f = 1e300;
    for (const auto& p : preds) {
      double a = 0;
      for (std::size_t t = 0; t < 5; ++t) a += frame_dist(p, gt, t) / 5;
      best_a = std::min(best_a, a);
      best_f = std::min(best_f, frame_dist(p, gt, 4));
    }
    CHECK(ade(preds, gt) == doctest::Approx(best_a).epsilon(1e-12));
    CHECK(fde(preds, gt) == doctest::Approx(best_f).epsilon(1e-12));
  }
}

TEST_CASE("constant offset of every prediction") {
  PoseSequence gt(3, 4, 0.0);
  std::vector<PoseSequence> preds;
  for (int k = 0; k < 3; ++k) {
    PoseSequence p(3, 4, 0.0);
    for (std::size_t t = 0; t < 4; ++t) p(0, t) = 1.0 + k;
    preds.push_back(p);
  }
  CHECK(ade(preds, gt) == doctest::Approx(1.0));
  CHECK(fde(preds, gt) == doctest::Approx(1.0));
  CHECK(apd(preds) == doctest::Approx((2 + 4 + 2) * 2.0 / 6.0));
  const auto [am, fm] = median_metrics(preds, gt);
  CHECK(am == doctest::Approx(2.0));
  CHECK(fm == doctest::Approx(2.0));
  CHECK(apd({preds[0], preds[0]}) == 0.0);
  CHECK_THROWS_AS(apd({preds[0]}), std::invalid_argument);
  CHECK_THROWS_AS(ade(preds, PoseSequence(3, 5)), std::invalid_argument);
}

TEST_CASE("multimodal metrics reduce to the single-future case") {
  Rng rng(2);
  const auto preds = random_set(4, 6, 3, rng);
  const auto gt = testing::random_matrix(6, 3, rng);
  CHECK(mmade(preds, {gt}) == ade(preds, gt));
  CHECK(mmfde(preds, {gt}) == fde(preds, gt));
  CHECK(mmade(preds, {gt, preds[1]}) == doctest::Approx(0.5 * ade(preds, gt)));
  CHECK_THROWS_AS(mmade(preds, {}), std::invalid_argument);
}

TEST_CASE("median of even and odd sets") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
  CHECK_THROWS_AS(median({}), std::invalid_argument);
}

TEST_CASE("pseudo ground-truth mining") {
  const auto ds = generate_dataset(small_data(), 3);
  const auto tiny = mine_multimodal_gt(ds, 1e-12);
  for (std::size_t i = 0; i < ds.test.size(); ++i) {
    REQUIRE(tiny.futures[i].size() == 1);
    CHECK(tiny.futures[i][0] == ds.test[i].future);
  }
  const auto all = mine_multimodal_gt(ds, 1e12);
  for (const auto& f : all.futures) CHECK(f.size() == ds.size());
  const double thr = default_mm_threshold(ds);
  CHECK(thr > 0);
  const auto mm = mine_multimodal_gt(ds, thr);
  for (std::size_t i = 0; i < ds.test.size(); ++i) CHECK(mm.futures[i].front() == ds.test[i].future);
  CHECK_THROWS_AS(mine_multimodal_gt(ds, 0.0), std::invalid_argument);
}

TEST_CASE("PCA scores are centred, ordered and path independent") {
  Rng rng(4);
  std::vector<PoseSequence> narrow;
  for (int i = 0; i < 8; ++i) {
    PoseSequence p(2, 2);
    for (auto& v : p.data) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    p(0, 0) *= 5;
    narrow.push_back(p);
  }
  const auto a = pca_project(narrow);
  double m0 = 0, m1 = 0, v0 = 0, v1 = 0, cross = 0;
  for (const auto& s : a) {
    m0 += s[0];
    m1 += s[1];
    v0 += s[0] * s[0];
    v1 += s[1] * s[1];
    cross += s[0] * s[1];
  }
  CHECK(std::abs(m0) < 1e-9);
  CHECK(std::abs(m1) < 1e-9);
  CHECK(v0 >= v1);
  CHECK(std::abs(cross) < 1e-9);

  // zero-padding to more dimensions than points takes the Gram-matrix path
  std::vector<PoseSequence> wide;
  for (const auto& p : narrow) {
    PoseSequence q(2, 8, 0.0);
    for (std::size_t r = 0; r < 2; ++r) {
      for (std::size_t c = 0; c < 2; ++c) q(r, c) = p(r, c);
    }
    wide.push_back(q);
  }
  const auto b = pca_project(wide);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(b[i][0] == doctest::Approx(a[i][0]).epsilon(1e-9));
    CHECK(b[i][1] == doctest::Approx(a[i][1]).epsilon(1e-9));
  }

  std::vector<PoseSequence> line;
  for (int i = 0; i < 4; ++i) line.push_back(PoseSequence(1, 5, static_cast<double>(i)));
  for (const auto& s : pca_project(line)) CHECK(s[1] == 0.0);
  CHECK_THROWS_AS(pca_project({narrow[0], narrow[1]}), std::invalid_argument);
}

TEST_CASE("suite evaluation is deterministic and writes aligned tables") {
  const auto ds = generate_dataset(small_data(), 5);
  const auto mm = mine_multimodal_gt(ds, default_mm_threshold(ds));
  Predictor jitter = [](const PoseSequence& obs, std::size_t k, Rng& rng) {
    std::vector<PoseSequence> out;
    std::normal_distribution<double> n(0.0, 0.5);
    for (std::size_t i = 0; i < k; ++i) {
      PoseSequence p(obs.rows, 24);
      for (std::size_t r = 0; r < obs.rows; ++r) {
        for (std::size_t t = 0; t < 24; ++t) p(r, t) = obs(r, obs.cols - 1) + n(rng);
      }
      out.push_back(p);
    }
    return out;
  };
  Rng r1(7), r2(7);
  const auto a = evaluate_suite("jitter", jitter, ds, mm, 5, r1);
  const auto b = evaluate_suite("jitter", jitter, ds, mm, 5, r2);
  CHECK(a.apd == b.apd);
  CHECK(a.ade == b.ade);
  CHECK(a.samples.size() == ds.test.size());
  CHECK(a.mode_coverage >= 1.0);
  CHECK(a.ade_m >= a.ade);
  std::ostringstream os;
  write_comparison_csv(os, {a, b});
  std::istringstream is(os.str());
  std::string line;
  int rows = 0;
  while (std::getline(is, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 8);
    ++rows;
  }
  CHECK(rows == 3);
  Rng r3(1);
  CHECK_THROWS_AS(evaluate_suite("x", jitter, ds, mm, 1, r3), std::invalid_argument);
}
