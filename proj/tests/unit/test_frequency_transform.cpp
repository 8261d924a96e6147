#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "../support/support.hpp"
#include "divsample/dct.hpp"

using namespace divsample;

namespace {

double energy(const Matrix& m) {
  double s = 0;
  for (double v : m.data) s += v * v;
  return s;
}

}  // namespace

TEST_CASE("basis rows are orthonormal") {
  const auto b = dct_basis(12, 12);
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = 0; j < 12; ++j) {
      double dot = 0;
      for (std::size_t n = 0; n < 12; ++n) dot += b(i, n) * b(j, n);
      CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("full-rank round trip") {
  Rng rng(3);
  for (std::size_t len : {5u, 17u, 36u, 125u}) {
    const auto x = testing::random_matrix(7, len, rng, 3.0);
    const auto back = idct_expand(dct_truncate(x, {len, len}), len);
    double worst = 0;
    for (std::size_t i = 0; i < x.data.size(); ++i) worst = std::max(worst, std::abs(back.data[i] - x.data[i]));
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("truncation never adds energy") {
  Rng rng(4);
  const auto x = testing::random_matrix(6, 36, rng);
  for (std::size_t n : {1u, 3u, 10u, 36u}) {
    const auto rec = idct_expand(dct_truncate(x, {36, n}), 36);
    CHECK(energy(rec) <= energy(x) * (1 + 1e-12));
  }
}

TEST_CASE("constant sequence has only a DC coefficient") {
  Matrix x(1, 20, 2.5);
  const auto c = dct_truncate(x, {20, 10});
  CHECK(c(0, 0) == doctest::Approx(2.5 * std::sqrt(20.0)));
  for (std::size_t k = 1; k < 10; ++k) CHECK(std::abs(c(0, k)) < 1e-12);
}

TEST_CASE("padding repeats the last frame") {
  Matrix x(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6});
  const auto p = pad_last_frame(x, 2);
  CHECK(p.cols == 5);
  CHECK(p(0, 4) == 3);
  CHECK(p(1, 3) == 6);
  CHECK(pad_last_frame(x, 0) == x);
  CHECK_THROWS_AS(pad_last_frame(x, -1), std::invalid_argument);
}

TEST_CASE("configuration errors") {
  Matrix x(2, 8);
  CHECK_THROWS_AS(dct_truncate(x, {8, 9}), std::invalid_argument);
  CHECK_THROWS_AS(dct_truncate(x, {10, 4}), std::invalid_argument);
  CHECK_THROWS_AS(dct_truncate(x, {8, 0}), std::invalid_argument);
  CHECK_THROWS_AS(idct_expand(Matrix(2, 9), 8), std::invalid_argument);
}
