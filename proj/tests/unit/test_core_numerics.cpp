#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "../support/support.hpp"
#include "divsample/adam.hpp"
#include "divsample/checkpoint.hpp"
#include "divsample/ops.hpp"

using namespace divsample;
using testing::gradcheck;
using testing::random_tensor;

namespace {

constexpr double kGradTol = 1e-4;

Tensor t(Shape s, std::vector<double> v, bool rg = true) { return Tensor(std::move(s), std::move(v), rg); }

}  // namespace

TEST_CASE("tensor construction validates shapes") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 0}, {}), ShapeError);
  auto a = t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(a.at({1, 2}) == 6);
  CHECK_THROWS_AS(a.item(), ShapeError);
}

TEST_CASE("tanh matches high-precision reference") {
  auto y = ops::tanh(Tensor({1}, {0.5}));
  CHECK(y.item() == doctest::Approx(0.46211715726000974).epsilon(1e-15));
}

TEST_CASE("matmul forward values") {
  auto c = ops::matmul(t({2, 2}, {1, 2, 3, 4}), t({2, 1}, {5, 6}));
  CHECK(c.data()[0] == 17);
  CHECK(c.data()[1] == 39);
  CHECK_THROWS_AS(ops::matmul(t({2, 2}, {1, 2, 3, 4}), t({3, 1}, {1, 2, 3})), ShapeError);
}

TEST_CASE("softplus is overflow safe and softmax rows are simplex") {
  auto s = ops::softplus(Tensor({3}, {1000.0, -1000.0, 0.0}));
  CHECK(s.data()[0] == doctest::Approx(1000.0));
  CHECK(s.data()[1] >= 0.0);
  CHECK(s.data()[2] == doctest::Approx(std::log(2.0)));
  auto p = ops::softmax(Tensor({2, 3}, {1000, 1001, 1002, -5, 0, 5}));
  for (std::size_t r = 0; r < 2; ++r) {
    double sum = 0;
    for (std::size_t c = 0; c < 3; ++c) sum += p.at({r, c});
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("backward preconditions") {
  auto a = t({2}, {1, 2});
  CHECK_THROWS_AS(backward(a), std::logic_error);
  auto b = Tensor({1}, {1.0}, false);
  CHECK_THROWS_AS(backward(ops::scale(b, 2.0)), std::logic_error);
}

TEST_CASE("no-grad guard records nothing") {
  auto a = t({2}, {1, 2});
  NoGradGuard g;
  auto y = ops::sum(ops::square(a));
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("gradient of every differentiable op matches finite differences") {
  Rng rng(11);
  auto A = random_tensor({3, 4}, rng), B = random_tensor({4, 2}, rng);
  auto A3 = random_tensor({2, 3, 4}, rng), B3 = random_tensor({2, 4, 2}, rng);
  auto L = random_tensor({3, 3}, rng), X = random_tensor({2, 3, 4}, rng);
  auto P = random_tensor({3, 4}, rng), Q = random_tensor({3, 4}, rng);
  auto bias = random_tensor({4}, rng);
  auto pos = random_tensor({3, 4}, rng, true, 0.5, 2.0);
  auto W = random_tensor({2, 5, 6}, rng), Y = random_tensor({2, 6}, rng);

  SUBCASE("matmul") { CHECK(gradcheck({A, B}, [&] { return ops::sum(ops::tanh(ops::matmul(A, B))); }) < kGradTol); }
  SUBCASE("bmm") { CHECK(gradcheck({A3, B3}, [&] { return ops::sum(ops::tanh(ops::bmm(A3, B3))); }) < kGradTol); }
  SUBCASE("left_matmul") {
    CHECK(gradcheck({L, X}, [&] { return ops::sum(ops::tanh(ops::left_matmul(L, X))); }) < kGradTol);
  }
  SUBCASE("elementwise binary") {
    CHECK(gradcheck({P, Q}, [&] { return ops::sum(ops::tanh(ops::add(P, ops::mul(P, Q)))); }) < kGradTol);
    CHECK(gradcheck({P, Q}, [&] { return ops::sum(ops::square(ops::sub(P, Q))); }) < kGradTol);
  }
  SUBCASE("scale, add_scalar, add_bias") {
    CHECK(gradcheck({P, bias}, [&] {
      return ops::sum(ops::tanh(ops::add_bias(ops::add_scalar(ops::scale(P, -1.7), 0.3), bias)));
    }) < kGradTol);
  }
  SUBCASE("unary") {
    CHECK(gradcheck({P}, [&] { return ops::sum(ops::exp(P)); }) < kGradTol);
    CHECK(gradcheck({pos}, [&] { return ops::sum(ops::log(pos)); }) < kGradTol);
    CHECK(gradcheck({P}, [&] { return ops::sum(ops::softplus(ops::scale(P, 3.0))); }) < kGradTol);
    CHECK(gradcheck({P}, [&] { return ops::sum(ops::square(ops::relu(P))); }) < kGradTol);
  }
  SUBCASE("softmax") {
    CHECK(gradcheck({P, Q}, [&] { return ops::sum(ops::mul(ops::softmax(P), Q)); }) < kGradTol);
  }
  SUBCASE("reductions") {
    CHECK(gradcheck({P}, [&] { return ops::mean(ops::square(P)); }) < kGradTol);
    CHECK(gradcheck({P}, [&] { return ops::sum(ops::min_last(ops::square(P))); }) < kGradTol);
  }
  SUBCASE("shape ops") {
    CHECK(gradcheck({A3, P}, [&] {
      auto r = ops::reshape(A3, {6, 4});
      auto c = ops::concat({ops::slice(r, 0, 1, 4), P}, 0);
      auto rep = ops::repeat(ops::slice(c, 1, 1, 3), 1, 3);
      return ops::sum(ops::tanh(ops::mul(rep, rep)));
    }) < kGradTol);
    CHECK(gradcheck({A3, X}, [&] { return ops::sum(ops::square(ops::concat({A3, X}, 2))); }) < kGradTol);
  }
  SUBCASE("distances") {
    CHECK(gradcheck({W}, [&] { return ops::sum(ops::tanh(ops::pairwise_distances(W))); }) < kGradTol);
    CHECK(gradcheck({W, Y}, [&] { return ops::sum(ops::tanh(ops::distances_to(W, Y))); }) < kGradTol);
  }
}

TEST_CASE("batch_norm gradient and statistics") {
  Rng rng(5);
  auto gamma = random_tensor({4}, rng), beta = random_tensor({4}, rng);
  auto x = random_tensor({5, 4}, rng);
  auto w = random_tensor({5, 4}, rng, false);
  ops::BatchNormState st(4);
  CHECK(gradcheck({x, gamma, beta}, [&] {
    return ops::sum(ops::mul(ops::tanh(ops::batch_norm(x, gamma, beta, st, ops::Mode::kTrain)), w));
  }) < kGradTol);

  ops::BatchNormState fresh(2);
  auto y = ops::batch_norm(Tensor({2, 2}, {1, 10, 3, 20}), Tensor::full({2}, 1.0), Tensor::zeros({2}), fresh,
                           ops::Mode::kTrain);
  // batch mean 2 and 15; unbiased variances 2 and 50
  CHECK(fresh.running_mean[0] == doctest::Approx(0.2));
  CHECK(fresh.running_var[0] == doctest::Approx(0.9 + 0.1 * 2.0));
  CHECK(fresh.running_var[1] == doctest::Approx(0.9 + 0.1 * 50.0));
  CHECK(y.at({0, 0}) == doctest::Approx(-1.0 / std::sqrt(1.0 + 1e-5)));
  CHECK_THROWS_AS(ops::batch_norm(Tensor({1, 2}, {1, 2}), Tensor::full({2}, 1.0), Tensor::zeros({2}), fresh,
                                  ops::Mode::kTrain),
                  std::invalid_argument);
}

TEST_CASE("pairwise distance at coincident rows has zero subgradient") {
  auto x = t({1, 2, 2}, {1, 1, 1, 1});
  auto d = ops::pairwise_distances(x);
  backward(ops::sum(d));
  for (double g : x.grad()) CHECK(g == 0.0);
}

TEST_CASE("adam first step") {
  auto p = t({2}, {0.0, 0.0});
  p.mutable_grad()[0] = 1.0;
  p.mutable_grad()[1] = -0.5;
  std::vector<Tensor> params{p};
  AdamState st;
  adam_update(params, st);
  CHECK(p.data()[0] == doctest::Approx(-9.9999999e-4).epsilon(1e-9));
  CHECK(p.data()[1] == doctest::Approx(9.99999980e-4).epsilon(1e-9));
  CHECK(st.step_count == 1);
}

TEST_CASE("learning-rate schedule") {
  LrSchedule s;
  CHECK(s.at(1) == 1e-3);
  CHECK(s.at(100) == 1e-3);
  CHECK(s.at(300) == doctest::Approx(8.5e-4));
  CHECK(s.at(500) == doctest::Approx(7e-4));
  CHECK(s.at(800) == doctest::Approx(7e-4));
}

TEST_CASE("checkpoint round trip is bit exact") {
  const auto dir = std::filesystem::temp_directory_path() / "divsample_ckpt_test";
  std::filesystem::create_directories(dir);
  Checkpoint c;
  c.meta["kind"] = "test";
  c.entries.push_back({"a", {2, 2}, {1.0 / 3.0, -0.0, 1e-300, 6.02e23}});
  c.entries.push_back({"b", {3}, {std::nextafter(1.0, 2.0), -2.5, 7}});
  save_checkpoint(dir / "x", c);
  CHECK(checkpoint_exists(dir / "x"));
  const auto back = load_checkpoint(dir / "x");
  REQUIRE(back.entries.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.entries[i].name == c.entries[i].name);
    CHECK(back.entries[i].shape == c.entries[i].shape);
    CHECK(std::memcmp(back.entries[i].values.data(), c.entries[i].values.data(),
                      c.entries[i].values.size() * sizeof(double)) == 0);
  }
  CHECK(back.meta["kind"] == "test");
  CHECK_THROWS(back.find("missing"));

  std::filesystem::resize_file(dir / "x.f64", 16);
  CHECK_THROWS(load_checkpoint(dir / "x"));
  std::filesystem::remove_all(dir);
}
