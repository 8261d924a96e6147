#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "divsample/hyperparams.hpp"
#include "divsample/matrix.hpp"
#include "divsample/rng.hpp"
#include "divsample/tensor.hpp"

namespace testing {

using divsample::Matrix;
using divsample::Rng;
using divsample::Shape;
using divsample::Tensor;

inline Tensor random_tensor(const Shape& shape, Rng& rng, bool requires_grad = true, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(divsample::shape_numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor(shape, std::move(v), requires_grad);
}

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, c);
  for (auto& x : m.data) x = u(rng);
  return m;
}

/// |a - n| / max(|a|, |n|, floor): relative error with an absolute floor so
/// that entries whose true gradient is ~0 are compared on an absolute scale.
inline double rel_error(double a, double n, double floor = 1e-6) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

/// Max elementwise relative error between autodiff and central finite
/// differences over every entry of `params`. `five_point` uses the
/// fourth-order stencil, which tolerates a larger h and so less roundoff.
inline double gradcheck(std::vector<Tensor> params, const std::function<Tensor()>& loss, double h = 1e-6,
                        double floor = 1e-6, bool five_point = false) {
  auto l = loss();
  divsample::backward(l);
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) {
    auto g = p.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) analytic.back().assign(p.numel(), 0.0);
  }
  double worst = 0.0;
  divsample::NoGradGuard guard;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto data = params[i].mutable_data();
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double keep = data[j];
      auto at = [&](double step) {
        data[j] = keep + step;
        return loss().item();
      };
      const double numeric = five_point ? (8 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12 * h)
                                        : (at(h) - at(-h)) / (2 * h);
      data[j] = keep;
      worst = std::max(worst, rel_error(analytic[i][j], numeric, floor));
    }
  }
  return worst;
}

/// Tiny model geometry used by gradient checks and fast training tests.
inline divsample::HyperParams micro_hyper() {
  divsample::HyperParams h;
  h.joints = 3;
  h.history = 4;
  h.horizon = 6;
  h.n_dct = 4;
  h.features = 6;
  h.cvae_layers = 2;
  h.beta_layers = 2;
  h.bases = 4;
  h.n_b = 8;
  h.n_h = 5;
  h.n_z = 4;
  h.k_train = 3;
  h.eta = 2.0;
  h.sigma_div = 1.0;
  h.lambda_hdiv = 1.0;
  h.lambda_acc = 1.0;
  h.lambda_kl = 0.5;
  h.epochs = 2;
  h.samples_per_epoch = 16;
  h.batch_size = 4;
  h.lr.flat_until = 1;
  h.lr.decay_end = 2;
  return h;
}

}  // namespace testing
