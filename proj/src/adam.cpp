#include "divsample/adam.hpp"

#include <cmath>
#include <string>

namespace divsample {

void adam_update(std::vector<Tensor>& params, AdamState& state) {
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.numel(), 0.0);
      state.second_moment.emplace_back(p.numel(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam_update: state tracks " + std::to_string(state.first_moment.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  ++state.step_count;
  const auto t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    auto w = params[i].mutable_data();
    if (m.size() != w.size()) {
      throw ShapeError("adam_update: moment size " + std::to_string(m.size()) + " vs parameter " +
                       shape_str(params[i].shape()));
    }
    auto g = params[i].grad();
    const bool has_grad = g.size() == w.size();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = has_grad ? g[j] : 0.0;
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
      w[j] -= state.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + state.eps_adam);
    }
  }
}

double LrSchedule::at(int epoch) const {
  if (epoch <= flat_until) return base;
  if (epoch >= decay_end) return final_lr;
  const double frac = static_cast<double>(epoch - flat_until) / static_cast<double>(decay_end - flat_until);
  return base + (final_lr - base) * frac;
}

}  // namespace divsample
