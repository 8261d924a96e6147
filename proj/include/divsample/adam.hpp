#pragma once

#include <cstdint>
#include <vector>

#include "divsample/tensor.hpp"

namespace divsample {

struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
};

/// One bias-corrected Adam step over `params`, using each parameter's
/// accumulated grad (a missing grad counts as zero). Moments are allocated
/// on the first call and must keep matching parameter sizes afterwards.
void adam_update(std::vector<Tensor>& params, AdamState& state);

/// Piecewise-linear learning-rate schedule: `base` up to and including
/// `flat_until`, then linear to `final_lr` at `decay_end`, constant after.
/// Epochs are 1-based.
struct LrSchedule {
  double base = 1e-3;
  double final_lr = 7e-4;
  int flat_until = 100;
  int decay_end = 500;

  double at(int epoch) const;
};

}  // namespace divsample
