#pragma once

#include <cstdint>
#include <vector>

#include "divsample/diverse_sampler.hpp"

namespace divsample {

struct LossWeights {
  double lambda_div = 20.0;  // weight of whichever diversity term is active
  double lambda_acc = 40.0;
  double lambda_kl = 0.5;
  double eta = 25.0;
  double sigma_div = 100.0;
  DiversityLoss div_loss = DiversityLoss::kHinge;

  static LossWeights from(const HyperParams& hp);
  void validate() const;
};

// Batched forms over preds [B, K, D] (flattened sequences), averaged over B.
Tensor hinge_diversity(const Tensor& preds, double eta);
Tensor energy_diversity(const Tensor& preds, double sigma_div);
// gt [B, D]
Tensor accuracy_loss(const Tensor& preds, const Tensor& gt);
Tensor kl_regularizer(const GaussianBank& bank);

double hinge_diversity(const std::vector<PoseSequence>& preds, double eta);
double energy_diversity(const std::vector<PoseSequence>& preds, double sigma_div);
double accuracy_loss(const std::vector<PoseSequence>& preds, const PoseSequence& gt);

struct LossBreakdown {
  Tensor total;
  double diversity = 0.0;
  double accuracy = 0.0;
  double kl = 0.0;
};

LossBreakdown total_loss(const Tensor& preds, const Tensor& gt, const GaussianBank& bank, const LossWeights& w);

/// Full training forward for one batch: bank, shared-eps latents, frozen
/// decode and the weighted loss. x_dct [B, J, C*n_dct], gt [B, J*C*T],
/// eps [B, n_z].
LossBreakdown sampler_batch_loss(LatentSampler& sampler, CvaeModel& cvae, const Tensor& x_dct, const Tensor& gt,
                                 const Tensor& eps, std::size_t k, Rng& rng, const LossWeights& w);

/// Optimizes the sampler's own parameters with Adam; the CVAE stays frozen.
/// DLow always trains with its native energy diversity term; div_loss only
/// applies to the auxiliary sampler. History terms are {total, div, acc, kl}.
std::vector<EpochLog> train_sampler(const Dataset& data, CvaeModel& cvae, LatentSampler& sampler, std::uint64_t seed);

}  // namespace divsample
