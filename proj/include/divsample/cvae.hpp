#pragma once

#include <cstddef>
#include <vector>

#include "divsample/checkpoint.hpp"
#include "divsample/graph_nets.hpp"
#include "divsample/hyperparams.hpp"
#include "divsample/matrix.hpp"
#include "divsample/synthetic_data.hpp"

namespace divsample {

/// Observed history padded with its last frame to H+T frames, DCT-truncated:
/// [J*C, n_dct].
Matrix observed_dct(const PoseSequence& observed, const HyperParams& hp);
/// DCT of the true full sequence (history followed by future): [J*C, n_dct].
Matrix full_dct(const PoseSequence& observed, const PoseSequence& future, const HyperParams& hp);

/// Stacks equally-sized matrices into a [N, J, C*n_dct] style tensor of the
/// given trailing shape (no grad).
Tensor stack(const std::vector<Matrix>& items, const Shape& item_shape);
/// Flattened futures [N, J*C*T].
Tensor stack_futures(const std::vector<const PoseSequence*>& futures);
/// Splits predictions [N, J*C*T] back into pose sequences.
std::vector<PoseSequence> unstack_predictions(const Tensor& preds, std::size_t rows, std::size_t frames);

/// Mean over rows of the closed-form KL(N(mean, diag(scale^2)) || N(0, I)).
Tensor gaussian_kl_mean(const Tensor& mean, const Tensor& scale);

/// z = mu + sigma * eps, elementwise. Rejects non-positive sigma.
Tensor reparameterize(const Tensor& mu, const Tensor& sigma, const Tensor& eps);

struct Posterior {
  Tensor mu;     // [B, n_z]
  Tensor sigma;  // [B, n_z], softplus + 1e-4
};

struct CvaeLoss {
  Tensor total;
  double kl = 0.0;
  double reconstruction = 0.0;
};

class CvaeModel {
 public:
  CvaeModel() = default;
  CvaeModel(const HyperParams& hp, Rng& init);

  const HyperParams& hyper() const { return hp_; }

  // x_dct, y_dct: [B, J, C*n_dct]
  Posterior encode(const Tensor& x_dct, const Tensor& y_dct, Mode mode);
  // x_dct [N, J, C*n_dct], z [N, n_z] -> future predictions [N, J*C*T]
  Tensor decode(const Tensor& x_dct, const Tensor& z, Mode mode);
  // Decoder output in frequency space before the inverse DCT,
  // [N, J, C*n_dct], residual included.
  Tensor decode_coefficients(const Tensor& x_dct, const Tensor& z, Mode mode);

  CvaeLoss loss(const Tensor& x_dct, const Tensor& y_dct, const Tensor& y_future, const Tensor& eps, Mode mode);

  /// K futures from z ~ N(0, I), all decoded against the same history.
  std::vector<PoseSequence> random_sample(const PoseSequence& observed, std::size_t k, Rng& rng);

  StateRefs state();
  StateRefs encoder_state();
  StateRefs decoder_state();
  GcnBlock& encoder() { return encoder_; }
  GcnBlock& decoder() { return decoder_; }

  Checkpoint to_checkpoint();
  static CvaeModel from_checkpoint(const Checkpoint& ckpt);

 private:
  HyperParams hp_;
  GcnBlock encoder_;
  MlpBlock mu_head_;
  MlpBlock sigma_head_;
  GcnBlock decoder_;
  Tensor idct_future_;  // [n_dct, T], inverse DCT restricted to the future frames
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
  // Optional per-term means (sampler training); empty for the CVAE.
  std::vector<double> terms;
};

struct CvaeTraining {
  CvaeModel model;
  std::vector<EpochLog> history;
};

/// Two-term ELBO training with Adam on random per-epoch subsets.
CvaeTraining train_cvae(const Dataset& data, const HyperParams& hp, std::uint64_t seed);

}  // namespace divsample
