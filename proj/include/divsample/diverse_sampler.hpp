#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "divsample/cvae.hpp"

namespace divsample {

/// g = -log(-log u) for u in (0, 1).
double gumbel_transform(double u);

/// [K, M] row-stochastic matrix: softmax over (pi + g) / tau per row.
Matrix gumbel_coefficients(std::size_t k, std::size_t m, double pi, double tau, Rng& rng);
/// Softmax over i.i.d. U(0,1) or N(0,1) logits. `kind` may not be gumbel.
Matrix alt_coefficients(CoefficientKind kind, std::size_t k, std::size_t m, Rng& rng);
/// Dispatches on the kind using the hyperparameters' pi and tau.
Matrix sample_coefficients(const HyperParams& hp, std::size_t k, Rng& rng);

/// P = W B. Accepts W [K, M], B [M, n_b] or the batched W [N, K, M],
/// B [N, M, n_b].
Tensor points_from_space(const Tensor& w, const Tensor& b);

struct GaussianBank {
  Tensor means;   // [N, n_z]
  Tensor scales;  // [N, n_z], strictly positive
};

/// z_k = scales_k * eps + means_k with one eps [B, n_z] shared by the K rows
/// that belong to the same input. means/scales are [B*K, n_z].
Tensor latent_codes(const GaussianBank& bank, const Tensor& eps, std::size_t k);

enum class SamplerMethod { kAuxiliary, kDlow };
std::string to_string(SamplerMethod m);

/// Common interface of the trainable latent samplers.
class LatentSampler {
 public:
  virtual ~LatentSampler() = default;
  virtual SamplerMethod method() const = 0;
  /// x_dct [B, J, C*n_dct] -> bank with B*K rows, rows of one input
  /// contiguous.
  virtual GaussianBank bank(const Tensor& x_dct, std::size_t k, Rng& rng, Mode mode) = 0;
  virtual StateRefs state() = 0;
  virtual Checkpoint to_checkpoint() = 0;
  const HyperParams& hyper() const { return hp_; }

  /// K futures for one history from one shared eps.
  std::vector<PoseSequence> sample(const PoseSequence& observed, std::size_t k, CvaeModel& cvae, Rng& rng);

 protected:
  HyperParams hp_;
};

/// Auxiliary-space sampler: N_beta produces the base matrix, coefficient
/// rows mix its basis vectors, N_gamma maps the points to Gaussians.
class AuxiliarySampler : public LatentSampler {
 public:
  AuxiliarySampler(const HyperParams& hp, Rng& init);

  SamplerMethod method() const override { return SamplerMethod::kAuxiliary; }
  // x_dct [B, J, C*n_dct] -> B [B, M, n_b]
  Tensor generate_base(const Tensor& x_dct, Mode mode);
  Tensor generate_base(const PoseSequence& observed);
  // P [N, n_b] -> bank with N rows
  GaussianBank bank_from_points(const Tensor& points, Mode mode);
  GaussianBank bank(const Tensor& x_dct, std::size_t k, Rng& rng, Mode mode) override;
  StateRefs state() override;
  Checkpoint to_checkpoint() override;

  GcnBlock& beta_gcn() { return beta_gcn_; }

 private:
  GcnBlock beta_gcn_;
  MlpBlock beta_mlp_;
  MlpBlock gamma_mean_;
  MlpBlock gamma_scale_;
};

/// DLow-style baseline: the same GCN trunk followed by K linear head pairs.
class DlowSampler : public LatentSampler {
 public:
  DlowSampler(const HyperParams& hp, std::size_t k, Rng& init);

  SamplerMethod method() const override { return SamplerMethod::kDlow; }
  std::size_t k() const { return k_; }
  GaussianBank bank(const Tensor& x_dct, std::size_t k, Rng& rng, Mode mode) override;
  StateRefs state() override;
  Checkpoint to_checkpoint() override;

 private:
  std::size_t k_;
  GcnBlock trunk_;
  MlpBlock mean_head_;
  MlpBlock scale_head_;
};

std::unique_ptr<LatentSampler> load_sampler(const Checkpoint& ckpt);

}  // namespace divsample
