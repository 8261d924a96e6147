#pragma once

#include <cstddef>
#include <string>

#include <nlohmann/json.hpp>

#include "divsample/adam.hpp"

namespace divsample {

enum class CoefficientKind { kGumbel, kUniform, kGaussian };
enum class DiversityLoss { kHinge, kEnergy };

std::string to_string(CoefficientKind kind);
std::string to_string(DiversityLoss kind);
CoefficientKind parse_coefficient_kind(const std::string& s);
DiversityLoss parse_diversity_loss(const std::string& s);

/// Every model, loss and optimisation constant. The named presets carry the
/// published per-dataset settings; `desk()` is the small configuration that
/// trains on the synthetic dataset in minutes on one core.
struct HyperParams {
  // sequence geometry
  std::size_t joints = 17;
  std::size_t coords = 3;
  std::size_t history = 25;
  std::size_t horizon = 100;
  std::size_t n_dct = 10;

  // networks
  std::size_t features = 256;    // F, GCN hidden width
  std::size_t cvae_layers = 9;   // GCL-BN-Tanh layers in encoder and decoder
  std::size_t beta_layers = 5;   // GCL-BN-Tanh layers in the base-matrix network
  std::size_t bases = 40;        // M
  std::size_t n_b = 128;
  std::size_t n_h = 64;
  std::size_t n_z = 64;
  std::size_t k_train = 50;      // K used while training the sampler

  // coefficient sampling
  CoefficientKind coefficient = CoefficientKind::kGumbel;
  double pi = 0.0;  // <= 0 means 1/M
  double tau = 1.0;
  bool bypass_gamma = false;

  // losses
  DiversityLoss div_loss = DiversityLoss::kHinge;
  double lambda_hdiv = 20.0;
  double lambda_acc = 40.0;
  double lambda_kl = 0.5;
  double eta = 25.0;
  double sigma_div = 100.0;
  double cvae_kl_weight = 1.0;

  // optimisation
  int epochs = 500;
  int sampler_epochs = 0;  // <= 0: same as epochs
  std::size_t samples_per_epoch = 5000;
  std::size_t batch_size = 16;
  LrSchedule lr;

  static HyperParams human36m();
  static HyperParams humaneva();
  static HyperParams desk();

  double effective_pi() const { return pi > 0.0 ? pi : 1.0 / static_cast<double>(bases); }
  std::size_t seq_len() const { return history + horizon; }
  std::size_t pose_dim() const { return joints * coords; }
  int effective_sampler_epochs() const { return sampler_epochs > 0 ? sampler_epochs : epochs; }
  void validate() const;

  nlohmann::json to_json() const;
  static HyperParams from_json(const nlohmann::json& j);
};

}  // namespace divsample
