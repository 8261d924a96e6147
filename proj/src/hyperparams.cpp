#include "divsample/hyperparams.hpp"

#include <stdexcept>

namespace divsample {

std::string to_string(CoefficientKind kind) {
  switch (kind) {
    case CoefficientKind::kGumbel: return "gumbel";
    case CoefficientKind::kUniform: return "uniform";
    case CoefficientKind::kGaussian: return "gaussian";
  }
  return "?";
}

std::string to_string(DiversityLoss kind) { return kind == DiversityLoss::kHinge ? "hinge" : "energy"; }

CoefficientKind parse_coefficient_kind(const std::string& s) {
  if (s == "gumbel") return CoefficientKind::kGumbel;
  if (s == "uniform") return CoefficientKind::kUniform;
  if (s == "gaussian") return CoefficientKind::kGaussian;
  throw std::invalid_argument("unknown coefficient kind '" + s + "' (expected gumbel, uniform or gaussian)");
}

DiversityLoss parse_diversity_loss(const std::string& s) {
  if (s == "hinge") return DiversityLoss::kHinge;
  if (s == "energy") return DiversityLoss::kEnergy;
  throw std::invalid_argument("unknown diversity loss '" + s + "' (expected hinge or energy)");
}

HyperParams HyperParams::human36m() { return HyperParams{}; }

HyperParams HyperParams::humaneva() {
  HyperParams h;
  h.joints = 15;
  h.history = 15;
  h.horizon = 60;
  h.lambda_hdiv = 100.0;
  h.lambda_acc = 25.0;
  h.lambda_kl = 0.1;
  h.eta = 20.0;
  h.samples_per_epoch = 2000;
  return h;
}

HyperParams HyperParams::desk() {
  HyperParams h;
  h.joints = 8;
  h.history = 12;
  h.horizon = 24;
  h.features = 32;
  h.cvae_layers = 4;
  h.beta_layers = 3;
  h.n_z = 16;
  h.eta = 60.0;
  h.sigma_div = 400.0;
  h.cvae_kl_weight = 0.1;
  h.epochs = 100;
  h.sampler_epochs = 40;
  h.samples_per_epoch = 512;
  h.lr.flat_until = 8;
  h.lr.decay_end = 40;
  return h;
}

void HyperParams::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("hyperparameters: " + what); };
  if (joints < 1 || coords < 1 || history < 1 || horizon < 1) fail("sequence geometry must be positive");
  if (n_dct < 1 || n_dct > seq_len()) fail("n_dct must lie in [1, history + horizon]");
  if (features < 1 || cvae_layers < 1 || beta_layers < 1) fail("network sizes must be positive");
  if (bases < 1 || n_b < 1 || n_h < 1 || n_z < 1 || k_train < 2) fail("M, n_b, n_h, n_z >= 1 and k_train >= 2");
  if (!(tau > 0.0)) fail("tau must be > 0");
  if (bypass_gamma && n_b < 2 * n_z) fail("bypass_gamma needs n_b >= 2 * n_z");
  if (lambda_hdiv < 0 || lambda_acc < 0 || lambda_kl < 0 || cvae_kl_weight < 0) fail("loss weights must be >= 0");
  if (!(eta > 0.0)) fail("eta must be > 0");
  if (!(sigma_div > 0.0)) fail("sigma_div must be > 0");
  if (epochs < 1 || samples_per_epoch < 1) fail("epochs and samples_per_epoch must be >= 1");
  if (batch_size < 2) fail("batch_size must be >= 2 (batch norm)");
  if (!(lr.base > 0.0 && lr.final_lr > 0.0) || lr.decay_end <= lr.flat_until) fail("invalid learning-rate schedule");
}

nlohmann::json HyperParams::to_json() const {
  return {{"joints", joints},
          {"coords", coords},
          {"history", history},
          {"horizon", horizon},
          {"n_dct", n_dct},
          {"features", features},
          {"cvae_layers", cvae_layers},
          {"beta_layers", beta_layers},
          {"bases", bases},
          {"n_b", n_b},
          {"n_h", n_h},
          {"n_z", n_z},
          {"k_train", k_train},
          {"coefficient", to_string(coefficient)},
          {"pi", pi},
          {"tau", tau},
          {"bypass_gamma", bypass_gamma},
          {"div_loss", to_string(div_loss)},
          {"lambda_hdiv", lambda_hdiv},
          {"lambda_acc", lambda_acc},
          {"lambda_kl", lambda_kl},
          {"eta", eta},
          {"sigma_div", sigma_div},
          {"cvae_kl_weight", cvae_kl_weight},
          {"epochs", epochs},
          {"sampler_epochs", sampler_epochs},
          {"samples_per_epoch", samples_per_epoch},
          {"batch_size", batch_size},
          {"lr", lr.base},
          {"lr_final", lr.final_lr},
          {"lr_flat_epochs", lr.flat_until},
          {"lr_decay_end", lr.decay_end}};
}

HyperParams HyperParams::from_json(const nlohmann::json& j) {
  HyperParams h;
  h.joints = j.at("joints");
  h.coords = j.at("coords");
  h.history = j.at("history");
  h.horizon = j.at("horizon");
  h.n_dct = j.at("n_dct");
  h.features = j.at("features");
  h.cvae_layers = j.at("cvae_layers");
  h.beta_layers = j.at("beta_layers");
  h.bases = j.at("bases");
  h.n_b = j.at("n_b");
  h.n_h = j.at("n_h");
  h.n_z = j.at("n_z");
  h.k_train = j.at("k_train");
  h.coefficient = parse_coefficient_kind(j.at("coefficient"));
  h.pi = j.at("pi");
  h.tau = j.at("tau");
  h.bypass_gamma = j.at("bypass_gamma");
  h.div_loss = parse_diversity_loss(j.at("div_loss"));
  h.lambda_hdiv = j.at("lambda_hdiv");
  h.lambda_acc = j.at("lambda_acc");
  h.lambda_kl = j.at("lambda_kl");
  h.eta = j.at("eta");
  h.sigma_div = j.at("sigma_div");
  h.cvae_kl_weight = j.at("cvae_kl_weight");
  h.epochs = j.at("epochs");
  h.sampler_epochs = j.value("sampler_epochs", 0);
  h.samples_per_epoch = j.at("samples_per_epoch");
  h.batch_size = j.at("batch_size");
  h.lr.base = j.at("lr");
  h.lr.final_lr = j.at("lr_final");
  h.lr.flat_until = j.at("lr_flat_epochs");
  h.lr.decay_end = j.at("lr_decay_end");
  return h;
}

}  // namespace divsample
