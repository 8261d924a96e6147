#include "divsample/diverse_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace divsample {

namespace {

constexpr double kScaleFloor = 1e-4;

void softmax_rows(Matrix& w) {
  for (std::size_t i = 0; i < w.rows; ++i) {
    double mx = w(i, 0);
    for (std::size_t j = 1; j < w.cols; ++j) mx = std::max(mx, w(i, j));
    double total = 0.0;
    for (std::size_t j = 0; j < w.cols; ++j) {
      w(i, j) = std::exp(w(i, j) - mx);
      total += w(i, j);
    }
    for (std::size_t j = 0; j < w.cols; ++j) w(i, j) /= total;
  }
}

void check_km(std::size_t k, std::size_t m) {
  if (k < 1 || m < 1) throw std::invalid_argument("coefficients: K and M must be >= 1");
}

std::vector<std::size_t> trunk_widths(const HyperParams& hp) {
  std::vector<std::size_t> w{hp.coords * hp.n_dct};
  w.insert(w.end(), hp.beta_layers, hp.features);
  return w;
}

void check_x_dct(const Tensor& x, const HyperParams& hp, const char* what) {
  if (x.rank() != 3 || x.dim(1) != hp.joints || x.dim(2) != hp.coords * hp.n_dct) {
    throw ShapeError(std::string(what) + ": expected [B, " + std::to_string(hp.joints) + ", " +
                     std::to_string(hp.coords * hp.n_dct) + "], got " + shape_str(x.shape()));
  }
}

GaussianBank positive_bank(Tensor means, const Tensor& raw_scale) {
  return {std::move(means), ops::add_scalar(ops::softplus(raw_scale), kScaleFloor)};
}

}  // namespace

double gumbel_transform(double u) {
  if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("gumbel_transform: u must lie in (0, 1)");
  return -std::log(-std::log(u));
}

Matrix gumbel_coefficients(std::size_t k, std::size_t m, double pi, double tau, Rng& rng) {
  check_km(k, m);
  if (!(tau > 0.0)) throw std::invalid_argument("gumbel_coefficients: tau must be > 0");
  Matrix w(k, m);
  for (auto& v : w.data) v = (pi + gumbel_transform(open_uniform(rng))) / tau;
  softmax_rows(w);
  return w;
}

Matrix alt_coefficients(CoefficientKind kind, std::size_t k, std::size_t m, Rng& rng) {
  check_km(k, m);
  Matrix w(k, m);
  if (kind == CoefficientKind::kUniform) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (auto& v : w.data) v = uni(rng);
  } else if (kind == CoefficientKind::kGaussian) {
    std::normal_distribution<double> normal;
    for (auto& v : w.data) v = normal(rng);
  } else {
    throw std::invalid_argument("alt_coefficients: kind must be uniform or gaussian");
  }
  softmax_rows(w);
  return w;
}

Matrix sample_coefficients(const HyperParams& hp, std::size_t k, Rng& rng) {
  if (hp.coefficient == CoefficientKind::kGumbel) {
    return gumbel_coefficients(k, hp.bases, hp.effective_pi(), hp.tau, rng);
  }
  return alt_coefficients(hp.coefficient, k, hp.bases, rng);
}

Tensor points_from_space(const Tensor& w, const Tensor& b) {
  if (w.rank() == 2 && b.rank() == 2) {
    if (w.dim(1) != b.dim(0)) {
      throw ShapeError("points_from_space: W " + shape_str(w.shape()) + " vs B " + shape_str(b.shape()));
    }
    return ops::matmul(w, b);
  }
  if (w.rank() == 3 && b.rank() == 3 && w.dim(0) == b.dim(0) && w.dim(2) == b.dim(1)) return ops::bmm(w, b);
  throw ShapeError("points_from_space: W " + shape_str(w.shape()) + " vs B " + shape_str(b.shape()));
}

Tensor latent_codes(const GaussianBank& bank, const Tensor& eps, std::size_t k) {
  if (bank.means.shape() != bank.scales.shape() || bank.means.rank() != 2 || eps.rank() != 2 ||
      eps.dim(1) != bank.means.dim(1) || eps.dim(0) * k != bank.means.dim(0)) {
    throw ShapeError("latent_codes: bank " + shape_str(bank.means.shape()) + " with eps " + shape_str(eps.shape()) +
                     " and K=" + std::to_string(k));
  }
  const auto n_z = eps.dim(1);
  auto shared = ops::reshape(ops::repeat(eps, 1, k), {eps.dim(0) * k, n_z});
  return ops::add(ops::mul(bank.scales, shared), bank.means);
}

std::string to_string(SamplerMethod m) { return m == SamplerMethod::kAuxiliary ? "auxiliary" : "dlow"; }

std::vector<PoseSequence> LatentSampler::sample(const PoseSequence& observed, std::size_t k, CvaeModel& cvae,
                                                Rng& rng) {
  if (k < 1) throw std::invalid_argument("sample: K must be >= 1");
  const auto& chp = cvae.hyper();
  if (chp.n_z != hp_.n_z || chp.joints != hp_.joints || chp.horizon != hp_.horizon) {
    throw std::invalid_argument("sample: sampler and CVAE disagree on n_z, J or T");
  }
  NoGradGuard no_grad;
  const Shape item{hp_.joints, hp_.coords * hp_.n_dct};
  const auto x = stack({observed_dct(observed, hp_)}, item);
  auto b = bank(x, k, rng, Mode::kEval);
  std::normal_distribution<double> normal;
  std::vector<double> eps(hp_.n_z);
  for (auto& v : eps) v = normal(rng);
  auto z = latent_codes(b, Tensor({1, hp_.n_z}, std::move(eps)), k);
  auto xr = ops::reshape(ops::repeat(x, 1, k), {k, item[0], item[1]});
  return unstack_predictions(cvae.decode(xr, z, Mode::kEval), hp_.pose_dim(), hp_.horizon);
}

AuxiliarySampler::AuxiliarySampler(const HyperParams& hp, Rng& init) {
  hp.validate();
  hp_ = hp;
  beta_gcn_ = GcnBlock(hp.joints, trunk_widths(hp), std::nullopt, init);
  beta_mlp_ = MlpBlock(hp.joints * hp.features, {{hp.bases * hp.n_b, true, true}}, init);
  if (!hp.bypass_gamma) {
    const std::vector<LinearSpec> head{{hp.n_h, true, true}, {hp.n_z, false, false}};
    gamma_mean_ = MlpBlock(hp.n_b, head, init);
    gamma_scale_ = MlpBlock(hp.n_b, head, init);
  }
}

Tensor AuxiliarySampler::generate_base(const Tensor& x_dct, Mode mode) {
  check_x_dct(x_dct, hp_, "generate_base");
  const auto batch = x_dct.dim(0);
  auto h = ops::reshape(beta_gcn_.forward(x_dct, mode), {batch, hp_.joints * hp_.features});
  return ops::reshape(beta_mlp_.forward(h, mode), {batch, hp_.bases, hp_.n_b});
}

Tensor AuxiliarySampler::generate_base(const PoseSequence& observed) {
  NoGradGuard no_grad;
  auto b = generate_base(stack({observed_dct(observed, hp_)}, {hp_.joints, hp_.coords * hp_.n_dct}), Mode::kEval);
  return ops::reshape(b, {hp_.bases, hp_.n_b});
}

GaussianBank AuxiliarySampler::bank_from_points(const Tensor& points, Mode mode) {
  if (points.rank() != 2 || points.dim(1) != hp_.n_b) {
    throw ShapeError("bank_from_points: expected [N, " + std::to_string(hp_.n_b) + "], got " +
                     shape_str(points.shape()));
  }
  if (hp_.bypass_gamma) {
    return positive_bank(ops::slice(points, 1, 0, hp_.n_z), ops::slice(points, 1, hp_.n_z, 2 * hp_.n_z));
  }
  return positive_bank(gamma_mean_.forward(points, mode), gamma_scale_.forward(points, mode));
}

GaussianBank AuxiliarySampler::bank(const Tensor& x_dct, std::size_t k, Rng& rng, Mode mode) {
  if (k < 1) throw std::invalid_argument("bank: K must be >= 1");
  const auto batch = x_dct.dim(0);
  auto base = generate_base(x_dct, mode);
  std::vector<double> w;
  w.reserve(batch * k * hp_.bases);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto rows = sample_coefficients(hp_, k, rng);
    w.insert(w.end(), rows.data.begin(), rows.data.end());
  }
  auto points = points_from_space(Tensor({batch, k, hp_.bases}, std::move(w)), base);
  return bank_from_points(ops::reshape(points, {batch * k, hp_.n_b}), mode);
}

StateRefs AuxiliarySampler::state() {
  StateRefs refs;
  beta_gcn_.visit(refs, "beta.gcn");
  beta_mlp_.visit(refs, "beta.mlp");
  if (!hp_.bypass_gamma) {
    gamma_mean_.visit(refs, "gamma.mean");
    gamma_scale_.visit(refs, "gamma.scale");
  }
  return refs;
}

Checkpoint AuxiliarySampler::to_checkpoint() {
  Checkpoint ckpt;
  ckpt.meta["kind"] = "sampler";
  ckpt.meta["method"] = to_string(method());
  ckpt.meta["coefficient"] = to_string(hp_.coefficient);
  ckpt.meta["bypass_gamma"] = hp_.bypass_gamma;
  ckpt.meta["hyper"] = hp_.to_json();
  state().append_to(ckpt);
  return ckpt;
}

DlowSampler::DlowSampler(const HyperParams& hp, std::size_t k, Rng& init) : k_(k) {
  hp.validate();
  if (k < 1) throw std::invalid_argument("DlowSampler: K must be >= 1");
  hp_ = hp;
  trunk_ = GcnBlock(hp.joints, trunk_widths(hp), std::nullopt, init);
  mean_head_ = MlpBlock(hp.joints * hp.features, {{k * hp.n_z, false, false}}, init);
  scale_head_ = MlpBlock(hp.joints * hp.features, {{k * hp.n_z, false, false}}, init);
}

GaussianBank DlowSampler::bank(const Tensor& x_dct, std::size_t k, Rng&, Mode mode) {
  if (k != k_) {
    throw std::invalid_argument("dlow: model was built for K=" + std::to_string(k_) + ", requested K=" +
                                std::to_string(k));
  }
  check_x_dct(x_dct, hp_, "dlow_bank");
  const auto batch = x_dct.dim(0);
  auto h = ops::reshape(trunk_.forward(x_dct, mode), {batch, hp_.joints * hp_.features});
  auto means = ops::reshape(mean_head_.forward(h, mode), {batch * k_, hp_.n_z});
  auto raw = ops::reshape(scale_head_.forward(h, mode), {batch * k_, hp_.n_z});
  return positive_bank(means, raw);
}

StateRefs DlowSampler::state() {
  StateRefs refs;
  trunk_.visit(refs, "dlow.gcn");
  mean_head_.visit(refs, "dlow.mean");
  scale_head_.visit(refs, "dlow.scale");
  return refs;
}

Checkpoint DlowSampler::to_checkpoint() {
  Checkpoint ckpt;
  ckpt.meta["kind"] = "sampler";
  ckpt.meta["method"] = to_string(method());
  ckpt.meta["k"] = k_;
  ckpt.meta["hyper"] = hp_.to_json();
  state().append_to(ckpt);
  return ckpt;
}

std::unique_ptr<LatentSampler> load_sampler(const Checkpoint& ckpt) {
  if (ckpt.meta.value("kind", "") != "sampler") throw std::runtime_error("checkpoint is not a sampler checkpoint");
  const auto hp = HyperParams::from_json(ckpt.meta.at("hyper"));
  Rng scratch(0);
  std::unique_ptr<LatentSampler> model;
  const std::string method = ckpt.meta.at("method");
  if (method == "auxiliary") {
    model = std::make_unique<AuxiliarySampler>(hp, scratch);
  } else if (method == "dlow") {
    model = std::make_unique<DlowSampler>(hp, ckpt.meta.at("k").get<std::size_t>(), scratch);
  } else {
    throw std::runtime_error("unknown sampler method '" + method + "' in checkpoint");
  }
  model->state().load_from(ckpt);
  return model;
}

}  // namespace divsample
