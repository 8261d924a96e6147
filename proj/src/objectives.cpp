#include "divsample/objectives.hpp"

#include <stdexcept>

namespace divsample {

namespace {

void check_preds(const Tensor& preds, std::size_t min_k, const char* what) {
  if (preds.rank() != 3) throw ShapeError(std::string(what) + ": expected [B, K, D], got " + shape_str(preds.shape()));
  if (preds.dim(1) < min_k) {
    throw std::invalid_argument(std::string(what) + ": needs K >= " + std::to_string(min_k));
  }
}

Tensor pack(const std::vector<PoseSequence>& preds) {
  if (preds.empty()) throw std::invalid_argument("no predictions");
  const auto d = preds.front().data.size();
  std::vector<double> data;
  data.reserve(preds.size() * d);
  for (const auto& p : preds) {
    if (p.rows != preds.front().rows || p.cols != preds.front().cols) {
      throw ShapeError("predictions have inconsistent shapes");
    }
    data.insert(data.end(), p.data.begin(), p.data.end());
  }
  return Tensor({1, preds.size(), d}, std::move(data));
}

// Mean over the K(K-1) off-diagonal entries of per-pair values [B, K, K]
// whose diagonal holds the known constant `diag`.
Tensor off_diagonal_mean(const Tensor& pair_values, double diag) {
  const double b = static_cast<double>(pair_values.dim(0));
  const double k = static_cast<double>(pair_values.dim(1));
  auto total = ops::add_scalar(ops::sum(pair_values), -b * k * diag);
  return ops::scale(total, 1.0 / (b * k * (k - 1.0)));
}

}  // namespace

LossWeights LossWeights::from(const HyperParams& hp) {
  return {hp.lambda_hdiv, hp.lambda_acc, hp.lambda_kl, hp.eta, hp.sigma_div, hp.div_loss};
}

void LossWeights::validate() const {
  if (lambda_div < 0 || lambda_acc < 0 || lambda_kl < 0) throw std::invalid_argument("loss weights must be >= 0");
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be > 0");
  if (!(sigma_div > 0.0)) throw std::invalid_argument("sigma_div must be > 0");
}

Tensor hinge_diversity(const Tensor& preds, double eta) {
  check_preds(preds, 2, "hinge_diversity");
  auto d = ops::pairwise_distances(preds);
  return off_diagonal_mean(ops::relu(ops::add_scalar(ops::scale(d, -1.0), eta)), eta);
}

Tensor energy_diversity(const Tensor& preds, double sigma_div) {
  check_preds(preds, 2, "energy_diversity");
  if (!(sigma_div > 0.0)) throw std::invalid_argument("energy_diversity: sigma must be > 0");
  auto d = ops::pairwise_distances(preds);
  return off_diagonal_mean(ops::exp(ops::scale(ops::square(d), -1.0 / sigma_div)), 1.0);
}

Tensor accuracy_loss(const Tensor& preds, const Tensor& gt) {
  check_preds(preds, 1, "accuracy_loss");
  return ops::mean(ops::min_last(ops::distances_to(preds, gt)));
}

Tensor kl_regularizer(const GaussianBank& bank) { return gaussian_kl_mean(bank.means, bank.scales); }

double hinge_diversity(const std::vector<PoseSequence>& preds, double eta) {
  return hinge_diversity(pack(preds), eta).item();
}

double energy_diversity(const std::vector<PoseSequence>& preds, double sigma_div) {
  return energy_diversity(pack(preds), sigma_div).item();
}

double accuracy_loss(const std::vector<PoseSequence>& preds, const PoseSequence& gt) {
  auto p = pack(preds);
  if (gt.rows != preds.front().rows || gt.cols != preds.front().cols) {
    throw ShapeError("accuracy_loss: ground truth shape differs from predictions");
  }
  return accuracy_loss(p, Tensor({1, gt.data.size()}, gt.data)).item();
}

LossBreakdown total_loss(const Tensor& preds, const Tensor& gt, const GaussianBank& bank, const LossWeights& w) {
  w.validate();
  auto div = w.div_loss == DiversityLoss::kHinge ? hinge_diversity(preds, w.eta) : energy_diversity(preds, w.sigma_div);
  auto acc = accuracy_loss(preds, gt);
  auto kl = kl_regularizer(bank);
  LossBreakdown out;
  out.diversity = div.item();
  out.accuracy = acc.item();
  out.kl = kl.item();
  out.total = ops::add(ops::add(ops::scale(div, w.lambda_div), ops::scale(acc, w.lambda_acc)),
                       ops::scale(kl, w.lambda_kl));
  return out;
}

LossBreakdown sampler_batch_loss(LatentSampler& sampler, CvaeModel& cvae, const Tensor& x_dct, const Tensor& gt,
                                 const Tensor& eps, std::size_t k, Rng& rng, const LossWeights& w) {
  const auto batch = x_dct.dim(0);
  auto bank = sampler.bank(x_dct, k, rng, Mode::kTrain);
  auto z = latent_codes(bank, eps, k);
  auto xr = ops::reshape(ops::repeat(x_dct, 1, k), {batch * k, x_dct.dim(1), x_dct.dim(2)});
  auto preds = cvae.decode(xr, z, Mode::kEval);
  preds = ops::reshape(preds, {batch, k, gt.dim(1)});
  return total_loss(preds, gt, bank, w);
}

std::vector<EpochLog> train_sampler(const Dataset& data, CvaeModel& cvae, LatentSampler& sampler, std::uint64_t seed) {
  const auto& hp = sampler.hyper();
  const auto& chp = cvae.hyper();
  if (chp.n_z != hp.n_z || chp.joints != hp.joints || chp.horizon != hp.horizon || chp.history != hp.history ||
      chp.n_dct != hp.n_dct) {
    throw std::invalid_argument("train_sampler: sampler and CVAE configurations disagree");
  }
  if (data.train.empty()) throw std::invalid_argument("train_sampler: empty dataset");
  auto weights = LossWeights::from(hp);
  if (sampler.method() == SamplerMethod::kDlow) weights.div_loss = DiversityLoss::kEnergy;
  weights.validate();

  tune_allocator();
  cvae.state().set_requires_grad(false);
  Rng rng = make_stream(seed, "sampler-train");
  const Shape item{hp.joints, hp.coords * hp.n_dct};
  std::vector<Matrix> x_all;
  for (const auto& s : data.train) x_all.push_back(observed_dct(s.observed, hp));

  const std::size_t k = sampler.method() == SamplerMethod::kDlow
                            ? static_cast<const DlowSampler&>(sampler).k()
                            : hp.k_train;
  auto params = sampler.state().tensors();
  AdamState adam;
  std::normal_distribution<double> normal;
  const bool replace = hp.samples_per_epoch > data.train.size();
  std::vector<EpochLog> history;
  for (int epoch = 1; epoch <= hp.effective_sampler_epochs(); ++epoch) {
    adam.lr = hp.lr.at(epoch);
    const auto idx = epoch_subset(data.train.size(), static_cast<long>(hp.samples_per_epoch), rng, replace);
    std::vector<double> sums(4, 0.0);
    std::size_t batches = 0;
    for (std::size_t start = 0; start + hp.batch_size <= idx.size(); start += hp.batch_size) {
      std::vector<Matrix> xb;
      std::vector<const PoseSequence*> fb;
      for (std::size_t i = start; i < start + hp.batch_size; ++i) {
        xb.push_back(x_all[idx[i]]);
        fb.push_back(&data.train[idx[i]].future);
      }
      std::vector<double> eps(hp.batch_size * hp.n_z);
      for (auto& v : eps) v = normal(rng);
      auto loss = sampler_batch_loss(sampler, cvae, stack(xb, item), stack_futures(fb),
                                     Tensor({hp.batch_size, hp.n_z}, std::move(eps)), k, rng, weights);
      backward(loss.total);
      adam_update(params, adam);
      sums[0] += loss.total.item();
      sums[1] += loss.diversity;
      sums[2] += loss.accuracy;
      sums[3] += loss.kl;
      ++batches;
    }
    for (auto& s : sums) s /= static_cast<double>(std::max<std::size_t>(batches, 1));
    history.push_back({epoch, sums[0], adam.lr, sums});
  }
  return history;
}

}  // namespace divsample
