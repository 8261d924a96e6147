#include "divsample/cvae.hpp"

#include <cmath>
#include <stdexcept>

#include "divsample/dct.hpp"

namespace divsample {

namespace {

constexpr double kScaleFloor = 1e-4;

Matrix concat_time(const PoseSequence& a, const PoseSequence& b) {
  Matrix out(a.rows, a.cols + b.cols);
  for (std::size_t r = 0; r < a.rows; ++r) {
    for (std::size_t t = 0; t < a.cols; ++t) out(r, t) = a(r, t);
    for (std::size_t t = 0; t < b.cols; ++t) out(r, a.cols + t) = b(r, t);
  }
  return out;
}

void check_sequence(const PoseSequence& s, const HyperParams& hp, std::size_t frames, const char* what) {
  if (s.rows != hp.pose_dim() || s.cols != frames) {
    throw ShapeError(std::string(what) + ": expected [" + std::to_string(hp.pose_dim()) + ", " +
                     std::to_string(frames) + "], got [" + std::to_string(s.rows) + ", " + std::to_string(s.cols) +
                     "]");
  }
}

}  // namespace

Matrix observed_dct(const PoseSequence& observed, const HyperParams& hp) {
  check_sequence(observed, hp, hp.history, "observed_dct");
  const auto padded = pad_last_frame(observed, static_cast<long>(hp.horizon));
  return dct_truncate(padded, {hp.seq_len(), hp.n_dct});
}

Matrix full_dct(const PoseSequence& observed, const PoseSequence& future, const HyperParams& hp) {
  check_sequence(observed, hp, hp.history, "full_dct");
  check_sequence(future, hp, hp.horizon, "full_dct");
  return dct_truncate(concat_time(observed, future), {hp.seq_len(), hp.n_dct});
}

Tensor stack(const std::vector<Matrix>& items, const Shape& item_shape) {
  if (items.empty()) throw ShapeError("stack: no items");
  const auto n = shape_numel(item_shape);
  std::vector<double> data;
  data.reserve(items.size() * n);
  for (const auto& m : items) {
    if (m.data.size() != n) throw ShapeError("stack: item size does not match " + shape_str(item_shape));
    data.insert(data.end(), m.data.begin(), m.data.end());
  }
  Shape shape{items.size()};
  shape.insert(shape.end(), item_shape.begin(), item_shape.end());
  return Tensor(shape, std::move(data));
}

Tensor stack_futures(const std::vector<const PoseSequence*>& futures) {
  if (futures.empty()) throw ShapeError("stack_futures: no items");
  const auto n = futures.front()->data.size();
  std::vector<double> data;
  data.reserve(futures.size() * n);
  for (const auto* f : futures) {
    if (f->data.size() != n) throw ShapeError("stack_futures: inconsistent sequence sizes");
    data.insert(data.end(), f->data.begin(), f->data.end());
  }
  return Tensor({futures.size(), n}, std::move(data));
}

std::vector<PoseSequence> unstack_predictions(const Tensor& preds, std::size_t rows, std::size_t frames) {
  const auto n = rows * frames;
  if (preds.numel() % n != 0) throw ShapeError("unstack_predictions: size is not a multiple of one sequence");
  std::vector<PoseSequence> out;
  const auto count = preds.numel() / n;
  for (std::size_t i = 0; i < count; ++i) {
    out.emplace_back(rows, frames,
                     std::vector<double>(preds.data().begin() + static_cast<std::ptrdiff_t>(i * n),
                                         preds.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * n)));
  }
  return out;
}

Tensor gaussian_kl_mean(const Tensor& mean, const Tensor& scale) {
  if (mean.shape() != scale.shape() || mean.rank() != 2) {
    throw ShapeError("gaussian_kl: mean " + shape_str(mean.shape()) + " vs scale " + shape_str(scale.shape()));
  }
  for (double s : scale.data()) {
    if (!(s > 0.0)) throw std::invalid_argument("gaussian_kl: non-positive scale");
  }
  const auto var = ops::square(scale);
  auto terms = ops::sub(ops::add(var, ops::square(mean)), ops::log(var));
  terms = ops::add_scalar(terms, -1.0);
  return ops::scale(ops::sum(terms), 0.5 / static_cast<double>(mean.dim(0)));
}

Tensor reparameterize(const Tensor& mu, const Tensor& sigma, const Tensor& eps) {
  if (mu.shape() != sigma.shape() || mu.shape() != eps.shape()) {
    throw ShapeError("reparameterize: shapes " + shape_str(mu.shape()) + ", " + shape_str(sigma.shape()) + ", " +
                     shape_str(eps.shape()) + " differ");
  }
  for (double s : sigma.data()) {
    if (!(s > 0.0)) throw std::invalid_argument("reparameterize: sigma must be positive");
  }
  return ops::add(mu, ops::mul(sigma, eps));
}

CvaeModel::CvaeModel(const HyperParams& hp, Rng& init) : hp_(hp) {
  hp_.validate();
  const auto cn = hp.coords * hp.n_dct;
  std::vector<std::size_t> enc_widths{2 * cn};
  enc_widths.insert(enc_widths.end(), hp.cvae_layers, hp.features);
  encoder_ = GcnBlock(hp.joints, enc_widths, std::nullopt, init);
  mu_head_ = MlpBlock(hp.joints * hp.features, {{hp.n_z, false, false}}, init);
  sigma_head_ = MlpBlock(hp.joints * hp.features, {{hp.n_z, false, false}}, init);
  std::vector<std::size_t> dec_widths{cn + hp.n_z};
  dec_widths.insert(dec_widths.end(), hp.cvae_layers, hp.features);
  decoder_ = GcnBlock(hp.joints, dec_widths, cn, init);

  const auto basis = dct_basis(hp.n_dct, hp.seq_len());
  std::vector<double> future(hp.n_dct * hp.horizon);
  for (std::size_t k = 0; k < hp.n_dct; ++k) {
    for (std::size_t t = 0; t < hp.horizon; ++t) future[k * hp.horizon + t] = basis(k, hp.history + t);
  }
  idct_future_ = Tensor({hp.n_dct, hp.horizon}, std::move(future));
}

Posterior CvaeModel::encode(const Tensor& x_dct, const Tensor& y_dct, Mode mode) {
  const auto cn = hp_.coords * hp_.n_dct;
  if (x_dct.rank() != 3 || x_dct.shape() != y_dct.shape() || x_dct.dim(1) != hp_.joints || x_dct.dim(2) != cn) {
    throw ShapeError("encode: expected x_dct and y_dct of shape [B, " + std::to_string(hp_.joints) + ", " +
                     std::to_string(cn) + "], got " + shape_str(x_dct.shape()) + " and " + shape_str(y_dct.shape()));
  }
  const auto batch = x_dct.dim(0);
  auto h = encoder_.forward(ops::concat({x_dct, y_dct}, 2), mode);
  h = ops::reshape(h, {batch, hp_.joints * hp_.features});
  Posterior post;
  post.mu = mu_head_.forward(h, mode);
  post.sigma = ops::add_scalar(ops::softplus(sigma_head_.forward(h, mode)), kScaleFloor);
  return post;
}

Tensor CvaeModel::decode_coefficients(const Tensor& x_dct, const Tensor& z, Mode mode) {
  const auto cn = hp_.coords * hp_.n_dct;
  if (x_dct.rank() != 3 || x_dct.dim(1) != hp_.joints || x_dct.dim(2) != cn || z.rank() != 2 ||
      z.dim(0) != x_dct.dim(0) || z.dim(1) != hp_.n_z) {
    throw ShapeError("decode: x_dct " + shape_str(x_dct.shape()) + " and z " + shape_str(z.shape()) +
                     " do not match [N, " + std::to_string(hp_.joints) + ", " + std::to_string(cn) + "], [N, " +
                     std::to_string(hp_.n_z) + "]");
  }
  auto tiled = ops::repeat(z, 1, hp_.joints);
  auto h = decoder_.forward(ops::concat({x_dct, tiled}, 2), mode);
  return ops::add(h, x_dct);
}

Tensor CvaeModel::decode(const Tensor& x_dct, const Tensor& z, Mode mode) {
  const auto n = x_dct.dim(0);
  auto coeffs = decode_coefficients(x_dct, z, mode);
  auto rows = ops::reshape(coeffs, {n * hp_.pose_dim(), hp_.n_dct});
  auto seq = ops::matmul(rows, idct_future_);
  return ops::reshape(seq, {n, hp_.pose_dim() * hp_.horizon});
}

CvaeLoss CvaeModel::loss(const Tensor& x_dct, const Tensor& y_dct, const Tensor& y_future, const Tensor& eps,
                         Mode mode) {
  auto post = encode(x_dct, y_dct, mode);
  auto z = reparameterize(post.mu, post.sigma, eps);
  auto pred = decode(x_dct, z, mode);
  auto kl = gaussian_kl_mean(post.mu, post.sigma);
  auto recon = ops::mean(ops::square(ops::sub(pred, y_future)));
  CvaeLoss out;
  out.kl = kl.item();
  out.reconstruction = recon.item();
  out.total = ops::add(ops::scale(kl, hp_.cvae_kl_weight), recon);
  return out;
}

std::vector<PoseSequence> CvaeModel::random_sample(const PoseSequence& observed, std::size_t k, Rng& rng) {
  if (k < 1) throw std::invalid_argument("random_sample: K must be >= 1");
  NoGradGuard no_grad;
  const auto xd = observed_dct(observed, hp_);
  const auto x = ops::repeat(stack({xd}, {hp_.joints, hp_.coords * hp_.n_dct}), 1, k);
  std::normal_distribution<double> normal;
  std::vector<double> z(k * hp_.n_z);
  for (auto& v : z) v = normal(rng);
  auto preds = decode(ops::reshape(x, {k, hp_.joints, hp_.coords * hp_.n_dct}), Tensor({k, hp_.n_z}, std::move(z)),
                      Mode::kEval);
  return unstack_predictions(preds, hp_.pose_dim(), hp_.horizon);
}

StateRefs CvaeModel::encoder_state() {
  StateRefs refs;
  encoder_.visit(refs, "cvae.encoder.gcn");
  mu_head_.visit(refs, "cvae.encoder.mu");
  sigma_head_.visit(refs, "cvae.encoder.sigma");
  return refs;
}

StateRefs CvaeModel::decoder_state() {
  StateRefs refs;
  decoder_.visit(refs, "cvae.decoder.gcn");
  return refs;
}

StateRefs CvaeModel::state() {
  auto refs = encoder_state();
  auto dec = decoder_state();
  refs.params.insert(refs.params.end(), dec.params.begin(), dec.params.end());
  refs.buffers.insert(refs.buffers.end(), dec.buffers.begin(), dec.buffers.end());
  return refs;
}

Checkpoint CvaeModel::to_checkpoint() {
  Checkpoint ckpt;
  ckpt.meta["kind"] = "cvae";
  ckpt.meta["hyper"] = hp_.to_json();
  state().append_to(ckpt);
  return ckpt;
}

CvaeModel CvaeModel::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.meta.value("kind", "") != "cvae") throw std::runtime_error("checkpoint is not a CVAE checkpoint");
  Rng scratch(0);
  CvaeModel model(HyperParams::from_json(ckpt.meta.at("hyper")), scratch);
  model.state().load_from(ckpt);
  return model;
}

CvaeTraining train_cvae(const Dataset& data, const HyperParams& hp, std::uint64_t seed) {
  if (data.train.empty()) throw std::invalid_argument("train_cvae: empty dataset");
  tune_allocator();
  hp.validate();
  Rng init = make_stream(seed, "init");
  Rng rng = make_stream(seed, "train");
  CvaeTraining out{CvaeModel(hp, init), {}};
  auto& model = out.model;

  const Shape item{hp.joints, hp.coords * hp.n_dct};
  std::vector<Matrix> x_all, y_all;
  for (const auto& s : data.train) {
    x_all.push_back(observed_dct(s.observed, hp));
    y_all.push_back(full_dct(s.observed, s.future, hp));
  }

  auto params = model.state().tensors();
  AdamState adam;
  std::normal_distribution<double> normal;
  const bool replace = hp.samples_per_epoch > data.train.size();
  for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
    adam.lr = hp.lr.at(epoch);
    const auto idx = epoch_subset(data.train.size(), static_cast<long>(hp.samples_per_epoch), rng, replace);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start + hp.batch_size <= idx.size(); start += hp.batch_size) {
      std::vector<Matrix> xb, yb;
      std::vector<const PoseSequence*> fb;
      for (std::size_t i = start; i < start + hp.batch_size; ++i) {
        xb.push_back(x_all[idx[i]]);
        yb.push_back(y_all[idx[i]]);
        fb.push_back(&data.train[idx[i]].future);
      }
      std::vector<double> eps(hp.batch_size * hp.n_z);
      for (auto& v : eps) v = normal(rng);
      auto loss = model.loss(stack(xb, item), stack(yb, item), stack_futures(fb),
                             Tensor({hp.batch_size, hp.n_z}, std::move(eps)), Mode::kTrain);
      backward(loss.total);
      adam_update(params, adam);
      total += loss.total.item();
      ++batches;
    }
    out.history.push_back({epoch, batches ? total / static_cast<double>(batches) : 0.0, adam.lr, {}});
  }
  return out;
}

}  // namespace divsample
