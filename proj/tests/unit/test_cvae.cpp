#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "../support/support.hpp"
#include "divsample/cvae.hpp"
#include "divsample/dct.hpp"

using namespace divsample;
using testing::gradcheck;
using testing::micro_hyper;
using testing::random_tensor;

namespace {

SyntheticConfig micro_data(const HyperParams& hp) {
  SyntheticConfig c;
  c.joints = hp.joints;
  c.history = hp.history;
  c.horizon = hp.horizon;
  c.n_train = 40;
  c.n_test = 8;
  return c;
}

Shape dct_shape(const HyperParams& hp) { return {hp.joints, hp.coords * hp.n_dct}; }

}  // namespace

TEST_CASE("encoder and decoder shapes") {
  const auto hp = micro_hyper();
  Rng rng(1);
  CvaeModel m(hp, rng);
  auto x = random_tensor({5, 3, 12}, rng, false);
  auto y = random_tensor({5, 3, 12}, rng, false);
  auto post = m.encode(x, y, Mode::kTrain);
  CHECK(post.mu.shape() == Shape{5, 4});
  for (double s : post.sigma.data()) CHECK(s > 0);
  auto out = m.decode(x, random_tensor({5, 4}, rng, false), Mode::kTrain);
  CHECK(out.shape() == Shape{5, hp.pose_dim() * hp.horizon});
  CHECK_THROWS_AS(m.decode(x, random_tensor({5, 3}, rng, false), Mode::kTrain), ShapeError);
  CHECK_THROWS_AS(m.encode(x, random_tensor({5, 3, 11}, rng, false), Mode::kTrain), ShapeError);
}

TEST_CASE("the latent code changes the prediction") {
  const auto hp = micro_hyper();
  Rng rng(2);
  CvaeModel m(hp, rng);
  auto x = random_tensor({2, 3, 12}, rng, false);
  auto a = m.decode(x, random_tensor({2, 4}, rng, false), Mode::kEval);
  auto b = m.decode(x, random_tensor({2, 4}, rng, false), Mode::kEval);
  double diff = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) diff = std::max(diff, std::abs(a.data()[i] - b.data()[i]));
  CHECK(diff > 1e-6);
}

TEST_CASE("zero-residual decoder reproduces the observed extension") {
  // with every decoder weight zeroed the output is the padded history
  auto hp = micro_hyper();
  Rng rng(3);
  CvaeModel m(hp, rng);
  for (auto& p : m.decoder_state().params) std::fill(p.tensor->mutable_data().begin(), p.tensor->mutable_data().end(), 0.0);
  PoseSequence obs(hp.pose_dim(), hp.history);
  for (auto& v : obs.data) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  const auto x = stack({observed_dct(obs, hp)}, dct_shape(hp));
  auto out = unstack_predictions(m.decode(x, Tensor::zeros({1, 4}), Mode::kEval), hp.pose_dim(), hp.horizon);
  const auto padded = pad_last_frame(obs, static_cast<long>(hp.horizon));
  const auto rec = idct_expand(dct_truncate(padded, {hp.seq_len(), hp.n_dct}), hp.seq_len());
  for (std::size_t r = 0; r < hp.pose_dim(); ++r) {
    for (std::size_t t = 0; t < hp.horizon; ++t) CHECK(out[0](r, t) == doctest::Approx(rec(r, hp.history + t)));
  }
}

TEST_CASE("gaussian KL closed form") {
  auto kl = gaussian_kl_mean(Tensor({1, 1}, {1.0}), Tensor({1, 1}, {1.0}));
  CHECK(kl.item() == doctest::Approx(0.5));
  kl = gaussian_kl_mean(Tensor({2, 1}, {0.0, 0.0}), Tensor({2, 1}, {1.0, 2.0}));
  CHECK(kl.item() == doctest::Approx(0.25 * (4.0 - 1.0 - std::log(4.0))));
  CHECK_THROWS_AS(gaussian_kl_mean(Tensor({1, 1}, {0.0}), Tensor({1, 1}, {0.0})), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_kl_mean(Tensor({1, 2}, {0.0, 0.0}), Tensor({1, 1}, {1.0})), ShapeError);
}

TEST_CASE("reparameterization") {
  auto z = reparameterize(Tensor({2}, {1.0, -1.0}), Tensor({2}, {2.0, 0.5}), Tensor({2}, {0.5, 2.0}));
  CHECK(z.data()[0] == 2.0);
  CHECK(z.data()[1] == 0.0);
  CHECK_THROWS_AS(reparameterize(Tensor({1}, {0.0}), Tensor({1}, {-1.0}), Tensor({1}, {0.0})),
                  std::invalid_argument);
}

TEST_CASE("ELBO gradient matches finite differences") {
  auto hp = micro_hyper();
  hp.cvae_layers = 1;
  Rng rng(4);
  CvaeModel m(hp, rng);
  auto x = random_tensor({3, 3, 12}, rng, false);
  auto y = random_tensor({3, 3, 12}, rng, false);
  auto fut = random_tensor({3, hp.pose_dim() * hp.horizon}, rng, false);
  auto eps = random_tensor({3, 4}, rng, false);
  const double err = gradcheck(m.state().tensors(), [&] { return m.loss(x, y, fut, eps, Mode::kTrain).total; });
  CHECK(err < 1e-4);
}

TEST_CASE("training lowers the loss and checkpoints round trip") {
  const auto hp = micro_hyper();
  auto run_hp = hp;
  run_hp.epochs = 8;
  run_hp.lr.flat_until = 8;
  run_hp.lr.decay_end = 9;
  const auto ds = generate_dataset(micro_data(hp), 1);
  auto tr = train_cvae(ds, run_hp, 11);
  REQUIRE(tr.history.size() == 8);
  CHECK(tr.history.back().mean_loss < tr.history.front().mean_loss);

  auto again = train_cvae(ds, run_hp, 11);
  CHECK(again.history.back().mean_loss == tr.history.back().mean_loss);

  auto back = CvaeModel::from_checkpoint(tr.model.to_checkpoint());
  Rng r1(9), r2(9);
  const auto a = tr.model.random_sample(ds.test[0].observed, 4, r1);
  const auto b = back.random_sample(ds.test[0].observed, 4, r2);
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(a[i] == b[i]);
  CHECK_FALSE(a[0] == a[1]);
  CHECK_THROWS_AS(tr.model.random_sample(ds.test[0].observed, 0, r1), std::invalid_argument);

  Checkpoint wrong = tr.model.to_checkpoint();
  wrong.meta["kind"] = "sampler";
  CHECK_THROWS(CvaeModel::from_checkpoint(wrong));
}
