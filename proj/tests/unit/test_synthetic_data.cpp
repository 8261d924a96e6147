#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "../support/support.hpp"
#include "divsample/synthetic_data.hpp"

using namespace divsample;
namespace fs = std::filesystem;

namespace {

SyntheticConfig small_config() {
  SyntheticConfig c;
  c.n_train = 300;
  c.n_test = 40;
  return c;
}

double joint_distance(const PoseSequence& s, std::size_t a, std::size_t b, std::size_t t) {
  double d2 = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    const double d = s(3 * a + c, t) - s(3 * b + c, t);
    d2 += d * d;
  }
  return std::sqrt(d2);
}

fs::path scratch(const char* name) {
  auto p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("bone lengths are constant along every sequence") {
  const auto cfg = small_config();
  const auto sk = SkeletonSpec::make(cfg.joints);
  Rng rng(1);
  const auto seq = render_motion(cfg, 1.3, 2, &rng);
  for (std::size_t t = 0; t < seq.cols; ++t) {
    for (std::size_t j = 1; j < cfg.joints; ++j) {
      CHECK(joint_distance(seq, j, sk.parent[j], t) == doctest::Approx(sk.bone_length[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("per-frame displacement stays below v_max") {
  const auto ds = generate_dataset(small_config(), 2);
  for (const auto& s : ds.train) {
    for (std::size_t t = 1; t < s.observed.cols; ++t) {
      for (std::size_t j = 0; j < ds.config.joints; ++j) {
        double d2 = 0;
        for (std::size_t c = 0; c < 3; ++c) {
          const double d = s.observed(3 * j + c, t) - s.observed(3 * j + c, t - 1);
          d2 += d * d;
        }
        CHECK(std::sqrt(d2) < ds.config.v_max);
      }
    }
  }
  auto tight = small_config();
  tight.v_max = 0.01;
  CHECK_THROWS_AS(generate_dataset(tight, 2), std::invalid_argument);
}

TEST_CASE("generation is deterministic per seed") {
  const auto a = generate_dataset(small_config(), 9);
  const auto b = generate_dataset(small_config(), 9);
  const auto c = generate_dataset(small_config(), 10);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK_FALSE(a.train == c.train);
  CHECK(a.config_hash() == b.config_hash());
  CHECK(a.config_hash() != c.config_hash());
}

TEST_CASE("mode frequencies match their probabilities") {
  auto cfg = small_config();
  cfg.n_train = 4000;
  cfg.n_test = 1;
  const auto ds = generate_dataset(cfg, 5);
  const auto p = cfg.mode_probabilities();
  std::vector<double> count(cfg.n_modes, 0);
  for (const auto& s : ds.train) count[static_cast<std::size_t>(s.mode_id)] += 1;
  const double n = static_cast<double>(cfg.n_train);
  for (std::size_t m = 0; m < cfg.n_modes; ++m) {
    const double sd = std::sqrt(n * p[m] * (1 - p[m]));
    CHECK(std::abs(count[m] - n * p[m]) <= 3 * sd);
  }
}

TEST_CASE("histories of different modes are indistinguishable at equal phase") {
  auto cfg = small_config();
  cfg.noise_sd = 0.0;
  const auto a = render_motion(cfg, 0.7, 0, nullptr);
  const auto b = render_motion(cfg, 0.7, 3, nullptr);
  for (std::size_t r = 0; r < cfg.rows(); ++r) {
    for (std::size_t t = 0; t < cfg.history; ++t) CHECK(a(r, t) == doctest::Approx(b(r, t)).epsilon(1e-12));
  }
  double gap = 0;
  for (std::size_t r = 0; r < cfg.rows(); ++r) gap = std::max(gap, std::abs(a(r, a.cols - 1) - b(r, b.cols - 1)));
  CHECK(gap > 1.0);
}

TEST_CASE("save and load round trip with manifest counts") {
  const auto dir = scratch("divsample_ds_test");
  const auto ds = generate_dataset(small_config(), 3);
  save_dataset(ds, dir);
  std::ifstream is(dir / "manifest.json");
  const auto m = nlohmann::json::parse(is);
  CHECK(m.at("splits").at("train").at("count") == 300);
  CHECK(m.at("splits").at("test").at("count") == 40);
  const auto back = load_dataset(dir);
  CHECK(back.train == ds.train);
  CHECK(back.test == ds.test);
  CHECK(back.seed == 3);
  fs::remove_all(dir);
}

TEST_CASE("tampered payload is rejected") {
  const auto dir = scratch("divsample_ds_tamper");
  save_dataset(generate_dataset(small_config(), 3), dir);
  {
    std::fstream f(dir / "test.f64", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(100);
    const char junk = 0x5a;
    f.write(&junk, 1);
  }
  CHECK_THROWS_AS(load_dataset(dir), std::runtime_error);
  fs::remove_all(dir);
  CHECK_THROWS_AS(load_dataset(dir), std::runtime_error);
}

TEST_CASE("epoch subsets") {
  Rng rng(4);
  const auto a = epoch_subset(100, 30, rng);
  CHECK(a.size() == 30);
  CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 30);
  const auto b = epoch_subset(10, 25, rng, true);
  CHECK(b.size() == 25);
  for (auto i : b) CHECK(i < 10);
  CHECK_THROWS_AS(epoch_subset(10, 11, rng), std::invalid_argument);
  CHECK_THROWS_AS(epoch_subset(10, 0, rng), std::invalid_argument);
}

TEST_CASE("configuration validation") {
  auto c = small_config();
  c.n_modes = 1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.mode0_prob = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  CHECK(SyntheticConfig::from_json(c.to_json()).to_json() == c.to_json());
}

TEST_CASE("mode classifier recovers the generating branch") {
  auto cfg = small_config();
  const auto ds = generate_dataset(cfg, 6);
  int correct = 0;
  for (const auto& s : ds.test) {
    const auto ends = mode_endpoints(cfg, s.phase);
    correct += classify_mode(cfg, ends, s.future) == s.mode_id;
  }
  CHECK(correct == static_cast<int>(ds.test.size()));
  std::vector<PoseSequence> all;
  for (int m = 0; m < static_cast<int>(cfg.n_modes); ++m) all.push_back(render_motion(cfg, 0.2, m, nullptr));
  CHECK(mode_coverage(cfg, 0.2, all) == cfg.n_modes);
}

TEST_CASE("sha256 known answer") {
  CHECK(sha256_hex("abc", 3) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
