#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "divsample/matrix.hpp"
#include "divsample/rng.hpp"

namespace divsample {

/// Skeleton as a tree rooted at joint 0 (parent of joint j > 0 is (j-1)/2).
struct SkeletonSpec {
  std::size_t joints = 0;
  std::size_t coords = 3;
  std::vector<std::size_t> parent;      // parent[0] is unused
  std::vector<double> bone_length;      // length of bone parent[j] -> j
  std::vector<double> rest_azimuth;
  std::vector<double> rest_elevation;

  static SkeletonSpec make(std::size_t joints);
};

struct SyntheticConfig {
  std::size_t joints = 8;
  std::size_t history = 12;
  std::size_t horizon = 24;
  std::size_t n_modes = 5;
  std::size_t n_train = 2000;
  std::size_t n_test = 200;
  double noise_sd = 0.01;   // per-frame joint-angle jitter (radians)
  double v_max = 5.0;       // bound on any joint's per-frame displacement
  double mode0_prob = 0.6;  // remaining modes share the rest uniformly
  std::size_t phase_levels = 0;  // 0: continuous gait phase; n: n discrete phases

  void validate() const;
  std::size_t rows() const { return joints * 3; }
  std::size_t frames() const { return history + horizon; }
  std::vector<double> mode_probabilities() const;
  nlohmann::json to_json() const;
  static SyntheticConfig from_json(const nlohmann::json& j);
};

struct MotionSample {
  PoseSequence observed;  // [J*C, H]
  PoseSequence future;    // [J*C, T]
  int mode_id = 0;
  std::size_t sample_id = 0;
  double phase = 0.0;  // gait phase, the only latent shared by all modes

  bool operator==(const MotionSample&) const = default;
};

struct Dataset {
  SyntheticConfig config;
  std::uint64_t seed = 0;
  std::vector<MotionSample> train;
  std::vector<MotionSample> test;

  std::size_t size() const { return train.size() + test.size(); }
  std::string config_hash() const;
};

/// Full [J*C, H+T] trajectory for a gait phase and branch. `jitter` may be
/// null for the noiseless canonical trajectory.
PoseSequence render_motion(const SyntheticConfig& cfg, double phase, int mode, Rng* jitter);

Dataset generate_dataset(const SyntheticConfig& cfg, std::uint64_t seed);

/// Writes manifest.json, train.f64 and test.f64 into `dir`.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
/// Throws on IO failure, malformed manifest, size mismatch or SHA-256 mismatch.
Dataset load_dataset(const std::filesystem::path& dir);

/// Indices of one epoch's training subset.
std::vector<std::size_t> epoch_subset(std::size_t dataset_size, long n, Rng& rng, bool with_replacement = false);

/// Canonical final-frame pose of every branch for the sample's phase,
/// [n_modes, J*C].
Matrix mode_endpoints(const SyntheticConfig& cfg, double phase);
/// Mode whose canonical endpoint is nearest to the prediction's final frame.
int classify_mode(const SyntheticConfig& cfg, const Matrix& endpoints, const PoseSequence& prediction);
/// Number of distinct modes hit by a set of predictions.
std::size_t mode_coverage(const SyntheticConfig& cfg, double phase, const std::vector<PoseSequence>& predictions);

std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace divsample
