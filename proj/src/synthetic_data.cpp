#include "divsample/synthetic_data.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "divsample/checkpoint.hpp"

namespace divsample {

namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kSwing = 0.3;            // gait swing amplitude (rad)
constexpr double kGaitPeriod = 16.0;      // frames
constexpr double kRootSpeed = 0.3;        // units per frame
constexpr double kTurnAngle = 0.9;        // heading change of a turn branch (rad)
constexpr double kRaiseAngle = 1.1;       // elevation change of a raise branch (rad)

struct Branch {
  double heading = 0.0;  // final heading offset
  int raise_group = 0;   // 0: none, 1/2: subtree of joint 1/2
  double raise = 0.0;
};

Branch branch_for(int mode) {
  Branch b;
  if (mode == 0) return b;
  const int kind = (mode - 1) % 4;
  const double level = 1.0 + static_cast<double>((mode - 1) / 4);
  switch (kind) {
    case 0: b.heading = kTurnAngle * level; break;
    case 1: b.heading = -kTurnAngle * level; break;
    case 2: b.raise_group = 1; b.raise = kRaiseAngle * level; break;
    default: b.raise_group = 2; b.raise = kRaiseAngle * level; break;
  }
  return b;
}

bool in_subtree(const SkeletonSpec& sk, std::size_t j, std::size_t root) {
  while (j != 0) {
    if (j == root) return true;
    j = sk.parent[j];
  }
  return root == 0;
}

double smoothstep(double r) {
  r = std::clamp(r, 0.0, 1.0);
  return r * r * (3.0 - 2.0 * r);
}

std::string hex(const unsigned char* bytes, unsigned len) {
  std::ostringstream os;
  for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(bytes[i]);
  return os.str();
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256: init failed");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t size) {
    if (EVP_DigestUpdate(ctx_, data, size) != 1) throw std::runtime_error("sha256: update failed");
  }
  std::string final_hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    if (EVP_DigestFinal_ex(ctx_, md, &len) != 1) throw std::runtime_error("sha256: final failed");
    return hex(md, len);
  }

 private:
  EVP_MD_CTX* ctx_;
};

std::vector<double> record_values(const MotionSample& s) {
  const auto rows = s.observed.rows, h = s.observed.cols, t = s.future.cols;
  std::vector<double> rec(rows * (h + t));
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(s.observed.data.data() + r * h, h, rec.data() + r * (h + t));
    std::copy_n(s.future.data.data() + r * t, t, rec.data() + r * (h + t) + h);
  }
  return rec;
}

void write_split(const fs::path& path, const std::vector<MotionSample>& split) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("dataset: cannot write " + path.string());
  for (const auto& s : split) {
    const auto rec = record_values(s);
    write_f64_le(os, rec.data(), rec.size());
  }
  if (!os) throw std::runtime_error("dataset: write failed for " + path.string());
}

nlohmann::json split_manifest(const std::string& file, const std::vector<MotionSample>& split, const fs::path& dir) {
  nlohmann::json j;
  j["file"] = file;
  j["count"] = split.size();
  j["sha256"] = sha256_file(dir / file);
  std::vector<std::size_t> ids;
  std::vector<int> modes;
  std::vector<double> phases;
  for (const auto& s : split) {
    ids.push_back(s.sample_id);
    modes.push_back(s.mode_id);
    phases.push_back(s.phase);
  }
  j["sample_ids"] = ids;
  j["mode_ids"] = modes;
  j["phases"] = phases;
  return j;
}

std::vector<MotionSample> read_split(const fs::path& dir, const nlohmann::json& j, const SyntheticConfig& cfg) {
  const auto path = dir / j.at("file").get<std::string>();
  const auto count = j.at("count").get<std::size_t>();
  const auto ids = j.at("sample_ids").get<std::vector<std::size_t>>();
  const auto modes = j.at("mode_ids").get<std::vector<int>>();
  const auto phases = j.at("phases").get<std::vector<double>>();
  if (ids.size() != count || modes.size() != count || phases.size() != count) {
    throw std::runtime_error("dataset: manifest record count mismatch in " + path.string());
  }
  if (!fs::exists(path)) throw std::runtime_error("dataset: missing " + path.string());
  const auto rows = cfg.rows(), h = cfg.history, t = cfg.horizon;
  const auto rec_len = rows * (h + t);
  if (fs::file_size(path) != count * rec_len * 8) {
    throw std::runtime_error("dataset: " + path.string() + " size does not match " + std::to_string(count) +
                             " records");
  }
  const auto digest = sha256_file(path);
  if (digest != j.at("sha256").get<std::string>()) {
    throw std::runtime_error("dataset: hash mismatch for " + path.string());
  }
  std::ifstream is(path, std::ios::binary);
  std::vector<MotionSample> out(count);
  std::vector<double> rec(rec_len);
  for (std::size_t i = 0; i < count; ++i) {
    read_f64_le(is, rec.data(), rec.size());
    auto& s = out[i];
    s.observed = PoseSequence(rows, h);
    s.future = PoseSequence(rows, t);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(rec.data() + r * (h + t), h, s.observed.data.data() + r * h);
      std::copy_n(rec.data() + r * (h + t) + h, t, s.future.data.data() + r * t);
    }
    s.sample_id = ids[i];
    s.mode_id = modes[i];
    s.phase = phases[i];
  }
  return out;
}

}  // namespace

SkeletonSpec SkeletonSpec::make(std::size_t joints) {
  if (joints < 2) throw std::invalid_argument("SkeletonSpec: need at least 2 joints");
  SkeletonSpec sk;
  sk.joints = joints;
  sk.parent.assign(joints, 0);
  sk.bone_length.assign(joints, 0.0);
  sk.rest_azimuth.assign(joints, 0.0);
  sk.rest_elevation.assign(joints, 0.0);
  for (std::size_t j = 1; j < joints; ++j) {
    sk.parent[j] = (j - 1) / 2;
    sk.bone_length[j] = 3.0 + 0.75 * static_cast<double>(j % 3);
    sk.rest_azimuth[j] = kTwoPi * static_cast<double>(j) / static_cast<double>(joints);
    sk.rest_elevation[j] = (j % 2 ? 0.35 : -0.35);
  }
  return sk;
}

void SyntheticConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("synthetic config: " + what); };
  if (joints < 3) fail("joints must be >= 3");
  if (history < 1) fail("history must be >= 1");
  if (horizon < 1) fail("horizon must be >= 1");
  if (n_modes < 2) fail("n_modes must be >= 2, got " + std::to_string(n_modes));
  if (n_train < 1 || n_test < 1) fail("n_train and n_test must be >= 1");
  if (!(noise_sd >= 0.0)) fail("noise_sd must be >= 0");
  if (!(v_max > 0.0)) fail("v_max must be > 0");
  if (!(mode0_prob > 0.0 && mode0_prob < 1.0)) fail("mode0_prob must be in (0, 1)");
}

std::vector<double> SyntheticConfig::mode_probabilities() const {
  std::vector<double> p(n_modes, (1.0 - mode0_prob) / static_cast<double>(n_modes - 1));
  p[0] = mode0_prob;
  return p;
}

nlohmann::json SyntheticConfig::to_json() const {
  return {{"joints", joints},       {"history", history},       {"horizon", horizon},
          {"n_modes", n_modes},     {"n_train", n_train},       {"n_test", n_test},
          {"noise_sd", noise_sd},   {"v_max", v_max},           {"mode0_prob", mode0_prob},
          {"phase_levels", phase_levels}};
}

SyntheticConfig SyntheticConfig::from_json(const nlohmann::json& j) {
  SyntheticConfig c;
  c.joints = j.at("joints").get<std::size_t>();
  c.history = j.at("history").get<std::size_t>();
  c.horizon = j.at("horizon").get<std::size_t>();
  c.n_modes = j.at("n_modes").get<std::size_t>();
  c.n_train = j.at("n_train").get<std::size_t>();
  c.n_test = j.at("n_test").get<std::size_t>();
  c.noise_sd = j.at("noise_sd").get<double>();
  c.v_max = j.at("v_max").get<double>();
  c.mode0_prob = j.at("mode0_prob").get<double>();
  c.phase_levels = j.at("phase_levels").get<std::size_t>();
  return c;
}

std::string Dataset::config_hash() const {
  const auto text = nlohmann::json{{"config", config.to_json()}, {"seed", seed}}.dump();
  return sha256_hex(text.data(), text.size());
}

PoseSequence render_motion(const SyntheticConfig& cfg, double phase, int mode, Rng* jitter) {
  const auto sk = SkeletonSpec::make(cfg.joints);
  const auto frames = cfg.frames();
  const Branch branch = branch_for(mode);
  const double omega = kTwoPi / kGaitPeriod;
  const double ramp = std::max(1.0, 0.6 * static_cast<double>(cfg.horizon));
  std::normal_distribution<double> noise(0.0, cfg.noise_sd);

  PoseSequence out(cfg.rows(), frames);
  double root[3] = {0.0, 0.0, 0.0};
  std::vector<double> pos(3 * cfg.joints);
  for (std::size_t t = 0; t < frames; ++t) {
    const double s = smoothstep((static_cast<double>(t) - static_cast<double>(cfg.history - 1)) / ramp);
    const double heading = branch.heading * s;
    if (t > 0) {
      const double prev_s =
          smoothstep((static_cast<double>(t) - 1.0 - static_cast<double>(cfg.history - 1)) / ramp);
      root[0] += kRootSpeed * std::cos(branch.heading * prev_s);
      root[1] += kRootSpeed * std::sin(branch.heading * prev_s);
    }
    const double tt = static_cast<double>(t);
    std::copy_n(root, 3, pos.begin());
    for (std::size_t j = 1; j < cfg.joints; ++j) {
      const double jj = static_cast<double>(j);
      double az = sk.rest_azimuth[j] + kSwing * std::sin(omega * tt + phase + 0.9 * jj) + heading;
      double el = sk.rest_elevation[j] + 0.5 * kSwing * std::cos(omega * tt + phase + 0.4 * jj);
      if (branch.raise_group != 0 && in_subtree(sk, j, static_cast<std::size_t>(branch.raise_group))) {
        el += branch.raise * s;
      }
      if (jitter && cfg.noise_sd > 0.0) {
        az += noise(*jitter);
        el += noise(*jitter);
      }
      const auto p = sk.parent[j];
      const double len = sk.bone_length[j];
      pos[3 * j + 0] = pos[3 * p + 0] + len * std::cos(el) * std::cos(az);
      pos[3 * j + 1] = pos[3 * p + 1] + len * std::cos(el) * std::sin(az);
      pos[3 * j + 2] = pos[3 * p + 2] + len * std::sin(el);
    }
    for (std::size_t r = 0; r < cfg.rows(); ++r) out(r, t) = pos[r];
  }
  return out;
}

Dataset generate_dataset(const SyntheticConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Dataset ds;
  ds.config = cfg;
  ds.seed = seed;
  Rng rng = make_stream(seed, "data");
  const auto probs = cfg.mode_probabilities();
  std::discrete_distribution<int> pick_mode(probs.begin(), probs.end());
  std::uniform_real_distribution<double> pick_phase(0.0, kTwoPi);
  const std::size_t total = cfg.n_train + cfg.n_test;
  for (std::size_t i = 0; i < total; ++i) {
    MotionSample s;
    s.sample_id = i;
    s.mode_id = pick_mode(rng);
    if (cfg.phase_levels > 0) {
      const auto level = static_cast<std::size_t>(rng() % cfg.phase_levels);
      s.phase = kTwoPi * static_cast<double>(level) / static_cast<double>(cfg.phase_levels);
    } else {
      s.phase = pick_phase(rng);
    }
    const auto full = render_motion(cfg, s.phase, s.mode_id, &rng);
    double worst = 0.0;
    for (std::size_t t = 1; t < full.cols; ++t) {
      for (std::size_t j = 0; j < cfg.joints; ++j) {
        double d2 = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
          const double d = full(3 * j + c, t) - full(3 * j + c, t - 1);
          d2 += d * d;
        }
        worst = std::max(worst, std::sqrt(d2));
      }
    }
    if (worst >= cfg.v_max) {
      throw std::invalid_argument("synthetic config: sample " + std::to_string(i) + " moves a joint by " +
                                  std::to_string(worst) + " per frame, v_max is " + std::to_string(cfg.v_max));
    }
    s.observed = PoseSequence(cfg.rows(), cfg.history);
    s.future = PoseSequence(cfg.rows(), cfg.horizon);
    for (std::size_t r = 0; r < cfg.rows(); ++r) {
      for (std::size_t t = 0; t < cfg.history; ++t) s.observed(r, t) = full(r, t);
      for (std::size_t t = 0; t < cfg.horizon; ++t) s.future(r, t) = full(r, cfg.history + t);
    }
    (i < cfg.n_train ? ds.train : ds.test).push_back(std::move(s));
  }
  return ds;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  write_split(dir / "train.f64", ds.train);
  write_split(dir / "test.f64", ds.test);
  nlohmann::json m;
  m["format"] = "divsample-dataset-v1";
  m["seed"] = ds.seed;
  m["config"] = ds.config.to_json();
  m["config_hash"] = ds.config_hash();
  m["record_layout"] = {{"dtype", "float64-le"},
                        {"rows", ds.config.rows()},
                        {"frames", ds.config.frames()},
                        {"observed_frames", ds.config.history},
                        {"order", "record-major; each record row-major [J*C, H+T]"}};
  m["splits"] = {{"train", split_manifest("train.f64", ds.train, dir)},
                 {"test", split_manifest("test.f64", ds.test, dir)}};
  std::ofstream os(dir / "manifest.json", std::ios::trunc);
  if (!os) throw std::runtime_error("dataset: cannot write manifest in " + dir.string());
  os << m.dump(2) << '\n';
}

Dataset load_dataset(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw std::runtime_error("dataset: no manifest.json in " + dir.string());
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("dataset: corrupt manifest in " + dir.string() + ": " + e.what());
  }
  if (m.value("format", "") != "divsample-dataset-v1") {
    throw std::runtime_error("dataset: unrecognized manifest format in " + dir.string());
  }
  Dataset ds;
  ds.config = SyntheticConfig::from_json(m.at("config"));
  ds.config.validate();
  ds.seed = m.at("seed").get<std::uint64_t>();
  if (ds.config_hash() != m.at("config_hash").get<std::string>()) {
    throw std::runtime_error("dataset: config hash mismatch in " + dir.string());
  }
  ds.train = read_split(dir, m.at("splits").at("train"), ds.config);
  ds.test = read_split(dir, m.at("splits").at("test"), ds.config);
  return ds;
}

std::vector<std::size_t> epoch_subset(std::size_t dataset_size, long n, Rng& rng, bool with_replacement) {
  if (n <= 0) throw std::invalid_argument("epoch_subset: n must be positive, got " + std::to_string(n));
  const auto count = static_cast<std::size_t>(n);
  if (dataset_size == 0) throw std::invalid_argument("epoch_subset: empty dataset");
  std::vector<std::size_t> out;
  if (with_replacement) {
    std::uniform_int_distribution<std::size_t> pick(0, dataset_size - 1);
    for (std::size_t i = 0; i < count; ++i) out.push_back(pick(rng));
    return out;
  }
  if (count > dataset_size) {
    throw std::invalid_argument("epoch_subset: " + std::to_string(count) + " exceeds dataset size " +
                                std::to_string(dataset_size) + " without replacement");
  }
  std::vector<std::size_t> all(dataset_size);
  for (std::size_t i = 0; i < dataset_size; ++i) all[i] = i;
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(count);
  return all;
}

Matrix mode_endpoints(const SyntheticConfig& cfg, double phase) {
  Matrix ends(cfg.n_modes, cfg.rows());
  for (std::size_t m = 0; m < cfg.n_modes; ++m) {
    const auto seq = render_motion(cfg, phase, static_cast<int>(m), nullptr);
    for (std::size_t r = 0; r < cfg.rows(); ++r) ends(m, r) = seq(r, seq.cols - 1);
  }
  return ends;
}

int classify_mode(const SyntheticConfig& cfg, const Matrix& endpoints, const PoseSequence& prediction) {
  if (prediction.rows != cfg.rows() || prediction.cols == 0 || endpoints.cols != cfg.rows()) {
    throw std::invalid_argument("classify_mode: prediction shape does not match config");
  }
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < endpoints.rows; ++m) {
    double d = 0.0;
    for (std::size_t r = 0; r < cfg.rows(); ++r) {
      const double diff = prediction(r, prediction.cols - 1) - endpoints(m, r);
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(m);
    }
  }
  return best;
}

std::size_t mode_coverage(const SyntheticConfig& cfg, double phase, const std::vector<PoseSequence>& predictions) {
  const auto ends = mode_endpoints(cfg, phase);
  std::vector<bool> hit(cfg.n_modes, false);
  for (const auto& p : predictions) hit[static_cast<std::size_t>(classify_mode(cfg, ends, p))] = true;
  return static_cast<std::size_t>(std::count(hit.begin(), hit.end(), true));
}

std::string sha256_hex(const void* data, std::size_t size) {
  Sha256 h;
  h.update(data, size);
  return h.final_hex();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("sha256: cannot open " + path.string());
  Sha256 h;
  std::vector<char> buf(1 << 16);
  while (is) {
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (is.gcount() > 0) h.update(buf.data(), static_cast<std::size_t>(is.gcount()));
  }
  return h.final_hex();
}

}  // namespace divsample
