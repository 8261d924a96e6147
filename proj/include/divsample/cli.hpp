#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "divsample/evaluation.hpp"
#include "divsample/hyperparams.hpp"
#include "divsample/synthetic_data.hpp"

namespace divsample {

/// Everything a command needs. Config-file keys and long options share the
/// field names.
struct RunConfig {
  HyperParams hyper = HyperParams::desk();
  SyntheticConfig data;
  std::uint64_t seed = 1;
  std::filesystem::path out = "run";
  std::string method = "auxiliary";
  std::size_t k = 50;
  std::size_t n = 1000;        // project: number of predictions
  std::size_t test_index = 0;  // project: which test history
  double mm_threshold = 0.0;   // <= 0: 0.1 x mean final-pose distance

  /// Synthetic geometry follows the model geometry.
  void sync();
  void validate() const;

  std::filesystem::path data_dir() const { return out / "data"; }
  std::filesystem::path cvae_stem() const { return out / "cvae"; }
  std::filesystem::path sampler_stem(const std::string& m) const { return out / ("sampler_" + m); }
};

struct CommandError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void cmd_gen_data(const RunConfig& cfg, std::ostream& log);
void cmd_train_cvae(const RunConfig& cfg, std::ostream& log);
void cmd_train_sampler(const RunConfig& cfg, std::ostream& log);
MetricsReport cmd_evaluate(const RunConfig& cfg, std::ostream& log);
std::vector<MetricsReport> cmd_compare(const RunConfig& cfg, std::ostream& log);
void cmd_project(const RunConfig& cfg, std::ostream& log);

/// Parses argv, runs one subcommand and returns the process exit code.
/// Diagnostics go to `err` as a single line.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace divsample
