#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "divsample/cli.hpp"

using namespace divsample;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

const std::vector<std::string> kSmall = {
    "--joints=3", "--history=4", "--horizon=6", "--n_dct=4", "--features=6", "--cvae_layers=2",
    "--beta_layers=2", "--bases=4", "--n_b=8", "--n_h=5", "--n_z=4", "--k_train=3", "--eta=5",
    "--epochs=5", "--sampler_epochs=5", "--samples_per_epoch=32", "--batch_size=8", "--lr_flat_epochs=2", "--lr_decay_end=5",
    "--n_train=48", "--n_test=6", "--k=4"};

Result run(const fs::path& out, const std::string& cmd, std::vector<std::string> extra = {}) {
  std::vector<std::string> args{"divsample", cmd, "--out=" + out.string()};
  for (const auto& a : kSmall) {
    const auto key = a.substr(0, a.find('='));
    bool overridden = false;
    for (const auto& e : extra) overridden = overridden || e.substr(0, e.find('=')) == key;
    if (!overridden) args.push_back(a);
  }
  args.insert(args.end(), extra.begin(), extra.end());
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
  return {code, o.str(), e.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

int lines(const fs::path& p) {
  std::ifstream is(p);
  std::string l;
  int n = 0;
  while (std::getline(is, l)) ++n;
  return n;
}

fs::path scratch(const char* name) {
  auto p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("gen-data is reproducible") {
  const auto a = scratch("divsample_cli_a"), b = scratch("divsample_cli_b");
  REQUIRE(run(a, "gen-data").code == 0);
  REQUIRE(run(b, "gen-data").code == 0);
  CHECK(slurp(a / "data" / "train.f64") == slurp(b / "data" / "train.f64"));
  CHECK(slurp(a / "data" / "manifest.json") == slurp(b / "data" / "manifest.json"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("argument and config errors") {
  const auto dir = scratch("divsample_cli_err");
  auto r = run(dir, "gen-data", {"--n_modes=1"});
  CHECK(r.code != 0);
  CHECK(r.err.find("n_modes") != std::string::npos);
  CHECK(run(dir, "gen-data", {"--no_such_flag=3"}).code != 0);

  fs::create_directories(dir);
  std::ofstream(dir / "bad.ini") << "epochs = 3\nnot_a_key = 1\n";
  CHECK(run(dir, "gen-data", {"--config=" + (dir / "bad.ini").string()}).code != 0);
  std::ofstream(dir / "good.ini") << "n_train = 20\n";
  CHECK(run(dir, "gen-data", {"--config=" + (dir / "good.ini").string()}).code == 0);

  r = run(dir / "empty", "train-sampler", {"--method=auxiliary"});
  CHECK(r.code == 1);
  CHECK(r.err.find("run train-cvae first") != std::string::npos);
  CHECK(run(dir, "evaluate", {"--method=magic"}).code != 0);
  fs::remove_all(dir);
}

TEST_CASE("full pipeline on a tiny configuration") {
  const auto dir = scratch("divsample_cli_run");
  REQUIRE(run(dir, "gen-data").code == 0);
  REQUIRE(run(dir, "train-cvae").code == 0);
  CHECK(lines(dir / "cvae_log.csv") == 6);

  auto r = run(dir, "train-sampler", {"--method=auxiliary", "--n_z=5"});
  CHECK(r.code == 1);
  CHECK(r.err.find("n_z mismatch: config has 5, CVAE checkpoint has 4") != std::string::npos);
  CHECK(run(dir, "train-sampler", {"--method=random"}).code == 1);

  REQUIRE(run(dir, "train-sampler", {"--method=auxiliary"}).code == 0);
  r = run(dir, "compare");
  CHECK(r.code == 1);
  CHECK(r.err.find("dlow") != std::string::npos);
  REQUIRE(run(dir, "train-sampler", {"--method=dlow"}).code == 0);
  CHECK(lines(dir / "sampler_dlow_log.csv") == 6);

  r = run(dir, "evaluate", {"--method=dlow", "--k=5"});
  CHECK(r.code == 1);
  CHECK(r.err.find("built for K=3") != std::string::npos);
  REQUIRE(run(dir, "evaluate", {"--method=auxiliary", "--k=7"}).code == 0);
  CHECK(lines(dir / "metrics_auxiliary_samples.csv") == 7);

  REQUIRE(run(dir, "compare", {"--k=3"}).code == 0);
  const auto first = slurp(dir / "compare.csv");
  CHECK(lines(dir / "compare.csv") == 4);
  REQUIRE(run(dir, "compare", {"--k=3"}).code == 0);
  CHECK(slurp(dir / "compare.csv") == first);

  REQUIRE(run(dir, "project", {"--method=auxiliary", "--n=25", "--test_index=2"}).code == 0);
  CHECK(lines(dir / "project_auxiliary.csv") == 26);
  CHECK(run(dir, "project", {"--n=2"}).code == 1);
  CHECK(run(dir, "project", {"--test_index=6"}).code == 1);
  fs::remove_all(dir);
}
