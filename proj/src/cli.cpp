#include "divsample/cli.hpp"

#include <cstdio>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "divsample/checkpoint.hpp"
#include "divsample/objectives.hpp"

namespace divsample {

namespace {

const char* const kMethods[] = {"random", "dlow", "auxiliary"};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw CommandError("cannot write " + p.string());
  return os;
}

void check_geometry(const HyperParams& cfg, const HyperParams& ckpt, const std::string& what) {
  auto check = [&](const char* name, std::size_t a, std::size_t b) {
    if (a != b) {
      throw CommandError(std::string(name) + " mismatch: config has " + std::to_string(a) + ", " + what + " has " +
                         std::to_string(b));
    }
  };
  check("joints", cfg.joints, ckpt.joints);
  check("history", cfg.history, ckpt.history);
  check("horizon", cfg.horizon, ckpt.horizon);
  check("n_dct", cfg.n_dct, ckpt.n_dct);
  check("n_z", cfg.n_z, ckpt.n_z);
}

Dataset load_data(const RunConfig& cfg) {
  if (!std::filesystem::exists(cfg.data_dir() / "manifest.json")) {
    throw CommandError("no dataset in " + cfg.data_dir().string() + "; run gen-data first");
  }
  auto ds = load_dataset(cfg.data_dir());
  auto check = [&](const char* name, std::size_t a, std::size_t b) {
    if (a != b) {
      throw CommandError(std::string(name) + " mismatch: config has " + std::to_string(a) + ", dataset has " +
                         std::to_string(b));
    }
  };
  check("joints", cfg.hyper.joints, ds.config.joints);
  check("history", cfg.hyper.history, ds.config.history);
  check("horizon", cfg.hyper.horizon, ds.config.horizon);
  return ds;
}

CvaeModel load_cvae(const RunConfig& cfg) {
  if (!checkpoint_exists(cfg.cvae_stem())) {
    throw CommandError("missing CVAE checkpoint " + cfg.cvae_stem().string() + ".json; run train-cvae first");
  }
  auto model = CvaeModel::from_checkpoint(load_checkpoint(cfg.cvae_stem()));
  check_geometry(cfg.hyper, model.hyper(), "CVAE checkpoint");
  return model;
}

std::unique_ptr<LatentSampler> load_trained_sampler(const RunConfig& cfg, const std::string& method) {
  const auto stem = cfg.sampler_stem(method);
  if (!checkpoint_exists(stem)) {
    throw CommandError("missing " + method + " sampler checkpoint " + stem.string() +
                       ".json; run train-sampler --method " + method + " first");
  }
  auto s = load_sampler(load_checkpoint(stem));
  check_geometry(cfg.hyper, s->hyper(), method + " sampler checkpoint");
  return s;
}

struct Method {
  CvaeModel cvae;
  std::unique_ptr<LatentSampler> sampler;

  std::vector<PoseSequence> operator()(const PoseSequence& x, std::size_t k, Rng& rng) {
    return sampler ? sampler->sample(x, k, cvae, rng) : cvae.random_sample(x, k, rng);
  }
};

std::shared_ptr<Method> load_method(const RunConfig& cfg, const std::string& method) {
  auto m = std::make_shared<Method>();
  m->cvae = load_cvae(cfg);
  if (method != "random") m->sampler = load_trained_sampler(cfg, method);
  return m;
}

MetricsReport evaluate_method(const RunConfig& cfg, const std::string& method, const Dataset& ds,
                              const MultimodalGtSet& mm) {
  auto m = load_method(cfg, method);
  Rng rng = make_stream(cfg.seed, "eval");
  Predictor predict = [m](const PoseSequence& x, std::size_t k, Rng& r) { return (*m)(x, k, r); };
  return evaluate_suite(method, predict, ds, mm, cfg.k, rng);
}

MultimodalGtSet pseudo_truth(const RunConfig& cfg, const Dataset& ds) {
  const double threshold = cfg.mm_threshold > 0.0 ? cfg.mm_threshold : default_mm_threshold(ds);
  return mine_multimodal_gt(ds, threshold);
}

void add_options(CLI::App& app, RunConfig& cfg) {
  auto& h = cfg.hyper;
  auto& d = cfg.data;
  app.add_option("--seed", cfg.seed, "master seed");
  app.add_option("--out", cfg.out, "run directory");
  app.add_option("--method", cfg.method, "random, dlow or auxiliary")
      ->check(CLI::IsMember({kMethods[0], kMethods[1], kMethods[2]}));
  app.add_option("--k", cfg.k, "predictions per input");
  app.add_option("--n", cfg.n, "predictions to project");
  app.add_option("--test_index", cfg.test_index, "test history used by project");
  app.add_option("--mm_threshold", cfg.mm_threshold, "pseudo ground-truth radius (<= 0: automatic)");

  app.add_option("--joints", h.joints);
  app.add_option("--history", h.history);
  app.add_option("--horizon", h.horizon);
  app.add_option("--n_dct", h.n_dct);
  app.add_option("--features", h.features);
  app.add_option("--cvae_layers", h.cvae_layers);
  app.add_option("--beta_layers", h.beta_layers);
  app.add_option("--bases", h.bases);
  app.add_option("--n_b", h.n_b);
  app.add_option("--n_h", h.n_h);
  app.add_option("--n_z", h.n_z);
  app.add_option("--k_train", h.k_train);
  app.add_option("--pi", h.pi);
  app.add_option("--tau", h.tau);
  app.add_option("--lambda_hdiv", h.lambda_hdiv);
  app.add_option("--lambda_acc", h.lambda_acc);
  app.add_option("--lambda_kl", h.lambda_kl);
  app.add_option("--eta", h.eta);
  app.add_option("--sigma_div", h.sigma_div);
  app.add_option("--cvae_kl_weight", h.cvae_kl_weight);
  app.add_option("--epochs", h.epochs);
  app.add_option("--sampler_epochs", h.sampler_epochs);
  app.add_option("--samples_per_epoch", h.samples_per_epoch);
  app.add_option("--batch_size", h.batch_size);
  app.add_option("--lr", h.lr.base);
  app.add_option("--lr_final", h.lr.final_lr);
  app.add_option("--lr_flat_epochs", h.lr.flat_until);
  app.add_option("--lr_decay_end", h.lr.decay_end);
  app.add_option_function<std::string>(
         "--coeff,--coefficient", [&h](const std::string& s) { h.coefficient = parse_coefficient_kind(s); },
         "gumbel, uniform or gaussian")
      ->check(CLI::IsMember({"gumbel", "uniform", "gaussian"}));
  app.add_flag("--bypass-gamma,--bypass_gamma", h.bypass_gamma, "map points to Gaussians without N_gamma");
  app.add_option_function<std::string>(
         "--div-loss,--div_loss", [&h](const std::string& s) { h.div_loss = parse_diversity_loss(s); },
         "hinge or energy")
      ->check(CLI::IsMember({"hinge", "energy"}));

  app.add_option("--n_modes", d.n_modes);
  app.add_option("--n_train", d.n_train);
  app.add_option("--n_test", d.n_test);
  app.add_option("--noise_sd", d.noise_sd);
  app.add_option("--v_max", d.v_max);
  app.add_option("--mode0_prob", d.mode0_prob);
  app.add_option("--phase_levels", d.phase_levels);
}

}  // namespace

void RunConfig::sync() {
  data.joints = hyper.joints;
  data.history = hyper.history;
  data.horizon = hyper.horizon;
}

void RunConfig::validate() const {
  hyper.validate();
  data.validate();
  if (data.joints != hyper.joints || data.history != hyper.history || data.horizon != hyper.horizon) {
    throw std::invalid_argument("dataset geometry differs from model geometry");
  }
  bool known = false;
  for (const char* m : kMethods) known = known || method == m;
  if (!known) throw std::invalid_argument("unknown method '" + method + "'");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
}

void cmd_gen_data(const RunConfig& cfg, std::ostream& log) {
  const auto ds = generate_dataset(cfg.data, cfg.seed);
  save_dataset(ds, cfg.data_dir());
  std::ifstream is(cfg.data_dir() / "manifest.json");
  const auto manifest = nlohmann::json::parse(is);
  log << "dataset " << cfg.data_dir().string() << " seed " << cfg.seed << " config " << ds.config_hash() << "\n";
  for (const auto& [split, info] : manifest.at("splits").items()) {
    log << "  " << split << ": " << info.at("count").get<std::size_t>() << " samples, sha256 "
        << info.at("sha256").get<std::string>() << "\n";
  }
}

void cmd_train_cvae(const RunConfig& cfg, std::ostream& log) {
  const auto ds = load_data(cfg);
  auto result = train_cvae(ds, cfg.hyper, cfg.seed);
  save_checkpoint(cfg.cvae_stem(), result.model.to_checkpoint());
  auto os = open_out(cfg.out / "cvae_log.csv");
  os << "epoch,mean_loss,lr\n";
  for (const auto& e : result.history) os << e.epoch << "," << num(e.mean_loss) << "," << num(e.lr) << "\n";
  log << "cvae: " << result.history.size() << " epochs, final loss " << num(result.history.back().mean_loss)
      << ", checkpoint " << cfg.cvae_stem().string() << ".json\n";
}

void cmd_train_sampler(const RunConfig& cfg, std::ostream& log) {
  if (cfg.method == "random") throw CommandError("train-sampler: method random has nothing to train");
  auto cvae = load_cvae(cfg);
  const auto ds = load_data(cfg);
  Rng init = make_stream(cfg.seed, "sampler-init");
  std::unique_ptr<LatentSampler> sampler;
  if (cfg.method == "dlow") {
    sampler = std::make_unique<DlowSampler>(cfg.hyper, cfg.hyper.k_train, init);
  } else {
    sampler = std::make_unique<AuxiliarySampler>(cfg.hyper, init);
  }
  const auto history = train_sampler(ds, cvae, *sampler, cfg.seed);
  const auto stem = cfg.sampler_stem(cfg.method);
  save_checkpoint(stem, sampler->to_checkpoint());
  auto os = open_out(cfg.out / ("sampler_" + cfg.method + "_log.csv"));
  os << "epoch,total,hdiv,acc,kl,lr\n";
  for (const auto& e : history) {
    os << e.epoch << "," << num(e.terms[0]) << "," << num(e.terms[1]) << "," << num(e.terms[2]) << ","
       << num(e.terms[3]) << "," << num(e.lr) << "\n";
  }
  log << cfg.method << " sampler: " << history.size() << " epochs, final loss " << num(history.back().mean_loss)
      << ", checkpoint " << stem.string() << ".json\n";
}

MetricsReport cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
  const auto ds = load_data(cfg);
  const auto report = evaluate_method(cfg, cfg.method, ds, pseudo_truth(cfg, ds));
  {
    auto os = open_out(cfg.out / ("metrics_" + cfg.method + ".csv"));
    write_report_csv(os, report);
  }
  {
    auto os = open_out(cfg.out / ("metrics_" + cfg.method + "_samples.csv"));
    write_samples_csv(os, report);
  }
  std::ostringstream table;
  write_table(table, {report});
  open_out(cfg.out / ("metrics_" + cfg.method + ".txt")) << table.str();
  log << table.str();
  return report;
}

std::vector<MetricsReport> cmd_compare(const RunConfig& cfg, std::ostream& log) {
  const auto ds = load_data(cfg);
  for (const char* m : kMethods) {
    if (std::string(m) != "random") (void)load_trained_sampler(cfg, m);
  }
  const auto mm = pseudo_truth(cfg, ds);
  std::vector<MetricsReport> reports;
  for (const char* m : kMethods) reports.push_back(evaluate_method(cfg, m, ds, mm));
  {
    auto os = open_out(cfg.out / "compare.csv");
    write_comparison_csv(os, reports);
  }
  std::ostringstream table;
  write_table(table, reports);
  open_out(cfg.out / "compare.txt") << table.str();
  log << table.str();
  return reports;
}

void cmd_project(const RunConfig& cfg, std::ostream& log) {
  if (cfg.n < 3) throw CommandError("project: n must be >= 3, got " + std::to_string(cfg.n));
  const auto ds = load_data(cfg);
  if (cfg.test_index >= ds.test.size()) {
    throw CommandError("project: test_index " + std::to_string(cfg.test_index) + " out of range (test split has " +
                       std::to_string(ds.test.size()) + ")");
  }
  auto m = load_method(cfg, cfg.method);
  Rng rng = make_stream(cfg.seed, "eval");
  const auto preds = (*m)(ds.test[cfg.test_index].observed, cfg.n, rng);
  const auto points = pca_project(preds);
  const auto path = cfg.out / ("project_" + cfg.method + ".csv");
  auto os = open_out(path);
  os << "sample_id,pc1,pc2\n";
  for (std::size_t i = 0; i < points.size(); ++i) os << i << "," << num(points[i][0]) << "," << num(points[i][1]) << "\n";
  log << "wrote " << points.size() << " points to " << path.string() << "\n";
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Diverse motion sampling: data generation, training, evaluation"};
  app.name("divsample");
  app.set_config("--config", "", "key = value configuration file");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1, 1);
  app.fallthrough();
  add_options(app, cfg);
  auto* gen = app.add_subcommand("gen-data", "generate and save the synthetic dataset");
  auto* tcv = app.add_subcommand("train-cvae", "pretrain the CVAE");
  auto* tsa = app.add_subcommand("train-sampler", "train the auxiliary or DLow sampler on the frozen CVAE");
  auto* eva = app.add_subcommand("evaluate", "metric suite for one method");
  auto* cmp = app.add_subcommand("compare", "metric suite for all methods");
  auto* prj = app.add_subcommand("project", "2-D PCA of n predictions for one test history");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return e.get_exit_code() != 0 ? e.get_exit_code() : 2;
  }

  try {
    cfg.sync();
    cfg.validate();
    if (gen->parsed()) cmd_gen_data(cfg, out);
    if (tcv->parsed()) cmd_train_cvae(cfg, out);
    if (tsa->parsed()) cmd_train_sampler(cfg, out);
    if (eva->parsed()) cmd_evaluate(cfg, out);
    if (cmp->parsed()) cmd_compare(cfg, out);
    if (prj->parsed()) cmd_project(cfg, out);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& c : msg) {
      if (c == '\n') c = ' ';
    }
    err << "error: " << msg << "\n";
    return 1;
  }
  return 0;
}

}  // namespace divsample
