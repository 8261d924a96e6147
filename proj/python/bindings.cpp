#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "divsample/cli.hpp"
#include "divsample/dct.hpp"
#include "divsample/evaluation.hpp"
#include "divsample/objectives.hpp"

namespace py = pybind11;
using namespace divsample;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy_n(a.data(), m.data.size(), m.data.begin());
  return m;
}

Array from_matrix(const Matrix& m) {
  Array out({m.rows, m.cols});
  std::copy(m.data.begin(), m.data.end(), out.mutable_data());
  return out;
}

std::vector<PoseSequence> to_sequences(const Array& a) {
  if (a.ndim() != 3) throw py::value_error("expected a 3-D array [K, rows, frames]");
  const auto k = static_cast<std::size_t>(a.shape(0));
  const auto r = static_cast<std::size_t>(a.shape(1)), c = static_cast<std::size_t>(a.shape(2));
  std::vector<PoseSequence> out(k, PoseSequence(r, c));
  for (std::size_t i = 0; i < k; ++i) std::copy_n(a.data() + i * r * c, r * c, out[i].data.begin());
  return out;
}

Array stack_sequences(const std::vector<PoseSequence>& seqs) {
  const auto r = seqs.front().rows, c = seqs.front().cols;
  Array out({seqs.size(), r, c});
  for (std::size_t i = 0; i < seqs.size(); ++i) std::copy(seqs[i].data.begin(), seqs[i].data.end(), out.mutable_data() + i * r * c);
  return out;
}

Tensor to_tensor(const Array& a) {
  Shape shape;
  for (py::ssize_t d = 0; d < a.ndim(); ++d) shape.push_back(static_cast<std::size_t>(a.shape(d)));
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

py::dict split_dict(const std::vector<MotionSample>& split) {
  std::vector<PoseSequence> obs, fut;
  std::vector<int> modes;
  std::vector<double> phases;
  for (const auto& s : split) {
    obs.push_back(s.observed);
    fut.push_back(s.future);
    modes.push_back(s.mode_id);
    phases.push_back(s.phase);
  }
  py::dict d;
  d["observed"] = stack_sequences(obs);
  d["future"] = stack_sequences(fut);
  d["mode_id"] = modes;
  d["phase"] = phases;
  return d;
}

py::object json_to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json py_to_json(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

}  // namespace

PYBIND11_MODULE(_divsample, m) {
  m.doc() = "Diverse motion sampling core";

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::vector<std::string> full{"divsample"};
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : full) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code;
    {
      py::gil_scoped_release release;
      code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), "Run one CLI subcommand; returns (exit_code, stdout, stderr).");

  m.def("desk_hyperparams", [] { return json_to_py(HyperParams::desk().to_json()); });
  m.def("validate_hyperparams", [](const py::object& o) { HyperParams::from_json(py_to_json(o)).validate(); });

  m.def("dct_truncate", [](const Array& seq, std::size_t n_dct) {
    const auto x = to_matrix(seq);
    return from_matrix(dct_truncate(x, {x.cols, n_dct}));
  }, py::arg("seq"), py::arg("n_dct"));
  m.def("idct_expand", [](const Array& coeffs, std::size_t length) {
    return from_matrix(idct_expand(to_matrix(coeffs), length));
  }, py::arg("coeffs"), py::arg("length"));

  m.def("apd", [](const Array& p) { return apd(to_sequences(p)); }, py::arg("preds"));
  m.def("ade", [](const Array& p, const Array& gt) { return ade(to_sequences(p), to_matrix(gt)); });
  m.def("fde", [](const Array& p, const Array& gt) { return fde(to_sequences(p), to_matrix(gt)); });
  m.def("mmade", [](const Array& p, const Array& pseudo) { return mmade(to_sequences(p), to_sequences(pseudo)); });
  m.def("mmfde", [](const Array& p, const Array& pseudo) { return mmfde(to_sequences(p), to_sequences(pseudo)); });
  m.def("median_metrics", [](const Array& p, const Array& gt) { return median_metrics(to_sequences(p), to_matrix(gt)); });
  m.def("pca_project", [](const Array& p) { return pca_project(to_sequences(p)); });

  m.def("hinge_diversity", [](const Array& p, double eta) { return hinge_diversity(to_sequences(p), eta); });
  m.def("energy_diversity", [](const Array& p, double sigma) { return energy_diversity(to_sequences(p), sigma); });
  m.def("accuracy_loss", [](const Array& p, const Array& gt) { return accuracy_loss(to_sequences(p), to_matrix(gt)); });
  m.def("kl_regularizer", [](const Array& means, const Array& scales) {
    return kl_regularizer({to_tensor(means), to_tensor(scales)}).item();
  });

  m.def("gumbel_transform", &gumbel_transform);
  m.def("coefficients", [](const std::string& kind, std::size_t k, std::size_t m_, double tau, std::uint64_t seed) {
    HyperParams hp;
    hp.coefficient = parse_coefficient_kind(kind);
    hp.bases = m_;
    hp.tau = tau;
    Rng rng(seed);
    return from_matrix(sample_coefficients(hp, k, rng));
  }, py::arg("kind"), py::arg("k"), py::arg("m"), py::arg("tau") = 1.0, py::arg("seed") = 0);

  m.def("generate_dataset", [](const py::object& config, std::uint64_t seed) {
    const auto cfg = config.is_none() ? SyntheticConfig{} : SyntheticConfig::from_json(py_to_json(config));
    const auto ds = generate_dataset(cfg, seed);
    py::dict d;
    d["config"] = json_to_py(ds.config.to_json());
    d["config_hash"] = ds.config_hash();
    d["train"] = split_dict(ds.train);
    d["test"] = split_dict(ds.test);
    return d;
  }, py::arg("config") = py::none(), py::arg("seed") = 1);
  m.def("default_synthetic_config", [] { return json_to_py(SyntheticConfig{}.to_json()); });

  py::register_exception<CommandError>(m, "CommandError", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
}
