#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "negadapt/errors.hpp"
#include "negadapt/evalkit.hpp"
#include "negadapt/io.hpp"
#include "negadapt/policynet.hpp"
#include "negadapt/qstate.hpp"
#include "negadapt/trainer.hpp"

namespace py = pybind11;
using namespace negadapt;

namespace {

using ComplexArray = py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>;

numkit::CMatrix to_cmatrix(const ComplexArray& arr) {
  const auto buf = arr.request();
  if (buf.ndim != 2) throw DimensionMismatchError("expected a 2-D complex array");
  numkit::CMatrix m(static_cast<int>(buf.shape[0]), static_cast<int>(buf.shape[1]));
  const auto* data = static_cast<const std::complex<double>*>(buf.ptr);
  std::copy(data, data + m.rows() * m.cols(), m.data().begin());
  return m;
}

py::array_t<std::complex<double>> to_numpy(const numkit::CMatrix& m) {
  py::array_t<std::complex<double>> arr({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), static_cast<std::complex<double>*>(arr.request().ptr));
  return arr;
}

qstate::SystemKind parse_system(const std::string& name) { return qstate::system_from_string(name); }

qstate::DensityMatrix density_from(const ComplexArray& rho, const std::string& system) {
  return qstate::make_density_matrix(parse_system(system), to_cmatrix(rho));
}

qstate::EffectiveOperator operator_from(const ComplexArray& mat, const std::string& system) {
  const auto kind = parse_system(system);
  numkit::CMatrix m = to_cmatrix(mat);
  const int want = qstate::local_dim(kind) * qstate::local_dim(kind);
  if (m.rows() != want || m.cols() != want) {
    throw DimensionMismatchError("effective operator must be local_dim^2 square");
  }
  return qstate::EffectiveOperator{kind, std::move(m)};
}

std::vector<policynet::BasisEntry> basis_from(const py::object& basis,
                                              qstate::SystemKind system) {
  if (basis.is_none()) return policynet::default_basis_list(system);
  std::vector<policynet::BasisEntry> list;
  for (const auto& item : basis.cast<py::list>()) {
    const py::dict d = item.cast<py::dict>();
    policynet::BasisEntry entry;
    entry.x = d["x"].cast<std::vector<double>>();
    entry.y = d["y"].cast<std::vector<double>>();
    const auto want = static_cast<std::size_t>(2 * qstate::local_dim(system));
    if (entry.x.size() != want || entry.y.size() != want) {
      throw ConfigError("basis entry length must be 2*local_dim reals");
    }
    list.push_back(std::move(entry));
  }
  return list;
}

// Checkpoint wrapper exposing rollouts and scalar estimates.
class Model {
 public:
  Model(const std::string& system, std::uint64_t seed) {
    checkpoint_.config.system = parse_system(system);
    checkpoint_.config.seeds.model = seed;
    checkpoint_.params = policynet::init_params(checkpoint_.config.system, seed);
  }

  explicit Model(trainer::Checkpoint checkpoint) : checkpoint_(std::move(checkpoint)) {}

  static Model load(const std::string& path) { return Model(io::load_checkpoint(path)); }

  void save(const std::string& path) const { io::save_checkpoint(path, checkpoint_); }

  std::string system() const { return qstate::to_string(checkpoint_.config.system); }
  int iterations() const { return checkpoint_.config.iterations; }
  double best_val_loss() const { return checkpoint_.best_val_loss; }

  py::dict rollout(const std::vector<ComplexArray>& states, int n, const std::string& mode,
                   const py::object& basis) const {
    const auto kind = checkpoint_.config.system;
    std::vector<qstate::EffectiveOperator> ops;
    ops.reserve(states.size());
    for (const auto& rho : states) {
      ops.push_back(qstate::build_effective_operator(density_from(rho, system())));
    }
    std::vector<const qstate::EffectiveOperator*> refs;
    for (const auto& op : ops) refs.push_back(&op);

    const auto rollout_mode = policynet::mode_from_string(mode);
    std::optional<std::vector<policynet::BasisEntry>> basis_list;
    if (rollout_mode == policynet::RolloutMode::Fixed) basis_list = basis_from(basis, kind);

    const auto records = policynet::run_rollout(checkpoint_.params, refs, n, rollout_mode,
                                                basis_list ? &*basis_list : nullptr);

    const auto batch = static_cast<py::ssize_t>(records.size());
    py::array_t<double> probs({batch, static_cast<py::ssize_t>(n)});
    py::array_t<double> estimates({batch, static_cast<py::ssize_t>(n)});
    auto p = probs.mutable_unchecked<2>();
    auto e = estimates.mutable_unchecked<2>();
    for (py::ssize_t b = 0; b < batch; ++b) {
      for (int i = 0; i < n; ++i) {
        p(b, i) = records[static_cast<std::size_t>(b)].probabilities[static_cast<std::size_t>(i)];
        e(b, i) = records[static_cast<std::size_t>(b)].estimates[static_cast<std::size_t>(i)];
      }
    }
    py::dict out;
    out["probabilities"] = probs;
    out["estimates"] = estimates;
    return out;
  }

  double estimate(const ComplexArray& rho, int n, const std::string& mode,
                  const py::object& basis) const {
    const py::dict result = rollout({rho}, n, mode, basis);
    const auto estimates = result["estimates"].cast<py::array_t<double>>();
    return policynet::clamp_estimate(estimates.at(0, n - 1));
  }

  const trainer::Checkpoint& checkpoint() const { return checkpoint_; }

 private:
  trainer::Checkpoint checkpoint_;
};

trainer::RunConfig config_from_dict(const py::dict& config) {
  const std::string text =
      py::module_::import("json").attr("dumps")(config).cast<std::string>();
  return io::config_from_json_text(text);
}

py::dict train_py(const py::dict& config_dict, const py::object& out_dir) {
  const trainer::RunConfig config = config_from_dict(config_dict);
  trainer::Checkpoint ckpt;
  {
    py::gil_scoped_release release;
    ckpt = trainer::train(config);
  }
  py::dict out;
  out["best_val_loss"] = ckpt.best_val_loss;
  out["best_epoch"] = ckpt.best_epoch;
  out["baseline_val_loss"] = ckpt.history.front().val_loss;
  out["epochs"] = ckpt.history.size() - 1;
  out["train_pred_mean"] = ckpt.train_pred_mean;
  if (!out_dir.is_none()) {
    const std::string dir = out_dir.cast<std::string>();
    std::filesystem::create_directories(dir);
    const std::string path = (std::filesystem::path(dir) / "checkpoint.ckpt").string();
    io::save_checkpoint(path, ckpt);
    out["checkpoint"] = path;
  }
  return out;
}

py::dict evaluate_py(const std::string& checkpoint_path, const py::object& count,
                     const py::object& seed) {
  const trainer::Checkpoint ckpt = io::load_checkpoint(checkpoint_path);
  const std::int64_t n = count.is_none() ? ckpt.config.test_size : count.cast<std::int64_t>();
  const std::uint64_t s =
      seed.is_none() ? ckpt.config.seeds.data + 2 : seed.cast<std::uint64_t>();
  evalkit::RunMetrics metrics;
  {
    py::gil_scoped_release release;
    const trainer::Dataset test = trainer::build_dataset(ckpt.config.system, s, n);
    metrics = evalkit::evaluate_checkpoint(ckpt, test, "python");
  }
  py::dict out;
  out["n"] = metrics.n;
  out["l1"] = metrics.l1;
  out["r2"] = metrics.r2;
  out["r2_conventional"] = metrics.r2_conventional;
  out["test_size"] = metrics.pairs.size();
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Adaptive two-copy collective-measurement negativity estimation";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def(
      "random_density_matrix",
      [](const std::string& system, std::uint64_t seed, std::uint64_t stream) {
        return to_numpy(qstate::random_density_matrix(parse_system(system), seed, stream).mat);
      },
      py::arg("system"), py::arg("seed"), py::arg("stream") = 0,
      "Hilbert-Schmidt random density matrix, reproducible per (seed, stream)");

  m.def(
      "negativity",
      [](const ComplexArray& rho, const std::string& system) {
        return qstate::negativity(density_from(rho, system));
      },
      py::arg("rho"), py::arg("system"));

  m.def(
      "partial_transpose",
      [](const ComplexArray& rho, const std::string& system) {
        return to_numpy(qstate::partial_transpose(density_from(rho, system)));
      },
      py::arg("rho"), py::arg("system"));

  m.def("bell_projector", []() { return to_numpy(qstate::bell_projector()); });

  m.def(
      "build_two_copy",
      [](const ComplexArray& rho, const std::string& system) {
        return to_numpy(qstate::build_two_copy(density_from(rho, system)));
      },
      py::arg("rho"), py::arg("system"));

  m.def(
      "build_effective_operator",
      [](const ComplexArray& rho, const std::string& system) {
        return to_numpy(qstate::build_effective_operator(density_from(rho, system)).mat);
      },
      py::arg("rho"), py::arg("system"));

  m.def(
      "collective_probability",
      [](const ComplexArray& effective_op, const std::vector<double>& x,
         const std::vector<double>& y, const std::string& system) {
        return qstate::collective_probability(operator_from(effective_op, system), x, y);
      },
      py::arg("effective_op"), py::arg("x"), py::arg("y"), py::arg("system"));

  m.def(
      "collective_probability_dense",
      [](const ComplexArray& rho, const std::vector<double>& x, const std::vector<double>& y,
         const std::string& system) {
        return qstate::collective_probability_dense(density_from(rho, system), x, y);
      },
      py::arg("rho"), py::arg("x"), py::arg("y"), py::arg("system"));

  m.def(
      "probability_gradient",
      [](const ComplexArray& effective_op, const std::vector<double>& x,
         const std::vector<double>& y, const std::string& system) {
        std::vector<double> dx(x.size()), dy(y.size());
        qstate::probability_gradient(operator_from(effective_op, system), x, y, dx, dy);
        return py::make_tuple(dx, dy);
      },
      py::arg("effective_op"), py::arg("x"), py::arg("y"), py::arg("system"));

  m.def(
      "default_basis_list",
      [](const std::string& system) {
        py::list out;
        for (const auto& entry : policynet::default_basis_list(parse_system(system))) {
          py::dict d;
          d["x"] = entry.x;
          d["y"] = entry.y;
          out.append(d);
        }
        return out;
      },
      py::arg("system"));

  py::class_<Model>(m, "Model")
      .def(py::init<const std::string&, std::uint64_t>(), py::arg("system"), py::arg("seed") = 1)
      .def_static("load", &Model::load, py::arg("path"))
      .def("save", &Model::save, py::arg("path"))
      .def_property_readonly("system", &Model::system)
      .def_property_readonly("iterations", &Model::iterations)
      .def_property_readonly("best_val_loss", &Model::best_val_loss)
      .def("rollout", &Model::rollout, py::arg("states"), py::arg("n"),
           py::arg("mode") = "adaptive", py::arg("basis") = py::none())
      .def("estimate", &Model::estimate, py::arg("rho"), py::arg("n"),
           py::arg("mode") = "adaptive", py::arg("basis") = py::none());

  m.def("train", &train_py, py::arg("config"), py::arg("out_dir") = py::none(),
        "Run the full training protocol from a config dict; returns summary stats");

  m.def("evaluate", &evaluate_py, py::arg("checkpoint"), py::arg("count") = py::none(),
        py::arg("seed") = py::none(), "Evaluate a checkpoint on a regenerated test split");

  m.attr("__version__") = "0.1.0";
}
