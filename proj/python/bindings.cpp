#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "kcm/error.hpp"
#include "kcm/experiment.hpp"

namespace py = pybind11;

namespace {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

Points to_matrix(const std::vector<kcm::Vec3>& v) {
  Points m(static_cast<Eigen::Index>(v.size()), 3);
  for (std::size_t i = 0; i < v.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = v[i];
  return m;
}

kcm::Conformation conformation(const Eigen::VectorXd& theta) { return kcm::Conformation(theta); }

py::dict summary_dict(const kcm::RunSummary& s) {
  py::dict d;
  d["mode"] = kcm::to_string(s.mode);
  d["kappa0"] = s.kappa0;
  d["initial_energy"] = s.initial_energy;
  d["final_energy"] = s.final_energy;
  d["iterations"] = s.iterations;
  d["iterations_to_convergence"] = s.iterations_to_convergence;
  d["oscillation_score"] = s.oscillation_score;
  d["terminated_by"] = kcm::to_string(s.terminated_by);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Kinetostatic compliance folding of protein backbone chains";

  // Module-lifetime reference; raised with a `code` attribute naming the error kind.
  static PyObject* kcm_error =
      py::exception<kcm::Error>(m, "KcmError", PyExc_RuntimeError).release().ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const kcm::Error& e) {
      py::object err = py::handle(kcm_error)(e.what());
      err.attr("code") = kcm::to_string(e.code());
      PyErr_SetObject(kcm_error, err.ptr());
    }
  });

  py::class_<kcm::ChainTopology>(m, "ChainTopology")
      .def_readonly("num_planes", &kcm::ChainTopology::num_planes)
      .def_readonly("num_dihedrals", &kcm::ChainTopology::num_dihedrals)
      .def_property_readonly("num_atoms", &kcm::ChainTopology::num_atoms)
      .def_property_readonly("num_residues", &kcm::ChainTopology::num_residues)
      .def_property_readonly("atom_kinds",
                             [](const kcm::ChainTopology& t) {
                               std::vector<std::string> kinds;
                               for (const auto& a : t.atoms) kinds.emplace_back(kcm::to_string(a.kind));
                               return kinds;
                             })
      .def_property_readonly("zero_positions",
                             [](const kcm::ChainTopology& t) { return to_matrix(t.zero_positions); })
      .def_readonly("exclusions", &kcm::ChainTopology::exclusion_set)
      .def("__repr__", [](const kcm::ChainTopology& t) {
        return "<ChainTopology planes=" + std::to_string(t.num_planes) +
               " dihedrals=" + std::to_string(t.num_dihedrals) +
               " atoms=" + std::to_string(t.num_atoms()) + ">";
      });

  m.def(
      "build_backbone",
      [](std::size_t num_planes) {
        return kcm::build_backbone(num_planes, kcm::PeptideGeometry{}, kcm::default_parameters());
      },
      py::arg("num_planes"), "Chain of `num_planes` peptide planes with built-in parameters.");

  py::enum_<kcm::RadiusRule>(m, "RadiusRule")
      .value("sum", kcm::RadiusRule::sum)
      .value("geometric_mean", kcm::RadiusRule::geometric_mean);

  py::class_<kcm::ForceFieldConfig>(m, "ForceFieldConfig")
      .def(py::init<>())
      .def_readwrite("coulomb_constant", &kcm::ForceFieldConfig::coulomb_constant)
      .def_readwrite("dielectric", &kcm::ForceFieldConfig::dielectric)
      .def_readwrite("apply_exclusions", &kcm::ForceFieldConfig::apply_exclusions)
      .def_readwrite("cutoff", &kcm::ForceFieldConfig::cutoff)
      .def_readwrite("radius_rule", &kcm::ForceFieldConfig::radius_rule);

  py::enum_<kcm::SolverMode>(m, "SolverMode")
      .value("conventional", kcm::SolverMode::conventional)
      .value("sgd", kcm::SolverMode::sgd);

  py::class_<kcm::SolverConfig>(m, "SolverConfig")
      .def(py::init<>())
      .def_readwrite("mode", &kcm::SolverConfig::mode)
      .def_readwrite("kappa0", &kcm::SolverConfig::kappa0)
      .def_readwrite("gamma0", &kcm::SolverConfig::gamma0)
      .def_readwrite("tau_tol", &kcm::SolverConfig::tau_tol)
      .def_readwrite("max_iters", &kcm::SolverConfig::max_iters)
      .def_readwrite("record_every", &kcm::SolverConfig::record_every);

  m.def("wrap_angles", [](const Eigen::VectorXd& theta) { return kcm::wrap_angles(theta).theta; },
        py::arg("theta"));

  m.def(
      "atom_positions",
      [](const kcm::ChainTopology& t, const Eigen::VectorXd& theta) {
        return to_matrix(kcm::pose(t, conformation(theta)).atom_positions);
      },
      py::arg("topology"), py::arg("theta"));

  m.def(
      "free_energy",
      [](const kcm::ChainTopology& t, const Eigen::VectorXd& theta, const kcm::ForceFieldConfig& ff) {
        const auto e = kcm::free_energy(kcm::pose(t, conformation(theta)), t, ff);
        py::dict d;
        d["elec"] = e.elec;
        d["vdw"] = e.vdw;
        d["total"] = e.total;
        return d;
      },
      py::arg("topology"), py::arg("theta"), py::arg("force_field") = kcm::ForceFieldConfig{});

  m.def(
      "atomic_forces",
      [](const kcm::ChainTopology& t, const Eigen::VectorXd& theta, const kcm::ForceFieldConfig& ff) {
        return to_matrix(kcm::atomic_forces(kcm::pose(t, conformation(theta)), t, ff));
      },
      py::arg("topology"), py::arg("theta"), py::arg("force_field") = kcm::ForceFieldConfig{});

  m.def(
      "torque",
      [](const kcm::ChainTopology& t, const Eigen::VectorXd& theta, const kcm::ForceFieldConfig& ff) {
        return kcm::torque(t, conformation(theta), ff).tau;
      },
      py::arg("topology"), py::arg("theta"), py::arg("force_field") = kcm::ForceFieldConfig{});

  m.def("conventional_step",
        [](const Eigen::VectorXd& theta, const Eigen::VectorXd& tau, double kappa0)
            -> std::optional<Eigen::VectorXd> {
          auto next = kcm::conventional_step(conformation(theta), {tau}, kappa0);
          if (!next) return std::nullopt;
          return next->theta;
        },
        py::arg("theta"), py::arg("tau"), py::arg("kappa0"));
  m.def("sgd_step",
        [](const Eigen::VectorXd& theta, const Eigen::VectorXd& tau, double kappa) {
          return kcm::sgd_step(conformation(theta), {tau}, kappa).theta;
        },
        py::arg("theta"), py::arg("tau"), py::arg("kappa"));
  m.def("schedule_geometric", &kcm::schedule_geometric, py::arg("kappa"), py::arg("gamma0"));

  py::class_<kcm::FoldingTrajectory>(m, "FoldingTrajectory")
      .def_property_readonly("terminated_by",
                             [](const kcm::FoldingTrajectory& t) { return kcm::to_string(t.terminated_by); })
      .def_property_readonly("final_theta", [](const kcm::FoldingTrajectory& t) { return t.final_theta.theta; })
      .def_readonly("energy_history", &kcm::FoldingTrajectory::energy_history)
      .def_readonly("energy_increases", &kcm::FoldingTrajectory::energy_increases)
      .def_property_readonly("kappa",
                             [](const kcm::FoldingTrajectory& t) {
                               std::vector<double> k;
                               for (const auto& r : t.records) k.push_back(r.kappa_k);
                               return k;
                             })
      .def_property_readonly("tau_norm_2",
                             [](const kcm::FoldingTrajectory& t) {
                               std::vector<double> k;
                               for (const auto& r : t.records) k.push_back(r.tau_norm_2);
                               return k;
                             })
      .def_property_readonly("iterations", &kcm::FoldingTrajectory::last_iteration)
      .def_property_readonly("oscillation_score", [](const kcm::FoldingTrajectory& t) {
        return kcm::oscillation_score(t.energy_history);
      });

  m.def(
      "run_folding",
      [](const kcm::ChainTopology& t, const Eigen::VectorXd& theta0, const kcm::SolverConfig& cfg,
         const kcm::ForceFieldConfig& ff) {
        py::gil_scoped_release release;
        return kcm::run_folding(t, conformation(theta0), cfg, ff);
      },
      py::arg("topology"), py::arg("theta0"), py::arg("solver") = kcm::SolverConfig{},
      py::arg("force_field") = kcm::ForceFieldConfig{});

  m.def("pre_coiled_alpha",
        [](const kcm::ChainTopology& t, std::uint64_t seed, double perturbation_deg) {
          return kcm::pre_coiled_alpha(t, seed, perturbation_deg).theta;
        },
        py::arg("topology"), py::arg("seed") = 1, py::arg("perturbation_deg") = 10.0);

  m.def("oscillation_score",
        [](const std::vector<double>& e) { return kcm::oscillation_score(e); }, py::arg("energies"));

  m.def(
      "normalize_config",
      [](const std::string& text) { return kcm::dump_config(kcm::parse_config(text)); },
      py::arg("text"), "Validate a JSON config and return it with every default filled in.");

  m.def(
      "fold",
      [](const std::filesystem::path& config, std::optional<std::filesystem::path> out) {
        const kcm::ExperimentConfig cfg = kcm::load_config(config);
        kcm::FoldRun run;
        {
          py::gil_scoped_release release;
          run = kcm::run_experiment(cfg);
        }
        if (out) kcm::write_outputs(run, *out);
        return summary_dict(kcm::summarize(run.trajectory));
      },
      py::arg("config"), py::arg("out") = py::none(),
      "Run the experiment in a config file; optionally write its outputs to `out`.");
}
