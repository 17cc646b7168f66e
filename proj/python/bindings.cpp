#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "decomp/cli.hpp"
#include "decomp/error.hpp"
#include "decomp/mc.hpp"
#include "decomp/spectral.hpp"

namespace py = pybind11;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of decomp_solve";

  py::register_exception<decomp::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<decomp::InputError>(m, "InputError", PyExc_ValueError);

  m.def(
      "run",
      [](const std::string& command, const std::string& config_text) {
        decomp::cli::CommandResult r;
        {
          py::gil_scoped_release release;
          r = decomp::cli::run_command_text(command, config_text);
        }
        return py::make_tuple(r.exit_code, r.report.dump());
      },
      py::arg("command"), py::arg("config_text"),
      "Runs a command on config text; returns (exit_code, report JSON text).");

  m.def(
      "contraction_split",
      [](const Eigen::MatrixXd& phi, double tol) {
        const decomp::ContractionSplit s = decomp::contraction_split(decomp::LinearMap(phi), tol);
        py::dict out;
        out["projector"] = s.projector;
        out["contraction_basis"] = s.contraction_basis;
        out["complement_basis"] = s.complement_basis;
        out["contraction_rate"] = s.contraction_rate;
        out["decay_constant"] = s.decay_constant;
        return out;
      },
      py::arg("phi"), py::arg("tol") = 1e-8);

  m.def(
      "stationary_covariance",
      [](const Eigen::MatrixXd& phi, const Eigen::MatrixXd& a) {
        return decomp::lyapunov_fixed_point(decomp::LinearMap(phi), a);
      },
      py::arg("phi"), py::arg("cov"), "Solves B = A + phi B phi^T.");

  m.def(
      "energy_distance_test",
      [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int permutations, std::uint64_t seed) {
        const decomp::TwoSampleResult r = decomp::energy_distance_test(a, b, permutations, seed);
        return py::make_tuple(r.statistic, r.p_value);
      },
      py::arg("a"), py::arg("b"), py::arg("permutations") = 500, py::arg("seed") = 0,
      "Energy statistic and permutation p-value.");

  m.attr("EXIT_OK") = decomp::cli::kExitOk;
  m.attr("EXIT_INPUT") = decomp::cli::kExitInput;
  m.attr("EXIT_INTERNAL") = decomp::cli::kExitInternal;
  m.attr("EXIT_NOT_EXISTS") = decomp::cli::kExitNotExists;
  m.attr("EXIT_UNDETERMINED") = decomp::cli::kExitUndetermined;
  m.attr("EXIT_VERIFY_FAILED") = decomp::cli::kExitVerifyFailed;
}
