// Python bindings for the recycling-solver harness: configuration-driven
// chain runs, principal-angle tables, and direct Matrix Market solves.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "ksr/factor.hpp"
#include "ksr/harness.hpp"
#include "ksr/solver.hpp"
#include "ksr/sparse.hpp"

namespace py = pybind11;

namespace {

py::dict step_to_dict(const ksr::StepRecord& s) {
  py::dict d;
  d["n_dofs"] = s.n_dofs;
  d["iterations"] = s.recycled.iterations;
  d["converged"] = s.recycled.converged;
  d["residual_history"] = s.recycled.residual_history;
  if (s.cold) d["cold_iterations"] = s.cold->iterations;
  if (s.transfer) {
    py::dict t;
    t["stable"] = s.transfer->stable;
    t["recomputed"] = s.transfer->recomputed;
    t["newly_active"] = s.transfer->newly_active;
    t["newly_inactive"] = s.transfer->newly_inactive;
    t["zero_fallbacks"] = s.transfer->zero_fallbacks;
    d["transfer"] = t;
  }
  if (s.ks_cycles_used > 0) {
    d["ks_cycles"] = s.ks_cycles_used;
    d["ks_residual_norms"] = s.ks_residual_norms;
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_ksrecycle, m) {
  m.doc() =
      "Krylov subspace recycling over evolving finite-element meshes: "
      "solve chains with subspace transfer and warm-started repair.";

  m.def(
      "run_chain",
      [](const std::string& config_json) {
        const ksr::ExperimentConfig cfg = ksr::parse_config(config_json);
        const ksr::RunSummary s = ksr::run_chain(cfg);
        py::list steps;
        for (const auto& rec : s.steps) steps.append(step_to_dict(rec));
        py::dict out;
        out["steps"] = steps;
        out["all_converged"] = s.all_converged;
        return out;
      },
      py::arg("config_json"),
      "Run a configured geometry chain; returns per-step solve and "
      "transfer statistics.");

  m.def(
      "angle_report",
      [](const std::string& config_json, std::size_t truth_dim,
         std::size_t restarts) {
        const ksr::ExperimentConfig cfg = ksr::parse_config(config_json);
        const ksr::AngleTable t = ksr::angle_report(cfg, truth_dim, restarts);
        py::list rows;
        for (const auto& [label, row] : t.rows)
          rows.append(py::make_tuple(label, row));
        return rows;
      },
      py::arg("config_json"), py::arg("truth_dim") = 20,
      py::arg("restarts") = 2,
      "Principal-angle cosines of the mapped and repaired subspaces "
      "against the reference eigenspace of the second chain step.");

  m.def(
      "solve_matrix_market",
      [](const std::string& path, std::vector<double> rhs, double tol,
         std::size_t maxit) {
        const ksr::SparseSymMatrix K = ksr::read_matrix_market_file(path);
        if (rhs.empty()) rhs.assign(K.n(), 1.0);
        if (rhs.size() != K.n())
          throw std::invalid_argument("rhs size does not match the matrix");
        const ksr::PrecondOperator op{&K, nullptr};
        auto [u, rep] =
            ksr::minres(op, rhs, ksr::Vector(K.n(), 0.0), tol, maxit);
        py::dict out;
        out["solution"] = u;
        out["iterations"] = rep.iterations;
        out["converged"] = rep.converged;
        out["residual_history"] = rep.residual_history;
        return out;
      },
      py::arg("path"), py::arg("rhs") = std::vector<double>{},
      py::arg("tol") = 1e-8, py::arg("maxit") = 1000,
      "MINRES on a symmetric Matrix Market file (all-ones right-hand side "
      "by default).");

  m.def(
      "principal_angle_cosines",
      [](const std::vector<std::vector<double>>& a_cols,
         const std::vector<std::vector<double>>& b_cols) {
        return ksr::principal_angles(
            ksr::DenseColumnBlock::from_columns(a_cols),
            ksr::DenseColumnBlock::from_columns(b_cols));
      },
      py::arg("a_columns"), py::arg("b_columns"),
      "Cosines of the principal angles between the column spans, "
      "nonincreasing.");
}
