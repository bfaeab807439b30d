// Command-line driver for recycling-solver experiment chains.
//
//   run           solve a geometry chain and write CSV reports
//   angles        principal-angle table of mapped / repaired subspaces
//   export-matrix write one step's assembled operator and right-hand side

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include "ksr/harness.hpp"
#include "ksr/sparse.hpp"

namespace {

int cmd_run(const std::string& config_path) {
  const ksr::ExperimentConfig cfg = ksr::load_config(config_path);
  const ksr::RunSummary summary = ksr::run_chain(cfg);
  for (std::size_t i = 0; i < summary.steps.size(); ++i) {
    const ksr::StepRecord& s = summary.steps[i];
    std::printf("step %zu: n=%zu iterations=%zu%s", i, s.n_dofs,
                s.recycled.iterations,
                s.recycled.converged ? "" : " (NOT CONVERGED)");
    if (s.cold) std::printf(" cold=%zu", s.cold->iterations);
    if (s.ks_cycles_used > 0)
      std::printf(" ks_cycles=%zu", s.ks_cycles_used);
    std::printf("\n");
  }
  if (!cfg.output_dir.empty())
    std::printf("reports written to %s\n", cfg.output_dir.c_str());
  if (!summary.all_converged) {
    std::fprintf(stderr, "error: at least one step did not converge\n");
    return 2;
  }
  return 0;
}

int cmd_angles(const std::string& config_path, std::size_t truth_dim,
               std::size_t restarts) {
  const ksr::ExperimentConfig cfg = ksr::load_config(config_path);
  const ksr::AngleTable table = ksr::angle_report(cfg, truth_dim, restarts);
  for (const auto& [label, row] : table.rows) {
    std::printf("%-10s", label.c_str());
    for (double v : row) std::printf(" %10.8f", v);
    std::printf("\n");
  }
  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    const std::string path =
        (std::filesystem::path(cfg.output_dir) / "angles.csv").string();
    ksr::write_angle_table(table, path);
    std::printf("angle table written to %s\n", path.c_str());
  }
  return 0;
}

int cmd_export(const std::string& config_path, std::size_t step_index,
               std::string out_prefix) {
  ksr::ExperimentConfig cfg = ksr::load_config(config_path);
  if (step_index >= cfg.steps)
    throw std::invalid_argument("export-matrix: step out of range");
  const auto geoms = ksr::generate_geometry_sequence(cfg);
  const ksr::PreparedStep step = ksr::prepare_step(cfg, geoms[step_index]);
  if (out_prefix.empty())
    out_prefix = "step" + std::to_string(step_index);
  const std::string mtx = out_prefix + ".mtx";
  ksr::write_matrix_market(mtx, step.sys.K);
  const std::string rhs = out_prefix + "_rhs.txt";
  std::ofstream out(rhs);
  out.precision(17);
  for (double v : step.sys.f) out << v << '\n';
  std::printf("wrote %s (%zu x %zu, %zu nonzeros) and %s\n", mtx.c_str(),
              step.sys.K.n(), step.sys.K.n(), step.sys.K.nnz(), rhs.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Krylov subspace recycling over evolving finite-element meshes"};
  app.require_subcommand(1);

  std::string config_path;
  std::size_t step_index = 0;
  std::size_t truth_dim = 20;
  std::size_t restarts = 2;
  std::string out_prefix;

  CLI::App* run = app.add_subcommand("run", "solve a configured chain");
  run->add_option("--config", config_path, "JSON configuration file")
      ->required();

  CLI::App* angles =
      app.add_subcommand("angles", "principal-angle table for step 1 spaces");
  angles->add_option("--config", config_path, "JSON configuration file")
      ->required();
  angles->add_option("--truth-dim", truth_dim,
                     "dimension of the reference eigenspace");
  angles->add_option("--restarts", restarts, "repair cycles to tabulate");

  CLI::App* exp =
      app.add_subcommand("export-matrix", "write one step's system to disk");
  exp->add_option("--config", config_path, "JSON configuration file")
      ->required();
  exp->add_option("--step", step_index, "step index to export")->required();
  exp->add_option("--output", out_prefix, "output file prefix");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path);
    if (angles->parsed()) return cmd_angles(config_path, truth_dim, restarts);
    if (exp->parsed()) return cmd_export(config_path, step_index, out_prefix);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
