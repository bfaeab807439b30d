#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ksr/eigrecycle.hpp"
#include "ksr/fem.hpp"
#include "ksr/mesh.hpp"
#include "ksr/solver.hpp"
#include "ksr/transfer.hpp"

namespace ksr {

enum class ProblemKind { PoissonHole, ElasticityRod, MovingSquare };
enum class PrecondKind { None, IC0, ICT };

struct ExperimentConfig {
  ProblemKind problem = ProblemKind::PoissonHole;
  int nx = 61, ny = 61;
  std::size_t steps = 4;

  // Per-problem geometry parameters.
  double hole_dx = 0.05, hole_dy = 0.0;   // poisson-hole translation per step
  double hole_radius = 0.08;
  double curvature0 = 1.2;                // elasticity-rod initial curvature
  double straighten_rate = 0.1;           // fractional curvature drop per step
  double square_dx = 0.1;                 // moving-square shift per step

  // Solver settings.
  double tol = 1e-8;
  std::size_t maxit = 0;                  // 0: use 5 * sqrt(N)
  std::size_t k = 20;                     // recycle space dimension
  PrecondKind precond = PrecondKind::None;
  double droptol = 0.001;
  bool rcm_reorder = false;
  std::size_t window = 400;

  // Optional subspace-repair settings.
  bool ks_enabled = false;
  std::size_t ks_cycles = 2;
  std::size_t ks_m = 45;
  double ks_conv_tol = 2e-8;

  unsigned seed = 1;
  std::string output_dir;
  bool compare_cold = true;   // also solve each step without recycling
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);

std::vector<Geometry> generate_geometry_sequence(const ExperimentConfig& cfg);

// Boundary-condition setup matching the experiment.
PoissonProblem poisson_setup(const ExperimentConfig& cfg);
ElasticityProblem elasticity_setup(const ExperimentConfig& cfg);

struct StepRecord {
  std::size_t n_dofs = 0;
  SolveReport recycled;           // the chain solve (cold on step 0)
  std::optional<SolveReport> cold;  // reference solve without recycling
  std::optional<TransferReport> transfer;
  std::size_t ks_cycles_used = 0;
  Vector ks_residual_norms;
};

struct RunSummary {
  std::vector<StepRecord> steps;
  bool all_converged = true;
};

// One prepared step of a chain: mesh, assembled system, optional reordering
// and incomplete factorization, all in the coordinates the solver uses.
struct PreparedStep {
  AdaptedMesh mesh;
  AssembledSystem sys;
  std::size_t dofs_per_node = 1;
  std::vector<std::size_t> perm;      // perm[new] = old dof
  SparseSymMatrix K_solver;           // permuted operator
  std::optional<ICFactor> factor;
  Vector rhs_solver;                  // permuted, half-preconditioned rhs
};

PreparedStep prepare_step(const ExperimentConfig& cfg, const Geometry& geom);

// Map a recycle basis from the solver coordinates of one step to the solver
// coordinates of the next (nodal round trip around the mesh transfer).
std::pair<DenseColumnBlock, TransferReport> transfer_basis(
    const DenseColumnBlock& W, const PreparedStep& from,
    const PreparedStep& to);

// Solution in nodal dof coordinates from the solver-coordinate iterate.
Vector solver_to_nodal(const PreparedStep& step, const Vector& y);

RunSummary run_chain(const ExperimentConfig& cfg);

// Labelled rows of principal-angle cosines, nonincreasing per row, so
// cosine #1 is the best-aligned direction.
struct AngleTable {
  std::vector<std::pair<std::string, Vector>> rows;
};

// Invariant subspace of the `count` smallest eigenvalues via shift-inverted
// Lanczos with full reorthogonalization (inner solves by MINRES); columns are
// verified against their eigenpair residuals.
DenseColumnBlock smallest_eigenspace(const PrecondOperator& op,
                                     std::size_t count, double tol,
                                     unsigned seed);

// For the second chain step: cosines of the mapped space and of the spaces
// after 1..max_restarts repair cycles against the true 20-dim eigenspace.
AngleTable angle_report(const ExperimentConfig& cfg, std::size_t truth_dim,
                        std::size_t max_restarts);

void write_run_outputs(const RunSummary& summary, const std::string& dir);
void write_angle_table(const AngleTable& table, const std::string& path);

}  // namespace ksr
