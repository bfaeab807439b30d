#pragma once

#include <array>
#include <functional>
#include <map>
#include <set>

#include "ksr/mesh.hpp"
#include "ksr/sparse.hpp"

namespace ksr {

enum class BoundaryKind { Neumann, Robin, Dirichlet };

struct BoundaryCondition {
  BoundaryKind kind = BoundaryKind::Neumann;
  double alpha = 0.0;    // Robin coefficient
  double ambient = 0.0;  // Robin ambient value
  double value = 0.0;    // Dirichlet value
};

struct PoissonProblem {
  double conductivity = 1.0;
  std::function<double(Point)> source;      // nullptr means zero
  std::map<int, BoundaryCondition> bc;      // by boundary-edge tag
};

struct ElasticityProblem {
  double youngs_modulus = 1.0;
  double poisson_ratio = 0.3;
  double thickness = 1.0;
  std::map<int, std::array<double, 2>> traction;  // force/length by tag
  std::set<int> clamped;                          // tags with zero displacement
  // Optional prescribed displacement on additional tags (patch tests).
  std::set<int> prescribed_tags;
  std::function<std::array<double, 2>(Point)> prescribed;
};

struct AssembledSystem {
  SparseSymMatrix K;  // over all active dofs; constrained rows kept diagonal
  Vector f;
  int dofs_per_node = 1;
  // dof index = dofs_per_node * active_index + component
  std::vector<char> constrained;  // per dof
  std::vector<double> constrained_value;
};

// P1 stiffness with exact linear-triangle integration; Robin terms add
// alpha * edge mass to K and alpha * g * edge load to f; Dirichlet dofs are
// eliminated symmetrically (row/column moved to f, original diagonal kept).
AssembledSystem assemble_poisson(const AdaptedMesh& mesh,
                                 const PoissonProblem& prob,
                                 bool apply_constraints = true);

// Plane-stress constant-strain triangles, two dofs per node (node-major
// interleaved); traction integrated edge-wise; clamped dofs eliminated.
AssembledSystem assemble_elasticity(const AdaptedMesh& mesh,
                                    const ElasticityProblem& prob,
                                    bool apply_constraints = true);

}  // namespace ksr
