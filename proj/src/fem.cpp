#include "ksr/fem.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace ksr {

namespace {

struct ElementGeom {
  Point g[3];    // P1 shape-function gradients
  double area;
};

ElementGeom element_geometry(const AdaptedMesh& mesh, int e) {
  const auto vs = mesh.grid.element_nodes(e);
  const Point a = mesh.node_positions[vs[0]];
  const Point b = mesh.node_positions[vs[1]];
  const Point c = mesh.node_positions[vs[2]];
  const double a2 = cross(b - a, c - a);
  if (a2 == 0.0) throw std::runtime_error("zero-area element");
  ElementGeom eg;
  eg.area = 0.5 * std::abs(a2);
  eg.g[0] = {(b.y - c.y) / a2, (c.x - b.x) / a2};
  eg.g[1] = {(c.y - a.y) / a2, (a.x - c.x) / a2};
  eg.g[2] = {(a.y - b.y) / a2, (b.x - a.x) / a2};
  return eg;
}

// Symmetric elimination of constrained dofs: rows/columns move to f, the
// original diagonal stays so the system size never changes.
AssembledSystem eliminate(const SparseSymMatrix& K, Vector f,
                          std::vector<char> constrained,
                          std::vector<double> value, int dofs_per_node,
                          bool apply_constraints) {
  AssembledSystem sys;
  sys.dofs_per_node = dofs_per_node;
  if (!apply_constraints) {
    sys.K = K;
    sys.f = std::move(f);
    sys.constrained.assign(K.n(), 0);
    sys.constrained_value.assign(K.n(), 0.0);
    return sys;
  }
  TripletBuilder tb(K.n());
  const auto& ro = K.row_offsets();
  const auto& ci = K.col_indices();
  const auto& vv = K.values();
  for (std::size_t i = 0; i < K.n(); ++i) {
    if (constrained[i]) {
      double diag = K.entry(i, i);
      if (diag == 0.0) diag = 1.0;
      tb.add(i, i, diag);
      f[i] = diag * value[i];
      continue;
    }
    for (std::size_t p = ro[i]; p < ro[i + 1]; ++p) {
      const std::size_t j = ci[p];
      if (constrained[j])
        f[i] -= vv[p] * value[j];
      else
        tb.add(i, j, vv[p]);
    }
  }
  sys.K = tb.build();
  sys.f = std::move(f);
  sys.constrained = std::move(constrained);
  sys.constrained_value = std::move(value);
  return sys;
}

}  // namespace

AssembledSystem assemble_poisson(const AdaptedMesh& mesh,
                                 const PoissonProblem& prob,
                                 bool apply_constraints) {
  const std::size_t n = mesh.num_active_nodes;
  TripletBuilder tb(n);
  Vector f(n, 0.0);

  for (int e : mesh.active_elements) {
    const auto vs = mesh.grid.element_nodes(e);
    const ElementGeom eg = element_geometry(mesh, e);
    int dof[3];
    for (int s = 0; s < 3; ++s) dof[s] = mesh.active_index[vs[s]];
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        tb.add(dof[r], dof[c],
               prob.conductivity * eg.area * dot(eg.g[r], eg.g[c]));
    if (prob.source) {
      const Point cen = (1.0 / 3.0) * (mesh.node_positions[vs[0]] +
                                       mesh.node_positions[vs[1]] +
                                       mesh.node_positions[vs[2]]);
      const double load = eg.area / 3.0 * prob.source(cen);
      for (int s = 0; s < 3; ++s) f[dof[s]] += load;
    }
  }

  std::vector<char> constrained(n, 0);
  std::vector<double> value(n, 0.0);
  for (const auto& be : mesh.boundary_edges) {
    const auto it = prob.bc.find(be.tag);
    if (it == prob.bc.end())
      throw std::runtime_error("untagged boundary edge, tag " +
                               std::to_string(be.tag));
    const BoundaryCondition& bc = it->second;
    const int da = mesh.active_index[be.a], db = mesh.active_index[be.b];
    const double len =
        dist(mesh.node_positions[be.a], mesh.node_positions[be.b]);
    switch (bc.kind) {
      case BoundaryKind::Neumann:
        break;
      case BoundaryKind::Robin:
        tb.add(da, da, bc.alpha * len / 3.0);
        tb.add(db, db, bc.alpha * len / 3.0);
        tb.add(da, db, bc.alpha * len / 6.0);
        tb.add(db, da, bc.alpha * len / 6.0);
        f[da] += bc.alpha * bc.ambient * len / 2.0;
        f[db] += bc.alpha * bc.ambient * len / 2.0;
        break;
      case BoundaryKind::Dirichlet:
        for (int d : {da, db}) {
          if (!constrained[d]) {
            constrained[d] = 1;
            value[d] = bc.value;
          }
        }
        break;
    }
  }

  return eliminate(tb.build(), std::move(f), std::move(constrained),
                   std::move(value), 1, apply_constraints);
}

AssembledSystem assemble_elasticity(const AdaptedMesh& mesh,
                                    const ElasticityProblem& prob,
                                    bool apply_constraints) {
  if (prob.poisson_ratio < 0.0 || prob.poisson_ratio >= 0.5)
    throw std::invalid_argument("poisson ratio out of range");
  if (prob.youngs_modulus <= 0.0 || prob.thickness <= 0.0)
    throw std::invalid_argument("material constants must be positive");

  const std::size_t n = 2 * static_cast<std::size_t>(mesh.num_active_nodes);
  TripletBuilder tb(n);
  Vector f(n, 0.0);

  const double E = prob.youngs_modulus, nu = prob.poisson_ratio;
  const double d0 = E / (1.0 - nu * nu);
  // Plane-stress constitutive matrix.
  const double D[3][3] = {{d0, d0 * nu, 0.0},
                          {d0 * nu, d0, 0.0},
                          {0.0, 0.0, d0 * (1.0 - nu) / 2.0}};

  for (int e : mesh.active_elements) {
    const auto vs = mesh.grid.element_nodes(e);
    const ElementGeom eg = element_geometry(mesh, e);
    double B[3][6] = {};
    for (int s = 0; s < 3; ++s) {
      B[0][2 * s] = eg.g[s].x;
      B[1][2 * s + 1] = eg.g[s].y;
      B[2][2 * s] = eg.g[s].y;
      B[2][2 * s + 1] = eg.g[s].x;
    }
    double DB[3][6];
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 6; ++c)
        DB[r][c] = D[r][0] * B[0][c] + D[r][1] * B[1][c] + D[r][2] * B[2][c];
    int dof[6];
    for (int s = 0; s < 3; ++s) {
      dof[2 * s] = 2 * mesh.active_index[vs[s]];
      dof[2 * s + 1] = dof[2 * s] + 1;
    }
    const double scale = prob.thickness * eg.area;
    // Upper triangle mirrored so K is exactly symmetric in floating point.
    for (int r = 0; r < 6; ++r)
      for (int c = r; c < 6; ++c) {
        double k = 0.0;
        for (int m = 0; m < 3; ++m) k += B[m][r] * DB[m][c];
        tb.add(dof[r], dof[c], scale * k);
        if (c != r) tb.add(dof[c], dof[r], scale * k);
      }
  }

  std::vector<char> constrained(n, 0);
  std::vector<double> value(n, 0.0);
  for (const auto& be : mesh.boundary_edges) {
    const int na = mesh.active_index[be.a], nb = mesh.active_index[be.b];
    const Point pa = mesh.node_positions[be.a], pb = mesh.node_positions[be.b];
    const double len = dist(pa, pb);
    if (const auto it = prob.traction.find(be.tag); it != prob.traction.end()) {
      for (int c = 0; c < 2; ++c) {
        f[2 * na + c] += prob.thickness * it->second[c] * len / 2.0;
        f[2 * nb + c] += prob.thickness * it->second[c] * len / 2.0;
      }
    }
    const bool clamp = prob.clamped.count(be.tag) > 0;
    const bool presc = prob.prescribed_tags.count(be.tag) > 0;
    if (clamp || presc) {
      const int nodes[2] = {na, nb};
      const Point pos[2] = {pa, pb};
      for (int s = 0; s < 2; ++s) {
        std::array<double, 2> u = {0.0, 0.0};
        if (presc && prob.prescribed) u = prob.prescribed(pos[s]);
        for (int c = 0; c < 2; ++c) {
          if (!constrained[2 * nodes[s] + c]) {
            constrained[2 * nodes[s] + c] = 1;
            value[2 * nodes[s] + c] = u[c];
          }
        }
      }
    }
  }
  if (apply_constraints &&
      std::none_of(constrained.begin(), constrained.end(),
                   [](char c) { return c != 0; }))
    throw std::runtime_error("no clamped dofs; elasticity system is singular");

  return eliminate(tb.build(), std::move(f), std::move(constrained),
                   std::move(value), 2, apply_constraints);
}

}  // namespace ksr
