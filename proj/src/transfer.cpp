#include "ksr/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ksr {

namespace {

// The six background nodes sharing an element with (i, j); cells split along
// the (i, j) -> (i+1, j+1) diagonal.
void grid_neighbors(const BackgroundGrid& g, int id, std::vector<int>& out) {
  out.clear();
  const int i = id % g.nx, j = id / g.nx;
  static constexpr int off[6][2] = {{-1, 0}, {1, 0},  {0, -1},
                                    {0, 1},  {1, 1},  {-1, -1}};
  for (const auto& o : off) {
    const int ii = i + o[0], jj = j + o[1];
    if (ii >= 0 && ii < g.nx && jj >= 0 && jj < g.ny)
      out.push_back(g.node_id(ii, jj));
  }
}

bool same_grid(const AdaptedMesh& a, const AdaptedMesh& b) {
  return a.grid.nx == b.grid.nx && a.grid.ny == b.grid.ny &&
         a.grid.x0 == b.grid.x0 && a.grid.y0 == b.grid.y0 &&
         a.grid.x1 == b.grid.x1 && a.grid.y1 == b.grid.y1;
}

bool position_unchanged(const AdaptedMesh& a, const AdaptedMesh& b, int id) {
  if (!a.moved[id] && !b.moved[id]) return true;
  const double cell = std::min(a.grid.hx(), a.grid.hy());
  return dist(a.node_positions[id], b.node_positions[id]) <= 1e-12 * cell;
}

bool is_recomputed(const AdaptedMesh& a, const AdaptedMesh& b, int id,
                   bool paper_literal) {
  const bool status_changed = a.node_status[id] != b.node_status[id];
  if (paper_literal) return status_changed;
  return status_changed || !position_unchanged(a, b, id);
}

// Element and barycentric weights of the source mesh at p (projected first).
struct EvalPoint {
  int element = -1;
  std::array<int, 3> rows{};  // active row indices of the vertices
  double bary[3] = {0.0, 0.0, 0.0};
};

EvalPoint locate_for_eval(const AdaptedMesh& mesh, Point p) {
  const Point q = nearest_point_projection(mesh, p);
  const int e = locate_point(mesh, q);
  if (e < 0) throw std::runtime_error("transfer: projected point not located");
  EvalPoint ev;
  ev.element = e;
  const auto vs = mesh.grid.element_nodes(e);
  const Point a = mesh.node_positions[vs[0]];
  const Point b = mesh.node_positions[vs[1]];
  const Point c = mesh.node_positions[vs[2]];
  const double den = cross(b - a, c - a);
  ev.bary[1] = cross(q - a, c - a) / den;
  ev.bary[2] = cross(b - a, q - a) / den;
  ev.bary[0] = 1.0 - ev.bary[1] - ev.bary[2];
  for (int s = 0; s < 3; ++s) ev.rows[s] = mesh.active_index[vs[s]];
  return ev;
}

}  // namespace

Vector extrapolation_weights(const Vector& distances) {
  const std::size_t s = distances.size();
  if (s < 2)
    throw std::invalid_argument("extrapolation_weights: need >= 2 neighbors");
  double total = 0.0;
  for (double d : distances) {
    if (d < 0.0)
      throw std::invalid_argument("extrapolation_weights: negative distance");
    total += d;
  }
  Vector w(s);
  if (total == 0.0) {
    std::fill(w.begin(), w.end(), 1.0 / double(s));
    return w;
  }
  for (std::size_t i = 0; i < s; ++i)
    w[i] = (total - distances[i]) / (double(s - 1) * total);
  return w;
}

NodeCorrespondence classify_nodes(const AdaptedMesh& mesh_i,
                                  const AdaptedMesh& mesh_ip1,
                                  bool paper_literal_case2) {
  if (!same_grid(mesh_i, mesh_ip1))
    throw std::invalid_argument("classify_nodes: meshes on different grids");
  NodeCorrespondence nc;
  const int n = mesh_i.grid.num_nodes();
  for (int id = 0; id < n; ++id) {
    const bool a = mesh_i.node_status[id] != NodeStatus::Inactive;
    const bool b = mesh_ip1.node_status[id] != NodeStatus::Inactive;
    if (!a && !b) continue;
    NodeClass cls;
    if (a && !b) cls = NodeClass::NewlyInactive;
    else if (!a && b) cls = NodeClass::NewlyActive;
    else if (is_recomputed(mesh_i, mesh_ip1, id, paper_literal_case2))
      cls = NodeClass::StatusChanged;
    else cls = NodeClass::Stable;
    nc.nodes.emplace_back(id, cls);
  }
  return nc;
}

std::pair<DenseColumnBlock, TransferReport> map_subspace_structured(
    const DenseColumnBlock& W, const AdaptedMesh& mesh_i,
    const AdaptedMesh& mesh_ip1, std::size_t dofs_per_node,
    bool paper_literal_case2) {
  if (dofs_per_node == 0)
    throw std::invalid_argument("map_subspace_structured: dofs_per_node");
  if (W.rows() != std::size_t(mesh_i.num_active_nodes) * dofs_per_node)
    throw std::invalid_argument("map_subspace_structured: row count mismatch");
  if (W.cols() == 0)
    throw std::invalid_argument("map_subspace_structured: empty block");

  const NodeCorrespondence nc =
      classify_nodes(mesh_i, mesh_ip1, paper_literal_case2);
  const std::size_t cols = W.cols();
  DenseColumnBlock out(std::size_t(mesh_ip1.num_active_nodes) * dofs_per_node,
                       cols);
  TransferReport rep;

  std::vector<int> nbr;
  std::vector<int> srows;
  for (const auto& [id, cls] : nc.nodes) {
    switch (cls) {
      case NodeClass::NewlyInactive:
        ++rep.newly_inactive;
        break;
      case NodeClass::Stable: {
        ++rep.stable;
        const std::size_t src = std::size_t(mesh_i.active_index[id]);
        const std::size_t dst = std::size_t(mesh_ip1.active_index[id]);
        for (std::size_t c = 0; c < cols; ++c)
          for (std::size_t d = 0; d < dofs_per_node; ++d)
            out(dst * dofs_per_node + d, c) = W(src * dofs_per_node + d, c);
        break;
      }
      case NodeClass::StatusChanged: {
        ++rep.recomputed;
        const EvalPoint ev =
            locate_for_eval(mesh_i, mesh_ip1.node_positions[id]);
        const std::size_t dst = std::size_t(mesh_ip1.active_index[id]);
        for (std::size_t c = 0; c < cols; ++c)
          for (std::size_t d = 0; d < dofs_per_node; ++d) {
            double v = 0.0;
            for (int s = 0; s < 3; ++s)
              v += ev.bary[s] *
                   W(std::size_t(ev.rows[s]) * dofs_per_node + d, c);
            out(dst * dofs_per_node + d, c) = v;
          }
        break;
      }
      case NodeClass::NewlyActive: {
        ++rep.newly_active;
        grid_neighbors(mesh_i.grid, id, nbr);
        srows.clear();
        Vector dists;
        for (int nb : nbr)
          if (mesh_i.node_status[nb] != NodeStatus::Inactive) {
            srows.push_back(mesh_i.active_index[nb]);
            dists.push_back(
                dist(mesh_i.node_positions[nb], mesh_ip1.node_positions[id]));
          }
        const std::size_t dst = std::size_t(mesh_ip1.active_index[id]);
        if (srows.size() >= 2) {
          rep.extrapolated.push_back(id);
          const Vector w = extrapolation_weights(dists);
          for (std::size_t c = 0; c < cols; ++c)
            for (std::size_t d = 0; d < dofs_per_node; ++d) {
              double v = 0.0;
              for (std::size_t s = 0; s < srows.size(); ++s)
                v += w[s] * W(std::size_t(srows[s]) * dofs_per_node + d, c);
              out(dst * dofs_per_node + d, c) = v;
            }
        } else if (srows.size() == 1) {
          ++rep.single_neighbor_fallbacks;
          for (std::size_t c = 0; c < cols; ++c)
            for (std::size_t d = 0; d < dofs_per_node; ++d)
              out(dst * dofs_per_node + d, c) =
                  W(std::size_t(srows[0]) * dofs_per_node + d, c);
        } else {
          ++rep.zero_fallbacks;
          rep.zero_fallback_nodes.push_back(id);
          // Rows stay zero.
        }
        break;
      }
    }
  }

  rep.column_norm_change.resize(cols);
  for (std::size_t c = 0; c < cols; ++c) {
    const double nin = norm2(W.col(c));
    rep.column_norm_change[c] =
        (nin > 0.0) ? norm2(out.col(c)) / nin : 0.0;
  }
  return {std::move(out), std::move(rep)};
}

DenseColumnBlock map_subspace_generic(const DenseColumnBlock& W,
                                      const AdaptedMesh& mesh_i,
                                      const AdaptedMesh& mesh_ip1,
                                      std::size_t dofs_per_node) {
  if (dofs_per_node == 0)
    throw std::invalid_argument("map_subspace_generic: dofs_per_node");
  if (W.rows() != std::size_t(mesh_i.num_active_nodes) * dofs_per_node)
    throw std::invalid_argument("map_subspace_generic: row count mismatch");
  const std::size_t cols = W.cols();
  DenseColumnBlock out(std::size_t(mesh_ip1.num_active_nodes) * dofs_per_node,
                       cols);
  const int n = mesh_ip1.grid.num_nodes();
  for (int id = 0; id < n; ++id) {
    if (mesh_ip1.node_status[id] == NodeStatus::Inactive) continue;
    const EvalPoint ev = locate_for_eval(mesh_i, mesh_ip1.node_positions[id]);
    const std::size_t dst = std::size_t(mesh_ip1.active_index[id]);
    for (std::size_t c = 0; c < cols; ++c)
      for (std::size_t d = 0; d < dofs_per_node; ++d) {
        double v = 0.0;
        for (int s = 0; s < 3; ++s)
          v += ev.bary[s] * W(std::size_t(ev.rows[s]) * dofs_per_node + d, c);
        out(dst * dofs_per_node + d, c) = v;
      }
  }
  return out;
}

DenseColumnBlock change_precond_coordinates(const DenseColumnBlock& W,
                                            const ICFactor* factor,
                                            CoordinateDirection direction) {
  if (!factor) return W;
  const LowerTriangular& L = factor->L;
  if (W.rows() != L.n)
    throw std::invalid_argument("change_precond_coordinates: size mismatch");
  DenseColumnBlock out(W.rows(), W.cols());
  for (std::size_t c = 0; c < W.cols(); ++c) {
    if (direction == CoordinateDirection::ToNodal) {
      out.set_col(c, lower_transpose_solve(L, W.col(c)));
    } else {
      // y = L^T x: scatter each stored entry (i, j) as y[j] += L_ij x_i.
      Vector y(L.n, 0.0);
      const auto x = W.col(c);
      for (std::size_t i = 0; i < L.n; ++i)
        for (std::size_t p = L.row_offsets[i]; p < L.row_offsets[i + 1]; ++p)
          y[L.col_indices[p]] += L.values[p] * x[i];
      out.set_col(c, y);
    }
  }
  return out;
}

}  // namespace ksr
