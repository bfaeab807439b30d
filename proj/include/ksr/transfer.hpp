#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "ksr/dense.hpp"
#include "ksr/mesh.hpp"
#include "ksr/precond.hpp"

namespace ksr {

enum class NodeClass {
  Stable,         // active in both meshes at the same position: value copied
  StatusChanged,  // position or interior/boundary status changed: recomputed
  NewlyActive,    // extrapolated from previously-active neighbors
  NewlyInactive,  // row dropped
};

// Per-background-node classification across two meshes on one grid; covers
// exactly the union of the two active node sets, ascending node id.
struct NodeCorrespondence {
  std::vector<std::pair<int, NodeClass>> nodes;
};

NodeCorrespondence classify_nodes(const AdaptedMesh& mesh_i,
                                  const AdaptedMesh& mesh_ip1,
                                  bool paper_literal_case2 = false);

struct TransferReport {
  std::size_t stable = 0;
  std::size_t recomputed = 0;
  std::size_t newly_active = 0;
  std::size_t newly_inactive = 0;
  std::vector<int> extrapolated;  // background ids filled by weighted means
  // Fallbacks for newly active nodes with too few previously-active neighbors.
  std::size_t single_neighbor_fallbacks = 0;
  std::size_t zero_fallbacks = 0;
  std::vector<int> zero_fallback_nodes;
  Vector column_norm_change;  // per column, ||mapped|| / ||input||
};

// Inverse-distance extrapolation weights: neighbor s gets
// (sum_m d_m - d_s) / ((|S|-1) sum_m d_m); they sum to one.
Vector extrapolation_weights(const Vector& distances);

// Fast path for two meshes sharing one background grid. Stable nodes copy,
// moved or status-changed nodes re-interpolate on the old mesh at the
// projected new position, newly active nodes extrapolate from background
// neighbors that were active. Vector-valued problems (dofs_per_node > 1,
// interleaved) map each component independently.
std::pair<DenseColumnBlock, TransferReport> map_subspace_structured(
    const DenseColumnBlock& W, const AdaptedMesh& mesh_i,
    const AdaptedMesh& mesh_ip1, std::size_t dofs_per_node = 1,
    bool paper_literal_case2 = false);

// General path: every active node of the target mesh takes the P1 value of
// the source mesh at the projection of its position onto the source domain.
DenseColumnBlock map_subspace_generic(const DenseColumnBlock& W,
                                      const AdaptedMesh& mesh_i,
                                      const AdaptedMesh& mesh_ip1,
                                      std::size_t dofs_per_node = 1);

enum class CoordinateDirection {
  ToNodal,          // x = L^{-T} w per column
  ToPreconditioned  // w = L^T x per column
};

// Change of variables between split-preconditioned and nodal coordinates;
// identity when no factor is given.
DenseColumnBlock change_precond_coordinates(const DenseColumnBlock& W,
                                            const ICFactor* factor,
                                            CoordinateDirection direction);

}  // namespace ksr
