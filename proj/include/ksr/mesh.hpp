#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace ksr {

struct Point {
  double x = 0.0, y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point a) { return std::sqrt(dot(a, a)); }
inline double dist(Point a, Point b) { return norm(a - b); }

// Closed polyline curves; curve 0 is the outer boundary, the rest are holes.
// Segment s of curve c joins vertex s to vertex (s+1) mod size.
struct Geometry {
  std::vector<std::vector<Point>> curves;
  // Per-curve, per-segment integer tags; when empty the curve index is the tag.
  std::vector<std::vector<int>> segment_tags;

  int tag_of(std::size_t curve, std::size_t segment) const;
};

// Thrown when a geometry feature is too small for the grid or snapping
// produces a degenerate element.
struct ResolutionError : std::runtime_error {
  explicit ResolutionError(const std::string& what) : std::runtime_error(what) {}
};

struct BackgroundGrid {
  int nx = 0, ny = 0;
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  double hx() const { return (x1 - x0) / (nx - 1); }
  double hy() const { return (y1 - y0) / (ny - 1); }
  int num_nodes() const { return nx * ny; }
  int num_elements() const { return 2 * (nx - 1) * (ny - 1); }
  int node_id(int i, int j) const { return j * nx + i; }
  Point node(int id) const {
    return {x0 + (id % nx) * hx(), y0 + (id / nx) * hy()};
  }
  // Cells split along the (i,j)->(i+1,j+1) diagonal; element 2*cell is the
  // lower-right triangle, 2*cell+1 the upper-left one, both counterclockwise.
  std::array<int, 3> element_nodes(int e) const;
  // Unique edge numbering: all horizontal edges first (row-major), then
  // vertical, then diagonal.  Pairs are returned with the lower node id first.
  int num_edges() const {
    return ny * (nx - 1) + (ny - 1) * nx + (ny - 1) * (nx - 1);
  }
  std::array<int, 2> edge_nodes(int edge) const;
};

BackgroundGrid build_background_grid(double x0, double y0, double x1, double y1,
                                     int nx, int ny);

enum class NodeStatus { Inactive, InteriorActive, BoundaryActive };

struct AdaptedMesh {
  BackgroundGrid grid;
  Geometry geometry;
  std::vector<Point> node_positions;  // background numbering, possibly snapped
  std::vector<char> moved;
  std::vector<NodeStatus> node_status;
  std::vector<int> active_elements;  // ascending element ids
  std::vector<char> element_active;  // per background element
  std::vector<int> active_index;     // background id -> active row, -1 inactive
  int num_active_nodes = 0;

  struct BoundaryEdge {
    int a = 0, b = 0;  // background node ids, a < b
    int tag = 0;
  };
  std::vector<BoundaryEdge> boundary_edges;  // lexicographic by (a, b)
};

AdaptedMesh adapt_to_boundary(const BackgroundGrid& grid, const Geometry& geom);

// Active element whose closed triangle contains p, lowest id on ties; -1 if none.
int locate_point(const AdaptedMesh& mesh, Point p);
double evaluate_p1(const AdaptedMesh& mesh, const std::vector<double>& coeffs,
                   Point p);
// Identity on the active region, otherwise the nearest point on the active
// boundary (per-edge minimum, ties by lowest boundary-edge id).
Point nearest_point_projection(const AdaptedMesh& mesh, Point p);

bool point_in_domain(const Geometry& geom, Point p);
double distance_to_curves(const Geometry& geom, Point p);
int nearest_segment_tag(const Geometry& geom, Point p);

void write_mesh_text(const AdaptedMesh& mesh, const std::string& path);

double point_segment_distance(Point p, Point a, Point b,
                              double* t_out = nullptr);
// Proper intersection of segments p0-p1 and q0-q1; writes parameters along
// each segment.  Parallel segments report no intersection.
bool segment_intersection(Point p0, Point p1, Point q0, Point q1,
                          double* t_out, double* s_out);

}  // namespace ksr
