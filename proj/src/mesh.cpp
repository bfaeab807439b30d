#include "ksr/mesh.hpp"

#include <algorithm>
#include <fstream>
#include <map>

namespace ksr {

int Geometry::tag_of(std::size_t curve, std::size_t segment) const {
  if (curve < segment_tags.size() && segment < segment_tags[curve].size())
    return segment_tags[curve][segment];
  return static_cast<int>(curve);
}

std::array<int, 3> BackgroundGrid::element_nodes(int e) const {
  const int cell = e / 2;
  const int i = cell % (nx - 1);
  const int j = cell / (nx - 1);
  const int n00 = node_id(i, j), n10 = node_id(i + 1, j);
  const int n01 = node_id(i, j + 1), n11 = node_id(i + 1, j + 1);
  if (e % 2 == 0) return {n00, n10, n11};
  return {n00, n11, n01};
}

std::array<int, 2> BackgroundGrid::edge_nodes(int edge) const {
  const int H = ny * (nx - 1);
  const int V = (ny - 1) * nx;
  if (edge < H) {
    const int j = edge / (nx - 1), i = edge % (nx - 1);
    return {node_id(i, j), node_id(i + 1, j)};
  }
  edge -= H;
  if (edge < V) {
    const int j = edge / nx, i = edge % nx;
    return {node_id(i, j), node_id(i, j + 1)};
  }
  edge -= V;
  const int j = edge / (nx - 1), i = edge % (nx - 1);
  return {node_id(i, j), node_id(i + 1, j + 1)};
}

BackgroundGrid build_background_grid(double x0, double y0, double x1, double y1,
                                     int nx, int ny) {
  if (nx < 2 || ny < 2) throw std::invalid_argument("grid needs nx, ny >= 2");
  if (!(x1 > x0) || !(y1 > y0)) throw std::invalid_argument("degenerate bbox");
  return BackgroundGrid{nx, ny, x0, y0, x1, y1};
}

double point_segment_distance(Point p, Point a, Point b, double* t_out) {
  const Point d = b - a;
  const double len2 = dot(d, d);
  double t = len2 > 0.0 ? dot(p - a, d) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  if (t_out) *t_out = t;
  return dist(p, a + t * d);
}

bool segment_intersection(Point p0, Point p1, Point q0, Point q1,
                          double* t_out, double* s_out) {
  const Point r = p1 - p0, d = q1 - q0;
  const double den = cross(r, d);
  if (std::abs(den) <= 1e-14 * norm(r) * norm(d)) return false;
  const Point w = q0 - p0;
  const double t = cross(w, d) / den;
  const double s = cross(w, r) / den;
  const double tol = 1e-12;
  if (t < -tol || t > 1.0 + tol || s < -tol || s > 1.0 + tol) return false;
  if (t_out) *t_out = std::clamp(t, 0.0, 1.0);
  if (s_out) *s_out = std::clamp(s, 0.0, 1.0);
  return true;
}

bool point_in_domain(const Geometry& geom, Point p) {
  // Even-odd rule; the half-open vertex convention makes vertex hits
  // deterministic without an explicit ray perturbation.
  bool inside = false;
  for (const auto& curve : geom.curves) {
    const std::size_t n = curve.size();
    for (std::size_t s = 0; s < n; ++s) {
      const Point a = curve[s], b = curve[(s + 1) % n];
      if ((a.y > p.y) != (b.y > p.y)) {
        const double xint = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
        if (p.x < xint) inside = !inside;
      }
    }
  }
  return inside;
}

double distance_to_curves(const Geometry& geom, Point p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& curve : geom.curves) {
    const std::size_t n = curve.size();
    for (std::size_t s = 0; s < n; ++s)
      best = std::min(best,
                      point_segment_distance(p, curve[s], curve[(s + 1) % n]));
  }
  return best;
}

int nearest_segment_tag(const Geometry& geom, Point p) {
  double best = std::numeric_limits<double>::infinity();
  int tag = 0;
  for (std::size_t c = 0; c < geom.curves.size(); ++c) {
    const auto& curve = geom.curves[c];
    const std::size_t n = curve.size();
    for (std::size_t s = 0; s < n; ++s) {
      const double d =
          point_segment_distance(p, curve[s], curve[(s + 1) % n]);
      if (d < best) {
        best = d;
        tag = geom.tag_of(c, s);
      }
    }
  }
  return tag;
}

namespace {

double signed_area2(Point a, Point b, Point c) { return cross(b - a, c - a); }

// Barycentric coordinates of p in active element e; returns the minimum.
double barycentric(const AdaptedMesh& mesh, int e, Point p, double bary[3]) {
  const auto vs = mesh.grid.element_nodes(e);
  const Point a = mesh.node_positions[vs[0]];
  const Point b = mesh.node_positions[vs[1]];
  const Point c = mesh.node_positions[vs[2]];
  const double den = signed_area2(a, b, c);
  bary[1] = cross(p - a, c - a) / den;
  bary[2] = cross(b - a, p - a) / den;
  bary[0] = 1.0 - bary[1] - bary[2];
  return std::min({bary[0], bary[1], bary[2]});
}

}  // namespace

AdaptedMesh adapt_to_boundary(const BackgroundGrid& grid, const Geometry& geom) {
  AdaptedMesh m;
  m.grid = grid;
  m.geometry = geom;
  const int nn = grid.num_nodes();
  m.node_positions.resize(nn);
  for (int id = 0; id < nn; ++id) m.node_positions[id] = grid.node(id);
  m.moved.assign(nn, 0);
  const double cell = std::min(grid.hx(), grid.hy());
  const double on_tol = 1e-10 * cell;

  // Boundary snapping: edges visited in ascending id order; within an edge,
  // crossings in curve/segment order.  First crossing wins; a crossing whose
  // point coincides with an endpoint needs no move.
  for (int e = 0; e < grid.num_edges(); ++e) {
    const auto en = grid.edge_nodes(e);
    const Point pa = grid.node(en[0]), pb = grid.node(en[1]);
    struct Crossing {
      std::size_t curve, seg;
      Point x;
      int target;
    };
    std::vector<Crossing> crossings;
    for (std::size_t c = 0; c < geom.curves.size(); ++c) {
      const auto& curve = geom.curves[c];
      const std::size_t ns = curve.size();
      for (std::size_t s = 0; s < ns; ++s) {
        double t = 0.0, srat = 0.0;
        if (!segment_intersection(pa, pb, curve[s], curve[(s + 1) % ns], &t,
                                  &srat))
          continue;
        const Point x = pa + t * (pb - pa);
        if (dist(x, pa) <= on_tol || dist(x, pb) <= on_tol) continue;
        const int nearer = dist(x, pa) <= dist(x, pb) ? en[0] : en[1];
        crossings.push_back({c, s, x, nearer});
      }
    }
    // Crossings from chain-adjacent segments are a boundary corner passing
    // through the cell; anything else wanting both endpoints is a feature
    // smaller than one cell.
    for (std::size_t i = 0; i < crossings.size(); ++i)
      for (std::size_t j = i + 1; j < crossings.size(); ++j) {
        const auto& ci = crossings[i];
        const auto& cj = crossings[j];
        if (ci.target == cj.target || dist(ci.x, cj.x) <= on_tol) continue;
        const std::size_t ns = geom.curves[ci.curve].size();
        const bool adjacent =
            ci.curve == cj.curve &&
            ((ci.seg + 1) % ns == cj.seg || (cj.seg + 1) % ns == ci.seg);
        if (!adjacent)
          throw ResolutionError(
              "geometry feature smaller than one cell at grid edge " +
              std::to_string(e));
      }
    if (!crossings.empty() && !m.moved[crossings.front().target]) {
      m.node_positions[crossings.front().target] = crossings.front().x;
      m.moved[crossings.front().target] = 1;
    }
  }

  // Node status from final positions.
  m.node_status.assign(nn, NodeStatus::Inactive);
  for (int id = 0; id < nn; ++id) {
    const Point p = m.node_positions[id];
    if (distance_to_curves(geom, p) <= on_tol)
      m.node_status[id] = NodeStatus::BoundaryActive;
    else if (point_in_domain(geom, p))
      m.node_status[id] = NodeStatus::InteriorActive;
  }

  // Active elements: all vertices active and centroid inside the domain.
  m.element_active.assign(grid.num_elements(), 0);
  for (int e = 0; e < grid.num_elements(); ++e) {
    const auto vs = grid.element_nodes(e);
    if (m.node_status[vs[0]] == NodeStatus::Inactive ||
        m.node_status[vs[1]] == NodeStatus::Inactive ||
        m.node_status[vs[2]] == NodeStatus::Inactive)
      continue;
    const Point a = m.node_positions[vs[0]], b = m.node_positions[vs[1]],
                c = m.node_positions[vs[2]];
    const Point cen = (1.0 / 3.0) * (a + b + c);
    if (!point_in_domain(geom, cen) && distance_to_curves(geom, cen) > on_tol)
      continue;
    if (std::abs(signed_area2(a, b, c)) <= 1e-12 * cell * cell)
      throw ResolutionError("degenerate element " + std::to_string(e) +
                            " after snapping");
    m.element_active[e] = 1;
    m.active_elements.push_back(e);
  }

  // Demote nodes not referenced by any active element.
  std::vector<char> referenced(nn, 0);
  for (int e : m.active_elements)
    for (int v : grid.element_nodes(e)) referenced[v] = 1;
  for (int id = 0; id < nn; ++id)
    if (!referenced[id]) m.node_status[id] = NodeStatus::Inactive;

  m.active_index.assign(nn, -1);
  for (int id = 0; id < nn; ++id)
    if (m.node_status[id] != NodeStatus::Inactive)
      m.active_index[id] = m.num_active_nodes++;

  // Boundary edges: element edges used by exactly one active element.
  std::map<std::pair<int, int>, int> edge_use;
  for (int e : m.active_elements) {
    const auto vs = grid.element_nodes(e);
    for (int s = 0; s < 3; ++s) {
      int a = vs[s], b = vs[(s + 1) % 3];
      if (a > b) std::swap(a, b);
      ++edge_use[{a, b}];
    }
  }
  for (const auto& [key, count] : edge_use) {
    if (count != 1) continue;
    const Point mid =
        0.5 * (m.node_positions[key.first] + m.node_positions[key.second]);
    m.boundary_edges.push_back(
        {key.first, key.second, nearest_segment_tag(geom, mid)});
  }
  return m;
}

int locate_point(const AdaptedMesh& mesh, Point p) {
  const BackgroundGrid& g = mesh.grid;
  const double btol = -1e-12;
  double bary[3];
  // Snapped nodes move less than one cell diagonal, so any containing element
  // lies within two cells of p's cell; matches there include the global
  // lowest-id match.
  const int ci = std::clamp(
      static_cast<int>(std::floor((p.x - g.x0) / g.hx())), 0, g.nx - 2);
  const int cj = std::clamp(
      static_cast<int>(std::floor((p.y - g.y0) / g.hy())), 0, g.ny - 2);
  int best = -1;
  for (int j = std::max(0, cj - 2); j <= std::min(g.ny - 2, cj + 2); ++j)
    for (int i = std::max(0, ci - 2); i <= std::min(g.nx - 2, ci + 2); ++i)
      for (int half = 0; half < 2; ++half) {
        const int e = 2 * (j * (g.nx - 1) + i) + half;
        if (!mesh.element_active[e]) continue;
        if (barycentric(mesh, e, p, bary) >= btol && (best < 0 || e < best))
          best = e;
      }
  if (best >= 0) return best;
  for (int e : mesh.active_elements)
    if (barycentric(mesh, e, p, bary) >= btol) return e;
  return -1;
}

double evaluate_p1(const AdaptedMesh& mesh, const std::vector<double>& coeffs,
                   Point p) {
  const int e = locate_point(mesh, p);
  if (e < 0) throw std::runtime_error("point outside active mesh");
  double bary[3];
  barycentric(mesh, e, p, bary);
  const auto vs = mesh.grid.element_nodes(e);
  double value = 0.0;
  for (int s = 0; s < 3; ++s)
    value += bary[s] * coeffs.at(mesh.active_index[vs[s]]);
  return value;
}

Point nearest_point_projection(const AdaptedMesh& mesh, Point p) {
  if (mesh.active_elements.empty())
    throw std::runtime_error("empty active mesh");
  if (locate_point(mesh, p) >= 0) return p;
  double best = std::numeric_limits<double>::infinity();
  Point proj = p;
  for (const auto& be : mesh.boundary_edges) {
    const Point a = mesh.node_positions[be.a], b = mesh.node_positions[be.b];
    double t = 0.0;
    const double d = point_segment_distance(p, a, b, &t);
    if (d < best) {
      best = d;
      proj = a + t * (b - a);
    }
  }
  return proj;
}

void write_mesh_text(const AdaptedMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.precision(17);
  out << "nodes " << mesh.num_active_nodes << "\n";
  for (int id = 0; id < mesh.grid.num_nodes(); ++id) {
    if (mesh.active_index[id] < 0) continue;
    out << mesh.active_index[id] << ' ' << id << ' '
        << mesh.node_positions[id].x << ' ' << mesh.node_positions[id].y << ' '
        << (mesh.node_status[id] == NodeStatus::BoundaryActive ? 'b' : 'i')
        << "\n";
  }
  out << "elements " << mesh.active_elements.size() << "\n";
  for (int e : mesh.active_elements) {
    const auto vs = mesh.grid.element_nodes(e);
    out << e << ' ' << mesh.active_index[vs[0]] << ' '
        << mesh.active_index[vs[1]] << ' ' << mesh.active_index[vs[2]] << "\n";
  }
}

}  // namespace ksr
