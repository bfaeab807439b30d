#include "ksr/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ksr/factor.hpp"
#include "ksr/sparse.hpp"

namespace ksr {

namespace {

using nlohmann::json;

struct BBox {
  double x0, y0, x1, y1;
};

BBox domain_bbox(ProblemKind p) {
  switch (p) {
    case ProblemKind::PoissonHole: return {0.0, 0.0, 2.0, 1.0};
    case ProblemKind::ElasticityRod: return {0.0, 0.0, 1.5, 1.0};
    case ProblemKind::MovingSquare: return {0.0, 0.0, 1.0, 1.0};
  }
  throw std::logic_error("domain_bbox: unknown problem");
}

std::vector<Point> sample_circle(Point c, double r, int segments) {
  std::vector<Point> pts;
  pts.reserve(segments);
  for (int i = 0; i < segments; ++i) {
    const double t = 2.0 * std::numbers::pi * i / segments;
    pts.push_back({c.x + r * std::cos(t), c.y + r * std::sin(t)});
  }
  return pts;
}

Geometry poisson_hole_geometry(const ExperimentConfig& cfg, std::size_t step) {
  Geometry g;
  std::vector<Point> outer;
  const int segs = 160;
  for (int i = 0; i < segs; ++i) {
    const double t = 2.0 * std::numbers::pi * i / segs;
    outer.push_back({1.0 + 0.92 * std::cos(t), 0.5 + 0.42 * std::sin(t)});
  }
  g.curves.push_back(std::move(outer));
  const Point c = {0.55 + cfg.hole_dx * double(step),
                   0.5 + cfg.hole_dy * double(step)};
  g.curves.push_back(sample_circle(c, cfg.hole_radius, 64));
  return g;  // curve index is the tag: 0 outer, 1 hole
}

// Circular-arc rod of length 1.2 and half-thickness 0.12 whose curvature
// shrinks per step; side walls carry tag 0, the left cap tag 1 (clamped),
// the right cap tag 2 (loaded).
Geometry elasticity_rod_geometry(const ExperimentConfig& cfg,
                                 std::size_t step) {
  const double L = 1.2, half = 0.12;
  const double kappa =
      std::max(1e-6, cfg.curvature0 * (1.0 - cfg.straighten_rate * double(step)));
  const double R = 1.0 / kappa;
  const double bow = R * (1.0 - std::cos(kappa * L / 2.0));
  const auto center = [&](double s) -> Point {
    const double phi = kappa * (s - L / 2.0);
    return {0.75 + R * std::sin(phi),
            0.5 + bow / 2.0 - R * (1.0 - std::cos(phi))};
  };
  const auto normal = [&](double s) -> Point {
    const double phi = kappa * (s - L / 2.0);
    return {std::sin(phi), std::cos(phi)};
  };

  const int ns = 64;
  std::vector<Point> pts;
  std::vector<int> tags;
  // Bottom wall, left to right, offset -half along the normal.
  for (int i = 0; i < ns; ++i) {
    const double s = L * i / ns;
    pts.push_back(center(s) - half * normal(s));
    tags.push_back(0);
  }
  // Right cap (single straight segment).
  pts.push_back(center(L) - half * normal(L));
  tags.push_back(2);
  // Top wall, right to left.
  for (int i = ns; i > 0; --i) {
    const double s = L * i / ns;
    pts.push_back(center(s) + half * normal(s));
    tags.push_back(0);
  }
  // Left cap closes the curve.
  pts.push_back(center(0.0) + half * normal(0.0));
  tags.push_back(1);

  Geometry g;
  g.curves.push_back(std::move(pts));
  g.segment_tags.push_back(std::move(tags));
  return g;
}

Geometry moving_square_geometry(const ExperimentConfig& cfg,
                                std::size_t step) {
  const double side = 0.5;
  const double angle = 30.0 * std::numbers::pi / 180.0;
  const Point c = {0.45 + cfg.square_dx * double(step), 0.5};
  const double ca = std::cos(angle), sa = std::sin(angle);
  const double h = side / 2.0;
  const Point local[4] = {{-h, -h}, {h, -h}, {h, h}, {-h, h}};
  std::vector<Point> pts;
  for (const Point& p : local)
    pts.push_back({c.x + ca * p.x - sa * p.y, c.y + sa * p.x + ca * p.y});
  Geometry g;
  g.curves.push_back(std::move(pts));
  return g;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") +
                                e.what());
  }
  ExperimentConfig cfg;
  const std::string prob = j.value("problem", "poisson-hole");
  if (prob == "poisson-hole") cfg.problem = ProblemKind::PoissonHole;
  else if (prob == "elasticity-rod") cfg.problem = ProblemKind::ElasticityRod;
  else if (prob == "moving-square") cfg.problem = ProblemKind::MovingSquare;
  else throw std::invalid_argument("config: unknown problem '" + prob + "'");

  if (j.contains("grid")) {
    cfg.nx = j["grid"].value("nx", cfg.nx);
    cfg.ny = j["grid"].value("ny", cfg.ny);
  }
  cfg.steps = j.value("steps", cfg.steps);
  if (j.contains("geometry")) {
    const auto& g = j["geometry"];
    cfg.hole_dx = g.value("hole_dx", cfg.hole_dx);
    cfg.hole_dy = g.value("hole_dy", cfg.hole_dy);
    cfg.hole_radius = g.value("hole_radius", cfg.hole_radius);
    cfg.curvature0 = g.value("curvature0", cfg.curvature0);
    cfg.straighten_rate = g.value("straighten_rate", cfg.straighten_rate);
    cfg.square_dx = g.value("square_dx", cfg.square_dx);
  }
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    cfg.tol = s.value("tol", cfg.tol);
    cfg.maxit = s.value("maxit", cfg.maxit);
    cfg.k = s.value("k", cfg.k);
    cfg.droptol = s.value("droptol", cfg.droptol);
    cfg.rcm_reorder = s.value("rcm", cfg.rcm_reorder);
    cfg.window = s.value("window", cfg.window);
    const std::string pk = s.value("preconditioner", "none");
    if (pk == "none") cfg.precond = PrecondKind::None;
    else if (pk == "ic0") cfg.precond = PrecondKind::IC0;
    else if (pk == "ict") cfg.precond = PrecondKind::ICT;
    else
      throw std::invalid_argument("config: unknown preconditioner '" + pk +
                                  "'");
  }
  if (j.contains("ks")) {
    const auto& s = j["ks"];
    cfg.ks_enabled = s.value("enabled", true);
    cfg.ks_cycles = s.value("cycles", cfg.ks_cycles);
    cfg.ks_m = s.value("m", cfg.ks_m);
    cfg.ks_conv_tol = s.value("conv_tol", cfg.ks_conv_tol);
  }
  cfg.seed = j.value("seed", cfg.seed);
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  cfg.compare_cold = j.value("compare_cold", cfg.compare_cold);

  if (!(cfg.tol > 0.0 && cfg.tol < 1.0))
    throw std::invalid_argument("config: tol must lie in (0, 1)");
  if (cfg.nx < 2 || cfg.ny < 2)
    throw std::invalid_argument("config: grid must be at least 2 x 2");
  if (cfg.steps == 0)
    throw std::invalid_argument("config: steps must be positive");
  if (cfg.k == 0) throw std::invalid_argument("config: k must be positive");
  if (cfg.ks_enabled && cfg.ks_m <= cfg.k)
    throw std::invalid_argument("config: ks.m must exceed k");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::vector<Geometry> generate_geometry_sequence(const ExperimentConfig& cfg) {
  std::vector<Geometry> out;
  out.reserve(cfg.steps);
  for (std::size_t i = 0; i < cfg.steps; ++i) {
    switch (cfg.problem) {
      case ProblemKind::PoissonHole:
        out.push_back(poisson_hole_geometry(cfg, i));
        break;
      case ProblemKind::ElasticityRod:
        out.push_back(elasticity_rod_geometry(cfg, i));
        break;
      case ProblemKind::MovingSquare:
        out.push_back(moving_square_geometry(cfg, i));
        break;
    }
  }
  return out;
}

PoissonProblem poisson_setup(const ExperimentConfig& cfg) {
  PoissonProblem p;
  p.conductivity = 1.0;
  if (cfg.problem == ProblemKind::PoissonHole) {
    p.bc[0] = {BoundaryKind::Robin, 1.0, 1.0, 0.0};  // outer, ambient 1
    p.bc[1] = {BoundaryKind::Robin, 1.0, 0.5, 0.0};  // hole, ambient 0.5
  } else {
    // Moving square: unit source with a zero-fixed boundary.
    p.bc[0] = {BoundaryKind::Dirichlet, 0.0, 0.0, 0.0};
    p.source = [](Point) { return 1.0; };
  }
  return p;
}

ElasticityProblem elasticity_setup(const ExperimentConfig&) {
  ElasticityProblem e;
  e.youngs_modulus = 300.0;
  e.poisson_ratio = 0.22;
  e.thickness = 1.0;
  e.clamped = {1};
  e.traction[2] = {0.0, -1.0};
  return e;
}

PreparedStep prepare_step(const ExperimentConfig& cfg, const Geometry& geom) {
  PreparedStep step;
  const BBox bb = domain_bbox(cfg.problem);
  const BackgroundGrid grid =
      build_background_grid(bb.x0, bb.y0, bb.x1, bb.y1, cfg.nx, cfg.ny);
  step.mesh = adapt_to_boundary(grid, geom);
  if (cfg.problem == ProblemKind::ElasticityRod) {
    step.sys = assemble_elasticity(step.mesh, elasticity_setup(cfg));
  } else {
    step.sys = assemble_poisson(step.mesh, poisson_setup(cfg));
  }
  step.dofs_per_node = std::size_t(step.sys.dofs_per_node);

  const std::size_t n = step.sys.K.n();
  if (cfg.rcm_reorder) {
    step.perm = rcm(step.sys.K);
  } else {
    step.perm.resize(n);
    for (std::size_t i = 0; i < n; ++i) step.perm[i] = i;
  }
  step.K_solver = permute(step.sys.K, step.perm);

  switch (cfg.precond) {
    case PrecondKind::None: break;
    case PrecondKind::IC0: step.factor = ic0(step.K_solver); break;
    case PrecondKind::ICT: step.factor = ict(step.K_solver, cfg.droptol); break;
  }

  Vector f_perm(n);
  for (std::size_t i = 0; i < n; ++i) f_perm[i] = step.sys.f[step.perm[i]];
  step.rhs_solver =
      step.factor ? lower_solve(step.factor->L, f_perm) : std::move(f_perm);
  return step;
}

std::pair<DenseColumnBlock, TransferReport> transfer_basis(
    const DenseColumnBlock& W, const PreparedStep& from,
    const PreparedStep& to) {
  const std::size_t n_from = from.K_solver.n();
  if (W.rows() != n_from)
    throw std::invalid_argument("transfer_basis: row count mismatch");
  DenseColumnBlock nodal = change_precond_coordinates(
      W, from.factor ? &*from.factor : nullptr, CoordinateDirection::ToNodal);
  // Undo the solver permutation: solver row r holds nodal dof perm[r].
  DenseColumnBlock unperm(n_from, W.cols());
  for (std::size_t c = 0; c < W.cols(); ++c)
    for (std::size_t r = 0; r < n_from; ++r)
      unperm(from.perm[r], c) = nodal(r, c);

  auto [mapped, rep] = map_subspace_structured(unperm, from.mesh, to.mesh,
                                               from.dofs_per_node);

  const std::size_t n_to = to.K_solver.n();
  DenseColumnBlock reperm(n_to, W.cols());
  for (std::size_t c = 0; c < W.cols(); ++c)
    for (std::size_t r = 0; r < n_to; ++r)
      reperm(r, c) = mapped(to.perm[r], c);
  DenseColumnBlock out = change_precond_coordinates(
      reperm, to.factor ? &*to.factor : nullptr,
      CoordinateDirection::ToPreconditioned);
  return {std::move(out), std::move(rep)};
}

Vector solver_to_nodal(const PreparedStep& step, const Vector& y) {
  Vector x = y;
  if (step.factor) x = lower_transpose_solve(step.factor->L, x);
  Vector out(x.size());
  for (std::size_t r = 0; r < x.size(); ++r) out[step.perm[r]] = x[r];
  return out;
}

namespace {

std::size_t effective_maxit(const ExperimentConfig& cfg, std::size_t n) {
  if (cfg.maxit > 0) return cfg.maxit;
  return std::size_t(std::ceil(5.0 * std::sqrt(double(n))));
}

}  // namespace

RunSummary run_chain(const ExperimentConfig& cfg) {
  const std::vector<Geometry> geoms = generate_geometry_sequence(cfg);
  RunSummary summary;
  RecycleSpace rs;
  PreparedStep prev;
  for (std::size_t i = 0; i < geoms.size(); ++i) {
    PreparedStep cur = prepare_step(cfg, geoms[i]);
    const PrecondOperator op{&cur.K_solver,
                             cur.factor ? &*cur.factor : nullptr};
    const std::size_t n = cur.K_solver.n();
    StepRecord rec;
    rec.n_dofs = n;

    SolverOptions opt;
    opt.tol = cfg.tol;
    opt.maxit = effective_maxit(cfg, n);
    opt.k_next = cfg.k;
    opt.window = cfg.window;

    RecycleSpace rs_in;
    if (i > 0 && !rs.empty()) {
      auto [Wt, trep] = transfer_basis(rs.W, prev, cur);
      rec.transfer = std::move(trep);
      const ThinQR qr = thin_qr(Wt);
      DenseColumnBlock basis =
          qr.full_rank ? qr.Q : qr.Q.leading_cols(qr.rank);
      if (cfg.ks_enabled && basis.cols() > 0) {
        KSConfig ks;
        ks.J = cfg.ks_cycles;
        ks.m = std::min(cfg.ks_m, n);
        // Retain one column beyond the input dimension so the returned block
        // carries a full set of Schur vectors plus the expansion direction.
        ks.k = basis.cols() + 1;
        ks.conv_tol = cfg.ks_conv_tol;
        WarmstartResult wr = warmstart_krylov_schur(op, basis, ks);
        rec.ks_cycles_used = wr.cycles_used;
        rec.ks_residual_norms = wr.residual_norms;
        basis = std::move(wr.U);
      }
      if (basis.cols() > 0) rs_in = make_recycle_space(op, basis);
    }

    const Vector u0(n, 0.0);
    RminresResult res = rminres(op, cur.rhs_solver, u0, rs_in, opt);
    rec.recycled = res.report;
    rs = std::move(res.next);
    if (!rec.recycled.converged) summary.all_converged = false;

    if (cfg.compare_cold) {
      auto [uc, crep] =
          minres(op, cur.rhs_solver, u0, cfg.tol, effective_maxit(cfg, n));
      rec.cold = std::move(crep);
    }
    summary.steps.push_back(std::move(rec));
    prev = std::move(cur);
  }
  if (!cfg.output_dir.empty()) write_run_outputs(summary, cfg.output_dir);
  return summary;
}

DenseColumnBlock smallest_eigenspace(const PrecondOperator& op,
                                     std::size_t count, double tol,
                                     unsigned seed) {
  const std::size_t n = op.n();
  if (count == 0 || count > n)
    throw std::invalid_argument("smallest_eigenspace: bad count");
  // Shift-inverted Lanczos with full reorthogonalization: the largest
  // eigenvalues of op^{-1} are the smallest of op; inner applications solved
  // by MINRES to well below the requested eigenpair tolerance.
  const auto apply_inverse = [&](const Vector& b) {
    auto [x, rep] = minres(op, b, Vector(n, 0.0), 1e-12, 40 * n);
    if (!rep.converged)
      throw std::runtime_error("smallest_eigenspace: inner solve stalled");
    return x;
  };

  // Deterministic seeded start vector.
  Vector q(n);
  unsigned long long state = 0x9E3779B97F4A7C15ull ^ seed;
  for (double& v : q) {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    v = double((state >> 11) & 0xFFFFFFFFull) / double(0xFFFFFFFFull) - 0.5;
  }
  scal(1.0 / norm2(q), q);

  std::vector<Vector> basis{q};
  std::vector<double> alpha, beta;
  const std::size_t max_steps = std::min(n, count * 10 + 60);
  for (std::size_t j = 0; j < max_steps; ++j) {
    Vector w = apply_inverse(basis[j]);
    alpha.push_back(dot(basis[j], w));
    // Two full reorthogonalization passes subsume the three-term recurrence.
    for (const Vector& v : basis) axpy(-dot(v, w), v, w);
    for (const Vector& v : basis) axpy(-dot(v, w), v, w);
    const double b = norm2(w);
    const std::size_t m = j + 1;
    const bool exhausted = (b <= 1e-14 || m == max_steps);

    if (m >= count && (exhausted || m >= count + 2)) {
      DenseColumnBlock T(m, m);
      for (std::size_t i = 0; i < m; ++i) {
        T(i, i) = alpha[i];
        if (i + 1 < m) {
          T(i + 1, i) = beta[i];
          T(i, i + 1) = beta[i];
        }
      }
      const SymEig eig = jacobi_eig(T);  // ascending; want the largest `count`
      bool done = true;
      for (std::size_t c = 0; c < count && done; ++c) {
        const std::size_t col = m - 1 - c;
        const double resid = b * std::abs(eig.V(m - 1, col));
        done = resid <= tol * std::abs(eig.lambda[col]);
      }
      if (done || b <= 1e-14) {
        DenseColumnBlock out(n, count);
        for (std::size_t c = 0; c < count; ++c) {
          const std::size_t col = m - 1 - c;
          Vector v(n, 0.0);
          for (std::size_t i = 0; i < m; ++i)
            axpy(eig.V(i, col), basis[i], v);
          out.set_col(c, v);
        }
        return out;
      }
    }
    if (exhausted)
      throw std::runtime_error("smallest_eigenspace: no convergence");
    beta.push_back(b);
    scal(1.0 / b, w);
    basis.push_back(std::move(w));
  }
  throw std::runtime_error("smallest_eigenspace: no convergence");
}

AngleTable angle_report(const ExperimentConfig& cfg, std::size_t truth_dim,
                        std::size_t max_restarts) {
  ExperimentConfig two = cfg;
  two.steps = 2;
  const std::vector<Geometry> geoms = generate_geometry_sequence(two);
  const PreparedStep p0 = prepare_step(cfg, geoms[0]);
  const PreparedStep p1 = prepare_step(cfg, geoms[1]);
  const PrecondOperator op0{&p0.K_solver, p0.factor ? &*p0.factor : nullptr};
  const PrecondOperator op1{&p1.K_solver, p1.factor ? &*p1.factor : nullptr};

  SolverOptions opt;
  opt.tol = cfg.tol;
  opt.maxit = effective_maxit(cfg, p0.K_solver.n());
  opt.k_next = cfg.k;
  opt.window = cfg.window;
  const RminresResult r0 = rminres(op0, p0.rhs_solver,
                                   Vector(p0.K_solver.n(), 0.0), {}, opt);
  if (r0.next.empty())
    throw std::runtime_error("angle_report: no recycle space harvested");

  auto [Wt, rep] = transfer_basis(r0.next.W, p0, p1);
  const ThinQR qr = thin_qr(Wt);
  const DenseColumnBlock mapped =
      qr.full_rank ? qr.Q : qr.Q.leading_cols(qr.rank);

  const DenseColumnBlock truth =
      smallest_eigenspace(op1, truth_dim, 1e-8, cfg.seed);

  AngleTable table;
  table.rows.emplace_back("mapped", principal_angles(mapped, truth));
  for (std::size_t j = 1; j <= max_restarts; ++j) {
    KSConfig ks;
    ks.J = j;
    ks.m = std::min(cfg.ks_m, p1.K_solver.n());
    ks.k = mapped.cols() + 1;
    ks.conv_tol = cfg.ks_conv_tol;
    const WarmstartResult wr = warmstart_krylov_schur(op1, mapped, ks);
    table.rows.emplace_back("restart" + std::to_string(j),
                            principal_angles(wr.U, truth));
  }
  return table;
}

void write_run_outputs(const RunSummary& summary, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  {
    std::ofstream out(fs::path(dir) / "iterations.csv");
    out << "step,n_dofs,iterations,converged,cold_iterations,"
           "newly_active,newly_inactive\n";
    for (std::size_t i = 0; i < summary.steps.size(); ++i) {
      const StepRecord& s = summary.steps[i];
      out << i << ',' << s.n_dofs << ',' << s.recycled.iterations << ','
          << (s.recycled.converged ? 1 : 0) << ',';
      if (s.cold) out << s.cold->iterations;
      out << ',';
      if (s.transfer) out << s.transfer->newly_active;
      out << ',';
      if (s.transfer) out << s.transfer->newly_inactive;
      out << '\n';
    }
  }

  for (std::size_t i = 0; i < summary.steps.size(); ++i) {
    std::ofstream out(fs::path(dir) /
                      ("residuals_step" + std::to_string(i) + ".csv"));
    out << "iteration,residual\n";
    const Vector& h = summary.steps[i].recycled.residual_history;
    for (std::size_t j = 0; j < h.size(); ++j)
      out << j << ',' << format_double(h[j]) << '\n';
  }

  {
    std::ofstream out(fs::path(dir) / "transfer.csv");
    out << "step,stable,recomputed,newly_active,newly_inactive,"
           "extrapolated,single_neighbor_fallbacks,zero_fallbacks\n";
    for (std::size_t i = 0; i < summary.steps.size(); ++i) {
      const auto& t = summary.steps[i].transfer;
      if (!t) continue;
      out << i << ',' << t->stable << ',' << t->recomputed << ','
          << t->newly_active << ',' << t->newly_inactive << ','
          << t->extrapolated.size() << ',' << t->single_neighbor_fallbacks
          << ',' << t->zero_fallbacks << '\n';
    }
  }

  {
    std::ofstream out(fs::path(dir) / "ks.csv");
    out << "step,cycles_used,residual_norms\n";
    for (std::size_t i = 0; i < summary.steps.size(); ++i) {
      const StepRecord& s = summary.steps[i];
      if (s.ks_residual_norms.empty() && s.ks_cycles_used == 0) continue;
      out << i << ',' << s.ks_cycles_used << ',';
      for (std::size_t j = 0; j < s.ks_residual_norms.size(); ++j) {
        if (j) out << ';';
        out << format_double(s.ks_residual_norms[j]);
      }
      out << '\n';
    }
  }

  {
    std::ofstream out(fs::path(dir) / "summary.txt");
    out << "step  n_dofs  iterations  cold  converged\n";
    for (std::size_t i = 0; i < summary.steps.size(); ++i) {
      const StepRecord& s = summary.steps[i];
      out << i << "  " << s.n_dofs << "  " << s.recycled.iterations << "  ";
      if (s.cold) out << s.cold->iterations;
      else out << '-';
      out << "  " << (s.recycled.converged ? "yes" : "NO") << '\n';
    }
    out << (summary.all_converged ? "all steps converged\n"
                                  : "NON-CONVERGED STEPS PRESENT\n");
  }
}

void write_angle_table(const AngleTable& table, const std::string& path) {
  std::ofstream out(path);
  std::size_t width = 0;
  for (const auto& [label, row] : table.rows)
    width = std::max(width, row.size());
  out << "space";
  for (std::size_t i = 1; i <= width; ++i) out << ",cos" << i;
  out << '\n';
  for (const auto& [label, row] : table.rows) {
    out << label;
    for (double v : row) out << ',' << format_double(v);
    out << '\n';
  }
}

}  // namespace ksr
