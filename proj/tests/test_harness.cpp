#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "ksr/factor.hpp"
#include "ksr/harness.hpp"
#include "ksr/sparse.hpp"
#include "ksr/transfer.hpp"

using namespace ksr;

namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig small_square_config() {
    ExperimentConfig cfg;
    cfg.problem = ProblemKind::MovingSquare;
    cfg.nx = cfg.ny = 41;
    cfg.steps = 2;
    cfg.square_dx = 0.1;
    cfg.tol = 1e-8;
    cfg.k = 8;
    return cfg;
}

}  // namespace

TEST_CASE("config parsing: defaults, full document, and rejects") {
    const ExperimentConfig d = parse_config("{}");
    CHECK(d.problem == ProblemKind::PoissonHole);
    CHECK(d.nx == 61);
    CHECK(d.tol == doctest::Approx(1e-8));
    CHECK(d.precond == PrecondKind::None);
    CHECK_FALSE(d.ks_enabled);

    const char* text = R"({
        "problem": "elasticity-rod",
        "grid": {"nx": 31, "ny": 21},
        "steps": 3,
        "geometry": {"curvature0": 0.9, "straighten_rate": 0.2},
        "solver": {"tol": 1e-6, "maxit": 77, "k": 12,
                   "preconditioner": "ict", "droptol": 0.01,
                   "rcm": true, "window": 200},
        "ks": {"enabled": true, "cycles": 3, "m": 30, "conv_tol": 1e-7},
        "seed": 9,
        "output_dir": "somewhere",
        "compare_cold": false
    })";
    const ExperimentConfig c = parse_config(text);
    CHECK(c.problem == ProblemKind::ElasticityRod);
    CHECK(c.nx == 31);
    CHECK(c.ny == 21);
    CHECK(c.steps == 3);
    CHECK(c.curvature0 == doctest::Approx(0.9));
    CHECK(c.straighten_rate == doctest::Approx(0.2));
    CHECK(c.tol == doctest::Approx(1e-6));
    CHECK(c.maxit == 77);
    CHECK(c.k == 12);
    CHECK(c.precond == PrecondKind::ICT);
    CHECK(c.droptol == doctest::Approx(0.01));
    CHECK(c.rcm_reorder);
    CHECK(c.window == 200);
    CHECK(c.ks_enabled);
    CHECK(c.ks_cycles == 3);
    CHECK(c.ks_m == 30);
    CHECK(c.ks_conv_tol == doctest::Approx(1e-7));
    CHECK(c.seed == 9);
    CHECK(c.output_dir == "somewhere");
    CHECK_FALSE(c.compare_cold);

    CHECK_THROWS_AS((void)parse_config("not json"), std::invalid_argument);
    CHECK_THROWS_AS((void)parse_config(R"({"problem": "unknown"})"),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)parse_config(R"({"solver": {"tol": 2.0}})"),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)parse_config(R"({"solver": {"tol": 0.0}})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        (void)parse_config(R"({"solver": {"preconditioner": "ilu"}})"),
        std::invalid_argument);
    CHECK_THROWS_AS((void)parse_config(R"({"steps": 0})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        (void)parse_config(R"({"solver": {"k": 20}, "ks": {"m": 10}})"),
        std::invalid_argument);
    CHECK_THROWS_AS((void)load_config("/nonexistent/config.json"),
                    std::invalid_argument);
}

TEST_CASE("geometry sequences are deterministic and translate as configured") {
    ExperimentConfig cfg = small_square_config();
    cfg.steps = 3;
    const auto a = generate_geometry_sequence(cfg);
    const auto b = generate_geometry_sequence(cfg);
    REQUIRE(a.size() == 3);
    for (std::size_t s = 0; s < a.size(); ++s) {
        REQUIRE(a[s].curves.size() == b[s].curves.size());
        for (std::size_t c = 0; c < a[s].curves.size(); ++c)
            for (std::size_t v = 0; v < a[s].curves[c].size(); ++v) {
                CHECK(a[s].curves[c][v].x == b[s].curves[c][v].x);
                CHECK(a[s].curves[c][v].y == b[s].curves[c][v].y);
            }
    }

    // The second square is the first shifted by exactly (dx, 0).
    for (std::size_t v = 0; v < a[0].curves[0].size(); ++v) {
        CHECK(a[1].curves[0][v].x ==
              doctest::Approx(a[0].curves[0][v].x + 0.1).epsilon(1e-14));
        CHECK(a[1].curves[0][v].y == doctest::Approx(a[0].curves[0][v].y));
    }

    // Zero offsets produce identical geometries.
    cfg.square_dx = 0.0;
    const auto idt = generate_geometry_sequence(cfg);
    for (std::size_t v = 0; v < idt[0].curves[0].size(); ++v) {
        CHECK(idt[2].curves[0][v].x == idt[0].curves[0][v].x);
        CHECK(idt[2].curves[0][v].y == idt[0].curves[0][v].y);
    }
}

TEST_CASE("rigid hole translation balances newly active and inactive nodes") {
    ExperimentConfig cfg;
    cfg.problem = ProblemKind::PoissonHole;
    cfg.nx = 91;
    cfg.ny = 46;
    cfg.steps = 2;
    cfg.hole_dx = 2.0 * (2.0 / 90.0);  // exactly two cells
    cfg.hole_radius = 0.1;
    const auto geoms = generate_geometry_sequence(cfg);
    const auto grid = build_background_grid(0, 0, 2, 1, cfg.nx, cfg.ny);
    const AdaptedMesh m0 = adapt_to_boundary(grid, geoms[0]);
    const AdaptedMesh m1 = adapt_to_boundary(grid, geoms[1]);
    std::size_t act = 0, inact = 0;
    for (const auto& [id, cls] : classify_nodes(m0, m1).nodes) {
        if (cls == NodeClass::NewlyActive) ++act;
        if (cls == NodeClass::NewlyInactive) ++inact;
    }
    CHECK(act == inact);
    CHECK(act > 0);
}

TEST_CASE("identity-sequence chain: recycled steps beat the cold solve") {
    ExperimentConfig cfg = small_square_config();
    cfg.square_dx = 0.0;
    cfg.steps = 3;
    const RunSummary s = run_chain(cfg);
    REQUIRE(s.steps.size() == 3);
    CHECK(s.all_converged);
    REQUIRE(s.steps[0].cold.has_value());
    CHECK(s.steps[0].recycled.iterations == s.steps[0].cold->iterations);
    for (std::size_t i = 1; i < 3; ++i) {
        CHECK(s.steps[i].recycled.converged);
        CHECK(s.steps[i].recycled.iterations < s.steps[0].recycled.iterations);
        REQUIRE(s.steps[i].transfer.has_value());
        CHECK(s.steps[i].transfer->newly_active == 0);
        CHECK(s.steps[i].transfer->newly_inactive == 0);
    }
}

TEST_CASE("warm-start stage runs inside the chain and reports its cycles") {
    ExperimentConfig cfg = small_square_config();
    cfg.steps = 2;
    cfg.ks_enabled = true;
    cfg.ks_cycles = 2;
    cfg.ks_m = 25;
    const RunSummary s = run_chain(cfg);
    REQUIRE(s.steps.size() == 2);
    CHECK(s.steps[0].ks_cycles_used == 0);
    CHECK(s.steps[1].ks_cycles_used >= 1);
    CHECK(s.steps[1].ks_residual_norms.size() == s.steps[1].ks_cycles_used);
    CHECK(s.steps[1].recycled.converged);
}

TEST_CASE("identical config and seed produce byte-identical outputs") {
    namespace fs = std::filesystem;
    const fs::path base =
        fs::temp_directory_path() / "ksr_harness_determinism";
    fs::remove_all(base);
    ExperimentConfig cfg = small_square_config();
    cfg.steps = 2;
    cfg.output_dir = (base / "a").string();
    run_chain(cfg);
    cfg.output_dir = (base / "b").string();
    run_chain(cfg);
    const char* files[] = {"iterations.csv", "residuals_step0.csv",
                           "residuals_step1.csv", "transfer.csv", "ks.csv",
                           "summary.txt"};
    for (const char* f : files) {
        const std::string a = read_file(base / "a" / f);
        const std::string b = read_file(base / "b" / f);
        CHECK(!a.empty());
        CHECK(a == b);
    }
    fs::remove_all(base);
}

TEST_CASE("smallest_eigenspace matches the trivial diagonal oracle") {
    const std::size_t n = 40;
    Vector d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = 1.0 + double(i);
    const SparseSymMatrix K = SparseSymMatrix::diagonal(d);
    const PrecondOperator op{&K, nullptr};
    const DenseColumnBlock space = smallest_eigenspace(op, 5, 1e-9, 3);
    REQUIRE(space.cols() == 5);
    DenseColumnBlock truth(n, 5);
    for (std::size_t c = 0; c < 5; ++c) truth(c, c) = 1.0;
    const Vector cos = principal_angles(space, truth);
    for (double v : cos) CHECK(v == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("smallest_eigenspace columns are near-invariant for a mesh system") {
    ExperimentConfig cfg = small_square_config();
    cfg.nx = cfg.ny = 21;
    const auto geoms = generate_geometry_sequence(cfg);
    const PreparedStep p = prepare_step(cfg, geoms[0]);
    const PrecondOperator op{&p.K_solver, nullptr};
    const DenseColumnBlock space = smallest_eigenspace(op, 6, 1e-9, 1);
    const double scale = p.K_solver.frobenius_norm();
    for (std::size_t c = 0; c < space.cols(); ++c) {
        const Vector v = space.col_vec(c);
        const Vector Kv = precond_apply(op, v);
        const double theta = dot(v, Kv);
        Vector r = Kv;
        axpy(-theta, v, r);
        CHECK(norm2(r) <= 1e-7 * scale);
        CHECK(norm2(v) == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("angle report improves monotonically with restarts") {
    ExperimentConfig cfg = small_square_config();
    cfg.k = 10;
    cfg.ks_m = 25;
    cfg.ks_conv_tol = 1e-12;
    const AngleTable t = angle_report(cfg, 14, 2);
    REQUIRE(t.rows.size() == 3);
    CHECK(t.rows[0].first == "mapped");
    CHECK(t.rows[1].first == "restart1");
    CHECK(t.rows[2].first == "restart2");
    for (const auto& [label, row] : t.rows) {
        REQUIRE(!row.empty());
        for (std::size_t i = 0; i < row.size(); ++i) {
            CHECK(row[i] >= 0.0);
            CHECK(row[i] <= 1.0);
            if (i > 0) CHECK(row[i] <= row[i - 1] + 1e-12);
        }
    }
    // The worst mapped direction improves with repair cycles.
    const Vector& mapped = t.rows[0].second;
    const Vector& r2 = t.rows[2].second;
    CHECK(r2[mapped.size() - 1] >= mapped[mapped.size() - 1]);

    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "ksr_angles.csv";
    write_angle_table(t, path.string());
    const std::string text = read_file(path);
    CHECK(text.rfind("space,cos1", 0) == 0);
    CHECK(text.find("mapped,") != std::string::npos);
    fs::remove(path);
}

TEST_CASE("chain survives a non-converged step and flags it") {
    ExperimentConfig cfg = small_square_config();
    cfg.steps = 2;
    cfg.maxit = 5;  // far too few iterations to converge
    const RunSummary s = run_chain(cfg);
    REQUIRE(s.steps.size() == 2);
    CHECK_FALSE(s.all_converged);
    CHECK_FALSE(s.steps[0].recycled.converged);
}
