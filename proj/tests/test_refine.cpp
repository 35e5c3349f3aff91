#include "doctest.h"
#include "test_helpers.hpp"

#include "sdfmap/refine.hpp"

using namespace sdfmap;
using namespace testutil;

TEST_SUITE_BEGIN("refine");

namespace {

TriangleMesh noisy_icosphere(int subdiv, double sigma, uint64_t seed) {
    TriangleMesh m = make_icosphere(subdiv);
    Rng rng(seed);
    for (auto& v : m.vertices) v += rng.normal3(sigma);
    return m;
}

// dense reconstruction of the Laplacian matrix for oracle checks
std::vector<std::vector<double>> dense_laplacian(const SparseLaplacian& lap) {
    std::vector<std::vector<double>> L(lap.dim, std::vector<double>(lap.dim, 0.0));
    for (std::size_t i = 0; i < lap.dim; ++i) L[i][i] = lap.diag[i];
    for (const auto& e : lap.edges) {
        L[e.a][e.b] = e.w;
        L[e.b][e.a] = e.w;
    }
    return L;
}

}  // namespace

TEST_CASE("equilateral shared edge weighs 1/sqrt(3)") {
    // two equilateral triangles sharing edge (0,1)
    double h = std::sqrt(3.0) / 2.0;
    TriangleMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0.5, h, 0}, {0.5, -h, 0}};
    m.faces = {{0, 1, 2}, {1, 0, 3}};
    SparseLaplacian lap = cotan_laplacian(m);
    const SparseLaplacian::Edge* shared = nullptr;
    for (const auto& e : lap.edges)
        if (e.a == 0 && e.b == 1) shared = &e;
    REQUIRE(shared != nullptr);
    CHECK(shared->w == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));
    CHECK(shared->w == doctest::Approx(0.57735).epsilon(1e-4));
}

TEST_CASE("right angles clamp to the weight floor") {
    // both opposite angles are 90 degrees: cot = 0, clamped to 1e-6
    TriangleMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0.5, 0.5, 0}, {0.5, -0.5, 0}};
    m.faces = {{0, 1, 2}, {1, 0, 3}};
    SparseLaplacian lap = cotan_laplacian(m);
    for (const auto& e : lap.edges) {
        if (e.a == 0 && e.b == 1) CHECK(e.w == doctest::Approx(1e-6).epsilon(1e-12));
    }
}

TEST_CASE("cotan weights match a per-edge brute-force oracle") {
    TriangleMesh m = noisy_icosphere(1, 0.02, 7);  // 42 vertices
    SparseLaplacian lap = cotan_laplacian(m);

    // independent recomputation, angle by angle
    std::map<std::pair<uint32_t, uint32_t>, double> want;
    for (const auto& f : m.faces) {
        for (int k = 0; k < 3; ++k) {
            uint32_t i = f[k], j = f[(k + 1) % 3], apex = f[(k + 2) % 3];
            Vec3 u = m.vertices[i] - m.vertices[apex];
            Vec3 w = m.vertices[j] - m.vertices[apex];
            double angle = std::acos(std::min(1.0, std::max(-1.0, u.dot(w) / (u.norm() * w.norm()))));
            auto key = std::make_pair(std::min(i, j), std::max(i, j));
            want[key] += 0.5 / std::tan(angle);
        }
    }
    REQUIRE(lap.edges.size() == want.size());
    for (const auto& e : lap.edges) {
        double w = want[{e.a, e.b}];
        w = std::min(std::max(w, 1e-6), cot_one_degree());
        CHECK(std::fabs(e.w - w) < 1e-9);
    }
}

TEST_CASE("laplacian rows sum to zero and the matrix is symmetric") {
    TriangleMesh m = noisy_icosphere(2, 0.03, 9);
    SparseLaplacian lap = cotan_laplacian(m);
    auto L = dense_laplacian(lap);
    for (std::size_t i = 0; i < lap.dim; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < lap.dim; ++j) {
            row += L[i][j];
            REQUIRE(L[i][j] == L[j][i]);
        }
        CHECK(std::fabs(row) < 1e-9);
    }
}

TEST_CASE("zero-area triangles are an error naming the face") {
    TriangleMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};  // collinear
    m.faces = {{0, 1, 2}};
    CHECK_THROWS_WITH_AS(cotan_laplacian(m), doctest::Contains("zero-area"), std::runtime_error);
}

TEST_CASE("laplacian displacement vanishes on a flat regular grid interior") {
    TriangleMesh m = make_plane_grid(8, 8, 0.5);
    SparseLaplacian lap = cotan_laplacian(m);
    std::vector<Vec3> disp;
    std::vector<double> norms;
    laplacian_displacement(lap, m.vertices, disp, norms);
    for (std::size_t i = 0; i < m.vertices.size(); ++i)
        if (!lap.boundary_vertex[i]) CHECK(norms[i] < 1e-9);
}

TEST_CASE("displacement norm grows monotonically with an off-plane offset") {
    double prev = 0.0;
    for (double delta : {0.01, 0.02, 0.04}) {
        TriangleMesh m = make_plane_grid(7, 7, 0.5);
        uint32_t center = 3 * 7 + 3;
        m.vertices[center].z += delta;
        SparseLaplacian lap = cotan_laplacian(m);
        std::vector<Vec3> disp;
        std::vector<double> norms;
        laplacian_displacement(lap, m.vertices, disp, norms);
        CHECK(norms[center] > prev);
        prev = norms[center];
    }
}

TEST_CASE("laplacian displacement matches a dense matrix-vector oracle") {
    TriangleMesh m = noisy_icosphere(1, 0.05, 13);
    SparseLaplacian lap = cotan_laplacian(m);
    auto L = dense_laplacian(lap);
    std::vector<Vec3> disp;
    std::vector<double> norms;
    laplacian_displacement(lap, m.vertices, disp, norms);
    for (std::size_t i = 0; i < lap.dim; ++i) {
        Vec3 want{};
        for (std::size_t j = 0; j < lap.dim; ++j) want += m.vertices[j] * L[i][j];
        CHECK((disp[i] - want).norm() < 1e-12);
        CHECK(norms[i] == doctest::Approx(want.norm()).epsilon(1e-12));
    }
}

TEST_CASE("quadratic form closed cases") {
    SparseLaplacian lap;
    lap.dim = 2;
    lap.edges = {{0, 1, 1.0, false}};
    lap.diag = {-1.0, -1.0};
    lap.boundary_vertex = {0, 0};
    lap.neighbor_count = {1, 1};

    std::vector<Vec3> same = {{2, 1, 0}, {2, 1, 0}};
    CHECK(quadratic_form(lap, same) == 0.0);

    double d = 1.7;
    std::vector<Vec3> apart = {{0, 0, 0}, {d, 0, 0}};
    CHECK(quadratic_form(lap, apart) == doctest::Approx(0.5 * d * d).epsilon(1e-15));
}

TEST_CASE("edge sum equals the matrix quadratic form") {
    TriangleMesh m = noisy_icosphere(1, 0.04, 21);
    SparseLaplacian lap = cotan_laplacian(m);
    auto L = dense_laplacian(lap);
    double via_matrix = 0.0;
    for (std::size_t i = 0; i < lap.dim; ++i)
        for (std::size_t j = 0; j < lap.dim; ++j)
            via_matrix += m.vertices[i].dot(m.vertices[j]) * (-L[i][j]);
    via_matrix *= 0.5;
    CHECK(std::fabs(quadratic_form(lap, m.vertices) - via_matrix) < 1e-9);
}

TEST_CASE("refine_step leaves a flat grid fixed and eta=0 is the identity") {
    TriangleMesh m = make_plane_grid(8, 8, 0.4);
    SparseLaplacian lap = cotan_laplacian(m);
    RefineConfig cfg;
    cfg.eta = 0.5;
    TriangleMesh out = refine_step(m, lap, cfg);
    for (std::size_t i = 0; i < m.vertices.size(); ++i)
        if (!lap.boundary_vertex[i])
            CHECK((out.vertices[i] - m.vertices[i]).norm() < 1e-9);

    RefineConfig zero = cfg;
    zero.eta = 0.0;
    TriangleMesh noisy = noisy_icosphere(1, 0.05, 3);
    SparseLaplacian lap2 = cotan_laplacian(noisy);
    TriangleMesh id = refine_step(noisy, lap2, zero);
    for (std::size_t i = 0; i < noisy.vertices.size(); ++i)
        CHECK((id.vertices[i] - noisy.vertices[i]).norm() == 0.0);
}

TEST_CASE("spike vertex relaxes by exactly the damped fraction") {
    TriangleMesh m = make_plane_grid(7, 7, 0.5);
    uint32_t center = 3 * 7 + 3;
    double delta = 0.08;
    m.vertices[center].z += delta;
    SparseLaplacian lap = cotan_laplacian(m);
    std::vector<Vec3> disp;
    std::vector<double> norms;
    laplacian_displacement(lap, m.vertices, disp, norms);

    RefineConfig cfg;
    cfg.eta = 0.5;
    TriangleMesh out = refine_step(m, lap, cfg);
    // neighbors lie in the z=0 plane, so the update contracts z by the damping
    double damp = cfg.eta * std::exp(-norms[center]);
    CHECK(out.vertices[center].z == doctest::Approx(delta * (1.0 - damp)).epsilon(1e-9));
    CHECK(out.vertices[center].z < delta);
}

TEST_CASE("per-step displacement obeys the damping bound") {
    TriangleMesh m = noisy_icosphere(2, 0.03, 5);
    SparseLaplacian lap = cotan_laplacian(m);
    std::vector<Vec3> disp;
    std::vector<double> norms;
    laplacian_displacement(lap, m.vertices, disp, norms);

    RefineConfig cfg;
    cfg.eta = 0.7;
    TriangleMesh out = refine_step(m, lap, cfg);
    // recompute the weighted centroids independently
    std::vector<Vec3> acc(lap.dim, Vec3{});
    std::vector<double> wsum(lap.dim, 0.0);
    for (const auto& e : lap.edges) {
        acc[e.a] += m.vertices[e.b] * e.w;
        wsum[e.a] += e.w;
        acc[e.b] += m.vertices[e.a] * e.w;
        wsum[e.b] += e.w;
    }
    for (std::size_t i = 0; i < lap.dim; ++i) {
        double moved = (out.vertices[i] - m.vertices[i]).norm();
        double to_centroid = (acc[i] / wsum[i] - m.vertices[i]).norm();
        CHECK(moved <= cfg.eta * to_centroid + 1e-12);
        if (norms[i] > 1e-9 && to_centroid > 1e-12)
            CHECK(moved < cfg.eta * to_centroid);  // strict when the laplacian is nonzero
    }
}

TEST_CASE("small steps do not increase the edge-sum quadratic form") {
    for (uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL}) {
        TriangleMesh m = noisy_icosphere(2, 0.02, seed);
        SparseLaplacian lap = cotan_laplacian(m);
        double before = quadratic_form(lap, m.vertices);
        RefineConfig cfg;
        cfg.eta = 0.1;
        TriangleMesh out = refine_step(m, lap, cfg);
        double after = quadratic_form(lap, out.vertices);
        CHECK(after <= before + 1e-12);
    }
}

TEST_CASE("refine with max_iters=0 returns the input unchanged") {
    TriangleMesh m = noisy_icosphere(1, 0.03, 8);
    RefineConfig cfg;
    cfg.max_iters = 0;
    RefineReport rep;
    TriangleMesh out = refine(m, cfg, &rep);
    CHECK(rep.iterations_run == 0);
    REQUIRE(out.faces == m.faces);
    for (std::size_t i = 0; i < m.vertices.size(); ++i)
        CHECK((out.vertices[i] - m.vertices[i]).norm() == 0.0);
}

TEST_CASE("noisy sphere: quadratic form strictly decreases for at least 5 iterations") {
    TriangleMesh m = noisy_icosphere(3, 0.01, 6);
    RefineConfig cfg;
    cfg.eta = 0.5;
    cfg.max_iters = 8;
    cfg.plateau_tol = 0.0;  // no early stop for the monotonicity check
    RefineReport rep;
    TriangleMesh out = refine(m, cfg, &rep);
    REQUIRE(rep.rows.size() >= 6);
    for (int i = 1; i <= 5; ++i) CHECK(rep.rows[i].quadratic_form < rep.rows[i - 1].quadratic_form);
    // connectivity preserved bit for bit
    REQUIRE(out.faces == m.faces);
}

TEST_CASE("prolonged smoothing drives the cube's edge curvature below threshold") {
    // a cube has sharp edges: the mean laplacian-displacement norm collapses
    // under repeated smoothing (the over-smoothing regime)
    SyntheticScene scene;
    Shape box;
    box.kind = Shape::Kind::Box;
    box.center = {0.013, 0.017, 0.011};  // keep faces off the sampling lattice
    box.half_extents = {0.52, 0.52, 0.52};
    scene.shapes = {box};
    BatchSdf sdf = [&](const std::vector<Vec3>& xs, std::vector<double>& out) {
        out.resize(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) out[i] = scene.sdf(xs[i]);
    };
    TriangleMesh m = marching_cubes(sdf, 0.1, {Aabb{{-0.8, -0.8, -0.8}, {0.8, 0.8, 0.8}}});
    REQUIRE(m.face_count() > 100);

    // sharpness statistic: edges whose dihedral angle exceeds 30 degrees
    auto sharp_edges = [](const TriangleMesh& mesh) {
        std::map<std::pair<uint32_t, uint32_t>, std::vector<Vec3>> edge_normals;
        for (const auto& f : mesh.faces) {
            Vec3 n = (mesh.vertices[f[1]] - mesh.vertices[f[0]])
                         .cross(mesh.vertices[f[2]] - mesh.vertices[f[0]])
                         .normalized();
            for (int k = 0; k < 3; ++k) {
                uint32_t i = f[k], j = f[(k + 1) % 3];
                edge_normals[{std::min(i, j), std::max(i, j)}].push_back(n);
            }
        }
        int sharp = 0;
        for (const auto& [e, ns] : edge_normals)
            if (ns.size() == 2 && ns[0].dot(ns[1]) < std::cos(30.0 * M_PI / 180.0)) ++sharp;
        return sharp;
    };
    int before = sharp_edges(m);
    CHECK(before > 50);  // the cube's rims

    // plain neighborhood averaging is pure diffusion; the weighted default is
    // stationary once every vertex reaches its zero-cotan-laplacian position,
    // which is what makes it feature-preserving
    RefineConfig cfg;
    cfg.eta = 0.5;
    cfg.max_iters = 200;
    cfg.plateau_tol = -1e300;  // never stop early
    cfg.weighted_average = false;
    TriangleMesh out = refine(m, cfg);
    int after = sharp_edges(out);
    CHECK(after < before / 10);
    REQUIRE(out.faces == m.faces);

    RefineConfig wcfg = cfg;
    wcfg.weighted_average = true;
    TriangleMesh wout = refine(m, wcfg);
    CHECK(sharp_edges(wout) > after);  // the default mode preserves more of the rims
}

TEST_CASE("refine stops on degenerate input and returns the last valid mesh") {
    TriangleMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
    m.faces = {{0, 1, 2}};  // zero area
    RefineConfig cfg;
    RefineReport rep;
    TriangleMesh out = refine(m, cfg, &rep);
    CHECK(rep.degenerate_stop);
    REQUIRE(out.faces == m.faces);
}

TEST_CASE("gradient-form update also smooths") {
    TriangleMesh m = noisy_icosphere(2, 0.015, 14);
    SparseLaplacian lap = cotan_laplacian(m);
    double before = quadratic_form(lap, m.vertices);
    RefineConfig cfg;
    cfg.eta = 0.1;
    cfg.gradient_form = true;
    TriangleMesh out = refine_step(m, lap, cfg);
    CHECK(quadratic_form(lap, out.vertices) < before);
}

TEST_CASE("refine report csv has the documented columns") {
    TriangleMesh m = noisy_icosphere(1, 0.02, 2);
    RefineConfig cfg;
    cfg.max_iters = 3;
    RefineReport rep;
    refine(m, cfg, &rep);
    auto dir = temp_dir("refine_csv");
    write_refine_csv(dir + "/r.csv", rep);
    std::ifstream in(dir + "/r.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "iter,quadratic_form,mean_disp_norm,metric");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == int(rep.rows.size()));
}

TEST_SUITE_END();
