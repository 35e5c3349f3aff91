#include <sstream>

#include "doctest.h"
#include "test_helpers.hpp"

#include "sdfmap/octree.hpp"

using namespace sdfmap;
using namespace testutil;

TEST_SUITE_BEGIN("octree");

TEST_CASE("morton encodes the documented bit interleave") {
    CHECK(morton::encode(0, 0, 0) == 0);
    CHECK(morton::encode(1, 1, 1) == 7);
    CHECK(morton::encode(1, 0, 0) == 1);
    CHECK(morton::encode(0, 1, 0) == 2);
    CHECK(morton::encode(0, 0, 1) == 4);
    CHECK(morton::encode(2, 0, 0) == 8);
}

TEST_CASE("morton round-trips 10k random cells") {
    Rng rng(2024);
    for (int i = 0; i < 10000; ++i) {
        uint32_t x = uint32_t(rng.below(morton::kMaxCoord));
        uint32_t y = uint32_t(rng.below(morton::kMaxCoord));
        uint32_t z = uint32_t(rng.below(morton::kMaxCoord));
        uint32_t a, b, c;
        morton::decode(morton::encode(x, y, z), a, b, c);
        REQUIRE(a == x);
        REQUIRE(b == y);
        REQUIRE(c == z);
    }
}

TEST_CASE("morton rejects out-of-range cells") {
    CHECK_THROWS_AS(morton::encode(1u << 21, 0, 0), std::runtime_error);
}

TEST_CASE("single point occupies one node per level with 8 corners") {
    std::vector<PointSample> pts = {{{0, 0, 0}, {1, 1, 1}, 0}};
    OctreeGrid g = OctreeGrid::build(pts, {3, 0.1, 4}, 7);
    for (int l = 0; l < 3; ++l) {
        CHECK(g.level(l).node_keys.size() == 1);
        CHECK(g.level(l).corner_keys.size() == 8);
        CHECK(g.level(l).features.size() == 8 * 4);
    }
}

TEST_CASE("two points in the same leaf deduplicate") {
    std::vector<PointSample> a = {{{0.01, 0.02, 0.03}, {1, 1, 1}, 0}};
    std::vector<PointSample> b = {{{0.01, 0.02, 0.03}, {1, 1, 1}, 0},
                                  {{0.02, 0.01, 0.04}, {1, 1, 1}, 0}};
    OctreeGrid ga = OctreeGrid::build(a, {3, 0.1, 4}, 7);
    OctreeGrid gb = OctreeGrid::build(b, {3, 0.1, 4}, 7);
    CHECK(ga.same_structure(gb));
}

TEST_CASE("two points 1.5 leaf widths apart share 4 corners") {
    const double W = 0.1;
    std::vector<PointSample> pts = {{{0.05 * W, 0, 0}, {1, 1, 1}, 0},
                                    {{1.55 * W, 0, 0}, {1, 1, 1}, 0}};
    OctreeGrid g = OctreeGrid::build(pts, {1, W, 2}, 7);
    CHECK(g.level(0).node_keys.size() == 2);
    CHECK(g.level(0).corner_keys.size() == 12);  // 8 + 8 - 4 shared
}

TEST_CASE("every occupied node has an occupied ancestor at every coarser level") {
    auto scene = unit_sphere_scene(300, 0.0);
    auto pts = synth_scan(scene, 3);
    OctreeGrid g = OctreeGrid::build(pts, {3, 0.1, 2}, 9);
    for (int l = 0; l + 1 < g.levels(); ++l) {
        for (uint64_t code : g.level(l).node_keys) {
            uint32_t x, y, z;
            morton::decode(code, x, y, z);
            uint64_t parent = morton::encode(x >> 1, y >> 1, z >> 1);
            CHECK(g.level(l + 1).nodes.count(parent) == 1);
        }
    }
}

TEST_CASE("query at a node corner puts unit weight on that corner") {
    std::vector<PointSample> pts = {{{0.05, 0.05, 0.05}, {1, 1, 1}, 0}};
    OctreeGrid g = OctreeGrid::build(pts, {1, 0.1, 2}, 7);
    LevelHit hit = g.locate(0, {0.05, 0.05, 0.05});
    REQUIRE(hit.occupied);
    // query exactly at the node's min corner
    auto lf = g.query_features(hit.node_min);
    REQUIRE(lf[0].occupied);
    CHECK(lf[0].weights[0] == doctest::Approx(1.0).epsilon(1e-12));
    for (int c = 1; c < 8; ++c) CHECK(lf[0].weights[c] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("query at the node center weights all corners equally") {
    std::vector<PointSample> pts = {{{0.05, 0.05, 0.05}, {1, 1, 1}, 0}};
    OctreeGrid g = OctreeGrid::build(pts, {1, 0.1, 2}, 7);
    LevelHit hit = g.locate(0, {0.05, 0.05, 0.05});
    Vec3 center = hit.node_min + Vec3{0.05, 0.05, 0.05};
    auto lf = g.query_features(center);
    for (int c = 0; c < 8; ++c) CHECK(lf[0].weights[c] == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("trilinear weights sum to 1 and match the direct formula") {
    auto scene = unit_sphere_scene(100, 0.0);
    auto pts = synth_scan(scene, 3);
    OctreeGrid g = OctreeGrid::build(pts, {3, 0.1, 3}, 9);
    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
        const auto& p = pts[rng.below(pts.size())].position;
        Vec3 q = p + rng.normal3(0.03);
        auto lf = g.query_features(q);
        for (int l = 0; l < g.levels(); ++l) {
            double sum = 0.0;
            for (double w : lf[l].weights) {
                CHECK(w >= 0.0);
                sum += w;
            }
            CHECK(std::fabs(sum - 1.0) < 1e-12);
            if (!lf[l].occupied) continue;

            // independent scalar trilinear oracle
            LevelHit hit = g.locate(l, q);
            Vec3 t = (q - hit.node_min) * hit.inv_size;
            for (int d = 0; d < g.feature_dim(); ++d) {
                double direct = 0.0;
                for (int c = 0; c < 8; ++c) {
                    double wx = (c & 1) ? t.x : 1.0 - t.x;
                    double wy = (c & 2) ? t.y : 1.0 - t.y;
                    double wz = (c & 4) ? t.z : 1.0 - t.z;
                    direct += wx * wy * wz * lf[l].corner_features[c][d];
                }
                double blended = 0.0;
                for (int c = 0; c < 8; ++c)
                    blended += lf[l].weights[c] * lf[l].corner_features[c][d];
                CHECK(std::fabs(direct - blended) < 1e-12);
            }
        }
    }
}

TEST_CASE("unoccupied query is flagged with zero features and uniform weights") {
    std::vector<PointSample> pts = {{{0.05, 0.05, 0.05}, {1, 1, 1}, 0}};
    OctreeGrid g = OctreeGrid::build(pts, {2, 0.1, 2}, 7);
    auto lf = g.query_features({50.0, 50.0, 50.0});
    for (int l = 0; l < 2; ++l) {
        CHECK_FALSE(lf[l].occupied);
        for (int c = 0; c < 8; ++c) {
            CHECK(lf[l].weights[c] == doctest::Approx(0.125));
            for (double f : lf[l].corner_features[c]) CHECK(f == 0.0);
        }
    }
}

TEST_CASE("per-query lookup counter equals the level count") {
    auto scene = unit_sphere_scene(100, 0.0);
    auto pts = synth_scan(scene, 3);
    OctreeGrid g = OctreeGrid::build(pts, {3, 0.1, 2}, 9);
    g.reset_lookup_count();
    std::vector<LevelHit> hits(g.levels());
    g.locate_all(pts[0].position, hits.data());
    CHECK(g.lookup_count() == 3);
    g.locate_all({9, 9, 9}, hits.data());
    CHECK(g.lookup_count() == 6);
}

TEST_CASE("occupied leaf bounds dilate by whole cells and cover the input") {
    const double W = 0.1;
    std::vector<PointSample> one = {{{0.05, 0.05, 0.05}, {1, 1, 1}, 0}};
    OctreeGrid g = OctreeGrid::build(one, {1, W, 2}, 7);

    auto b0 = g.occupied_leaf_bounds(0);
    REQUIRE(b0.size() == 1);
    CHECK(b0[0].extent().x == doctest::Approx(W));
    CHECK(b0[0].contains(one[0].position));

    auto b1 = g.occupied_leaf_bounds(1);
    CHECK(b1[0].extent().x == doctest::Approx(3 * W));
    CHECK((b1[0].lo + b1[0].extent() * 0.5 - (b0[0].lo + b0[0].extent() * 0.5)).norm() < 1e-12);

    auto scene = unit_sphere_scene(500, 0.0);
    auto pts = synth_scan(scene, 3);
    OctreeGrid gs = OctreeGrid::build(pts, {3, 0.1, 2}, 9);
    auto boxes = gs.occupied_leaf_bounds(0);
    for (const auto& p : pts) {
        bool inside = false;
        for (const auto& b : boxes)
            if (b.contains(p.position)) {
                inside = true;
                break;
            }
        CHECK(inside);
    }
}

TEST_CASE("builds from the same seed are identical; feature storage is corner-keyed") {
    auto scene = unit_sphere_scene(300, 0.0);
    auto pts = synth_scan(scene, 3);
    OctreeGrid a = OctreeGrid::build(pts, {3, 0.1, 4}, 42);
    OctreeGrid b = OctreeGrid::build(pts, {3, 0.1, 4}, 42);
    CHECK(a.same_structure(b));
    for (int l = 0; l < a.levels(); ++l) {
        REQUIRE(a.level(l).features == b.level(l).features);
        CHECK(a.level(l).features.size() == a.level(l).corner_keys.size() * 4);
        for (double f : a.level(l).features) CHECK(std::fabs(f) <= 1e-4);
    }
    OctreeGrid c = OctreeGrid::build(pts, {3, 0.1, 4}, 43);
    CHECK(a.same_structure(c));
    CHECK(a.level(0).features != c.level(0).features);
}

TEST_CASE("grid serialization round-trips bit-exactly") {
    auto scene = unit_sphere_scene(200, 0.0);
    auto pts = synth_scan(scene, 3);
    OctreeGrid g = OctreeGrid::build(pts, {3, 0.1, 3}, 11);
    std::stringstream ss;
    g.serialize(ss);
    OctreeGrid back = OctreeGrid::deserialize(ss);
    CHECK(back.same_structure(g));
    CHECK(back.base_size() == g.base_size());
    CHECK((back.origin() - g.origin()).norm() == 0.0);
    for (int l = 0; l < 3; ++l) REQUIRE(back.level(l).features == g.level(l).features);
}

TEST_SUITE_END();
