#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sdfmap/core.hpp"
#include "sdfmap/field.hpp"

namespace sdfmap {

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<uint32_t, 3>> faces;
    std::vector<double> scalar;  // optional per-vertex channel (empty or |V|)

    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t face_count() const { return faces.size(); }
    bool empty() const { return vertices.empty(); }
    void validate() const;
};

// Batch SDF evaluator: fills `out` with one value per query point.
using BatchSdf = std::function<void(const std::vector<Vec3>&, std::vector<double>&)>;

// Standard 256-case marching cubes over the union of lattice-aligned boxes at
// resolution `cell`. All boxes snap to one global lattice, so vertices on
// shared box faces are emitted once and seams cannot open. Grid samples that
// are exactly zero are nudged to -1e-9 before the case lookup. Triangles are
// wound so normals point toward positive SDF.
TriangleMesh marching_cubes(const BatchSdf& sdf, double cell, const std::vector<Aabb>& bounds,
                            int threads = 1);

inline TriangleMesh marching_cubes(const MultiScaleField& field, const OctreeGrid& grid,
                                   double cell, const std::vector<Aabb>& bounds, int threads = 1) {
    BatchSdf sdf = [&](const std::vector<Vec3>& xs, std::vector<double>& out) {
        out = eval_batch(field, grid, xs, threads);
    };
    return marching_cubes(sdf, cell, bounds, threads);
}

// OBJ (v/f lines) or binary little-endian PLY by extension or explicit format
// string ("obj"/"ply"). The optional scalar channel is stored as the PLY
// `quality` property; OBJ drops it.
void write_mesh(const std::string& path, const TriangleMesh& mesh, const std::string& format = "");
TriangleMesh read_mesh(const std::string& path);

// Per-edge connectivity: the vertex pair, the angles opposite the edge in its
// incident triangles (one for boundary edges), and the incident face ids.
struct EdgeInfo {
    uint32_t a = 0, b = 0;  // a < b
    int n_faces = 0;
    double opposite_angles[2] = {0.0, 0.0};
};

struct Adjacency {
    std::vector<std::vector<uint32_t>> neighbors;  // sorted ascending
    std::vector<EdgeInfo> edges;
    std::vector<uint8_t> boundary_vertex;          // touches an edge with n_faces == 1
};

// Requires interior edges to have exactly two incident faces; an edge with
// three or more is reported as an error listing the offenders.
Adjacency vertex_adjacency(const TriangleMesh& mesh);

}  // namespace sdfmap
