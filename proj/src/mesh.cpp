#include "sdfmap/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "mc_tables.hpp"
#include "ply_min.hpp"

namespace sdfmap {

void TriangleMesh::validate() const {
    for (std::size_t i = 0; i < vertices.size(); ++i)
        if (!vertices[i].finite()) fail("mesh: non-finite vertex %zu", i);
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto& fc = faces[f];
        for (int k = 0; k < 3; ++k)
            if (fc[k] >= vertices.size()) fail("mesh: face %zu index out of range", f);
        if (fc[0] == fc[1] || fc[1] == fc[2] || fc[0] == fc[2])
            fail("mesh: degenerate face %zu", f);
    }
    if (!scalar.empty() && scalar.size() != vertices.size())
        fail("mesh: scalar channel size mismatch");
}

namespace {

constexpr int64_t kLatticeOffset = 1 << 20;

uint64_t pack_lattice(int64_t i, int64_t j, int64_t k) {
    int64_t a = i + kLatticeOffset, b = j + kLatticeOffset, c = k + kLatticeOffset;
    if (a < 0 || b < 0 || c < 0 || a >= (1 << 21) || b >= (1 << 21) || c >= (1 << 21))
        fail("marching_cubes: lattice index out of range");
    return (uint64_t(a) << 42) | (uint64_t(b) << 21) | uint64_t(c);
}

void unpack_lattice(uint64_t key, int64_t& i, int64_t& j, int64_t& k) {
    i = int64_t((key >> 42) & 0x1FFFFF) - kLatticeOffset;
    j = int64_t((key >> 21) & 0x1FFFFF) - kLatticeOffset;
    k = int64_t(key & 0x1FFFFF) - kLatticeOffset;
}

constexpr int kCornerOffset[8][3] = {
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
    {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1},
};

}  // namespace

TriangleMesh marching_cubes(const BatchSdf& sdf, double cell, const std::vector<Aabb>& bounds,
                            int threads) {
    if (!(cell > 0.0)) fail("marching_cubes: cell must be positive");

    // active cells on one global lattice, so box seams share samples exactly
    std::unordered_set<uint64_t> cell_set;
    for (const Aabb& box : bounds) {
        if (box.empty()) continue;
        int64_t i0 = int64_t(std::floor(box.lo.x / cell)), i1 = int64_t(std::ceil(box.hi.x / cell));
        int64_t j0 = int64_t(std::floor(box.lo.y / cell)), j1 = int64_t(std::ceil(box.hi.y / cell));
        int64_t k0 = int64_t(std::floor(box.lo.z / cell)), k1 = int64_t(std::ceil(box.hi.z / cell));
        for (int64_t i = i0; i < i1; ++i)
            for (int64_t j = j0; j < j1; ++j)
                for (int64_t k = k0; k < k1; ++k) cell_set.insert(pack_lattice(i, j, k));
    }
    std::vector<uint64_t> cells(cell_set.begin(), cell_set.end());
    std::sort(cells.begin(), cells.end());

    // deduplicated corner samples
    std::unordered_map<uint64_t, uint32_t> corner_id;
    corner_id.reserve(cells.size() * 2);
    std::vector<Vec3> corner_pos;
    std::vector<std::array<uint32_t, 8>> cell_corners(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
        int64_t i, j, k;
        unpack_lattice(cells[c], i, j, k);
        for (int v = 0; v < 8; ++v) {
            uint64_t key = pack_lattice(i + kCornerOffset[v][0], j + kCornerOffset[v][1],
                                        k + kCornerOffset[v][2]);
            auto [it, fresh] = corner_id.emplace(key, uint32_t(corner_pos.size()));
            if (fresh)
                corner_pos.push_back({double(i + kCornerOffset[v][0]) * cell,
                                      double(j + kCornerOffset[v][1]) * cell,
                                      double(k + kCornerOffset[v][2]) * cell});
            cell_corners[c][v] = it->second;
        }
    }

    std::vector<double> values;
    sdf(corner_pos, values);
    if (values.size() != corner_pos.size()) fail("marching_cubes: evaluator returned wrong count");
    (void)threads;
    for (double& v : values) {
        if (!std::isfinite(v)) fail("marching_cubes: non-finite SDF sample");
        if (v == 0.0) v = -1e-9;  // tie-break: zero samples count as inside
    }

    TriangleMesh mesh;
    std::unordered_map<uint64_t, uint32_t> edge_vertex;  // (corner_lo<<32|corner_hi) -> vertex
    uint32_t tri_edges[12];
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto& ids = cell_corners[c];
        int ci = 0;
        for (int v = 0; v < 8; ++v)
            if (values[ids[v]] < 0.0) ci |= 1 << v;
        uint16_t emask = mc::kEdgeTable[ci];
        if (emask == 0) continue;
        for (int e = 0; e < 12; ++e) {
            if (!(emask & (1 << e))) continue;
            uint32_t a = ids[mc::kEdgeCorners[e][0]], b = ids[mc::kEdgeCorners[e][1]];
            uint64_t key = a < b ? (uint64_t(a) << 32) | b : (uint64_t(b) << 32) | a;
            auto [it, fresh] = edge_vertex.emplace(key, uint32_t(mesh.vertices.size()));
            if (fresh) {
                double fa = values[a], fb = values[b];
                double t = fa / (fa - fb);
                const Vec3& pa = corner_pos[a];
                const Vec3& pb = corner_pos[b];
                mesh.vertices.push_back(pa + (pb - pa) * t);
            }
            tri_edges[e] = it->second;
        }
        const int8_t* tt = mc::kTriTable[ci];
        for (int t = 0; tt[t] != -1; t += 3) {
            // swapped winding: normals point toward positive SDF
            uint32_t v0 = tri_edges[tt[t]], v1 = tri_edges[tt[t + 2]], v2 = tri_edges[tt[t + 1]];
            if (v0 == v1 || v1 == v2 || v0 == v2) continue;
            mesh.faces.push_back({v0, v1, v2});
        }
    }
    return mesh;
}

namespace {

void write_obj(const std::string& path, const TriangleMesh& mesh) {
    std::ofstream out(path);
    if (!out) fail("%s: cannot write", path.c_str());
    char buf[160];
    for (const Vec3& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", v.x, v.y, v.z);
        out << buf;
    }
    for (const auto& f : mesh.faces) {
        std::snprintf(buf, sizeof(buf), "f %u %u %u\n", f[0] + 1, f[1] + 1, f[2] + 1);
        out << buf;
    }
}

void write_ply(const std::string& path, const TriangleMesh& mesh) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("%s: cannot write", path.c_str());
    bool quality = !mesh.scalar.empty();
    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << mesh.vertices.size() << "\n"
        << "property float x\nproperty float y\nproperty float z\n";
    if (quality) out << "property float quality\n";
    out << "element face " << mesh.faces.size() << "\n"
        << "property list uchar int vertex_indices\nend_header\n";
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        ply::write_binary_scalar(out, ply::Scalar::F32, mesh.vertices[i].x);
        ply::write_binary_scalar(out, ply::Scalar::F32, mesh.vertices[i].y);
        ply::write_binary_scalar(out, ply::Scalar::F32, mesh.vertices[i].z);
        if (quality) ply::write_binary_scalar(out, ply::Scalar::F32, mesh.scalar[i]);
    }
    for (const auto& f : mesh.faces) {
        ply::write_binary_scalar(out, ply::Scalar::U8, 3);
        for (int k = 0; k < 3; ++k) ply::write_binary_scalar(out, ply::Scalar::I32, double(f[k]));
    }
}

std::string detect_format(const std::string& path, const std::string& format) {
    std::string fmt = format;
    if (fmt.empty()) {
        auto dot = path.find_last_of('.');
        if (dot != std::string::npos) fmt = path.substr(dot + 1);
        for (char& c : fmt) c = char(std::tolower(c));
    }
    if (fmt != "obj" && fmt != "ply") fail("%s: unknown mesh format '%s'", path.c_str(), fmt.c_str());
    return fmt;
}

TriangleMesh read_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("%s: cannot open", path.c_str());
    TriangleMesh mesh;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            Vec3 v;
            if (!(ls >> v.x >> v.y >> v.z)) fail("%s: bad vertex at line %zu", path.c_str(), lineno);
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::array<uint32_t, 3> f{};
            for (int k = 0; k < 3; ++k) {
                std::string tok;
                if (!(ls >> tok)) fail("%s: bad face at line %zu", path.c_str(), lineno);
                long idx = std::strtol(tok.c_str(), nullptr, 10);
                if (idx <= 0) fail("%s: unsupported face index at line %zu", path.c_str(), lineno);
                f[k] = uint32_t(idx - 1);
            }
            mesh.faces.push_back(f);
        }
    }
    mesh.validate();
    return mesh;
}

TriangleMesh read_ply_mesh(const std::string& path) {
    ply::File f = ply::read(path);
    const ply::Element* v = f.find("vertex");
    if (!v) fail("%s: ply file has no vertex element", path.c_str());
    int cx = v->find_scalar("x"), cy = v->find_scalar("y"), cz = v->find_scalar("z");
    if (cx < 0 || cy < 0 || cz < 0) fail("%s: ply vertex element lacks x/y/z", path.c_str());
    int cq = v->find_scalar("quality");
    TriangleMesh mesh;
    mesh.vertices.resize(v->count);
    for (std::size_t i = 0; i < v->count; ++i)
        mesh.vertices[i] = {v->scalar_cols[cx][i], v->scalar_cols[cy][i], v->scalar_cols[cz][i]};
    if (cq >= 0) {
        mesh.scalar.resize(v->count);
        for (std::size_t i = 0; i < v->count; ++i) mesh.scalar[i] = v->scalar_cols[cq][i];
    }
    const ply::Element* fe = f.find("face");
    if (fe && !fe->list_cols.empty()) {
        mesh.faces.reserve(fe->count);
        for (const auto& row : fe->list_cols[0]) {
            if (row.size() != 3) fail("%s: non-triangular face in ply", path.c_str());
            mesh.faces.push_back({uint32_t(row[0]), uint32_t(row[1]), uint32_t(row[2])});
        }
    }
    mesh.validate();
    return mesh;
}

}  // namespace

void write_mesh(const std::string& path, const TriangleMesh& mesh, const std::string& format) {
    std::string fmt = detect_format(path, format);
    if (fmt == "obj") write_obj(path, mesh);
    else write_ply(path, mesh);
}

TriangleMesh read_mesh(const std::string& path) {
    std::string fmt = detect_format(path, "");
    return fmt == "obj" ? read_obj(path) : read_ply_mesh(path);
}

Adjacency vertex_adjacency(const TriangleMesh& mesh) {
    mesh.validate();
    Adjacency adj;
    adj.neighbors.resize(mesh.vertices.size());

    auto angle_at = [&](uint32_t apex, uint32_t i, uint32_t j) {
        Vec3 u = mesh.vertices[i] - mesh.vertices[apex];
        Vec3 w = mesh.vertices[j] - mesh.vertices[apex];
        double den = u.norm() * w.norm();
        if (den <= 0.0) return 0.0;
        double c = std::min(1.0, std::max(-1.0, u.dot(w) / den));
        return std::acos(c);
    };

    std::unordered_map<uint64_t, uint32_t> edge_index;
    edge_index.reserve(mesh.faces.size() * 2);
    std::vector<int> extra_faces;  // edges with > 2 incident faces
    for (const auto& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            uint32_t i = f[k], j = f[(k + 1) % 3], apex = f[(k + 2) % 3];
            uint64_t key = i < j ? (uint64_t(i) << 32) | j : (uint64_t(j) << 32) | i;
            auto [it, fresh] = edge_index.emplace(key, uint32_t(adj.edges.size()));
            if (fresh) {
                EdgeInfo e;
                e.a = std::min(i, j);
                e.b = std::max(i, j);
                adj.edges.push_back(e);
            }
            EdgeInfo& e = adj.edges[it->second];
            if (e.n_faces < 2) e.opposite_angles[e.n_faces] = angle_at(apex, i, j);
            else extra_faces.push_back(int(it->second));
            ++e.n_faces;
        }
    }
    if (!extra_faces.empty()) {
        std::string msg = "vertex_adjacency: non-manifold edges:";
        int listed = 0;
        for (int ei : extra_faces) {
            if (listed++ == 8) { msg += " ..."; break; }
            msg += " (" + std::to_string(adj.edges[ei].a) + "," + std::to_string(adj.edges[ei].b) + ")";
        }
        fail("%s", msg.c_str());
    }

    adj.boundary_vertex.assign(mesh.vertices.size(), 0);
    for (const EdgeInfo& e : adj.edges) {
        adj.neighbors[e.a].push_back(e.b);
        adj.neighbors[e.b].push_back(e.a);
        if (e.n_faces == 1) {
            adj.boundary_vertex[e.a] = 1;
            adj.boundary_vertex[e.b] = 1;
        }
    }
    for (auto& nb : adj.neighbors) std::sort(nb.begin(), nb.end());
    return adj;
}

}  // namespace sdfmap
