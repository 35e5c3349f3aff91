#include "sdfmap/octree.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace sdfmap {

namespace {

constexpr uint32_t kGridMagic = 0x52474D53;  // "SMGR"
constexpr uint32_t kGridVersion = 1;

struct Cell {
    int64_t x, y, z;
    bool valid() const {
        return x >= 0 && y >= 0 && z >= 0 && x < morton::kMaxCoord && y < morton::kMaxCoord &&
               z < morton::kMaxCoord;
    }
    uint64_t code() const { return morton::encode(uint32_t(x), uint32_t(y), uint32_t(z)); }
};

template <class T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) fail("octree: truncated grid blob");
    return v;
}

}  // namespace

OctreeGrid OctreeGrid::build(const std::vector<PointSample>& points, const OctreeConfig& cfg,
                             uint64_t seed) {
    if (cfg.levels < 1) fail("octree: levels must be >= 1");
    if (!(cfg.base_size > 0.0)) fail("octree: base_size must be positive");
    if (cfg.feature_dim < 1) fail("octree: feature_dim must be >= 1");

    OctreeGrid g;
    g.cfg_ = cfg;
    g.levels_.resize(cfg.levels);

    Aabb box;
    for (const auto& p : points) box.expand(p.position);
    if (box.empty()) box.expand(Vec3{0, 0, 0});
    // lattice origin: floor of the bounding box, minus one leaf cell
    g.origin_ = {(std::floor(box.lo.x / cfg.base_size) - 1.0) * cfg.base_size,
                 (std::floor(box.lo.y / cfg.base_size) - 1.0) * cfg.base_size,
                 (std::floor(box.lo.z / cfg.base_size) - 1.0) * cfg.base_size};

    // occupied nodes: leaf cell of each point plus all ancestors
    for (const auto& p : points) {
        Cell leaf{int64_t(std::floor((p.position.x - g.origin_.x) / cfg.base_size)),
                  int64_t(std::floor((p.position.y - g.origin_.y) / cfg.base_size)),
                  int64_t(std::floor((p.position.z - g.origin_.z) / cfg.base_size))};
        if (!leaf.valid())
            fail("octree: point (%g, %g, %g) quantizes outside the 2^21 lattice", p.position.x,
                 p.position.y, p.position.z);
        for (int l = 0; l < cfg.levels; ++l) {
            Cell c{leaf.x >> l, leaf.y >> l, leaf.z >> l};
            uint64_t code = c.code();
            auto& lev = g.levels_[l];
            if (lev.nodes.emplace(code, NodeRec{}).second) lev.node_keys.push_back(code);
        }
    }

    // corner features, shared between adjacent nodes, initialized from the seed
    const double init_scale = 1e-4;
    for (int l = 0; l < cfg.levels; ++l) {
        auto& lev = g.levels_[l];
        Rng rng = Rng(seed).fork(0x6F637472ULL + uint64_t(l));
        for (uint64_t code : lev.node_keys) {
            uint32_t cx, cy, cz;
            morton::decode(code, cx, cy, cz);
            NodeRec& rec = lev.nodes[code];
            for (int c = 0; c < 8; ++c) {
                uint64_t ckey = morton::encode(cx + ((c >> 0) & 1), cy + ((c >> 1) & 1),
                                               cz + ((c >> 2) & 1));
                auto [it, fresh] = lev.corner_index.emplace(ckey, uint32_t(lev.corner_keys.size()));
                if (fresh) {
                    lev.corner_keys.push_back(ckey);
                    for (int d = 0; d < cfg.feature_dim; ++d)
                        lev.features.push_back(rng.uniform(-init_scale, init_scale));
                }
                rec.corner_slots[c] = it->second;
            }
        }
    }
    return g;
}

LevelHit OctreeGrid::locate(int level, const Vec3& x) const {
    const double size = level_size(level);
    const double inv = 1.0 / size;
    Cell c{int64_t(std::floor((x.x - origin_.x) * inv)), int64_t(std::floor((x.y - origin_.y) * inv)),
           int64_t(std::floor((x.z - origin_.z) * inv))};
    LevelHit hit;
    hit.node_min = {origin_.x + double(c.x) * size, origin_.y + double(c.y) * size,
                    origin_.z + double(c.z) * size};
    hit.inv_size = inv;
    lookup_count_.fetch_add(1, std::memory_order_relaxed);
    if (!c.valid()) return hit;
    auto it = levels_[level].nodes.find(c.code());
    if (it == levels_[level].nodes.end()) return hit;
    hit.occupied = true;
    hit.corner_slots = it->second.corner_slots.data();
    return hit;
}

std::array<double, 8> OctreeGrid::trilinear_weights(const Vec3& t) {
    std::array<double, 8> w;
    double mx[2] = {1.0 - t.x, t.x};
    double my[2] = {1.0 - t.y, t.y};
    double mz[2] = {1.0 - t.z, t.z};
    for (int c = 0; c < 8; ++c)
        w[c] = mx[(c >> 0) & 1] * my[(c >> 1) & 1] * mz[(c >> 2) & 1];
    return w;
}

std::vector<LevelFeatures> OctreeGrid::query_features(const Vec3& x) const {
    std::vector<LevelFeatures> out(cfg_.levels);
    for (int l = 0; l < cfg_.levels; ++l) {
        LevelHit hit = locate(l, x);
        LevelFeatures& lf = out[l];
        lf.occupied = hit.occupied;
        for (auto& cf : lf.corner_features) cf.assign(cfg_.feature_dim, 0.0);
        if (!hit.occupied) {
            lf.weights.fill(0.125);
            continue;
        }
        Vec3 t = (x - hit.node_min) * hit.inv_size;
        lf.weights = trilinear_weights(t);
        for (int c = 0; c < 8; ++c)
            for (int d = 0; d < cfg_.feature_dim; ++d)
                lf.corner_features[c][d] = feature_value(l, hit.corner_slots[c], d);
    }
    return out;
}

std::vector<Aabb> OctreeGrid::occupied_leaf_bounds(int dilation) const {
    if (dilation < 0) fail("octree: dilation must be non-negative");
    std::vector<Aabb> out;
    const double W = cfg_.base_size;
    out.reserve(levels_[0].node_keys.size());
    for (uint64_t code : levels_[0].node_keys) {
        uint32_t cx, cy, cz;
        morton::decode(code, cx, cy, cz);
        Aabb b;
        b.lo = {origin_.x + (double(cx) - dilation) * W, origin_.y + (double(cy) - dilation) * W,
                origin_.z + (double(cz) - dilation) * W};
        b.hi = {origin_.x + (double(cx) + 1 + dilation) * W,
                origin_.y + (double(cy) + 1 + dilation) * W,
                origin_.z + (double(cz) + 1 + dilation) * W};
        out.push_back(b);
    }
    return out;
}

std::size_t OctreeGrid::feature_count() const {
    std::size_t n = 0;
    for (const auto& lev : levels_) n += lev.features.size();
    return n;
}

std::size_t OctreeGrid::level_feature_offset(int level) const {
    std::size_t n = 0;
    for (int l = 0; l < level; ++l) n += levels_[l].features.size();
    return n;
}

void OctreeGrid::serialize(std::ostream& out) const {
    put(out, kGridMagic);
    put(out, kGridVersion);
    put(out, int32_t(cfg_.levels));
    put(out, int32_t(cfg_.feature_dim));
    put(out, cfg_.base_size);
    put(out, origin_.x);
    put(out, origin_.y);
    put(out, origin_.z);
    for (const auto& lev : levels_) {
        put(out, uint64_t(lev.node_keys.size()));
        for (uint64_t k : lev.node_keys) put(out, k);
        put(out, uint64_t(lev.corner_keys.size()));
        for (std::size_t i = 0; i < lev.corner_keys.size(); ++i) {
            put(out, lev.corner_keys[i]);
            out.write(reinterpret_cast<const char*>(&lev.features[i * cfg_.feature_dim]),
                      std::streamsize(sizeof(double) * cfg_.feature_dim));
        }
    }
}

OctreeGrid OctreeGrid::deserialize(std::istream& in) {
    if (get<uint32_t>(in) != kGridMagic) fail("octree: bad grid magic");
    uint32_t version = get<uint32_t>(in);
    if (version != kGridVersion) fail("octree: unsupported grid version %u", version);
    OctreeGrid g;
    g.cfg_.levels = get<int32_t>(in);
    g.cfg_.feature_dim = get<int32_t>(in);
    g.cfg_.base_size = get<double>(in);
    g.origin_.x = get<double>(in);
    g.origin_.y = get<double>(in);
    g.origin_.z = get<double>(in);
    if (g.cfg_.levels < 1 || g.cfg_.levels > 24 || g.cfg_.feature_dim < 1)
        fail("octree: corrupt grid header");
    g.levels_.resize(g.cfg_.levels);
    for (auto& lev : g.levels_) {
        uint64_t nnodes = get<uint64_t>(in);
        lev.node_keys.reserve(nnodes);
        for (uint64_t i = 0; i < nnodes; ++i) {
            uint64_t k = get<uint64_t>(in);
            lev.node_keys.push_back(k);
            lev.nodes.emplace(k, NodeRec{});
        }
        uint64_t ncorners = get<uint64_t>(in);
        lev.corner_keys.reserve(ncorners);
        lev.features.resize(ncorners * g.cfg_.feature_dim);
        for (uint64_t i = 0; i < ncorners; ++i) {
            uint64_t k = get<uint64_t>(in);
            lev.corner_keys.push_back(k);
            lev.corner_index.emplace(k, uint32_t(i));
            if (!in.read(reinterpret_cast<char*>(&lev.features[i * g.cfg_.feature_dim]),
                         std::streamsize(sizeof(double) * g.cfg_.feature_dim)))
                fail("octree: truncated grid blob");
        }
        // rebuild node corner slots from corner keys
        for (uint64_t code : lev.node_keys) {
            uint32_t cx, cy, cz;
            morton::decode(code, cx, cy, cz);
            NodeRec& rec = lev.nodes[code];
            for (int c = 0; c < 8; ++c) {
                uint64_t ckey = morton::encode(cx + ((c >> 0) & 1), cy + ((c >> 1) & 1),
                                               cz + ((c >> 2) & 1));
                auto it = lev.corner_index.find(ckey);
                if (it == lev.corner_index.end()) fail("octree: grid blob missing corner record");
                rec.corner_slots[c] = it->second;
            }
        }
    }
    return g;
}

void OctreeGrid::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("%s: cannot write", path.c_str());
    serialize(out);
}

OctreeGrid OctreeGrid::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("%s: cannot open", path.c_str());
    return deserialize(in);
}

bool OctreeGrid::same_structure(const OctreeGrid& o) const {
    if (cfg_.levels != o.cfg_.levels || cfg_.feature_dim != o.cfg_.feature_dim) return false;
    for (int l = 0; l < cfg_.levels; ++l)
        if (levels_[l].node_keys != o.levels_[l].node_keys ||
            levels_[l].corner_keys != o.levels_[l].corner_keys)
            return false;
    return true;
}

}  // namespace sdfmap
