#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "sdfmap/core.hpp"
#include "sdfmap/morton.hpp"
#include "sdfmap/pointcloud.hpp"

namespace sdfmap {

struct OctreeConfig {
    int levels = 3;          // L, level 0 finest
    double base_size = 0.1;  // W, leaf node edge in meters
    int feature_dim = 128;   // H
};

// Result of locating one query point at one level.
struct LevelHit {
    bool occupied = false;
    Vec3 node_min;                      // world-space corner of the containing node
    double inv_size = 0.0;              // 1 / node edge length
    const uint32_t* corner_slots = nullptr;  // 8 feature slots, Morton corner order (bit0=x, bit1=y, bit2=z)
};

// Full per-level query result in the (8 corner features, 8 trilinear weights)
// form. Unoccupied levels report zero features with uniform weights.
struct LevelFeatures {
    bool occupied = false;
    std::array<double, 8> weights{};
    std::array<std::vector<double>, 8> corner_features;  // each of length H
};

// Sparse multi-level octree over a fixed lattice. Node tables are hash maps
// keyed by Morton codes; learnable feature vectors live at node corners and
// are shared between adjacent nodes (corner-keyed storage). Structure is
// immutable after build; feature values are mutated only by the optimizer
// between query phases.
class OctreeGrid {
public:
    struct NodeRec {
        std::array<uint32_t, 8> corner_slots;
    };

    struct Level {
        std::unordered_map<uint64_t, NodeRec> nodes;
        std::vector<uint64_t> node_keys;      // insertion order
        std::unordered_map<uint64_t, uint32_t> corner_index;
        std::vector<uint64_t> corner_keys;    // insertion order == slot order
        std::vector<double> features;         // corner count * H
    };

    OctreeGrid() = default;
    OctreeGrid(OctreeGrid&& o) noexcept
        : cfg_(o.cfg_), origin_(o.origin_), levels_(std::move(o.levels_)),
          lookup_count_(o.lookup_count_.load()) {}
    OctreeGrid& operator=(OctreeGrid&& o) noexcept {
        cfg_ = o.cfg_;
        origin_ = o.origin_;
        levels_ = std::move(o.levels_);
        lookup_count_.store(o.lookup_count_.load());
        return *this;
    }

    static OctreeGrid build(const std::vector<PointSample>& points, const OctreeConfig& cfg,
                            uint64_t seed);

    int levels() const { return cfg_.levels; }
    int feature_dim() const { return cfg_.feature_dim; }
    double base_size() const { return cfg_.base_size; }
    double level_size(int level) const { return cfg_.base_size * double(1u << level); }
    const Vec3& origin() const { return origin_; }
    const Level& level(int l) const { return levels_[l]; }
    Level& level_mut(int l) { return levels_[l]; }

    // One hash lookup. Increments the per-grid lookup counter.
    LevelHit locate(int level, const Vec3& x) const;

    // L hash lookups, one per level.
    void locate_all(const Vec3& x, LevelHit* hits) const {
        for (int l = 0; l < cfg_.levels; ++l) hits[l] = locate(l, x);
    }

    // Spec-form query: per level, the 8 corner feature vectors of the node
    // containing x together with the trilinear weights of x within it.
    std::vector<LevelFeatures> query_features(const Vec3& x) const;

    static std::array<double, 8> trilinear_weights(const Vec3& t);

    // Axis-aligned boxes of occupied leaf cells dilated by `dilation` cells.
    std::vector<Aabb> occupied_leaf_bounds(int dilation) const;

    double feature_value(int level, uint32_t slot, int dim) const {
        return levels_[level].features[std::size_t(slot) * cfg_.feature_dim + dim];
    }

    // Flat parameter view of all corner features, level-major in slot order.
    std::size_t feature_count() const;
    std::size_t level_feature_offset(int level) const;
    double* features_data(int level) { return levels_[level].features.data(); }
    const double* features_data(int level) const { return levels_[level].features.data(); }

    uint64_t lookup_count() const { return lookup_count_.load(std::memory_order_relaxed); }
    void reset_lookup_count() const { lookup_count_.store(0, std::memory_order_relaxed); }

    void save(const std::string& path) const;
    static OctreeGrid load(const std::string& path);
    void serialize(std::ostream& out) const;
    static OctreeGrid deserialize(std::istream& in);

    bool same_structure(const OctreeGrid& o) const;

private:
    OctreeConfig cfg_;
    Vec3 origin_;
    std::vector<Level> levels_;
    mutable std::atomic<uint64_t> lookup_count_{0};
};

}  // namespace sdfmap
