#pragma once

#include <string>
#include <vector>

#include "sdfmap/core.hpp"
#include "sdfmap/pointcloud.hpp"

namespace sdfmap {

// Analytic primitive with an exact signed distance (|grad| = 1 away from the
// medial axis). Scenes are unions of primitives.
struct Shape {
    enum class Kind { Sphere, Box };
    Kind kind = Kind::Sphere;
    Vec3 center;
    double radius = 1.0;      // sphere
    Vec3 half_extents;        // box

    double sdf(const Vec3& p) const {
        Vec3 q = p - center;
        if (kind == Kind::Sphere) return q.norm() - radius;
        Vec3 a{std::fabs(q.x) - half_extents.x, std::fabs(q.y) - half_extents.y,
               std::fabs(q.z) - half_extents.z};
        Vec3 outside{std::max(a.x, 0.0), std::max(a.y, 0.0), std::max(a.z, 0.0)};
        double inside = std::min(std::max(a.x, std::max(a.y, a.z)), 0.0);
        return outside.norm() + inside;
    }

    Aabb bounds() const {
        Aabb b;
        Vec3 h = kind == Kind::Sphere ? Vec3{radius, radius, radius} : half_extents;
        b.expand(center - h);
        b.expand(center + h);
        return b;
    }
};

struct ScanSpec {
    std::vector<Vec3> sensors;
    int rays_per_sensor = 1000;
    double noise_sigma = 0.0;  // meters, isotropic Gaussian on hit points
};

struct SyntheticScene {
    std::vector<Shape> shapes;
    ScanSpec scan;

    double sdf(const Vec3& p) const {
        double d = 1e300;
        for (const auto& s : shapes) d = std::min(d, s.sdf(p));
        return d;
    }

    Aabb bounds() const {
        Aabb b;
        for (const auto& s : shapes) b.expand(s.bounds());
        return b;
    }
};

// Simulated LiDAR scan: rays are cast from each sensor into the cone that
// covers the scene's bounding sphere; each hit is the first zero crossing of
// the analytic SDF (bisection-refined to 1e-6 m) plus optional Gaussian noise.
// Rays that miss are dropped. frame_id is the sensor index.
std::vector<PointSample> synth_scan(const SyntheticScene& scene, uint64_t seed);

// Cast one ray; returns false on miss. Exposed for tests.
bool raycast_scene(const SyntheticScene& scene, const Vec3& origin, const Vec3& dir, Vec3& hit);

// Parse a scene description from a JSON string (see README for the schema).
SyntheticScene parse_scene_json(const std::string& text);
SyntheticScene load_scene(const std::string& path);

}  // namespace sdfmap
