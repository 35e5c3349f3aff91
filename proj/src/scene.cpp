#include "sdfmap/scene.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace sdfmap {

bool raycast_scene(const SyntheticScene& scene, const Vec3& origin, const Vec3& dir, Vec3& hit) {
    Aabb box = scene.bounds();
    double t_max = (box.hi - box.lo).norm() + (origin - (box.lo + box.hi) * 0.5).norm() + 1.0;
    const double min_step = 1e-4;
    const int max_iters = 100000;

    double t_prev = 0.0;
    double d_prev = scene.sdf(origin);
    if (d_prev <= 0.0) fail("raycast: ray origin is inside the scene");
    double t = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        t = t_prev + std::max(d_prev, min_step);
        if (t > t_max) return false;
        double d = scene.sdf(origin + t * dir);
        if (d < 0.0) {
            // bracketed: bisect to 1e-6 m
            double lo = t_prev, hi = t;
            while (hi - lo > 1e-6) {
                double mid = 0.5 * (lo + hi);
                if (scene.sdf(origin + mid * dir) < 0.0) hi = mid;
                else lo = mid;
            }
            hit = origin + (0.5 * (lo + hi)) * dir;
            return true;
        }
        t_prev = t;
        d_prev = d;
    }
    return false;
}

std::vector<PointSample> synth_scan(const SyntheticScene& scene, uint64_t seed) {
    if (scene.shapes.empty()) fail("synth_scan: scene has no shapes");
    for (std::size_t i = 0; i < scene.scan.sensors.size(); ++i)
        if (scene.sdf(scene.scan.sensors[i]) <= 0.0)
            fail("synth_scan: sensor %zu lies inside a shape", i);

    Aabb box = scene.bounds();
    Vec3 center = (box.lo + box.hi) * 0.5;
    double bound_r = 0.0;
    for (const auto& s : scene.shapes) {
        double shape_r = s.kind == Shape::Kind::Sphere ? s.radius : s.half_extents.norm();
        bound_r = std::max(bound_r, (s.center - center).norm() + shape_r);
    }
    bound_r *= 1.02;

    Rng master(seed);
    std::vector<PointSample> out;
    for (std::size_t si = 0; si < scene.scan.sensors.size(); ++si) {
        Vec3 sensor = scene.scan.sensors[si];
        Vec3 axis = center - sensor;
        double dist = axis.norm();
        double cos_half = dist > bound_r ? std::sqrt(std::max(0.0, 1.0 - (bound_r / dist) * (bound_r / dist)))
                                         : -1.0;  // inside bounding sphere: full sphere of directions
        axis = dist > 0 ? axis / dist : Vec3{0, 0, 1};

        // orthonormal frame around the cone axis
        Vec3 up = std::fabs(axis.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
        Vec3 e1 = axis.cross(up).normalized();
        Vec3 e2 = axis.cross(e1);

        for (int k = 0; k < scene.scan.rays_per_sensor; ++k) {
            Rng rng = master.fork(si * 1000003ULL + uint64_t(k));
            double c = rng.uniform(cos_half, 1.0);
            double s = std::sqrt(std::max(0.0, 1.0 - c * c));
            double phi = rng.uniform(0.0, 6.283185307179586476925286766559);
            Vec3 dir = axis * c + e1 * (s * std::cos(phi)) + e2 * (s * std::sin(phi));

            Vec3 hit;
            if (!raycast_scene(scene, sensor, dir, hit)) continue;
            if (scene.scan.noise_sigma > 0.0) hit += rng.normal3(scene.scan.noise_sigma);
            out.push_back({hit, sensor, uint32_t(si)});
        }
    }
    return out;
}

namespace {

Vec3 parse_vec3(const nlohmann::json& j, const char* what) {
    if (!j.is_array() || j.size() != 3) fail("scene: %s must be a 3-element array", what);
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

SyntheticScene parse_scene_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        fail("scene: invalid json: %s", e.what());
    }

    SyntheticScene scene;
    if (!j.contains("shapes") || !j["shapes"].is_array() || j["shapes"].empty())
        fail("scene: missing non-empty 'shapes' array");
    for (const auto& js : j["shapes"]) {
        Shape s;
        std::string type = js.value("type", "");
        if (type == "sphere") {
            s.kind = Shape::Kind::Sphere;
            s.center = parse_vec3(js.at("center"), "sphere center");
            s.radius = js.at("radius").get<double>();
            if (!(s.radius > 0)) fail("scene: sphere radius must be positive");
        } else if (type == "box") {
            s.kind = Shape::Kind::Box;
            s.center = parse_vec3(js.at("center"), "box center");
            s.half_extents = parse_vec3(js.at("half_extents"), "box half_extents");
            if (!(s.half_extents.x > 0 && s.half_extents.y > 0 && s.half_extents.z > 0))
                fail("scene: box half_extents must be positive");
        } else {
            fail("scene: unknown shape type '%s'", type.c_str());
        }
        scene.shapes.push_back(s);
    }

    if (!j.contains("scan")) fail("scene: missing 'scan' section");
    const auto& sc = j["scan"];
    if (!sc.contains("sensors") || !sc["sensors"].is_array() || sc["sensors"].empty())
        fail("scene: scan.sensors must be a non-empty array");
    for (const auto& s : sc["sensors"]) scene.scan.sensors.push_back(parse_vec3(s, "sensor"));
    scene.scan.rays_per_sensor = sc.value("rays_per_sensor", 1000);
    if (scene.scan.rays_per_sensor < 0) fail("scene: rays_per_sensor must be non-negative");
    scene.scan.noise_sigma = sc.value("noise_sigma", 0.0);
    if (scene.scan.noise_sigma < 0) fail("scene: noise_sigma must be non-negative");
    return scene;
}

SyntheticScene load_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("%s: cannot open", path.c_str());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scene_json(ss.str());
}

}  // namespace sdfmap
