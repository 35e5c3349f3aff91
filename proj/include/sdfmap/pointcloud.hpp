#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sdfmap/core.hpp"

namespace sdfmap {

// One LiDAR-style return: a world-frame hit point together with the sensor
// position the ray was cast from.
struct PointSample {
    Vec3 position;
    Vec3 sensor_origin;
    uint32_t frame_id = 0;
};

// A query point on (or near) a ray with its signed-distance label, positive on
// the sensor side of the surface, clamped to the truncation band.
struct TrainingSample {
    Vec3 query;
    double sdf_label = 0.0;
    double weight = 1.0;
};

struct SamplingConfig {
    int n_surface = 4;        // queries in the +-truncation band around the endpoint
    int n_free = 2;           // queries in the free segment, label clamped to +truncation
    double truncation = 0.3;  // meters
};

// Rigid transform as a 3x4 row-major matrix [R | t].
struct Pose {
    double r[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    Vec3 t;

    Vec3 apply(const Vec3& p) const {
        return {r[0] * p.x + r[1] * p.y + r[2] * p.z + t.x,
                r[3] * p.x + r[4] * p.y + r[5] * p.z + t.y,
                r[6] * p.x + r[7] * p.y + r[8] * p.z + t.z};
    }
};

// Reads an ASCII XYZ file (one `x y z` triple per line) or a PLY file with
// x/y/z vertex properties (binary little-endian or ascii). PLY files may carry
// a per-vertex `frame_id` property. When a pose file is given (12 whitespace-
// separated floats per line, one 3x4 transform per frame), point coordinates
// are mapped to the world frame and sensor origins are the pose translations;
// otherwise the sensor origin is the world origin for every point.
std::vector<PointSample> load_pointcloud(const std::string& path,
                                         const std::optional<std::string>& pose_path = std::nullopt);

std::vector<Pose> load_poses(const std::string& path);

// Writes points in sensor-local coordinates (identity rotation) as .xyz or
// .ply chosen by extension; PLY carries frame_id. Together with a pose file
// this round-trips through load_pointcloud.
void save_pointcloud(const std::string& path, const std::vector<PointSample>& points);
void save_poses(const std::string& path, const std::vector<Pose>& poses);

// Turns rays into labeled SDF queries: per ray, n_surface samples uniform in
// [-truncation, +truncation] of the endpoint (label = signed distance along
// the ray) and n_free samples uniform in the free segment (label clamped to
// +truncation). Deterministic in the seed and independent of partitioning.
std::vector<TrainingSample> sample_rays(const std::vector<PointSample>& points,
                                        const SamplingConfig& cfg, uint64_t seed);

}  // namespace sdfmap
