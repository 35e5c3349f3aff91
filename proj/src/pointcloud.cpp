#include "sdfmap/pointcloud.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ply_min.hpp"

namespace sdfmap {

namespace {

bool parse_double(const char*& s, double& out) {
    char* end = nullptr;
    out = std::strtod(s, &end);
    if (end == s) return false;
    s = end;
    return true;
}

bool blank(const std::string& line) {
    return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

std::string lower_ext(const std::string& path) {
    auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string e = path.substr(dot + 1);
    for (char& c : e) c = char(std::tolower(c));
    return e;
}

struct RawPoint {
    Vec3 p;
    uint32_t frame = 0;
};

std::vector<RawPoint> load_xyz(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("%s: cannot open", path.c_str());
    std::vector<RawPoint> pts;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (blank(line)) continue;
        const char* s = line.c_str();
        double v[3];
        for (int i = 0; i < 3; ++i)
            if (!parse_double(s, v[i]))
                fail("%s: parse error at line %zu", path.c_str(), lineno);
        while (*s == ' ' || *s == '\t' || *s == '\r') ++s;
        if (*s != '\0') fail("%s: parse error at line %zu (trailing data)", path.c_str(), lineno);
        if (!std::isfinite(v[0]) || !std::isfinite(v[1]) || !std::isfinite(v[2]))
            fail("%s: parse error at line %zu (non-finite coordinate)", path.c_str(), lineno);
        pts.push_back({{v[0], v[1], v[2]}, 0});
    }
    return pts;
}

std::vector<RawPoint> load_ply_points(const std::string& path) {
    ply::File f = ply::read(path);
    const ply::Element* v = f.find("vertex");
    if (!v) fail("%s: ply file has no vertex element", path.c_str());
    int cx = v->find_scalar("x"), cy = v->find_scalar("y"), cz = v->find_scalar("z");
    if (cx < 0 || cy < 0 || cz < 0) fail("%s: ply vertex element lacks x/y/z", path.c_str());
    int cf = v->find_scalar("frame_id");
    std::vector<RawPoint> pts(v->count);
    for (std::size_t i = 0; i < v->count; ++i) {
        pts[i].p = {v->scalar_cols[cx][i], v->scalar_cols[cy][i], v->scalar_cols[cz][i]};
        if (!pts[i].p.finite())
            fail("%s: non-finite coordinate at vertex %zu", path.c_str(), i);
        pts[i].frame = cf >= 0 ? uint32_t(v->scalar_cols[cf][i]) : 0u;
    }
    return pts;
}

}  // namespace

std::vector<Pose> load_poses(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("%s: cannot open", path.c_str());
    std::vector<Pose> poses;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (blank(line)) continue;
        const char* s = line.c_str();
        double m[12];
        for (int i = 0; i < 12; ++i)
            if (!parse_double(s, m[i]) || !std::isfinite(m[i]))
                fail("%s: pose parse error at line %zu", path.c_str(), lineno);
        Pose p;
        p.r[0] = m[0]; p.r[1] = m[1]; p.r[2] = m[2]; p.t.x = m[3];
        p.r[3] = m[4]; p.r[4] = m[5]; p.r[5] = m[6]; p.t.y = m[7];
        p.r[6] = m[8]; p.r[7] = m[9]; p.r[8] = m[10]; p.t.z = m[11];
        poses.push_back(p);
    }
    return poses;
}

std::vector<PointSample> load_pointcloud(const std::string& path,
                                         const std::optional<std::string>& pose_path) {
    std::string ext = lower_ext(path);
    std::vector<RawPoint> raw;
    if (ext == "ply") raw = load_ply_points(path);
    else raw = load_xyz(path);

    std::vector<Pose> poses;
    if (pose_path) {
        poses = load_poses(*pose_path);
        uint32_t nframes = 0;
        for (const auto& r : raw) nframes = std::max(nframes, r.frame + 1);
        if (raw.empty()) nframes = 0;
        if (poses.size() != nframes)
            fail("%s: frame count mismatch: cloud has %u frame(s), pose file has %zu",
                 path.c_str(), nframes, poses.size());
    }

    std::vector<PointSample> out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        PointSample s;
        s.frame_id = raw[i].frame;
        if (!poses.empty()) {
            const Pose& T = poses[raw[i].frame];
            s.position = T.apply(raw[i].p);
            s.sensor_origin = T.t;
        } else {
            s.position = raw[i].p;
            s.sensor_origin = {0, 0, 0};
        }
        if ((s.position - s.sensor_origin).norm2() == 0.0)
            fail("%s: zero-length ray at point %zu", path.c_str(), i);
        out.push_back(s);
    }
    return out;
}

void save_pointcloud(const std::string& path, const std::vector<PointSample>& points) {
    std::string ext = lower_ext(path);
    if (ext == "xyz" || ext == "txt") {
        std::ofstream out(path);
        if (!out) fail("%s: cannot write", path.c_str());
        char buf[128];
        for (const auto& s : points) {
            Vec3 local = s.position - s.sensor_origin;  // identity rotation
            std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", local.x, local.y, local.z);
            out << buf;
        }
        return;
    }
    if (ext != "ply") fail("%s: unknown point-cloud format '%s'", path.c_str(), ext.c_str());

    std::ofstream out(path, std::ios::binary);
    if (!out) fail("%s: cannot write", path.c_str());
    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << points.size() << "\n"
        << "property double x\nproperty double y\nproperty double z\n"
        << "property uint frame_id\nend_header\n";
    for (const auto& s : points) {
        Vec3 local = s.position - s.sensor_origin;
        ply::write_binary_scalar(out, ply::Scalar::F64, local.x);
        ply::write_binary_scalar(out, ply::Scalar::F64, local.y);
        ply::write_binary_scalar(out, ply::Scalar::F64, local.z);
        ply::write_binary_scalar(out, ply::Scalar::U32, double(s.frame_id));
    }
}

void save_poses(const std::string& path, const std::vector<Pose>& poses) {
    std::ofstream out(path);
    if (!out) fail("%s: cannot write", path.c_str());
    char buf[512];
    for (const auto& p : poses) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                      p.r[0], p.r[1], p.r[2], p.t.x, p.r[3], p.r[4], p.r[5], p.t.y,
                      p.r[6], p.r[7], p.r[8], p.t.z);
        out << buf;
    }
}

std::vector<TrainingSample> sample_rays(const std::vector<PointSample>& points,
                                        const SamplingConfig& cfg, uint64_t seed) {
    if (!(cfg.truncation > 0.0)) fail("sample_rays: truncation must be positive");
    if (cfg.n_surface < 0 || cfg.n_free < 0) fail("sample_rays: sample counts must be non-negative");

    std::vector<TrainingSample> out;
    out.reserve(points.size() * std::size_t(cfg.n_surface + cfg.n_free));
    Rng master(seed);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const PointSample& ray = points[i];
        Rng rng = master.fork(i);
        Vec3 delta = ray.position - ray.sensor_origin;
        double d = delta.norm();
        if (d <= 0.0) continue;
        Vec3 dir = delta / d;

        for (int k = 0; k < cfg.n_surface; ++k) {
            double u = rng.uniform(-cfg.truncation, cfg.truncation);
            // keep the query on the sensor side of the ray origin
            if (d + u < 0.0) u = -d;
            TrainingSample t;
            t.query = ray.position + u * dir;
            t.sdf_label = -u;
            out.push_back(t);
        }
        double free_len = d - cfg.truncation;
        if (free_len > 0.0) {
            for (int k = 0; k < cfg.n_free; ++k) {
                double u = rng.uniform(0.0, free_len);
                TrainingSample t;
                t.query = ray.sensor_origin + u * dir;
                t.sdf_label = cfg.truncation;  // true distance >= truncation, clamped
                out.push_back(t);
            }
        }
    }
    return out;
}

}  // namespace sdfmap
