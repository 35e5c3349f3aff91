#include "sdfmap/metrics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sdfmap/kdtree.hpp"

namespace sdfmap {

std::vector<Vec3> sample_surface(const TriangleMesh& mesh, std::size_t n, uint64_t seed) {
    if (n < 1) fail("sample_surface: n must be >= 1");
    if (mesh.faces.empty()) fail("sample_surface: empty mesh");

    std::vector<double> cum(mesh.faces.size());
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& fc = mesh.faces[f];
        Vec3 e1 = mesh.vertices[fc[1]] - mesh.vertices[fc[0]];
        Vec3 e2 = mesh.vertices[fc[2]] - mesh.vertices[fc[0]];
        total += 0.5 * e1.cross(e2).norm();
        cum[f] = total;
    }
    if (!(total > 0.0)) fail("sample_surface: mesh has zero surface area");

    Rng rng(seed);
    std::vector<Vec3> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        double u = rng.u01() * total;
        std::size_t f = std::size_t(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
        if (f >= cum.size()) f = cum.size() - 1;
        const auto& fc = mesh.faces[f];
        double r1 = std::sqrt(rng.u01());
        double r2 = rng.u01();
        double a = 1.0 - r1, b = r1 * (1.0 - r2), c = r1 * r2;
        out.push_back(mesh.vertices[fc[0]] * a + mesh.vertices[fc[1]] * b + mesh.vertices[fc[2]] * c);
    }
    return out;
}

namespace {

struct DirectedStats {
    double mean_dist_m = 0.0;
    double within_pct = 0.0;
};

DirectedStats directed_nn(const std::vector<Vec3>& from, const KdTree& to_tree, double threshold_m,
                          int threads) {
    const std::size_t nchunks = (from.size() + 1023) / 1024;
    std::vector<double> sums(nchunks, 0.0);
    std::vector<std::size_t> hits(nchunks, 0);
    parallel_chunks(from.size(), 1024, threads, [&](std::size_t c, std::size_t b, std::size_t e) {
        double s = 0.0;
        std::size_t h = 0;
        for (std::size_t i = b; i < e; ++i) {
            double d = to_tree.nearest(from[i]).dist;
            s += d;
            if (d <= threshold_m) ++h;
        }
        sums[c] = s;
        hits[c] = h;
    });
    double sum = 0.0;
    std::size_t hit = 0;
    for (std::size_t c = 0; c < nchunks; ++c) {
        sum += sums[c];
        hit += hits[c];
    }
    DirectedStats st;
    st.mean_dist_m = sum / double(from.size());
    st.within_pct = 100.0 * double(hit) / double(from.size());
    return st;
}

}  // namespace

ReconReport evaluate(const std::vector<Vec3>& pred_points, const std::vector<Vec3>& gt_points,
                     double threshold_cm, int threads) {
    if (pred_points.empty()) fail("evaluate: empty prediction point set");
    if (gt_points.empty()) fail("evaluate: empty ground-truth point set");
    if (!(threshold_cm > 0.0)) fail("evaluate: threshold must be positive");

    KdTree gt_tree(gt_points);
    KdTree pred_tree(pred_points);
    const double threshold_m = threshold_cm * 0.01;

    DirectedStats acc = directed_nn(pred_points, gt_tree, threshold_m, threads);
    DirectedStats comp = directed_nn(gt_points, pred_tree, threshold_m, threads);

    ReconReport r;
    r.accuracy_cm = acc.mean_dist_m * 100.0;
    r.completeness_cm = comp.mean_dist_m * 100.0;
    r.chamfer_l1_m = 0.5 * (acc.mean_dist_m + comp.mean_dist_m);
    r.acc_ratio_pct = acc.within_pct;
    r.comp_ratio_pct = comp.within_pct;
    double pr = r.acc_ratio_pct + r.comp_ratio_pct;
    r.f_score_pct = pr > 0.0 ? 2.0 * r.acc_ratio_pct * r.comp_ratio_pct / pr : 0.0;
    r.threshold_cm = threshold_cm;
    r.n_pred = pred_points.size();
    r.n_gt = gt_points.size();
    return r;
}

std::string report_to_json(const ReconReport& r) {
    nlohmann::ordered_json j;
    j["accuracy_cm"] = r.accuracy_cm;
    j["completeness_cm"] = r.completeness_cm;
    j["chamfer_l1_m"] = r.chamfer_l1_m;
    j["acc_ratio_pct"] = r.acc_ratio_pct;
    j["comp_ratio_pct"] = r.comp_ratio_pct;
    j["f_score_pct"] = r.f_score_pct;
    j["threshold_cm"] = r.threshold_cm;
    j["n_pred"] = r.n_pred;
    j["n_gt"] = r.n_gt;
    return j.dump(2) + "\n";
}

std::string report_to_text(const ReconReport& r) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "accuracy      %8.3f cm\n"
                  "completeness  %8.3f cm\n"
                  "chamfer_l1    %8.5f m\n"
                  "acc_ratio     %8.2f %%\n"
                  "comp_ratio    %8.2f %%\n"
                  "f_score       %8.2f %%\n"
                  "threshold     %8.2f cm\n"
                  "n_pred / n_gt %zu / %zu\n",
                  r.accuracy_cm, r.completeness_cm, r.chamfer_l1_m, r.acc_ratio_pct,
                  r.comp_ratio_pct, r.f_score_pct, r.threshold_cm, r.n_pred, r.n_gt);
    return buf;
}

void write_report(const std::string& json_path, const ReconReport& r) {
    std::ofstream out(json_path, std::ios::binary);
    if (!out) fail("%s: cannot write", json_path.c_str());
    out << report_to_json(r);
}

ReconReport report_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("%s: cannot open", path.c_str());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        fail("%s: invalid report json: %s", path.c_str(), e.what());
    }
    ReconReport r;
    r.accuracy_cm = j.at("accuracy_cm").get<double>();
    r.completeness_cm = j.at("completeness_cm").get<double>();
    r.chamfer_l1_m = j.at("chamfer_l1_m").get<double>();
    r.acc_ratio_pct = j.at("acc_ratio_pct").get<double>();
    r.comp_ratio_pct = j.at("comp_ratio_pct").get<double>();
    r.f_score_pct = j.at("f_score_pct").get<double>();
    r.threshold_cm = j.at("threshold_cm").get<double>();
    r.n_pred = j.at("n_pred").get<std::size_t>();
    r.n_gt = j.at("n_gt").get<std::size_t>();
    return r;
}

}  // namespace sdfmap
