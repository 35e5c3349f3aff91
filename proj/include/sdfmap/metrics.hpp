#pragma once

#include <string>
#include <vector>

#include "sdfmap/mesh.hpp"

namespace sdfmap {

// Reconstruction quality report, Table-1 units: cm for accuracy/completeness,
// meters for Chamfer-L1, percent for the ratios and F-score.
struct ReconReport {
    double accuracy_cm = 0.0;      // mean NN distance, prediction -> ground truth
    double completeness_cm = 0.0;  // mean NN distance, ground truth -> prediction
    double chamfer_l1_m = 0.0;     // symmetric mean, meters
    double acc_ratio_pct = 0.0;    // precision at the threshold
    double comp_ratio_pct = 0.0;   // recall at the threshold
    double f_score_pct = 0.0;      // harmonic mean of the two ratios
    double threshold_cm = 10.0;
    std::size_t n_pred = 0, n_gt = 0;
};

// Area-weighted uniform sampling of the mesh surface, deterministic in seed.
std::vector<Vec3> sample_surface(const TriangleMesh& mesh, std::size_t n, uint64_t seed);

ReconReport evaluate(const std::vector<Vec3>& pred_points, const std::vector<Vec3>& gt_points,
                     double threshold_cm, int threads = 1);

std::string report_to_json(const ReconReport& r);
std::string report_to_text(const ReconReport& r);
void write_report(const std::string& json_path, const ReconReport& r);
ReconReport report_from_json_file(const std::string& path);

}  // namespace sdfmap
