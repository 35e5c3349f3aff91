#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sdfmap/mesh.hpp"

namespace sdfmap {

// Cotangent-weighted discrete Laplacian: off-diagonal entries are the edge
// weights, diagonal entries the negated row sums (rows sum to zero).
struct SparseLaplacian {
    struct Edge {
        uint32_t a, b;  // a < b
        double w;
        bool boundary;
    };
    std::size_t dim = 0;
    std::vector<Edge> edges;
    std::vector<double> diag;
    std::vector<uint8_t> boundary_vertex;
    std::vector<uint32_t> neighbor_count;
};

inline double cot_one_degree() { return 1.0 / std::tan(0.017453292519943295); }

struct RefineConfig {
    double eta = 0.5;            // momentum/step parameter in (0,1)
    int max_iters = 20;
    double plateau_tol = 1e-4;   // stop after 3 consecutive sub-tolerance improvements
    double weight_clamp_min = 1e-6;
    double weight_clamp_max = cot_one_degree();
    bool weighted_average = true;  // cotan-normalized neighborhood average (default) vs plain mean
    bool gradient_form = false;    // v' = v + eta * Lv instead of the damped centroid update

    void validate() const {
        // eta = 0 is tolerated as the identity update
        if (!(eta >= 0.0 && eta < 1.0)) fail("refine: eta must lie in [0,1)");
        if (max_iters < 0) fail("refine: max_iters must be non-negative");
        if (!(weight_clamp_min > 0.0) || !(weight_clamp_max > weight_clamp_min))
            fail("refine: invalid weight clamp range");
    }
};

// Interior edges weigh 1/2 (cot a + cot b) over the two opposite angles,
// boundary edges 1/2 cot of the single angle; weights clamp to the given
// range. Zero-area triangles are an error.
SparseLaplacian cotan_laplacian(const TriangleMesh& mesh, double clamp_min = 1e-6,
                                double clamp_max = cot_one_degree());

// Delta v = L v, with per-vertex Euclidean norms for heatmap export.
void laplacian_displacement(const SparseLaplacian& lap, const std::vector<Vec3>& vertices,
                            std::vector<Vec3>& disp, std::vector<double>& norms);

// Non-negative smoothness energy 1/2 sum_E w_ij |v_i - v_j|^2 (the edge-sum
// form of the Laplacian quadratic form, summed over coordinates).
double quadratic_form(const SparseLaplacian& lap, const std::vector<Vec3>& vertices);

// One damped least-squares update: v_i += eta * exp(-|Dv_i|) * (vbar_i - v_i),
// computed simultaneously from the pre-step positions. Faces never change.
// Boundary vertices average over boundary neighbors only; vertices with fewer
// than 3 neighbors stay fixed.
TriangleMesh refine_step(const TriangleMesh& mesh, const SparseLaplacian& lap,
                         const RefineConfig& cfg);

struct RefineReport {
    struct Row {
        int iter = 0;
        double quadratic_form = 0;
        double mean_disp_norm = 0;
        double metric = 0;
    };
    std::vector<Row> rows;  // row 0 is the input mesh
    bool degenerate_stop = false;
    int iterations_run = 0;
};

using MetricFn = std::function<double(const TriangleMesh&)>;

// Iterates {rebuild Laplacian -> refine_step} up to max_iters, stopping early
// when the metric improves by less than plateau_tol over 3 consecutive
// iterations. The metric is the callback when given (higher-is-better, e.g.
// F-score against ground truth), otherwise the quadratic form (lower is
// better). A degenerate triangle mid-run stops the loop and returns the last
// valid mesh with the report flagged.
TriangleMesh refine(const TriangleMesh& mesh, const RefineConfig& cfg,
                    RefineReport* report = nullptr, const MetricFn& metric = {},
                    bool metric_higher_better = true);

void write_refine_csv(const std::string& path, const RefineReport& report);

// Per-vertex |Lv| attached as the mesh scalar channel (curvature heatmap).
void attach_laplacian_heatmap(TriangleMesh& mesh);

}  // namespace sdfmap
