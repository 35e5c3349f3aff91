#pragma once

#include <vector>

#include "sdfmap/autodiff.hpp"
#include "sdfmap/field.hpp"
#include "sdfmap/pointcloud.hpp"

namespace sdfmap {

struct LossConfig {
    double lambda_bce = 1.0;
    double lambda_eikonal = 0.1;
    double lambda_hessian = 1.0;
    double sigma_occ = 0.05;        // BCE logistic scale (meters)
    double hessian_scale = 1e-11;   // fourth-order term scaling
    double fdm_step = 0.0125;       // stencil step for the biharmonic term (meters)
    int n_hessian_samples = 16;     // per-batch subsample carrying the Hessian term
    double truncation = 0.3;        // |label| below this marks a near-surface sample

    void validate() const {
        if (lambda_bce < 0 || lambda_eikonal < 0 || lambda_hessian < 0)
            fail("loss: lambda weights must be non-negative");
        if (!(sigma_occ > 0)) fail("loss: sigma_occ must be positive");
        if (!(fdm_step > 0)) fail("loss: fdm_step must be positive");
        if (n_hessian_samples < 0) fail("loss: n_hessian_samples must be non-negative");
    }
};

struct LossBreakdown {
    double total = 0.0;
    double bce = 0.0;       // lambda-weighted term values; they sum to total
    double eikonal = 0.0;
    double hessian = 0.0;
    double lap_diag = 0.0;  // 1e-8-scaled mean |laplacian|, diagnostic only
    int n_bce = 0, n_eik = 0, n_hess = 0;

    bool finite() const {
        return std::isfinite(total) && std::isfinite(bce) && std::isfinite(eikonal) &&
               std::isfinite(hessian);
    }
};

constexpr double kOccClampLo = 1e-7;
constexpr double kOccClampHi = 1.0 - 1e-7;

inline double occupancy_prob(double sdf, double sigma_occ) {
    double o = logistic(-sdf / sigma_occ);
    return std::min(std::max(o, kOccClampLo), kOccClampHi);
}

// Binary cross-entropy between the occupancy projections of prediction and
// label.
inline double loss_bce(double pred_sdf, double label_sdf, double sigma_occ) {
    if (!(sigma_occ > 0)) fail("loss_bce: sigma_occ must be positive");
    double o = occupancy_prob(pred_sdf, sigma_occ);
    double t = occupancy_prob(label_sdf, sigma_occ);
    return -(t * std::log(o) + (1.0 - t) * std::log(1.0 - o));
}

// Records the BCE of an already-recorded prediction onto the same tape.
template <class S>
Var record_bce(Tape<S>& t, Var pred, double label_sdf, double sigma_occ) {
    Var o = t.logistic_(pred, -1.0 / sigma_occ);
    o = t.min_(t.max_(o, t.constant(S(kOccClampLo))), t.constant(S(kOccClampHi)));
    double tgt = occupancy_prob(label_sdf, sigma_occ);
    Var term1 = t.mul_c(t.log_(o), -tgt);
    Var term2 = t.mul_c(t.log_(t.add_c(t.neg(o), 1.0)), -(1.0 - tgt));
    return t.add(term1, term2);
}

// Mean squared deviation of the gradient norm from 1 over the query set.
double loss_eikonal(const ScalarField3& f, const std::vector<Vec3>& xs);

// Mean squared biharmonic (FD stencil over the nested-AD Laplacian).
double loss_hessian(const ScalarField3& f, const std::vector<Vec3>& xs, double fdm_step);

inline double loss_eikonal(const MultiScaleField& field, const OctreeGrid& grid,
                           const std::vector<Vec3>& xs) {
    return loss_eikonal(FieldSampler(field, grid), xs);
}
inline double loss_hessian(const MultiScaleField& field, const OctreeGrid& grid,
                           const std::vector<Vec3>& xs, double fdm_step) {
    return loss_hessian(FieldSampler(field, grid), xs, fdm_step);
}

// Composite loss over a batch of training samples. The Eikonal term runs on
// the batch's near-surface members; the Hessian term on the first
// n_hessian_samples of those (deterministic subsampling for a stateless op).
LossBreakdown total_loss(const MultiScaleField& field, const OctreeGrid& grid,
                         const std::vector<TrainingSample>& batch, const LossConfig& cfg);

}  // namespace sdfmap
