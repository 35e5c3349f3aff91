#include "sdfmap/loss.hpp"

namespace sdfmap {

double loss_eikonal(const ScalarField3& f, const std::vector<Vec3>& xs) {
    if (xs.empty()) fail("loss_eikonal: empty query set");
    double acc = 0.0;
    for (const Vec3& x : xs) {
        double gn = grad_input(f, x).norm();
        acc += (gn - 1.0) * (gn - 1.0);
    }
    return acc / double(xs.size());
}

double loss_hessian(const ScalarField3& f, const std::vector<Vec3>& xs, double fdm_step) {
    if (xs.empty()) fail("loss_hessian: empty query set");
    double acc = 0.0;
    for (const Vec3& x : xs) {
        double b = biharmonic_fdm(f, x, fdm_step);
        acc += b * b;
    }
    return acc / double(xs.size());
}

LossBreakdown total_loss(const MultiScaleField& field, const OctreeGrid& grid,
                         const std::vector<TrainingSample>& batch, const LossConfig& cfg) {
    cfg.validate();
    if (batch.empty()) fail("total_loss: empty batch");

    LossBreakdown out;
    out.n_bce = int(batch.size());

    double bce_sum = 0.0;
    std::vector<Vec3> near;
    for (const auto& s : batch) {
        bce_sum += loss_bce(eval_sdf(field, grid, s.query), s.sdf_label, cfg.sigma_occ);
        if (std::fabs(s.sdf_label) < cfg.truncation) near.push_back(s.query);
    }
    out.n_eik = int(near.size());
    out.bce = cfg.lambda_bce * bce_sum / double(batch.size());

    FieldSampler sampler(field, grid);
    if (!near.empty() && cfg.lambda_eikonal > 0.0)
        out.eikonal = cfg.lambda_eikonal * loss_eikonal(sampler, near);

    std::vector<Vec3> hess(near.begin(),
                           near.begin() + std::min<std::size_t>(near.size(), cfg.n_hessian_samples));
    out.n_hess = int(hess.size());
    if (!hess.empty() && cfg.lambda_hessian > 0.0) {
        out.hessian =
            cfg.lambda_hessian * cfg.hessian_scale * loss_hessian(sampler, hess, cfg.fdm_step);
        double lap_abs = 0.0;
        for (const Vec3& x : hess) lap_abs += std::fabs(laplacian_input(sampler, x));
        out.lap_diag = 1e-8 * lap_abs / double(hess.size());
    }

    out.total = out.bce + out.eikonal + out.hessian;
    if (!out.finite())
        fail("total_loss: non-finite loss (total=%g bce=%g eikonal=%g hessian=%g)", out.total,
             out.bce, out.eikonal, out.hessian);
    return out;
}

}  // namespace sdfmap
