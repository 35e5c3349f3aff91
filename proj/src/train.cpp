#include "sdfmap/train.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

namespace sdfmap {

namespace {

inline double grad_comp(double a) { return a; }
inline double grad_comp(const Dual& a) { return a.d; }
inline double grad_comp(const Taylor2& a) { return a.d2; }

template <class S>
void scatter(const ParamFeed<S>& feed, const std::vector<S>& adj, double* grad) {
    const auto& wv = feed.weight_vars();
    for (std::size_t i = 0; i < wv.size(); ++i) grad[i] += grad_comp(adj[wv[i]]);
    for (const auto& b : feed.bindings()) grad[b.param] += grad_comp(adj[b.var]);
}

struct StepAccum {
    double bce = 0, eik = 0, hess = 0, lap = 0;
};

struct WorkerCtx {
    Tape<double> tape_d;
    Tape<Dual> tape_dual;
    Tape<Taylor2> tape_t2;
    std::vector<double> adj_d;
    std::vector<Dual> adj_dual;
    std::vector<Taylor2> adj_t2;
};

WorkerCtx& worker_ctx() {
    thread_local WorkerCtx ctx;
    return ctx;
}

// Free-space sample: BCE only, one plain reverse pass.
void process_free(WorkerCtx& ctx, const MultiScaleField& field, const OctreeGrid& grid,
                  const TrainingSample& s, const LossConfig& lc, double bce_seed, double* grad,
                  StepAccum& acc) {
    auto& T = ctx.tape_d;
    T.clear();
    ParamFeed<double> feed(T, field, grid);
    feed.begin_segment(s.query, {});
    Var out = field_forward(field, grid, s.query, feed).i;
    Var bce = record_bce(T, out, s.sdf_label, lc.sigma_occ);
    acc.bce += T.val(bce);
    T.backward(bce, bce_seed, ctx.adj_d);
    scatter(feed, ctx.adj_d, grad);
}

// Near-surface sample: BCE + Eikonal. Three dual-valued probe segments share
// the parameter leaves; the reverse pass per segment is seeded so that the
// tangent component of each leaf adjoint is that leaf's total contribution.
void process_near(WorkerCtx& ctx, const MultiScaleField& field, const OctreeGrid& grid,
                  const TrainingSample& s, const LossConfig& lc, double bce_seed, double eik_coef,
                  double* grad, StepAccum& acc) {
    auto& T = ctx.tape_dual;
    T.clear();
    ParamFeed<Dual> feed(T, field, grid);
    Var out[3], seg_lo[3], bce_out = kNoVar;
    Vec3 g;
    for (int axis = 0; axis < 3; ++axis) {
        Vec3 dir{axis == 0 ? 1.0 : 0.0, axis == 1 ? 1.0 : 0.0, axis == 2 ? 1.0 : 0.0};
        feed.begin_segment(s.query, dir);
        seg_lo[axis] = feed.segment_start();
        out[axis] = field_forward(field, grid, s.query, feed).i;
        g[axis] = T.val(out[axis]).d;
        if (axis == 0) bce_out = record_bce(T, out[0], s.sdf_label, lc.sigma_occ);
    }
    acc.bce += T.val(bce_out).v;
    double gn = g.norm();
    acc.eik += (gn - 1.0) * (gn - 1.0);
    double cbase = gn > 1e-12 ? eik_coef * (gn - 1.0) / gn : 0.0;

    ctx.adj_dual.assign(T.size(), Dual{});
    ctx.adj_dual[out[0]] += Dual(cbase * g.x, 0.0);
    T.backward_range(bce_out, Dual(0.0, bce_seed), ctx.adj_dual, seg_lo[0]);
    T.backward_range(out[1], Dual(cbase * g.y, 0.0), ctx.adj_dual, seg_lo[1]);
    T.backward_range(out[2], Dual(cbase * g.z, 0.0), ctx.adj_dual, seg_lo[2]);
    scatter(feed, ctx.adj_dual, grad);
}

// Hessian-carrying sample: BCE + Eikonal + biharmonic term. 21 second-order
// probe segments (7 stencil points x 3 axes); the Laplacian at each stencil
// point is twice the sum of the probes' second Taylor coefficients, and the
// seeds route d(term)/d(laplacian) through the d2 adjoint component.
void process_hess(WorkerCtx& ctx, const MultiScaleField& field, const OctreeGrid& grid,
                  const TrainingSample& s, const LossConfig& lc, double bce_seed, double eik_coef,
                  double hess_coef, double* grad, StepAccum& acc) {
    auto& T = ctx.tape_t2;
    T.clear();
    ParamFeed<Taylor2> feed(T, field, grid);
    const double h = lc.fdm_step;
    const Vec3 offs[7] = {{0, 0, 0}, {h, 0, 0}, {-h, 0, 0}, {0, h, 0}, {0, -h, 0}, {0, 0, h}, {0, 0, -h}};
    const double coeffs[7] = {-6, 1, 1, 1, 1, 1, 1};

    Var out[7][3], seg_lo[7][3], bce_out = kNoVar;
    double lap[7];
    Vec3 g;
    for (int j = 0; j < 7; ++j) {
        Vec3 p = s.query + offs[j];
        lap[j] = 0.0;
        for (int axis = 0; axis < 3; ++axis) {
            Vec3 dir{axis == 0 ? 1.0 : 0.0, axis == 1 ? 1.0 : 0.0, axis == 2 ? 1.0 : 0.0};
            feed.begin_segment(p, dir);
            seg_lo[j][axis] = feed.segment_start();
            out[j][axis] = field_forward(field, grid, p, feed).i;
            lap[j] += 2.0 * T.val(out[j][axis]).d2;
            if (j == 0) g[axis] = T.val(out[j][axis]).d1;
            if (j == 0 && axis == 0) bce_out = record_bce(T, out[0][0], s.sdf_label, lc.sigma_occ);
        }
    }

    acc.bce += T.val(bce_out).v;
    double gn = g.norm();
    acc.eik += (gn - 1.0) * (gn - 1.0);
    double cbase = gn > 1e-12 ? eik_coef * (gn - 1.0) / gn : 0.0;

    const double inv_h2 = 1.0 / (h * h);
    double b = 0.0;
    for (int j = 0; j < 7; ++j) b += coeffs[j] * lap[j];
    b *= inv_h2;
    acc.hess += b * b;
    acc.lap += std::fabs(lap[0]);
    const double dterm_dlap_scale = hess_coef * 2.0 * b * inv_h2;

    ctx.adj_t2.assign(T.size(), Taylor2{});
    for (int j = 0; j < 7; ++j) {
        for (int axis = 0; axis < 3; ++axis) {
            double s0 = 2.0 * dterm_dlap_scale * coeffs[j];
            double s1 = j == 0 ? cbase * g[axis] : 0.0;
            if (j == 0 && axis == 0) {
                ctx.adj_t2[out[0][0]] += Taylor2(s0, s1, 0.0);
                T.backward_range(bce_out, Taylor2(0.0, 0.0, bce_seed), ctx.adj_t2, seg_lo[0][0]);
            } else {
                T.backward_range(out[j][axis], Taylor2(s0, s1, 0.0), ctx.adj_t2, seg_lo[j][axis]);
            }
        }
    }
    scatter(feed, ctx.adj_t2, grad);
}

// Runs the fused gradient passes for one batch; kinds: 0 free, 1 near-surface,
// 2 near-surface carrying the Hessian term. Deterministic for any thread
// count (fixed chunk grain, chunk-ordered reduction).
void run_batch(const MultiScaleField& field, const OctreeGrid& grid,
               const std::vector<TrainingSample>& samples, const std::vector<uint32_t>& ids,
               const std::vector<uint8_t>& kind, int n_near, int n_hess, const LossConfig& lc,
               int threads, std::vector<double>& step_grad, StepAccum& acc) {
    const std::size_t batch = ids.size();
    const std::size_t grain = 8;
    const std::size_t nchunks = (batch + grain - 1) / grain;
    const std::size_t n_params = step_grad.size();

    std::vector<std::vector<double>> chunk_grads(nchunks);
    std::vector<StepAccum> chunk_accs(nchunks);

    const double bce_seed = lc.lambda_bce / double(batch);
    const double eik_coef = n_near > 0 ? lc.lambda_eikonal * 2.0 / double(n_near) : 0.0;
    const double hess_coef =
        n_hess > 0 ? lc.lambda_hessian * lc.hessian_scale / double(n_hess) : 0.0;

    parallel_chunks(batch, grain, threads, [&](std::size_t chunk, std::size_t b, std::size_t e) {
        auto& cg = chunk_grads[chunk];
        cg.assign(n_params, 0.0);
        chunk_accs[chunk] = StepAccum{};
        WorkerCtx& ctx = worker_ctx();
        for (std::size_t i = b; i < e; ++i) {
            const TrainingSample& s = samples[ids[i]];
            if (kind[i] == 2)
                process_hess(ctx, field, grid, s, lc, bce_seed, eik_coef, hess_coef, cg.data(),
                             chunk_accs[chunk]);
            else if (kind[i] == 1)
                process_near(ctx, field, grid, s, lc, bce_seed, eik_coef, cg.data(),
                             chunk_accs[chunk]);
            else
                process_free(ctx, field, grid, s, lc, bce_seed, cg.data(), chunk_accs[chunk]);
        }
    });

    std::fill(step_grad.begin(), step_grad.end(), 0.0);
    acc = StepAccum{};
    for (std::size_t k = 0; k < nchunks; ++k) {
        const auto& cg = chunk_grads[k];
        for (std::size_t p = 0; p < n_params; ++p) step_grad[p] += cg[p];
        acc.bce += chunk_accs[k].bce;
        acc.eik += chunk_accs[k].eik;
        acc.hess += chunk_accs[k].hess;
        acc.lap += chunk_accs[k].lap;
    }
}

LossBreakdown breakdown_from(const StepAccum& acc, std::size_t batch, int n_near, int n_hess,
                             const LossConfig& lc) {
    LossBreakdown bd;
    bd.n_bce = int(batch);
    bd.n_eik = n_near;
    bd.n_hess = n_hess;
    bd.bce = lc.lambda_bce * acc.bce / double(batch);
    bd.eikonal = n_near > 0 ? lc.lambda_eikonal * acc.eik / double(n_near) : 0.0;
    bd.hessian =
        n_hess > 0 ? lc.lambda_hessian * lc.hessian_scale * acc.hess / double(n_hess) : 0.0;
    bd.lap_diag = n_hess > 0 ? 1e-8 * acc.lap / double(n_hess) : 0.0;
    bd.total = bd.bce + bd.eikonal + bd.hessian;
    return bd;
}

}  // namespace

std::string TrainAbort::format(int step, const LossBreakdown& b, const std::string& cause) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "training aborted at step %d: non-finite loss (total=%g bce=%g eikonal=%g hessian=%g)%s%s",
                  step, b.total, b.bce, b.eikonal, b.hessian, cause.empty() ? "" : ": ",
                  cause.c_str());
    return buf;
}

std::vector<double> total_loss_gradient(const MultiScaleField& field, const OctreeGrid& grid,
                                        const std::vector<TrainingSample>& batch,
                                        const LossConfig& loss_cfg, int threads,
                                        LossBreakdown* breakdown) {
    loss_cfg.validate();
    if (batch.empty()) fail("total_loss_gradient: empty batch");
    std::vector<uint32_t> ids(batch.size());
    std::vector<uint8_t> kind(batch.size(), 0);
    int n_near = 0, n_hess = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        ids[i] = uint32_t(i);
        if (std::fabs(batch[i].sdf_label) < loss_cfg.truncation) {
            kind[i] = n_hess < loss_cfg.n_hessian_samples ? 2 : 1;
            if (kind[i] == 2) ++n_hess;
            ++n_near;
        }
    }
    std::vector<double> grad(field.weight_count() + grid.feature_count(), 0.0);
    StepAccum acc;
    run_batch(field, grid, batch, ids, kind, n_near, n_hess, loss_cfg, threads, grad, acc);
    if (breakdown) *breakdown = breakdown_from(acc, batch.size(), n_near, n_hess, loss_cfg);
    return grad;
}

std::vector<double> grad_params(const Tape<double>& tape, const ParamFeed<double>& feed, Var loss,
                                const MultiScaleField& field, const OctreeGrid& grid) {
    std::vector<double> adj;
    tape.backward(loss, 1.0, adj);
    std::vector<double> g(field.weight_count() + grid.feature_count(), 0.0);
    scatter(feed, adj, g.data());
    for (int m = 0; m < field.mlp_count(); ++m) {
        std::size_t off = field.mlp_offset(m), n = field.mlp_size(m);
        for (std::size_t i = 0; i < n; ++i)
            if (!std::isfinite(g[off + i]))
                fail("grad_params: non-finite gradient in mlp block %d", m);
    }
    std::size_t foff = field.weight_count();
    for (int l = 0; l < grid.levels(); ++l) {
        std::size_t off = foff + grid.level_feature_offset(l);
        std::size_t n = grid.level(l).features.size();
        for (std::size_t i = 0; i < n; ++i)
            if (!std::isfinite(g[off + i]))
                fail("grad_params: non-finite gradient in feature level %d", l);
    }
    return g;
}

TrainResult train(const std::vector<PointSample>& points, const OctreeConfig& octree_cfg,
                  const FieldConfig& field_cfg, const SamplingConfig& sampling_cfg,
                  const LossConfig& loss_cfg, const OptimConfig& optim_cfg) {
    if (optim_cfg.steps < 1) fail("train: steps must be >= 1");
    if (optim_cfg.batch < 1) fail("train: batch must be >= 1");
    loss_cfg.validate();
    if (field_cfg.levels != octree_cfg.levels || field_cfg.feature_dim != octree_cfg.feature_dim)
        fail("train: field and octree configs disagree on levels/feature_dim");

    const uint64_t seed = optim_cfg.seed;
    std::vector<TrainingSample> samples =
        sample_rays(points, sampling_cfg, Rng::mix(seed, 0x72617973));
    if (samples.empty()) fail("train: no training samples (empty point cloud?)");

    TrainResult res;
    res.grid = OctreeGrid::build(points, octree_cfg, Rng::mix(seed, 0x67726964));
    res.field = MultiScaleField::create(field_cfg, Rng::mix(seed, 0x6D6C7073));
    res.state.seed = seed;
    res.state.threads = optim_cfg.threads;

    const std::size_t n_mlp = res.field.weight_count();
    const std::size_t n_params = n_mlp + res.grid.feature_count();
    res.state.moment1.assign(n_params, 0.0);
    res.state.moment2.assign(n_params, 0.0);
    std::vector<double>& mom1 = res.state.moment1;
    std::vector<double>& mom2 = res.state.moment2;
    std::vector<double> step_grad(n_params, 0.0);
    Rng rng = Rng(seed).fork(0x62617463);

    const int batch = optim_cfg.batch;
    std::vector<uint32_t> ids(batch);
    std::vector<uint8_t> kind(batch);  // 0 free, 1 near, 2 near+hessian

    for (int step = 0; step < optim_cfg.steps; ++step) {
        auto t0 = std::chrono::steady_clock::now();

        std::vector<uint32_t> near_pos;
        for (int i = 0; i < batch; ++i) {
            ids[i] = uint32_t(rng.below(samples.size()));
            bool near = std::fabs(samples[ids[i]].sdf_label) < loss_cfg.truncation;
            kind[i] = near ? 1 : 0;
            if (near) near_pos.push_back(uint32_t(i));
        }
        const int n_near = int(near_pos.size());
        const int n_hess = std::min<int>(loss_cfg.n_hessian_samples, n_near);
        for (int k = 0; k < n_hess; ++k) {
            std::size_t j = k + rng.below(uint64_t(n_near - k));
            std::swap(near_pos[k], near_pos[j]);
            kind[near_pos[k]] = 2;
        }

        StepAccum acc;
        try {
            run_batch(res.field, res.grid, samples, ids, kind, n_near, n_hess, loss_cfg,
                      optim_cfg.threads, step_grad, acc);
        } catch (const std::exception& e) {
            // runaway parameters surface as non-finite tape values mid-forward
            throw TrainAbort(step, LossBreakdown{}, e.what());
        }

        LossBreakdown bd = breakdown_from(acc, std::size_t(batch), n_near, n_hess, loss_cfg);
        if (!bd.finite()) throw TrainAbort(step, bd);

        // Adam, bias-corrected, two learning-rate groups
        const double t = double(step + 1);
        const double bc1 = 1.0 - std::pow(optim_cfg.beta1, t);
        const double bc2 = 1.0 - std::pow(optim_cfg.beta2, t);
        auto adam_update = [&](std::size_t p, double& value, double lr) {
            double gp = step_grad[p];
            mom1[p] = optim_cfg.beta1 * mom1[p] + (1.0 - optim_cfg.beta1) * gp;
            mom2[p] = optim_cfg.beta2 * mom2[p] + (1.0 - optim_cfg.beta2) * gp * gp;
            value -= lr * (mom1[p] / bc1) / (std::sqrt(mom2[p] / bc2) + optim_cfg.eps);
        };
        auto& w = res.field.weights_mut();
        for (std::size_t p = 0; p < n_mlp; ++p) adam_update(p, w[p], optim_cfg.lr_mlp);
        std::size_t p = n_mlp;
        for (int l = 0; l < res.grid.levels(); ++l) {
            double* f = res.grid.features_data(l);
            std::size_t n = res.grid.level(l).features.size();
            for (std::size_t i = 0; i < n; ++i, ++p) adam_update(p, f[i], optim_cfg.lr_features);
        }

        auto t1 = std::chrono::steady_clock::now();
        StepStats st;
        st.total = bd.total;
        st.bce = bd.bce;
        st.eikonal = bd.eikonal;
        st.hessian = bd.hessian;
        st.lap_diag = bd.lap_diag;
        st.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        res.state.history.push_back(st);
        res.state.step = step + 1;
    }
    return res;
}

void write_loss_csv(const std::string& path, const std::vector<StepStats>& history) {
    std::ofstream out(path);
    if (!out) fail("%s: cannot write", path.c_str());
    out << "step,total,bce,eikonal,hessian,wall_ms\n";
    char buf[256];
    for (std::size_t i = 0; i < history.size(); ++i) {
        const auto& h = history[i];
        std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g,%.9g,%.3f\n", i, h.total, h.bce,
                      h.eikonal, h.hessian, h.wall_ms);
        out << buf;
    }
}

}  // namespace sdfmap
