#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "sdfmap/loss.hpp"
#include "sdfmap/octree.hpp"
#include "sdfmap/scene.hpp"

namespace sdfmap {

struct OptimConfig {
    int steps = 5000;
    int batch = 128;
    double lr_features = 1e-3;
    double lr_mlp = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double eps = 1e-8;
    uint64_t seed = 1;
    int threads = 1;
};

struct StepStats {
    double total = 0, bce = 0, eikonal = 0, hessian = 0, lap_diag = 0;
    double wall_ms = 0;
};

struct TrainState {
    int step = 0;
    uint64_t seed = 0;
    int threads = 1;
    std::vector<StepStats> history;          // one entry per optimizer step
    std::vector<double> moment1, moment2;    // Adam moments, one per parameter
};

struct TrainResult {
    MultiScaleField field;
    OctreeGrid grid;
    TrainState state;
};

// Raised when the composite loss turns non-finite; carries the step index and
// the per-term breakdown (the runaway-fourth-order failure mode).
class TrainAbort : public std::runtime_error {
public:
    TrainAbort(int step, const LossBreakdown& b, const std::string& cause = "")
        : std::runtime_error(format(step, b, cause)), step_(step), breakdown_(b) {}
    int step() const { return step_; }
    const LossBreakdown& breakdown() const { return breakdown_; }

private:
    static std::string format(int step, const LossBreakdown& b, const std::string& cause);
    int step_;
    LossBreakdown breakdown_;
};

// Adam over MLP weights and octree corner features on minibatches of
// TrainingSamples. Deterministic in the seed, independent of thread count.
TrainResult train(const std::vector<PointSample>& points, const OctreeConfig& octree_cfg,
                  const FieldConfig& field_cfg, const SamplingConfig& sampling_cfg,
                  const LossConfig& loss_cfg, const OptimConfig& optim_cfg);

// Parameter gradient of total_loss over a fixed batch, through the same fused
// probe passes the optimizer uses (Hessian subset: first n near-surface
// samples, matching total_loss). Layout: MLP weights, then grid features.
std::vector<double> total_loss_gradient(const MultiScaleField& field, const OctreeGrid& grid,
                                        const std::vector<TrainingSample>& batch,
                                        const LossConfig& loss_cfg, int threads = 1,
                                        LossBreakdown* breakdown = nullptr);

void write_loss_csv(const std::string& path, const std::vector<StepStats>& history);

// Gradient of one recorded scalar with respect to every parameter (MLP weights
// first, then grid corner features level-major). Parameters the tape never
// touched report zero.
std::vector<double> grad_params(const Tape<double>& tape, const ParamFeed<double>& feed, Var loss,
                                const MultiScaleField& field, const OctreeGrid& grid);

}  // namespace sdfmap
