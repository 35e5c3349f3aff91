#pragma once

#include <string>

#include "sdfmap/field.hpp"
#include "sdfmap/loss.hpp"
#include "sdfmap/octree.hpp"
#include "sdfmap/refine.hpp"
#include "sdfmap/train.hpp"

namespace sdfmap {

struct ExtractConfig {
    double cell = 0.05;  // defaults to base_size / 2
    // leaf-cell dilation for the extraction domain; 0 keeps marching cubes on
    // data-carrying cells only, away from the weakly supervised truncation rim
    int dilation = 0;
};

struct EvalConfig {
    double threshold_cm = 10.0;
    std::size_t n_samples = 1000000;
};

// Mirror of every module's configuration. All keys are optional in the config
// file; unknown keys are rejected. sigma_occ, fdm_step, extract.cell and
// n_hessian_samples derive from base_size / batch when not set explicitly.
struct RunConfig {
    uint64_t seed = 1;
    int threads = 1;
    OctreeConfig octree;        // levels=3, base_size=0.10, feature_dim=128
    FieldConfig network;        // width=128, depth=2, beta=100
    SamplingConfig sampling;    // n_surface=4, n_free=2, truncation=0.3
    LossConfig loss;
    OptimConfig train;          // steps=5000, batch=128
    ExtractConfig extract;
    RefineConfig refine;
    EvalConfig eval;

    // ties the cross-module knobs together after parsing/overrides
    void finalize();
};

RunConfig default_run_config();
RunConfig parse_run_config_json(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace sdfmap
