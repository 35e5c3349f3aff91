#include "sdfmap/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace sdfmap {

namespace {

using nlohmann::json;

void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) fail("config: section '%s' must be an object", section);
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ok.count(it.key()))
            fail("config: unknown key '%s.%s'", section, it.key().c_str());
}

template <class T>
void take(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void RunConfig::finalize() {
    network.levels = octree.levels;
    network.feature_dim = octree.feature_dim;
    if (!(loss.sigma_occ > 0.0)) loss.sigma_occ = 0.5 * octree.base_size;
    if (!(loss.fdm_step > 0.0)) loss.fdm_step = octree.base_size / 8.0;
    if (loss.n_hessian_samples < 0) loss.n_hessian_samples = std::max(1, train.batch / 8);
    if (!(extract.cell > 0.0)) extract.cell = 0.5 * octree.base_size;
    loss.truncation = sampling.truncation;
    train.seed = seed;
    train.threads = threads;
}

RunConfig default_run_config() {
    RunConfig cfg;
    cfg.loss.sigma_occ = -1.0;        // derive in finalize()
    cfg.loss.fdm_step = -1.0;
    cfg.loss.n_hessian_samples = -1;
    cfg.extract.cell = -1.0;
    cfg.finalize();
    return cfg;
}

RunConfig parse_run_config_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        fail("config: invalid json: %s", e.what());
    }
    check_keys(j, "<root>",
               {"seed", "threads", "octree", "network", "sampling", "loss", "train", "extract",
                "refine", "eval"});

    RunConfig cfg;
    cfg.loss.sigma_occ = -1.0;
    cfg.loss.fdm_step = -1.0;
    cfg.loss.n_hessian_samples = -1;
    cfg.extract.cell = -1.0;

    take(j, "seed", cfg.seed);
    take(j, "threads", cfg.threads);
    if (cfg.threads < 1) fail("config: threads must be >= 1");

    if (j.contains("octree")) {
        const json& s = j["octree"];
        check_keys(s, "octree", {"levels", "base_size", "feature_dim"});
        take(s, "levels", cfg.octree.levels);
        take(s, "base_size", cfg.octree.base_size);
        take(s, "feature_dim", cfg.octree.feature_dim);
    }
    if (j.contains("network")) {
        const json& s = j["network"];
        check_keys(s, "network", {"width", "depth", "beta"});
        take(s, "width", cfg.network.width);
        take(s, "depth", cfg.network.depth);
        take(s, "beta", cfg.network.beta);
    }
    if (j.contains("sampling")) {
        const json& s = j["sampling"];
        check_keys(s, "sampling", {"n_surface", "n_free", "truncation"});
        take(s, "n_surface", cfg.sampling.n_surface);
        take(s, "n_free", cfg.sampling.n_free);
        take(s, "truncation", cfg.sampling.truncation);
    }
    if (j.contains("loss")) {
        const json& s = j["loss"];
        check_keys(s, "loss",
                   {"lambda_bce", "lambda_eikonal", "lambda_hessian", "sigma_occ", "hessian_scale",
                    "fdm_step", "n_hessian_samples"});
        take(s, "lambda_bce", cfg.loss.lambda_bce);
        take(s, "lambda_eikonal", cfg.loss.lambda_eikonal);
        take(s, "lambda_hessian", cfg.loss.lambda_hessian);
        take(s, "sigma_occ", cfg.loss.sigma_occ);
        take(s, "hessian_scale", cfg.loss.hessian_scale);
        take(s, "fdm_step", cfg.loss.fdm_step);
        take(s, "n_hessian_samples", cfg.loss.n_hessian_samples);
    }
    if (j.contains("train")) {
        const json& s = j["train"];
        check_keys(s, "train",
                   {"steps", "batch", "lr_features", "lr_mlp", "beta1", "beta2", "eps"});
        take(s, "steps", cfg.train.steps);
        take(s, "batch", cfg.train.batch);
        take(s, "lr_features", cfg.train.lr_features);
        take(s, "lr_mlp", cfg.train.lr_mlp);
        take(s, "beta1", cfg.train.beta1);
        take(s, "beta2", cfg.train.beta2);
        take(s, "eps", cfg.train.eps);
    }
    if (j.contains("extract")) {
        const json& s = j["extract"];
        check_keys(s, "extract", {"cell", "dilation"});
        take(s, "cell", cfg.extract.cell);
        take(s, "dilation", cfg.extract.dilation);
        if (cfg.extract.dilation < 0) fail("config: extract.dilation must be non-negative");
    }
    if (j.contains("refine")) {
        const json& s = j["refine"];
        check_keys(s, "refine",
                   {"eta", "max_iters", "plateau_tol", "weight_clamp_min", "weight_clamp_max",
                    "weighted_average", "gradient_form"});
        take(s, "eta", cfg.refine.eta);
        take(s, "max_iters", cfg.refine.max_iters);
        take(s, "plateau_tol", cfg.refine.plateau_tol);
        take(s, "weight_clamp_min", cfg.refine.weight_clamp_min);
        take(s, "weight_clamp_max", cfg.refine.weight_clamp_max);
        take(s, "weighted_average", cfg.refine.weighted_average);
        take(s, "gradient_form", cfg.refine.gradient_form);
    }
    if (j.contains("eval")) {
        const json& s = j["eval"];
        check_keys(s, "eval", {"threshold_cm", "n_samples"});
        take(s, "threshold_cm", cfg.eval.threshold_cm);
        take(s, "n_samples", cfg.eval.n_samples);
    }
    cfg.finalize();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("%s: cannot open", path.c_str());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config_json(ss.str());
}

std::string run_config_to_json(const RunConfig& cfg) {
    nlohmann::ordered_json j;
    j["seed"] = cfg.seed;
    j["threads"] = cfg.threads;
    j["octree"] = {{"levels", cfg.octree.levels},
                   {"base_size", cfg.octree.base_size},
                   {"feature_dim", cfg.octree.feature_dim}};
    j["network"] = {{"width", cfg.network.width}, {"depth", cfg.network.depth},
                    {"beta", cfg.network.beta}};
    j["sampling"] = {{"n_surface", cfg.sampling.n_surface},
                     {"n_free", cfg.sampling.n_free},
                     {"truncation", cfg.sampling.truncation}};
    j["loss"] = {{"lambda_bce", cfg.loss.lambda_bce},
                 {"lambda_eikonal", cfg.loss.lambda_eikonal},
                 {"lambda_hessian", cfg.loss.lambda_hessian},
                 {"sigma_occ", cfg.loss.sigma_occ},
                 {"hessian_scale", cfg.loss.hessian_scale},
                 {"fdm_step", cfg.loss.fdm_step},
                 {"n_hessian_samples", cfg.loss.n_hessian_samples}};
    j["train"] = {{"steps", cfg.train.steps},
                  {"batch", cfg.train.batch},
                  {"lr_features", cfg.train.lr_features},
                  {"lr_mlp", cfg.train.lr_mlp},
                  {"beta1", cfg.train.beta1},
                  {"beta2", cfg.train.beta2},
                  {"eps", cfg.train.eps}};
    j["extract"] = {{"cell", cfg.extract.cell}, {"dilation", cfg.extract.dilation}};
    j["refine"] = {{"eta", cfg.refine.eta},
                   {"max_iters", cfg.refine.max_iters},
                   {"plateau_tol", cfg.refine.plateau_tol},
                   {"weight_clamp_min", cfg.refine.weight_clamp_min},
                   {"weight_clamp_max", cfg.refine.weight_clamp_max},
                   {"weighted_average", cfg.refine.weighted_average},
                   {"gradient_form", cfg.refine.gradient_form}};
    j["eval"] = {{"threshold_cm", cfg.eval.threshold_cm}, {"n_samples", cfg.eval.n_samples}};
    return j.dump(2) + "\n";
}

}  // namespace sdfmap
