#include "sdfmap/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "CLI11.hpp"
#include "sdfmap/train.hpp"

namespace sdfmap::cli {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail("%s: cannot create output directory (%s)", dir.c_str(), ec.message().c_str());
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("%s: cannot write", path.c_str());
    out << text;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("%s: cannot open", path.c_str());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void echo_config(const RunConfig& cfg, const std::string& out_dir) {
    write_text((fs::path(out_dir) / "config.json").string(), run_config_to_json(cfg));
}

}  // namespace

void do_synth(const std::string& scene_path, const std::string& out_dir, uint64_t seed) {
    ensure_dir(out_dir);
    SyntheticScene scene = load_scene(scene_path);
    std::vector<PointSample> points = synth_scan(scene, seed);
    if (points.empty()) fail("synth: no rays hit the scene");
    save_pointcloud((fs::path(out_dir) / "points.ply").string(), points);
    std::vector<Pose> poses;
    for (const Vec3& s : scene.scan.sensors) {
        Pose p;
        p.t = s;
        poses.push_back(p);
    }
    save_poses((fs::path(out_dir) / "poses.txt").string(), poses);
    write_text((fs::path(out_dir) / "scene.json").string(), read_text(scene_path));
    std::printf("synth: %zu points from %zu sensors -> %s\n", points.size(),
                scene.scan.sensors.size(), out_dir.c_str());
}

void do_train(const std::string& points_path, const std::optional<std::string>& poses_path,
              const RunConfig& cfg, const std::string& out_dir) {
    ensure_dir(out_dir);
    std::vector<PointSample> points = load_pointcloud(points_path, poses_path);
    TrainResult res = train(points, cfg.octree, cfg.network, cfg.sampling, cfg.loss, cfg.train);
    save_checkpoint((fs::path(out_dir) / "checkpoint.bin").string(), res.field, res.grid,
                    run_config_to_json(cfg));
    write_loss_csv((fs::path(out_dir) / "loss.csv").string(), res.state.history);
    echo_config(cfg, out_dir);
    const StepStats& last = res.state.history.back();
    std::printf("train: %d steps, final loss %.6g (bce %.6g, eikonal %.6g, hessian %.6g)\n",
                res.state.step, last.total, last.bce, last.eikonal, last.hessian);
}

void do_extract(const std::string& checkpoint_path, const RunConfig& cfg,
                const std::string& out_dir) {
    ensure_dir(out_dir);
    MultiScaleField field;
    OctreeGrid grid;
    load_checkpoint(checkpoint_path, field, grid);
    std::vector<Aabb> bounds = grid.occupied_leaf_bounds(cfg.extract.dilation);
    TriangleMesh mesh = marching_cubes(field, grid, cfg.extract.cell, bounds, cfg.threads);
    write_mesh((fs::path(out_dir) / "mesh.ply").string(), mesh);
    echo_config(cfg, out_dir);
    std::printf("extract: %zu vertices, %zu faces -> %s\n", mesh.vertex_count(), mesh.face_count(),
                out_dir.c_str());
}

void do_refine(const std::string& mesh_path, const RunConfig& cfg, const std::string& out_dir,
               const std::optional<std::string>& gt_path) {
    ensure_dir(out_dir);
    TriangleMesh mesh = read_mesh(mesh_path);
    MetricFn metric;
    if (gt_path) {
        auto gt = load_eval_points(*gt_path, cfg.eval.n_samples, Rng::mix(cfg.seed, 0x6774));
        std::size_t n = cfg.eval.n_samples;
        double threshold = cfg.eval.threshold_cm;
        uint64_t seed = Rng::mix(cfg.seed, 0x70726564);
        int threads = cfg.threads;
        metric = [gt = std::move(gt), n, threshold, seed, threads](const TriangleMesh& m) {
            return evaluate(sample_surface(m, n, seed), gt, threshold, threads).f_score_pct;
        };
    }
    RefineReport report;
    TriangleMesh refined = refine(mesh, cfg.refine, &report, metric, /*higher better*/ true);
    if (report.degenerate_stop)
        std::fprintf(stderr, "warning: refine stopped early (degenerate triangle)\n");
    if (report.iterations_run > 0) attach_laplacian_heatmap(refined);
    write_mesh((fs::path(out_dir) / "refined.ply").string(), refined);
    write_refine_csv((fs::path(out_dir) / "refine.csv").string(), report);
    echo_config(cfg, out_dir);
    std::printf("refine: %d iterations, quadratic form %.6g -> %.6g\n", report.iterations_run,
                report.rows.front().quadratic_form, report.rows.back().quadratic_form);
}

std::vector<Vec3> load_eval_points(const std::string& path, std::size_t n_samples, uint64_t seed) {
    auto dot = path.find_last_of('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    for (char& c : ext) c = char(std::tolower(c));
    if (ext == "obj") return sample_surface(read_mesh(path), n_samples, seed);
    if (ext == "ply") {
        TriangleMesh m = read_mesh(path);
        if (!m.faces.empty()) return sample_surface(m, n_samples, seed);
        std::vector<Vec3> pts(m.vertices.begin(), m.vertices.end());
        if (pts.empty()) fail("%s: no points", path.c_str());
        return pts;
    }
    std::vector<PointSample> raw = load_pointcloud(path);
    std::vector<Vec3> pts;
    pts.reserve(raw.size());
    for (const auto& p : raw) pts.push_back(p.position);
    if (pts.empty()) fail("%s: no points", path.c_str());
    return pts;
}

ReconReport do_eval(const std::string& mesh_path, const std::string& gt_path, const RunConfig& cfg,
                    const std::string& out_dir) {
    ensure_dir(out_dir);
    TriangleMesh mesh = read_mesh(mesh_path);
    // one sampling seed for both sides: evaluating a mesh against itself is
    // exact (F = 100) rather than sampling-noise limited
    uint64_t sample_seed = Rng::mix(cfg.seed, 0x70726564);
    std::vector<Vec3> pred = sample_surface(mesh, cfg.eval.n_samples, sample_seed);
    std::vector<Vec3> gt = load_eval_points(gt_path, cfg.eval.n_samples, sample_seed);
    ReconReport r = evaluate(pred, gt, cfg.eval.threshold_cm, cfg.threads);
    write_report((fs::path(out_dir) / "report.json").string(), r);
    write_text((fs::path(out_dir) / "report.txt").string(), report_to_text(r));
    echo_config(cfg, out_dir);
    std::fputs(report_to_text(r).c_str(), stdout);
    return r;
}

std::vector<Vec3> analytic_surface_points(const SyntheticScene& scene, double cell, std::size_t n,
                                          uint64_t seed, int threads) {
    Aabb box = scene.bounds();
    Vec3 margin{2 * cell, 2 * cell, 2 * cell};
    Aabb domain{box.lo - margin, box.hi + margin};
    BatchSdf sdf = [&](const std::vector<Vec3>& xs, std::vector<double>& out) {
        out.resize(xs.size());
        parallel_chunks(xs.size(), 4096, threads, [&](std::size_t, std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) out[i] = scene.sdf(xs[i]);
        });
    };
    TriangleMesh gt_mesh = marching_cubes(sdf, cell, {domain}, threads);
    if (gt_mesh.empty()) fail("analytic ground truth: empty zero-level set");
    return sample_surface(gt_mesh, n, seed);
}

ReconReport do_run(const std::string& scene_path, const RunConfig& cfg,
                   const std::string& out_dir) {
    ensure_dir(out_dir);
    do_synth(scene_path, out_dir, cfg.seed);
    do_train((fs::path(out_dir) / "points.ply").string(),
             (fs::path(out_dir) / "poses.txt").string(), cfg, out_dir);
    do_extract((fs::path(out_dir) / "checkpoint.bin").string(), cfg, out_dir);

    SyntheticScene scene = load_scene(scene_path);
    std::vector<Vec3> gt = analytic_surface_points(scene, cfg.extract.cell, cfg.eval.n_samples,
                                                   Rng::mix(cfg.seed, 0x6774), cfg.threads);

    TriangleMesh mesh = read_mesh((fs::path(out_dir) / "mesh.ply").string());
    std::vector<Vec3> pred_raw =
        sample_surface(mesh, cfg.eval.n_samples, Rng::mix(cfg.seed, 0x70726564));
    ReconReport raw = evaluate(pred_raw, gt, cfg.eval.threshold_cm, cfg.threads);
    write_report((fs::path(out_dir) / "report_raw.json").string(), raw);

    // refine against the analytic ground truth (F-score plateau stopping)
    std::size_t n = cfg.eval.n_samples;
    double threshold = cfg.eval.threshold_cm;
    uint64_t pseed = Rng::mix(cfg.seed, 0x70726564);
    int threads = cfg.threads;
    MetricFn metric = [&gt, n, threshold, pseed, threads](const TriangleMesh& m) {
        return evaluate(sample_surface(m, n, pseed), gt, threshold, threads).f_score_pct;
    };
    RefineReport rrep;
    TriangleMesh refined = refine(mesh, cfg.refine, &rrep, metric, true);
    attach_laplacian_heatmap(refined);
    write_mesh((fs::path(out_dir) / "refined.ply").string(), refined);
    write_refine_csv((fs::path(out_dir) / "refine.csv").string(), rrep);

    std::vector<Vec3> pred = sample_surface(refined, n, pseed);
    ReconReport r = evaluate(pred, gt, threshold, threads);
    write_report((fs::path(out_dir) / "report.json").string(), r);
    write_text((fs::path(out_dir) / "report.txt").string(), report_to_text(r));
    echo_config(cfg, out_dir);
    std::fputs(report_to_text(r).c_str(), stdout);
    return r;
}

namespace {

struct Overrides {
    CLI::App* app = nullptr;
    std::string config_path;
    uint64_t seed = 0;
    int threads = 0;
    int steps = 0, batch = 0;
    int levels = 0, feature_dim = 0, width = 0, depth = 0;
    double base_size = 0, truncation = 0, cell = 0;
    int dilation = -1, n_surface = -1, n_free = -1, n_hessian = -1, max_iters = -1;
    double lambda_bce = -1, lambda_eikonal = -1, lambda_hessian = -1;
    double hessian_scale = -1, sigma_occ = -1, fdm_step = -1;
    double eta = -1, plateau_tol = -1, threshold_cm = -1;
    std::size_t n_samples = 0;

    void bind(CLI::App* cmd) {
        app = cmd;
        cmd->add_option("--config", config_path, "Config file (json); flags override it");
        cmd->add_option("--seed", seed, "Master seed (default 1)");
        cmd->add_option("--threads", threads, "Worker threads for parallel phases (default 1)");
        cmd->add_option("--steps", steps, "Training steps (default 5000)");
        cmd->add_option("--batch", batch, "Minibatch size (default 128)");
        cmd->add_option("--levels", levels, "Octree levels (default 3)");
        cmd->add_option("--base-size", base_size, "Leaf node edge in meters (default 0.10)");
        cmd->add_option("--feature-dim", feature_dim, "Corner feature dimension (default 128)");
        cmd->add_option("--width", width, "MLP hidden width (default 128)");
        cmd->add_option("--depth", depth, "MLP hidden layers (default 2)");
        cmd->add_option("--truncation", truncation, "SDF truncation band in meters (default 0.3)");
        cmd->add_option("--n-surface", n_surface, "Near-surface samples per ray (default 4)");
        cmd->add_option("--n-free", n_free, "Free-space samples per ray (default 2)");
        cmd->add_option("--lambda-bce", lambda_bce, "BCE weight (default 1.0)");
        cmd->add_option("--lambda-eikonal", lambda_eikonal, "Eikonal weight (default 0.1)");
        cmd->add_option("--lambda-hessian", lambda_hessian, "Hessian weight (default 1.0)");
        cmd->add_option("--hessian-scale", hessian_scale,
                        "Fourth-order term scaling (default 1e-11)");
        cmd->add_option("--sigma-occ", sigma_occ, "BCE logistic scale (default base_size/2)");
        cmd->add_option("--fdm-step", fdm_step, "Biharmonic stencil step (default base_size/8)");
        cmd->add_option("--n-hessian", n_hessian, "Hessian samples per batch (default batch/8)");
        cmd->add_option("--cell", cell, "Extraction cell size (default base_size/2)");
        cmd->add_option("--dilation", dilation, "Extraction domain dilation in cells (default 1)");
        cmd->add_option("--eta", eta, "Refinement step parameter in (0,1) (default 0.5)");
        cmd->add_option("--max-iters", max_iters, "Refinement iterations (default 20)");
        cmd->add_option("--plateau-tol", plateau_tol, "Refinement plateau tolerance (default 1e-4)");
        cmd->add_option("--threshold-cm", threshold_cm, "Evaluation threshold in cm (default 10)");
        cmd->add_option("--n-samples", n_samples, "Surface samples for evaluation (default 1e6)");
    }

    RunConfig resolve() const {
        RunConfig cfg = config_path.empty() ? default_run_config() : load_run_config(config_path);
        auto set = [&](const char* flag, auto& dst, const auto& src) {
            if (app->count(flag)) dst = src;
        };
        set("--seed", cfg.seed, seed);
        set("--threads", cfg.threads, threads);
        set("--steps", cfg.train.steps, steps);
        set("--batch", cfg.train.batch, batch);
        set("--levels", cfg.octree.levels, levels);
        set("--base-size", cfg.octree.base_size, base_size);
        set("--feature-dim", cfg.octree.feature_dim, feature_dim);
        set("--width", cfg.network.width, width);
        set("--depth", cfg.network.depth, depth);
        set("--truncation", cfg.sampling.truncation, truncation);
        set("--n-surface", cfg.sampling.n_surface, n_surface);
        set("--n-free", cfg.sampling.n_free, n_free);
        set("--lambda-bce", cfg.loss.lambda_bce, lambda_bce);
        set("--lambda-eikonal", cfg.loss.lambda_eikonal, lambda_eikonal);
        set("--lambda-hessian", cfg.loss.lambda_hessian, lambda_hessian);
        set("--hessian-scale", cfg.loss.hessian_scale, hessian_scale);
        set("--sigma-occ", cfg.loss.sigma_occ, sigma_occ);
        set("--fdm-step", cfg.loss.fdm_step, fdm_step);
        set("--n-hessian", cfg.loss.n_hessian_samples, n_hessian);
        set("--cell", cfg.extract.cell, cell);
        set("--dilation", cfg.extract.dilation, dilation);
        set("--eta", cfg.refine.eta, eta);
        set("--max-iters", cfg.refine.max_iters, max_iters);
        set("--plateau-tol", cfg.refine.plateau_tol, plateau_tol);
        set("--threshold-cm", cfg.eval.threshold_cm, threshold_cm);
        set("--n-samples", cfg.eval.n_samples, n_samples);
        cfg.finalize();
        return cfg;
    }
};

}  // namespace

int main(int argc, const char* const* argv) {
    CLI::App app{"surface mapping toolkit: signed distance fields from LiDAR-style point clouds"};
    app.require_subcommand(1);

    std::string scene_path, out_dir, points_path, mesh_path, checkpoint_path, gt_path, poses_path;

    auto* synth = app.add_subcommand("synth", "Simulate a LiDAR scan of an analytic scene");
    synth->add_option("--scene", scene_path, "Scene description (json)")->required();
    synth->add_option("--out", out_dir, "Output directory")->required();
    uint64_t synth_seed = 1;
    synth->add_option("--seed", synth_seed, "Scan seed (default 1)");

    Overrides train_ov, extract_ov, refine_ov, eval_ov, run_ov;

    auto* train_cmd = app.add_subcommand("train", "Fit the SDF field to a point cloud");
    train_cmd->add_option("--points", points_path, "Point cloud (xyz or ply)")->required();
    train_cmd->add_option("--poses", poses_path, "Pose file (12 floats per frame)");
    train_cmd->add_option("--out", out_dir, "Output directory")->required();
    train_ov.bind(train_cmd);

    auto* extract_cmd = app.add_subcommand("extract", "Marching cubes on a trained checkpoint");
    extract_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
    extract_cmd->add_option("--out", out_dir, "Output directory")->required();
    extract_ov.bind(extract_cmd);

    auto* refine_cmd = app.add_subcommand("refine", "Laplacian least-squares mesh refinement");
    refine_cmd->add_option("--mesh", mesh_path, "Input mesh (obj or ply)")->required();
    refine_cmd->add_option("--out", out_dir, "Output directory")->required();
    refine_cmd->add_option("--gt", gt_path, "Ground-truth points for F-score stopping");
    refine_ov.bind(refine_cmd);

    auto* eval_cmd = app.add_subcommand("eval", "Reconstruction quality report");
    eval_cmd->add_option("--mesh", mesh_path, "Mesh to evaluate")->required();
    eval_cmd->add_option("--gt", gt_path, "Ground-truth points or mesh")->required();
    eval_cmd->add_option("--out", out_dir, "Output directory")->required();
    eval_ov.bind(eval_cmd);

    auto* run_cmd = app.add_subcommand("run", "synth -> train -> extract -> refine -> eval");
    run_cmd->add_option("--scene", scene_path, "Scene description (json)")->required();
    run_cmd->add_option("--out", out_dir, "Output directory")->required();
    run_ov.bind(run_cmd);

    try {
        app.parse(argc, argv);
        if (synth->parsed()) {
            do_synth(scene_path, out_dir, synth_seed);
        } else if (train_cmd->parsed()) {
            std::optional<std::string> poses;
            if (!poses_path.empty()) poses = poses_path;
            do_train(points_path, poses, train_ov.resolve(), out_dir);
        } else if (extract_cmd->parsed()) {
            do_extract(checkpoint_path, extract_ov.resolve(), out_dir);
        } else if (refine_cmd->parsed()) {
            std::optional<std::string> gt;
            if (!gt_path.empty()) gt = gt_path;
            do_refine(mesh_path, refine_ov.resolve(), out_dir, gt);
        } else if (eval_cmd->parsed()) {
            do_eval(mesh_path, gt_path, eval_ov.resolve(), out_dir);
        } else if (run_cmd->parsed()) {
            do_run(scene_path, run_ov.resolve(), out_dir);
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

}  // namespace sdfmap::cli
