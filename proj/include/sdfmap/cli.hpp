#pragma once

#include <optional>
#include <string>

#include "sdfmap/config.hpp"
#include "sdfmap/metrics.hpp"
#include "sdfmap/scene.hpp"

namespace sdfmap::cli {

// Stage entry points; each writes its artifacts plus the effective config into
// the output directory and throws on error. The subcommand parser wraps these.
void do_synth(const std::string& scene_path, const std::string& out_dir, uint64_t seed);
void do_train(const std::string& points_path, const std::optional<std::string>& poses_path,
              const RunConfig& cfg, const std::string& out_dir);
void do_extract(const std::string& checkpoint_path, const RunConfig& cfg,
                const std::string& out_dir);
void do_refine(const std::string& mesh_path, const RunConfig& cfg, const std::string& out_dir,
               const std::optional<std::string>& gt_path);
ReconReport do_eval(const std::string& mesh_path, const std::string& gt_path, const RunConfig& cfg,
                    const std::string& out_dir);
ReconReport do_run(const std::string& scene_path, const RunConfig& cfg, const std::string& out_dir);

// Dense ground-truth surface points of an analytic scene: marching cubes on
// the exact SDF, then area-weighted sampling.
std::vector<Vec3> analytic_surface_points(const SyntheticScene& scene, double cell, std::size_t n,
                                          uint64_t seed, int threads = 1);

// Loads points (xyz or ply); a mesh file with faces is surface-sampled instead.
std::vector<Vec3> load_eval_points(const std::string& path, std::size_t n_samples, uint64_t seed);

int main(int argc, const char* const* argv);

}  // namespace sdfmap::cli
