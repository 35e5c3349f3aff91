#include "sdfmap/refine.hpp"

#include <cmath>
#include <fstream>

namespace sdfmap {

SparseLaplacian cotan_laplacian(const TriangleMesh& mesh, double clamp_min, double clamp_max) {
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& fc = mesh.faces[f];
        Vec3 e1 = mesh.vertices[fc[1]] - mesh.vertices[fc[0]];
        Vec3 e2 = mesh.vertices[fc[2]] - mesh.vertices[fc[0]];
        if (e1.cross(e2).norm() < 1e-14) fail("cotan_laplacian: zero-area triangle at face %zu", f);
    }

    Adjacency adj = vertex_adjacency(mesh);
    SparseLaplacian lap;
    lap.dim = mesh.vertices.size();
    lap.diag.assign(lap.dim, 0.0);
    lap.boundary_vertex = adj.boundary_vertex;
    lap.neighbor_count.assign(lap.dim, 0);
    lap.edges.reserve(adj.edges.size());
    for (const EdgeInfo& e : adj.edges) {
        double w = 0.0;
        for (int k = 0; k < e.n_faces; ++k) w += 1.0 / std::tan(e.opposite_angles[k]);
        w *= 0.5;
        w = std::min(std::max(w, clamp_min), clamp_max);
        lap.edges.push_back({e.a, e.b, w, e.n_faces == 1});
        lap.diag[e.a] -= w;
        lap.diag[e.b] -= w;
        ++lap.neighbor_count[e.a];
        ++lap.neighbor_count[e.b];
    }
    return lap;
}

void laplacian_displacement(const SparseLaplacian& lap, const std::vector<Vec3>& vertices,
                            std::vector<Vec3>& disp, std::vector<double>& norms) {
    if (vertices.size() != lap.dim) fail("laplacian_displacement: dimension mismatch");
    disp.assign(lap.dim, Vec3{});
    for (std::size_t i = 0; i < lap.dim; ++i) disp[i] = vertices[i] * lap.diag[i];
    for (const auto& e : lap.edges) {
        disp[e.a] += vertices[e.b] * e.w;
        disp[e.b] += vertices[e.a] * e.w;
    }
    norms.resize(lap.dim);
    for (std::size_t i = 0; i < lap.dim; ++i) norms[i] = disp[i].norm();
}

double quadratic_form(const SparseLaplacian& lap, const std::vector<Vec3>& vertices) {
    if (vertices.size() != lap.dim) fail("quadratic_form: dimension mismatch");
    double q = 0.0;
    for (const auto& e : lap.edges) q += e.w * (vertices[e.a] - vertices[e.b]).norm2();
    return 0.5 * q;
}

TriangleMesh refine_step(const TriangleMesh& mesh, const SparseLaplacian& lap,
                         const RefineConfig& cfg) {
    cfg.validate();
    if (mesh.vertices.size() != lap.dim) fail("refine_step: Laplacian built from a different mesh");

    std::vector<Vec3> disp;
    std::vector<double> norms;
    laplacian_displacement(lap, mesh.vertices, disp, norms);

    TriangleMesh out = mesh;
    if (cfg.gradient_form) {
        for (std::size_t i = 0; i < lap.dim; ++i) {
            if (lap.neighbor_count[i] < 3) continue;
            out.vertices[i] = mesh.vertices[i] + disp[i] * cfg.eta;
        }
        return out;
    }

    // weighted centroid accumulation (boundary vertices: boundary edges only)
    std::vector<Vec3> acc(lap.dim, Vec3{});
    std::vector<double> wsum(lap.dim, 0.0);
    auto add = (cfg.weighted_average)
                   ? std::function<void(uint32_t, uint32_t, double)>(
                         [&](uint32_t i, uint32_t j, double w) {
                             acc[i] += mesh.vertices[j] * w;
                             wsum[i] += w;
                         })
                   : std::function<void(uint32_t, uint32_t, double)>(
                         [&](uint32_t i, uint32_t j, double) {
                             acc[i] += mesh.vertices[j];
                             wsum[i] += 1.0;
                         });
    for (const auto& e : lap.edges) {
        if (!lap.boundary_vertex[e.a] || e.boundary) add(e.a, e.b, e.w);
        if (!lap.boundary_vertex[e.b] || e.boundary) add(e.b, e.a, e.w);
    }
    for (std::size_t i = 0; i < lap.dim; ++i) {
        if (lap.neighbor_count[i] < 3 || wsum[i] <= 0.0) continue;
        Vec3 centroid = acc[i] / wsum[i];
        double damp = cfg.eta * std::exp(-norms[i]);
        out.vertices[i] = mesh.vertices[i] + (centroid - mesh.vertices[i]) * damp;
    }
    return out;
}

TriangleMesh refine(const TriangleMesh& mesh, const RefineConfig& cfg, RefineReport* report,
                    const MetricFn& metric, bool metric_higher_better) {
    cfg.validate();
    RefineReport local;
    RefineReport& rep = report ? *report : local;
    rep.rows.clear();
    rep.degenerate_stop = false;
    rep.iterations_run = 0;

    TriangleMesh cur = mesh;
    auto eval_metric = [&](const TriangleMesh& m, double qf) {
        return metric ? metric(m) : qf;
    };

    double q_in = 0.0;
    try {
        SparseLaplacian lap0 = cotan_laplacian(cur, cfg.weight_clamp_min, cfg.weight_clamp_max);
        q_in = quadratic_form(lap0, cur.vertices);
    } catch (const std::exception&) {
        rep.degenerate_stop = true;
        return cur;
    }
    double prev_metric = eval_metric(cur, q_in);
    rep.rows.push_back({0, q_in, 0.0, prev_metric});

    int stalled = 0;
    TriangleMesh last_valid = cur;
    for (int it = 1; it <= cfg.max_iters; ++it) {
        SparseLaplacian lap;
        try {
            lap = cotan_laplacian(cur, cfg.weight_clamp_min, cfg.weight_clamp_max);
        } catch (const std::exception&) {
            rep.degenerate_stop = true;  // over-smoothing collapse guard
            return last_valid;
        }
        last_valid = cur;
        std::vector<Vec3> disp;
        std::vector<double> norms;
        laplacian_displacement(lap, cur.vertices, disp, norms);
        double mean_disp = 0.0;
        for (double n : norms) mean_disp += n;
        if (!norms.empty()) mean_disp /= double(norms.size());

        cur = refine_step(cur, lap, cfg);
        rep.iterations_run = it;
        double q = quadratic_form(lap, cur.vertices);
        double m = eval_metric(cur, q);
        rep.rows.push_back({it, q, mean_disp, m});

        double improvement = metric_higher_better && metric ? m - prev_metric : prev_metric - m;
        prev_metric = m;
        stalled = improvement < cfg.plateau_tol ? stalled + 1 : 0;
        if (stalled >= 3) break;
    }
    return cur;
}

void write_refine_csv(const std::string& path, const RefineReport& report) {
    std::ofstream out(path);
    if (!out) fail("%s: cannot write", path.c_str());
    out << "iter,quadratic_form,mean_disp_norm,metric\n";
    char buf[160];
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g\n", r.iter, r.quadratic_form,
                      r.mean_disp_norm, r.metric);
        out << buf;
    }
}

void attach_laplacian_heatmap(TriangleMesh& mesh) {
    SparseLaplacian lap = cotan_laplacian(mesh);
    std::vector<Vec3> disp;
    std::vector<double> norms;
    laplacian_displacement(lap, mesh.vertices, disp, norms);
    mesh.scalar = std::move(norms);
}

}  // namespace sdfmap
