#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include "sdfmap/autodiff.hpp"
#include "sdfmap/octree.hpp"
#include "sdfmap/tape.hpp"

namespace sdfmap {

struct FieldConfig {
    int levels = 3;       // must match the grid
    int feature_dim = 128;
    int width = 128;      // hidden dimension
    int depth = 2;        // hidden layers per MLP
    double beta = 100.0;  // softplus slope; second derivatives exist everywhere

    bool operator==(const FieldConfig& o) const {
        return levels == o.levels && feature_dim == o.feature_dim && width == o.width &&
               depth == o.depth && beta == o.beta;
    }
};

// The multi-scale SDF network: per level a trilinear 8-corner feature
// aggregation, a restriction chain of `down` MLPs (fine to coarse), a
// prolongation chain of `up` MLPs (coarse to fine, the coarsest step an
// identity skip), and a scalar head. 2L kernel MLPs exist; 2L-1 are evaluated
// per query.
class MultiScaleField {
public:
    MultiScaleField() = default;
    MultiScaleField(MultiScaleField&& o) noexcept
        : cfg_(o.cfg_), weights_(std::move(o.weights_)), offsets_(std::move(o.offsets_)),
          kernel_evals_(o.kernel_evals_.load()) {}
    MultiScaleField& operator=(MultiScaleField&& o) noexcept {
        cfg_ = o.cfg_;
        weights_ = std::move(o.weights_);
        offsets_ = std::move(o.offsets_);
        kernel_evals_.store(o.kernel_evals_.load());
        return *this;
    }

    static MultiScaleField create(const FieldConfig& cfg, uint64_t seed);

    const FieldConfig& config() const { return cfg_; }
    const std::vector<double>& weights() const { return weights_; }
    std::vector<double>& weights_mut() { return weights_; }

    int mlp_count() const { return 2 * cfg_.levels + 1; }  // down[L], up[L], head
    int down_index(int level) const { return level; }
    int up_index(int level) const { return cfg_.levels + level; }
    int head_index() const { return 2 * cfg_.levels; }
    int layers_per_mlp() const { return cfg_.depth + 1; }

    struct LayerRef {
        std::size_t w_off = 0, b_off = 0;
        int in = 0, out = 0;
        bool hidden = false;
    };
    LayerRef layer(int mlp, int k) const;
    std::size_t mlp_offset(int mlp) const { return offsets_[mlp]; }
    std::size_t mlp_size(int mlp) const { return offsets_[mlp + 1] - offsets_[mlp]; }
    std::size_t weight_count() const { return weights_.size(); }

    // closed form: 2L kernel MLPs of (H->width, width^(depth-1), width->H)
    // plus a head (H->width, width^(depth-1), width->1), weights and biases
    static std::size_t weight_count_formula(const FieldConfig& cfg);

    uint64_t kernel_eval_count() const { return kernel_evals_.load(std::memory_order_relaxed); }
    void reset_kernel_eval_count() const { kernel_evals_.store(0, std::memory_order_relaxed); }
    void bump_kernel_evals(uint64_t n) const { kernel_evals_.fetch_add(n, std::memory_order_relaxed); }

private:
    FieldConfig cfg_;
    std::vector<double> weights_;
    std::vector<std::size_t> offsets_;  // per mlp, plus total at the end
    mutable std::atomic<uint64_t> kernel_evals_{0};

    void build_layout();
    int mlp_out_dim(int mlp) const { return mlp == head_index() ? 1 : cfg_.feature_dim; }
};

// ---------------------------------------------------------------------------
// Generic forward pass. Feed supplies the scalar type and the leaf values
// (weights, corner features, query coordinates); the same code drives plain
// evaluation and tape recording.
// ---------------------------------------------------------------------------

template <class Feed>
typename Feed::T field_forward(const MultiScaleField& field, const OctreeGrid& grid, const Vec3& x,
                               Feed& feed) {
    using T = typename Feed::T;
    const FieldConfig& cfg = field.config();
    const int L = cfg.levels, H = cfg.feature_dim;
    if (L != grid.levels() || H != grid.feature_dim())
        fail("field: grid mismatch (field L=%d H=%d, grid L=%d H=%d)", L, H, grid.levels(),
             grid.feature_dim());

    auto& sc = feed.scratch();
    sc.hits.resize(L);
    grid.locate_all(x, sc.hits.data());

    if (int(sc.level_feat.size()) != L) sc.level_feat.resize(L);
    for (int l = 0; l < L; ++l) sc.level_feat[l].assign(H, feed.zero());

    // per-level trilinear aggregation of the 8 corner features
    for (int l = 0; l < L; ++l) {
        const LevelHit& hit = sc.hits[l];
        if (!hit.occupied) continue;  // flagged: zero features
        T tx = (feed.coord(0) - hit.node_min.x) * hit.inv_size;
        T ty = (feed.coord(1) - hit.node_min.y) * hit.inv_size;
        T tz = (feed.coord(2) - hit.node_min.z) * hit.inv_size;
        T mx[2] = {1.0 - tx, tx}, my[2] = {1.0 - ty, ty}, mz[2] = {1.0 - tz, tz};
        T w[8];
        for (int c = 0; c < 8; ++c)
            w[c] = mx[(c >> 0) & 1] * my[(c >> 1) & 1] * mz[(c >> 2) & 1];
        auto& fl = sc.level_feat[l];
        for (int d = 0; d < H; ++d) {
            T acc = w[0] * feed.feature(l, hit.corner_slots[0], d);
            for (int c = 1; c < 8; ++c)
                acc = fma3(w[c], feed.feature(l, hit.corner_slots[c], d), acc);
            fl[d] = acc;
        }
    }

    auto apply_mlp = [&](int mlp, const std::vector<T>& in, std::vector<T>& out) {
        const std::vector<T>* cur = &in;
        for (int k = 0; k < field.layers_per_mlp(); ++k) {
            auto lr = field.layer(mlp, k);
            auto& dst = (k % 2 == 0) ? sc.buf_a : sc.buf_b;
            dst.assign(lr.out, feed.zero());
            for (int j = 0; j < lr.out; ++j) {
                T acc = feed.weight(lr.b_off + j);
                std::size_t row = lr.w_off + std::size_t(j) * lr.in;
                for (int i = 0; i < lr.in; ++i) acc = fma3(feed.weight(row + i), (*cur)[i], acc);
                dst[j] = lr.hidden ? softplus_b(acc, cfg.beta) : acc;
            }
            cur = &dst;
        }
        out = *cur;
    };

    // downward (restriction): level 0 feature through its kernel, then chain
    if (int(sc.vcheck.size()) != L) sc.vcheck.resize(L);
    apply_mlp(field.down_index(0), sc.level_feat[0], sc.vcheck[0]);
    for (int l = 1; l < L; ++l) {
        apply_mlp(field.down_index(l), sc.vcheck[l - 1], sc.vcheck[l]);
        for (int d = 0; d < H; ++d) sc.vcheck[l][d] = sc.vcheck[l][d] + sc.level_feat[l][d];
    }

    // upward (prolongation): identity skip at the coarsest level
    sc.vhat = sc.vcheck[L - 1];
    for (int l = L - 2; l >= 0; --l) {
        apply_mlp(field.up_index(l), sc.vhat, sc.buf_c);
        sc.vhat.assign(H, feed.zero());
        for (int d = 0; d < H; ++d) sc.vhat[d] = sc.buf_c[d] + sc.vcheck[l][d];
    }
    field.bump_kernel_evals(uint64_t(2 * L - 1));

    std::vector<T> head_out;
    apply_mlp(field.head_index(), sc.vhat, head_out);
    return head_out[0];
}

template <class T>
struct EvalScratch {
    std::vector<LevelHit> hits;
    std::vector<std::vector<T>> level_feat;
    std::vector<std::vector<T>> vcheck;
    std::vector<T> vhat, buf_a, buf_b, buf_c;
};

// Plain evaluation feed.
struct RawFeed {
    using T = double;
    const MultiScaleField* field = nullptr;
    const OctreeGrid* grid = nullptr;
    Vec3 x;

    RawFeed(const MultiScaleField* f, const OctreeGrid* g, const Vec3& p)
        : field(f), grid(g), x(p) {}

    double weight(std::size_t i) const { return field->weights()[i]; }
    double feature(int level, uint32_t slot, int dim) const {
        return grid->feature_value(level, slot, dim);
    }
    double coord(int axis) const { return x[axis]; }
    double zero() const { return 0.0; }
    EvalScratch<double>& scratch() { return scratch_; }

    EvalScratch<double> scratch_;
};

double eval_sdf(const MultiScaleField& field, const OctreeGrid& grid, const Vec3& x);

// Elementwise equal to eval_sdf; chunks the batch across threads.
std::vector<double> eval_batch(const MultiScaleField& field, const OctreeGrid& grid,
                               const std::vector<Vec3>& xs, int threads = 1);

// ---------------------------------------------------------------------------
// Recording feeds.
// ---------------------------------------------------------------------------

// Records the field with parameters as differentiable inputs. Supports
// multiple forward segments on one tape (shared parameter leaves, fresh
// coordinate inputs per segment) so a sample's probe passes can accumulate
// adjoints into one buffer.
template <class S>
struct ParamFeed {
    using T = TapeVar<S>;

    ParamFeed(Tape<S>& tape, const MultiScaleField& field, const OctreeGrid& grid)
        : tape_(&tape), field_(&field), grid_(&grid) {
        weight_vars_.reserve(field.weight_count());
        for (std::size_t i = 0; i < field.weight_count(); ++i)
            weight_vars_.push_back(tape.input(S(field.weights()[i])));
        zero_ = tape.constant(S(0.0));
    }

    // Begin a forward segment at position p with coordinate tangents along
    // `dir` (ignored for S = double).
    void begin_segment(const Vec3& p, const Vec3& dir) {
        segment_start_ = Var(tape_->size());
        for (int a = 0; a < 3; ++a) coords_[a] = tape_->input(make_seed(S{}, p[a], dir[a]));
    }
    Var segment_start() const { return segment_start_; }

    T weight(std::size_t i) { return {tape_, weight_vars_[i]}; }
    T feature(int level, uint32_t slot, int dim) {
        Var v = tape_->input(S(grid_->feature_value(level, slot, dim)));
        uint64_t param = field_->weight_count() + grid_->level_feature_offset(level) +
                         std::size_t(slot) * grid_->feature_dim() + dim;
        bindings_.push_back({v, param});
        return {tape_, v};
    }
    T coord(int axis) { return {tape_, coords_[axis]}; }
    T zero() { return {tape_, zero_}; }
    EvalScratch<T>& scratch() { return scratch_; }

    struct Binding {
        Var var;
        uint64_t param;
    };
    const std::vector<Var>& weight_vars() const { return weight_vars_; }
    const std::vector<Binding>& bindings() const { return bindings_; }
    std::array<Var, 3> coord_vars() const { return coords_; }

private:
    static double make_seed(double, double v, double) { return v; }
    static Dual make_seed(Dual, double v, double t) { return {v, t}; }
    static Taylor2 make_seed(Taylor2, double v, double t) { return {v, t, 0.0}; }

    Tape<S>* tape_;
    const MultiScaleField* field_;
    const OctreeGrid* grid_;
    std::vector<Var> weight_vars_;
    std::vector<Binding> bindings_;
    std::array<Var, 3> coords_{};
    Var zero_ = kNoVar;
    Var segment_start_ = 0;
    EvalScratch<T> scratch_;
};

// Records the field with parameters baked in as constants; only the query
// point is differentiable. This adapts the field to the ScalarField3
// derivative operators.
template <class S>
struct ConstFeed {
    using T = TapeVar<S>;
    Tape<S>* tape;
    const MultiScaleField* field;
    const OctreeGrid* grid;
    std::array<Var, 3> coords;

    ConstFeed(Tape<S>* t, const MultiScaleField* f, const OctreeGrid* g, std::array<Var, 3> x)
        : tape(t), field(f), grid(g), coords(x) {}

    T weight(std::size_t i) { return {tape, tape->constant(S(field->weights()[i]))}; }
    T feature(int level, uint32_t slot, int dim) {
        return {tape, tape->constant(S(grid->feature_value(level, slot, dim)))};
    }
    T coord(int axis) { return {tape, coords[axis]}; }
    T zero() { return {tape, tape->constant(S(0.0))}; }
    EvalScratch<T>& scratch() { return scratch_; }
    EvalScratch<T> scratch_;
};

class FieldSampler : public ScalarField3 {
public:
    FieldSampler(const MultiScaleField& field, const OctreeGrid& grid)
        : field_(&field), grid_(&grid) {}

    Var record_d(Tape<double>& t, std::array<Var, 3> x) const override { return rec(t, x); }
    Var record_dual(Tape<Dual>& t, std::array<Var, 3> x) const override { return rec(t, x); }
    Var record_t2(Tape<Taylor2>& t, std::array<Var, 3> x) const override { return rec(t, x); }

private:
    template <class S>
    Var rec(Tape<S>& t, std::array<Var, 3> x) const {
        ConstFeed<S> feed{&t, field_, grid_, x};
        Vec3 p{value_of(t.val(x[0])), value_of(t.val(x[1])), value_of(t.val(x[2]))};
        return field_forward(*field_, *grid_, p, feed).i;
    }

    const MultiScaleField* field_;
    const OctreeGrid* grid_;
};

// ---------------------------------------------------------------------------
// Checkpoints: versioned binary bundle of field config + weights + grid blob
// + an echo of the run configuration.
// ---------------------------------------------------------------------------

void save_checkpoint(const std::string& path, const MultiScaleField& field, const OctreeGrid& grid,
                     const std::string& config_echo);
void load_checkpoint(const std::string& path, MultiScaleField& field, OctreeGrid& grid,
                     std::string* config_echo = nullptr);

}  // namespace sdfmap
