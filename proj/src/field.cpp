#include "sdfmap/field.hpp"

#include <fstream>

namespace sdfmap {

namespace {

constexpr uint32_t kCkptMagic = 0x4B434D53;  // "SMCK"
constexpr uint32_t kCkptVersion = 1;

template <class T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) fail("checkpoint: truncated file");
    return v;
}

}  // namespace

void MultiScaleField::build_layout() {
    offsets_.assign(mlp_count() + 1, 0);
    std::size_t off = 0;
    for (int m = 0; m < mlp_count(); ++m) {
        offsets_[m] = off;
        for (int k = 0; k < layers_per_mlp(); ++k) {
            int in = (k == 0) ? cfg_.feature_dim : cfg_.width;
            int out = (k == cfg_.depth) ? mlp_out_dim(m) : cfg_.width;
            off += std::size_t(out) * in + out;
        }
    }
    offsets_[mlp_count()] = off;
}

MultiScaleField::LayerRef MultiScaleField::layer(int mlp, int k) const {
    LayerRef lr;
    std::size_t off = offsets_[mlp];
    for (int j = 0; j < k; ++j) {
        int in = (j == 0) ? cfg_.feature_dim : cfg_.width;
        int out = (j == cfg_.depth) ? mlp_out_dim(mlp) : cfg_.width;
        off += std::size_t(out) * in + out;
    }
    lr.in = (k == 0) ? cfg_.feature_dim : cfg_.width;
    lr.out = (k == cfg_.depth) ? mlp_out_dim(mlp) : cfg_.width;
    lr.hidden = k < cfg_.depth;
    lr.w_off = off;
    lr.b_off = off + std::size_t(lr.out) * lr.in;
    return lr;
}

std::size_t MultiScaleField::weight_count_formula(const FieldConfig& cfg) {
    auto mlp = [&](int out_dim) {
        std::size_t n = std::size_t(cfg.width) * cfg.feature_dim + cfg.width;  // input layer
        for (int k = 1; k < cfg.depth; ++k) n += std::size_t(cfg.width) * cfg.width + cfg.width;
        n += std::size_t(out_dim) * cfg.width + out_dim;  // output layer
        return n;
    };
    return std::size_t(2 * cfg.levels) * mlp(cfg.feature_dim) + mlp(1);
}

MultiScaleField MultiScaleField::create(const FieldConfig& cfg, uint64_t seed) {
    if (cfg.levels < 1) fail("field: levels must be >= 1");
    if (cfg.feature_dim < 1 || cfg.width < 1 || cfg.depth < 1)
        fail("field: feature_dim, width and depth must be >= 1");
    MultiScaleField f;
    f.cfg_ = cfg;
    f.build_layout();
    f.weights_.assign(f.offsets_.back(), 0.0);

    // Xavier-uniform weights, zero biases
    for (int m = 0; m < f.mlp_count(); ++m) {
        Rng rng = Rng(seed).fork(0x6D6C7000ULL + uint64_t(m));
        for (int k = 0; k < f.layers_per_mlp(); ++k) {
            auto lr = f.layer(m, k);
            double limit = std::sqrt(6.0 / double(lr.in + lr.out));
            for (std::size_t i = 0; i < std::size_t(lr.out) * lr.in; ++i)
                f.weights_[lr.w_off + i] = rng.uniform(-limit, limit);
        }
    }
    return f;
}

double eval_sdf(const MultiScaleField& field, const OctreeGrid& grid, const Vec3& x) {
    RawFeed feed{&field, &grid, x};
    return field_forward(field, grid, x, feed);
}

std::vector<double> eval_batch(const MultiScaleField& field, const OctreeGrid& grid,
                               const std::vector<Vec3>& xs, int threads) {
    std::vector<double> out(xs.size());
    parallel_chunks(xs.size(), 512, threads, [&](std::size_t, std::size_t b, std::size_t e) {
        RawFeed feed{&field, &grid, {}};
        for (std::size_t i = b; i < e; ++i) {
            feed.x = xs[i];
            out[i] = field_forward(field, grid, xs[i], feed);
        }
    });
    return out;
}

void save_checkpoint(const std::string& path, const MultiScaleField& field, const OctreeGrid& grid,
                     const std::string& config_echo) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("%s: cannot write", path.c_str());
    put(out, kCkptMagic);
    put(out, kCkptVersion);
    const FieldConfig& c = field.config();
    put(out, int32_t(c.levels));
    put(out, int32_t(c.feature_dim));
    put(out, int32_t(c.width));
    put(out, int32_t(c.depth));
    put(out, c.beta);
    put(out, uint64_t(field.weight_count()));
    out.write(reinterpret_cast<const char*>(field.weights().data()),
              std::streamsize(sizeof(double) * field.weight_count()));
    put(out, uint64_t(config_echo.size()));
    out.write(config_echo.data(), std::streamsize(config_echo.size()));
    grid.serialize(out);
}

void load_checkpoint(const std::string& path, MultiScaleField& field, OctreeGrid& grid,
                     std::string* config_echo) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("%s: cannot open", path.c_str());
    if (get<uint32_t>(in) != kCkptMagic) fail("%s: not a checkpoint file", path.c_str());
    uint32_t version = get<uint32_t>(in);
    if (version != kCkptVersion) fail("%s: unsupported checkpoint version %u", path.c_str(), version);
    FieldConfig cfg;
    cfg.levels = get<int32_t>(in);
    cfg.feature_dim = get<int32_t>(in);
    cfg.width = get<int32_t>(in);
    cfg.depth = get<int32_t>(in);
    cfg.beta = get<double>(in);
    field = MultiScaleField::create(cfg, 0);
    uint64_t nw = get<uint64_t>(in);
    if (nw != field.weight_count()) fail("%s: checkpoint weight count mismatch", path.c_str());
    if (!in.read(reinterpret_cast<char*>(field.weights_mut().data()),
                 std::streamsize(sizeof(double) * nw)))
        fail("%s: truncated checkpoint", path.c_str());
    uint64_t echo_len = get<uint64_t>(in);
    std::string echo(echo_len, '\0');
    if (echo_len && !in.read(echo.data(), std::streamsize(echo_len)))
        fail("%s: truncated checkpoint", path.c_str());
    if (config_echo) *config_echo = echo;
    grid = OctreeGrid::deserialize(in);
    if (grid.levels() != cfg.levels || grid.feature_dim() != cfg.feature_dim)
        fail("%s: checkpoint grid does not match field config", path.c_str());
}

}  // namespace sdfmap
