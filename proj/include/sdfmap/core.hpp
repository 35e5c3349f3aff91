#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace sdfmap {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    double& operator[](int i) { return (&x)[i]; }
    double operator[](int i) const { return (&x)[i]; }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm2() const { return dot(*this); }
    double norm() const { return std::sqrt(norm2()); }
    Vec3 normalized() const { return *this / norm(); }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
    Vec3 cwise_min(const Vec3& o) const { return {std::min(x, o.x), std::min(y, o.y), std::min(z, o.z)}; }
    Vec3 cwise_max(const Vec3& o) const { return {std::max(x, o.x), std::max(y, o.y), std::max(z, o.z)}; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

struct Aabb {
    Vec3 lo{1e300, 1e300, 1e300};
    Vec3 hi{-1e300, -1e300, -1e300};

    void expand(const Vec3& p) { lo = lo.cwise_min(p); hi = hi.cwise_max(p); }
    void expand(const Aabb& b) { lo = lo.cwise_min(b.lo); hi = hi.cwise_max(b.hi); }
    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
    }
    bool empty() const { return lo.x > hi.x; }
    Vec3 extent() const { return hi - lo; }
};

[[noreturn]] inline void fail(const char* fmt, ...) {
    char buf[1024];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof(buf), fmt, ap);
    va_end(ap);
    throw std::runtime_error(buf);
}

// Counter-based splitmix64 stream. Used for every random draw in the project so
// that runs are reproducible bit-for-bit across platforms and thread counts
// (std::uniform_real_distribution is implementation-defined and unusable here).
class Rng {
public:
    explicit Rng(uint64_t seed = 0)
        : seed0_(seed), state_(seed * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL) {}

    static uint64_t mix(uint64_t a, uint64_t b) {
        uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Independent stream derived from the construction seed; insensitive to any
    // draws already made from this generator.
    Rng fork(uint64_t stream) const { return Rng(mix(seed0_, stream)); }

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double u01() { return double(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * u01(); }
    uint64_t below(uint64_t n) { return next_u64() % n; }

    // standard normal via Box-Muller
    double normal() {
        if (have_spare_) { have_spare_ = false; return spare_; }
        double u1 = 0.0;
        while (u1 <= 1e-300) u1 = u01();
        double u2 = u01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    Vec3 normal3(double sigma) { return {sigma * normal(), sigma * normal(), sigma * normal()}; }

    // uniform direction on the unit sphere
    Vec3 unit_vector() {
        double z = uniform(-1.0, 1.0);
        double a = uniform(0.0, 6.283185307179586476925286766559);
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        return {r * std::cos(a), r * std::sin(a), z};
    }

private:
    uint64_t seed0_;
    uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Deterministic parallel execution: work is split into fixed-size chunks
// [k*grain, (k+1)*grain) regardless of thread count, so any chunk-local
// result is identical for every value of `threads`. Callers that reduce must
// combine chunk results in chunk order.
inline void parallel_chunks(std::size_t n, std::size_t grain, int threads,
                            const std::function<void(std::size_t chunk, std::size_t begin, std::size_t end)>& fn) {
    if (n == 0) return;
    if (grain == 0) grain = 1;
    const std::size_t nchunks = (n + grain - 1) / grain;
    if (threads <= 1 || nchunks == 1) {
        for (std::size_t k = 0; k < nchunks; ++k)
            fn(k, k * grain, std::min(n, (k + 1) * grain));
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mu;
    auto worker = [&] {
        for (;;) {
            if (failed.load(std::memory_order_relaxed)) return;
            std::size_t k = next.fetch_add(1);
            if (k >= nchunks) return;
            try {
                fn(k, k * grain, std::min(n, (k + 1) * grain));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int nt = std::min<std::size_t>(threads, nchunks);
    pool.reserve(nt - 1);
    for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace sdfmap
