#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "sdfmap/core.hpp"

namespace sdfmap {

// ---------------------------------------------------------------------------
// Truncated univariate Taylor scalars. Dual carries a first directional
// derivative, Taylor2 additionally the second: a(t) = v + d1*t + d2*t^2.
// Running the reverse pass of a tape in Dual arithmetic is forward-over-reverse
// differentiation; in Taylor2 arithmetic the adjoints carry one more order.
// ---------------------------------------------------------------------------

struct Dual {
    double v = 0.0, d = 0.0;

    Dual() = default;
    Dual(double v_) : v(v_) {}
    Dual(double v_, double d_) : v(v_), d(d_) {}

    Dual operator+(const Dual& o) const { return {v + o.v, d + o.d}; }
    Dual operator-(const Dual& o) const { return {v - o.v, d - o.d}; }
    Dual operator-() const { return {-v, -d}; }
    Dual operator*(const Dual& o) const { return {v * o.v, v * o.d + d * o.v}; }
    Dual operator/(const Dual& o) const {
        double q = v / o.v;
        return {q, (d - q * o.d) / o.v};
    }
    Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
    bool is_zero() const { return v == 0.0 && d == 0.0; }
    bool finite() const { return std::isfinite(v) && std::isfinite(d); }
};

struct Taylor2 {
    double v = 0.0, d1 = 0.0, d2 = 0.0;

    Taylor2() = default;
    Taylor2(double v_) : v(v_) {}
    Taylor2(double v_, double d1_, double d2_) : v(v_), d1(d1_), d2(d2_) {}

    Taylor2 operator+(const Taylor2& o) const { return {v + o.v, d1 + o.d1, d2 + o.d2}; }
    Taylor2 operator-(const Taylor2& o) const { return {v - o.v, d1 - o.d1, d2 - o.d2}; }
    Taylor2 operator-() const { return {-v, -d1, -d2}; }
    Taylor2 operator*(const Taylor2& o) const {
        return {v * o.v, v * o.d1 + d1 * o.v, v * o.d2 + d1 * o.d1 + d2 * o.v};
    }
    Taylor2 operator/(const Taylor2& o) const {
        double c0 = v / o.v;
        double c1 = (d1 - c0 * o.d1) / o.v;
        double c2 = (d2 - c0 * o.d2 - c1 * o.d1) / o.v;
        return {c0, c1, c2};
    }
    Taylor2& operator+=(const Taylor2& o) { v += o.v; d1 += o.d1; d2 += o.d2; return *this; }
    bool is_zero() const { return v == 0.0 && d1 == 0.0 && d2 == 0.0; }
    bool finite() const { return std::isfinite(v) && std::isfinite(d1) && std::isfinite(d2); }
};

inline double value_of(double s) { return s; }
inline double value_of(const Dual& s) { return s.v; }
inline double value_of(const Taylor2& s) { return s.v; }

inline bool scalar_is_zero(double s) { return s == 0.0; }
inline bool scalar_is_zero(const Dual& s) { return s.is_zero(); }
inline bool scalar_is_zero(const Taylor2& s) { return s.is_zero(); }

inline bool scalar_finite(double s) { return std::isfinite(s); }
inline bool scalar_finite(const Dual& s) { return s.finite(); }
inline bool scalar_finite(const Taylor2& s) { return s.finite(); }

// Composition of a univariate function through a truncated Taylor argument,
// given the function's derivatives g0..g2 at the argument's value.
inline double taylor_apply(double, double g0, double, double) { return g0; }
inline Dual taylor_apply(const Dual& a, double g0, double g1, double) { return {g0, g1 * a.d}; }
inline Taylor2 taylor_apply(const Taylor2& a, double g0, double g1, double g2) {
    return {g0, g1 * a.d1, g1 * a.d2 + 0.5 * g2 * a.d1 * a.d1};
}

// ---------------------------------------------------------------------------
// Scalar kit: stable softplus/logistic with slope beta, with derivatives up to
// third order (the reverse pass over Taylor2 scalars consumes g''' through the
// recorded partials).
// ---------------------------------------------------------------------------

inline double logistic(double x) {
    if (x >= 0.0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

inline double softplus_stable(double x, double beta) {
    // softplus_beta(x) = log(1 + exp(beta x)) / beta, overflow-safe
    double bx = beta * x;
    if (bx > 0.0) return x + std::log1p(std::exp(-bx)) / beta;
    return std::log1p(std::exp(bx)) / beta;
}

// derivatives g[0..3] of softplus_beta at x
inline void softplus_derivs(double x, double beta, double g[4]) {
    double s = logistic(beta * x);
    double s1 = s * (1.0 - s);
    g[0] = softplus_stable(x, beta);
    g[1] = s;
    g[2] = beta * s1;
    g[3] = beta * beta * s1 * (1.0 - 2.0 * s);
}

// derivatives g[0..3] of logistic(beta x) at x
inline void logistic_derivs(double x, double beta, double g[4]) {
    double s = logistic(beta * x);
    double s1 = s * (1.0 - s);
    g[0] = s;
    g[1] = beta * s1;
    g[2] = beta * beta * s1 * (1.0 - 2.0 * s);
    g[3] = beta * beta * beta * s1 * (1.0 - 6.0 * s + 6.0 * s * s);
}

// ---------------------------------------------------------------------------
// Recording tape. Values are computed eagerly at record time; local partials
// are stored with each node so the reverse pass is a single backward sweep in
// S arithmetic. Children always precede parents, so replay and backward are
// plain index loops.
// ---------------------------------------------------------------------------

enum class TapeOp : uint8_t {
    Input, Const,
    Add, Sub, Mul, Div, Min, Max,
    Neg, AddC, MulC, Fma,
    Exp, Log, Sqrt, Square,
    Softplus, Logistic,
};

inline const char* tape_op_name(TapeOp op) {
    switch (op) {
        case TapeOp::Input: return "input";
        case TapeOp::Const: return "const";
        case TapeOp::Add: return "add";
        case TapeOp::Sub: return "sub";
        case TapeOp::Mul: return "mul";
        case TapeOp::Div: return "div";
        case TapeOp::Min: return "min";
        case TapeOp::Max: return "max";
        case TapeOp::Neg: return "neg";
        case TapeOp::AddC: return "add_c";
        case TapeOp::MulC: return "mul_c";
        case TapeOp::Fma: return "fma";
        case TapeOp::Exp: return "exp";
        case TapeOp::Log: return "log";
        case TapeOp::Sqrt: return "sqrt";
        case TapeOp::Square: return "square";
        case TapeOp::Softplus: return "softplus";
        case TapeOp::Logistic: return "logistic";
    }
    return "?";
}

using Var = uint32_t;
constexpr Var kNoVar = 0xFFFFFFFFu;

template <class S>
class Tape {
public:
    struct Node {
        TapeOp op;
        Var a = kNoVar, b = kNoVar, c = kNoVar;
        S pa{}, pb{};  // local partials wrt a and b (wrt c it is always 1)
    };

    void clear() {
        nodes_.clear();
        vals_.clear();
    }
    std::size_t size() const { return vals_.size(); }
    const S& val(Var v) const { return vals_[v]; }

    Var input(const S& v) { return push({TapeOp::Input}, v); }
    Var constant(const S& v) { return push({TapeOp::Const}, v); }

    Var add(Var a, Var b) { return push({TapeOp::Add, a, b, kNoVar, S(1.0), S(1.0)}, vals_[a] + vals_[b]); }
    Var sub(Var a, Var b) { return push({TapeOp::Sub, a, b, kNoVar, S(1.0), S(-1.0)}, vals_[a] - vals_[b]); }
    Var mul(Var a, Var b) { return push({TapeOp::Mul, a, b, kNoVar, vals_[b], vals_[a]}, vals_[a] * vals_[b]); }
    Var div(Var a, Var b) {
        S q = vals_[a] / vals_[b];
        return push({TapeOp::Div, a, b, kNoVar, S(1.0) / vals_[b], -q / vals_[b]}, q);
    }
    Var min_(Var a, Var b) {
        bool left = value_of(vals_[a]) <= value_of(vals_[b]);
        return push({TapeOp::Min, a, b, kNoVar, S(left ? 1.0 : 0.0), S(left ? 0.0 : 1.0)},
                    left ? vals_[a] : vals_[b]);
    }
    Var max_(Var a, Var b) {
        bool left = value_of(vals_[a]) >= value_of(vals_[b]);
        return push({TapeOp::Max, a, b, kNoVar, S(left ? 1.0 : 0.0), S(left ? 0.0 : 1.0)},
                    left ? vals_[a] : vals_[b]);
    }
    Var neg(Var a) { return push({TapeOp::Neg, a, kNoVar, kNoVar, S(-1.0)}, -vals_[a]); }
    Var add_c(Var a, double k) { return push({TapeOp::AddC, a, kNoVar, kNoVar, S(1.0), S(k)}, vals_[a] + S(k)); }
    Var mul_c(Var a, double k) { return push({TapeOp::MulC, a, kNoVar, kNoVar, S(k), S(k)}, vals_[a] * S(k)); }
    // a*b + c, product-then-sum rounding (not a fused hardware op)
    Var fma(Var a, Var b, Var c) {
        return push({TapeOp::Fma, a, b, c, vals_[b], vals_[a]}, vals_[a] * vals_[b] + vals_[c]);
    }

    Var exp_(Var a) {
        S e = exp_s(vals_[a]);
        return push({TapeOp::Exp, a, kNoVar, kNoVar, e}, e);
    }
    Var log_(Var a) {
        double x = value_of(vals_[a]);
        double g[4] = {std::log(x), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x)};
        return unary(TapeOp::Log, a, g);
    }
    Var sqrt_(Var a) {
        double x = value_of(vals_[a]);
        double r = std::sqrt(x);
        double g[4] = {r, 0.5 / r, -0.25 / (x * r), 0.375 / (x * x * r)};
        return unary(TapeOp::Sqrt, a, g);
    }
    Var square(Var a) {
        double x = value_of(vals_[a]);
        double g[4] = {x * x, 2.0 * x, 2.0, 0.0};
        return unary(TapeOp::Square, a, g);
    }
    Var softplus(Var a, double beta) {
        double g[4];
        softplus_derivs(value_of(vals_[a]), beta, g);
        return unary(TapeOp::Softplus, a, g, beta);
    }
    Var logistic_(Var a, double beta) {
        double g[4];
        logistic_derivs(value_of(vals_[a]), beta, g);
        return unary(TapeOp::Logistic, a, g, beta);
    }

    // Reverse sweep in S arithmetic from `out` seeded with `seed`, visiting only
    // nodes in [stop, out]. Adjoints accumulate into `adj`, which must be sized
    // to size() and zeroed by the caller for the range being swept (leaf slots
    // below `stop` accumulate across sweeps by design).
    void backward_range(Var out, const S& seed, std::vector<S>& adj, Var stop = 0) const {
        adj[out] += seed;
        for (Var i = out + 1; i-- > stop;) {
            const Node& n = nodes_[i];
            if (n.a == kNoVar) continue;
            const S& g = adj[i];
            if (scalar_is_zero(g)) continue;
            adj[n.a] += n.pa * g;
            if (n.b != kNoVar) adj[n.b] += n.pb * g;
            if (n.c != kNoVar) adj[n.c] += g;
        }
    }

    void backward(Var out, const S& seed, std::vector<S>& adj) const {
        adj.assign(vals_.size(), S{});
        backward_range(out, seed, adj);
    }

    // Recompute every forward value from the recorded ops. Reproduces the value
    // cache bit-for-bit; used to validate tape integrity.
    void replay() {
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const Node& n = nodes_[i];
            switch (n.op) {
                case TapeOp::Input:
                case TapeOp::Const: break;
                case TapeOp::Add: vals_[i] = vals_[n.a] + vals_[n.b]; break;
                case TapeOp::Sub: vals_[i] = vals_[n.a] - vals_[n.b]; break;
                case TapeOp::Mul: vals_[i] = vals_[n.a] * vals_[n.b]; break;
                case TapeOp::Div: vals_[i] = vals_[n.a] / vals_[n.b]; break;
                case TapeOp::Min:
                    vals_[i] = value_of(vals_[n.a]) <= value_of(vals_[n.b]) ? vals_[n.a] : vals_[n.b];
                    break;
                case TapeOp::Max:
                    vals_[i] = value_of(vals_[n.a]) >= value_of(vals_[n.b]) ? vals_[n.a] : vals_[n.b];
                    break;
                case TapeOp::Neg: vals_[i] = -vals_[n.a]; break;
                case TapeOp::AddC: vals_[i] = vals_[n.a] + n.pb; break;
                case TapeOp::MulC: vals_[i] = vals_[n.a] * n.pb; break;
                case TapeOp::Fma: vals_[i] = vals_[n.a] * vals_[n.b] + vals_[n.c]; break;
                case TapeOp::Exp: vals_[i] = exp_s(vals_[n.a]); break;
                case TapeOp::Log: vals_[i] = replay_unary(n, [](double x, double* g) {
                    g[0] = std::log(x); g[1] = 1.0 / x; g[2] = -1.0 / (x * x);
                }); break;
                case TapeOp::Sqrt: vals_[i] = replay_unary(n, [](double x, double* g) {
                    double r = std::sqrt(x); g[0] = r; g[1] = 0.5 / r; g[2] = -0.25 / (x * r);
                }); break;
                case TapeOp::Square: vals_[i] = replay_unary(n, [](double x, double* g) {
                    g[0] = x * x; g[1] = 2.0 * x; g[2] = 2.0;
                }); break;
                case TapeOp::Softplus: vals_[i] = replay_unary_beta(n, softplus_derivs); break;
                case TapeOp::Logistic: vals_[i] = replay_unary_beta(n, logistic_derivs); break;
            }
        }
    }

private:
    Var push(Node n, const S& v) {
        if (!scalar_finite(v))
            fail("tape: non-finite value at node %zu (%s)", vals_.size(), tape_op_name(n.op));
        nodes_.push_back(n);
        vals_.push_back(v);
        return Var(vals_.size() - 1);
    }

    Var unary(TapeOp op, Var a, const double g[4], double beta = 0.0) {
        S v = taylor_apply(vals_[a], g[0], g[1], g[2]);
        S p = taylor_apply(vals_[a], g[1], g[2], g[3]);
        Node n{op, a, kNoVar, kNoVar, p, S(beta)};
        return push(n, v);
    }

    static S exp_s(const S& a) {
        double e = std::exp(value_of(a));
        return taylor_apply(a, e, e, e);
    }

    template <class F>
    S replay_unary(const Node& n, F&& derivs3) const {
        double g[4] = {0, 0, 0, 0};
        derivs3(value_of(vals_[n.a]), g);
        return taylor_apply(vals_[n.a], g[0], g[1], g[2]);
    }

    template <class F>
    S replay_unary_beta(const Node& n, F&& derivs4) const {
        double g[4];
        derivs4(value_of(vals_[n.a]), value_of(n.pb), g);
        return taylor_apply(vals_[n.a], g[0], g[1], g[2]);
    }

    std::vector<Node> nodes_;
    std::vector<S> vals_;
};

// ---------------------------------------------------------------------------
// Expression sugar shared by the raw (plain double) and recorded evaluation
// paths: generic numeric code is written against T where T is either double or
// TapeVar<S>.
// ---------------------------------------------------------------------------

template <class S>
struct TapeVar {
    Tape<S>* t = nullptr;
    Var i = kNoVar;
};

template <class S> TapeVar<S> operator+(TapeVar<S> a, TapeVar<S> b) { return {a.t, a.t->add(a.i, b.i)}; }
template <class S> TapeVar<S> operator-(TapeVar<S> a, TapeVar<S> b) { return {a.t, a.t->sub(a.i, b.i)}; }
template <class S> TapeVar<S> operator*(TapeVar<S> a, TapeVar<S> b) { return {a.t, a.t->mul(a.i, b.i)}; }
template <class S> TapeVar<S> operator/(TapeVar<S> a, TapeVar<S> b) { return {a.t, a.t->div(a.i, b.i)}; }
template <class S> TapeVar<S> operator-(TapeVar<S> a) { return {a.t, a.t->neg(a.i)}; }
template <class S> TapeVar<S> operator+(TapeVar<S> a, double k) { return {a.t, a.t->add_c(a.i, k)}; }
template <class S> TapeVar<S> operator+(double k, TapeVar<S> a) { return a + k; }
template <class S> TapeVar<S> operator-(TapeVar<S> a, double k) { return {a.t, a.t->add_c(a.i, -k)}; }
template <class S> TapeVar<S> operator-(double k, TapeVar<S> a) { return {a.t, a.t->add_c(a.t->neg(a.i), k)}; }
template <class S> TapeVar<S> operator*(TapeVar<S> a, double k) { return {a.t, a.t->mul_c(a.i, k)}; }
template <class S> TapeVar<S> operator*(double k, TapeVar<S> a) { return a * k; }

template <class S> TapeVar<S> fma3(TapeVar<S> a, TapeVar<S> b, TapeVar<S> c) { return {a.t, a.t->fma(a.i, b.i, c.i)}; }
template <class S> TapeVar<S> softplus_b(TapeVar<S> a, double beta) { return {a.t, a.t->softplus(a.i, beta)}; }
template <class S> TapeVar<S> square_t(TapeVar<S> a) { return {a.t, a.t->square(a.i)}; }
template <class S> TapeVar<S> sqrt_t(TapeVar<S> a) { return {a.t, a.t->sqrt_(a.i)}; }

inline double fma3(double a, double b, double c) { return a * b + c; }
inline double softplus_b(double a, double beta) { return softplus_stable(a, beta); }
inline double square_t(double a) { return a * a; }
inline double sqrt_t(double a) { return std::sqrt(a); }

}  // namespace sdfmap
