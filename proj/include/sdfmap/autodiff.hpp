#pragma once

#include <array>

#include "sdfmap/tape.hpp"

namespace sdfmap {

// A differentiable scalar field R^3 -> R. Implementations record their
// computation onto a tape given the three coordinate variables; the same
// source drives plain, dual and second-order evaluation. Derive from
// FieldExpr<T> and provide a single template method
//     template <class S> Var record(Tape<S>&, std::array<Var,3>) const;
struct ScalarField3 {
    virtual ~ScalarField3() = default;
    virtual Var record_d(Tape<double>& t, std::array<Var, 3> x) const = 0;
    virtual Var record_dual(Tape<Dual>& t, std::array<Var, 3> x) const = 0;
    virtual Var record_t2(Tape<Taylor2>& t, std::array<Var, 3> x) const = 0;

    double value(const Vec3& p) const {
        Tape<double> t;
        std::array<Var, 3> x{t.input(p.x), t.input(p.y), t.input(p.z)};
        return t.val(record_d(t, x));
    }
};

template <class Derived>
struct FieldExpr : ScalarField3 {
    Var record_d(Tape<double>& t, std::array<Var, 3> x) const override {
        return static_cast<const Derived*>(this)->template record<double>(t, x);
    }
    Var record_dual(Tape<Dual>& t, std::array<Var, 3> x) const override {
        return static_cast<const Derived*>(this)->template record<Dual>(t, x);
    }
    Var record_t2(Tape<Taylor2>& t, std::array<Var, 3> x) const override {
        return static_cast<const Derived*>(this)->template record<Taylor2>(t, x);
    }
};

// Gradient with respect to the evaluation point: one reverse pass.
inline Vec3 grad_input(const ScalarField3& f, const Vec3& p) {
    Tape<double> t;
    std::array<Var, 3> x{t.input(p.x), t.input(p.y), t.input(p.z)};
    Var out = f.record_d(t, x);
    std::vector<double> adj;
    t.backward(out, 1.0, adj);
    Vec3 g{adj[x[0]], adj[x[1]], adj[x[2]]};
    if (!g.finite()) fail("grad_input: non-finite gradient at (%g, %g, %g)", p.x, p.y, p.z);
    return g;
}

// Trace of the Hessian by forward-over-reverse differentiation: three probes,
// one per axis. Probe i runs the reverse pass in dual arithmetic with the
// i-th input carrying a unit tangent; the tangent of that input's adjoint is
// the Hessian diagonal entry d2f/dxi2.
inline double laplacian_input(const ScalarField3& f, const Vec3& p) {
    double lap = 0.0;
    std::vector<Dual> adj;
    for (int axis = 0; axis < 3; ++axis) {
        Tape<Dual> t;
        std::array<Var, 3> x{t.input({p.x, axis == 0 ? 1.0 : 0.0}),
                             t.input({p.y, axis == 1 ? 1.0 : 0.0}),
                             t.input({p.z, axis == 2 ? 1.0 : 0.0})};
        Var out = f.record_dual(t, x);
        t.backward(out, Dual(1.0), adj);
        double h_ii = adj[x[axis]].d;
        if (!std::isfinite(h_ii)) fail("laplacian_input: non-finite Hessian probe on axis %d", axis);
        lap += h_ii;
    }
    return lap;
}

// Finite-difference stencil: offsets (in multiples of the step) and matching
// coefficients. The 7-point Laplacian stencil divides by h^2 on application.
struct Stencil {
    std::vector<Vec3> offsets;     // in meters (already scaled by step)
    std::vector<double> coeffs;
    double step = 0.0;
    double inv_scale = 1.0;        // applied to the weighted sum

    static Stencil laplacian7(double h) {
        Stencil s;
        s.step = h;
        s.offsets = {{0, 0, 0}, {h, 0, 0}, {-h, 0, 0}, {0, h, 0}, {0, -h, 0}, {0, 0, h}, {0, 0, -h}};
        s.coeffs = {-6.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
        s.inv_scale = 1.0 / (h * h);
        return s;
    }

    double coeff_sum() const {
        double c = 0.0;
        for (double w : coeffs) c += w;
        return c;
    }

    template <class F>
    double apply(F&& eval_at, const Vec3& p) const {
        double acc = 0.0;
        for (std::size_t k = 0; k < offsets.size(); ++k)
            acc += coeffs[k] * eval_at(p + offsets[k]);
        return acc * inv_scale;
    }
};

// Fourth-order biharmonic operator: the 7-point FD stencil applied to the
// nested-AD Laplacian (7 laplacian_input evaluations, never AD beyond second
// order).
inline double biharmonic_fdm(const ScalarField3& f, const Vec3& p, double h) {
    if (!(h > 0.0)) fail("biharmonic_fdm: step must be positive (got %g)", h);
    const Stencil s = Stencil::laplacian7(h);
    return s.apply([&](const Vec3& q) { return laplacian_input(f, q); }, p);
}

}  // namespace sdfmap
