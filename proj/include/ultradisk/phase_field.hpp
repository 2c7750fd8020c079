#pragma once

// Double-well potentials, discrete energies and the stabilized BDF2 steppers
// for the penalized Allen-Cahn Ohta-Kawasaki (one species) and
// Nakazawa-Ohta (two species) dynamics on the unit disk.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ultradisk/disk_field.hpp"
#include "ultradisk/errors.hpp"
#include "ultradisk/helmholtz.hpp"

namespace ultradisk {

// ---------------------------------------------------------------------------
// Potentials

// W(u) = 18 (u^2 - u)^2 on [lo, hi], continued quadratically outside.
struct PotentialExt {
    double lo = -0.25;
    double hi = 1.25;
    double L_Wpp = 103.5;

    static PotentialExt with_knots(double lo, double hi) {
        if (!(lo < hi)) throw ParameterError("PotentialExt: need lo < hi");
        auto wpp = [](double u) { return std::abs(216.0 * u * u - 216.0 * u + 36.0); };
        double l = std::max(wpp(lo), wpp(hi));
        if (lo < 0.5 && 0.5 < hi) l = std::max(l, wpp(0.5));
        return PotentialExt{lo, hi, l};
    }
};

namespace detail {
inline double w_raw(double u) {
    const double s = u * u - u;
    return 18.0 * s * s;
}
inline double dw_raw(double u) { return 36.0 * (u * u - u) * (2.0 * u - 1.0); }
inline double d2w_raw(double u) { return 216.0 * u * u - 216.0 * u + 36.0; }
}  // namespace detail

[[nodiscard]] inline double potential_W(double u, const PotentialExt& e = {}) {
    if (u < e.lo) {
        const double d = u - e.lo;
        return detail::w_raw(e.lo) + detail::dw_raw(e.lo) * d + 0.5 * detail::d2w_raw(e.lo) * d * d;
    }
    if (u > e.hi) {
        const double d = u - e.hi;
        return detail::w_raw(e.hi) + detail::dw_raw(e.hi) * d + 0.5 * detail::d2w_raw(e.hi) * d * d;
    }
    return detail::w_raw(u);
}

[[nodiscard]] inline double potential_dW(double u, const PotentialExt& e = {}) {
    if (u < e.lo) return detail::dw_raw(e.lo) + detail::d2w_raw(e.lo) * (u - e.lo);
    if (u > e.hi) return detail::dw_raw(e.hi) + detail::d2w_raw(e.hi) * (u - e.hi);
    return detail::dw_raw(u);
}

[[nodiscard]] inline double potential_d2W(double u, const PotentialExt& e = {}) {
    if (u < e.lo) return detail::d2w_raw(e.lo);
    if (u > e.hi) return detail::d2w_raw(e.hi);
    return detail::d2w_raw(u);
}

// W2(u1, u2) = (W(u1) + W(u2) + W(1 - u1 - u2)) / 2.
[[nodiscard]] inline double potential_W2(double u1, double u2, const PotentialExt& e = {}) {
    return 0.5 * (potential_W(u1, e) + potential_W(u2, e) + potential_W(1.0 - u1 - u2, e));
}

[[nodiscard]] inline std::pair<double, double> potential_W2_partials(double u1, double u2,
                                                                     const PotentialExt& e = {}) {
    const double w3 = potential_dW(1.0 - u1 - u2, e);
    return {0.5 * (potential_dW(u1, e) - w3), 0.5 * (potential_dW(u2, e) - w3)};
}

// ---------------------------------------------------------------------------
// Parameters and states

// How the first step treats the missing level U^{-1}. Both start from
// U^{-1} = U^0. Repeat runs the BDF2 formula unchanged, which leaves an O(tau)
// error in U^1 that persists; Bdf1 takes the first step with the first-order
// backward difference, keeping the global error O(tau^2).
enum class StartupKind { Repeat, Bdf1 };

struct OKParams {
    double epsilon = 0.1;
    double gamma = 0.0;
    double omega = 0.15;
    double kappa = 0.0;
    double beta = 0.0;
    double M = 0.0;
    double tau = 1e-3;
    double T_final = 1.0;
    double stop_tol = 1e-5;
    PotentialExt potential{};
    StartupKind startup = StartupKind::Bdf1;

    [[nodiscard]] std::vector<std::string> violations() const {
        std::vector<std::string> bad;
        auto finite = [](double v) { return std::isfinite(v); };
        if (!(epsilon > 0) || !finite(epsilon)) bad.push_back("epsilon must be > 0");
        if (!(tau > 0) || !finite(tau)) bad.push_back("tau must be > 0");
        if (!(M > 0) || !finite(M)) bad.push_back("M must be > 0");
        if (!(kappa >= 0) || !finite(kappa)) bad.push_back("kappa must be >= 0");
        if (!(beta >= 0) || !finite(beta)) bad.push_back("beta must be >= 0");
        if (!(gamma >= 0) || !finite(gamma)) bad.push_back("gamma must be >= 0");
        if (!(omega > 0 && omega < 1)) bad.push_back("omega must lie in (0,1)");
        if (!(T_final >= 0) || !finite(T_final)) bad.push_back("T_final must be >= 0");
        if (!(stop_tol >= 0)) bad.push_back("stop_tol must be >= 0");
        return bad;
    }

    void validate() const {
        const auto bad = violations();
        if (!bad.empty()) {
            std::string msg = "invalid OK parameters:";
            for (const auto& b : bad) msg += " " + b + ";";
            throw ParameterError(msg);
        }
    }
};

struct NOParams {
    double epsilon = 0.1;
    Eigen::Matrix2d gamma = Eigen::Matrix2d::Zero();
    std::array<double, 2> omega{0.09, 0.09};
    std::array<double, 2> kappa{0.0, 0.0};
    std::array<double, 2> beta{0.0, 0.0};
    std::array<double, 2> M{1.0, 1.0};
    double tau = 1e-3;
    double T_final = 1.0;
    double stop_tol = 1e-5;
    PotentialExt potential{};
    StartupKind startup = StartupKind::Bdf1;
    // Diagnostic switch: W'(u_i) replaces the W2 partials and the cross Laplacian is dropped.
    bool coupling_disabled = false;

    [[nodiscard]] std::vector<std::string> violations() const {
        std::vector<std::string> bad;
        if (!(epsilon > 0) || !std::isfinite(epsilon)) bad.push_back("epsilon must be > 0");
        if (!(tau > 0) || !std::isfinite(tau)) bad.push_back("tau must be > 0");
        if (!(T_final >= 0)) bad.push_back("T_final must be >= 0");
        if (!(stop_tol >= 0)) bad.push_back("stop_tol must be >= 0");
        if (!gamma.allFinite() || (gamma.array() < 0).any()) bad.push_back("gamma (all gamma_ij) must be >= 0");
        for (int i = 0; i < 2; ++i) {
            const std::string s = std::to_string(i + 1);
            if (!(omega[i] > 0 && omega[i] < 1)) bad.push_back("omega" + s + " must lie in (0,1)");
            if (!(kappa[i] >= 0)) bad.push_back("kappa" + s + " must be >= 0");
            if (!(beta[i] >= 0)) bad.push_back("beta" + s + " must be >= 0");
            if (!(M[i] > 0)) bad.push_back("M" + s + " must be > 0");
        }
        if (!(omega[0] + omega[1] < 1)) bad.push_back("omega1 + omega2 must be < 1");
        return bad;
    }

    void validate() const {
        const auto bad = violations();
        if (!bad.empty()) {
            std::string msg = "invalid NO parameters:";
            for (const auto& b : bad) msg += " " + b + ";";
            throw ParameterError(msg);
        }
    }
};

namespace detail {

// Quantities derived from one coefficient field, reused across consecutive steps.
struct FieldCache {
    CoeffField src;
    ValueField values;
    CoeffField invlap;  // empty unless requested
    double volume = 0.0;

    [[nodiscard]] bool matches(const CoeffField& u) const {
        return src.coeffs.rows() == u.coeffs.rows() && src.coeffs.cols() == u.coeffs.cols() && src.coeffs == u.coeffs;
    }
};
using CachePtr = std::shared_ptr<const FieldCache>;

inline CachePtr evaluate(const HelmholtzSolver& solver, const CoeffField& u, const CachePtr& hint, bool need_invlap) {
    if (hint && hint->matches(u) && (!need_invlap || hint->invlap.grid)) return hint;
    auto c = std::make_shared<FieldCache>();
    c->src = u;
    c->values = synthesize(u);
    c->volume = disk_integral(u);
    if (need_invlap) c->invlap = solver.inverse_laplacian(u);
    return c;
}

inline double max_abs_diff(const CoeffField& a, const CoeffField& b) {
    return (a.coeffs - b.coeffs).cwiseAbs().maxCoeff();
}

inline void check_finite(const CoeffField& u, long step, const char* who) {
    if (!u.all_finite()) {
        std::ostringstream msg;
        msg << who << ": non-finite values produced at step " << step;
        throw SolverError(msg.str());
    }
}

}  // namespace detail

struct OKState {
    CoeffField u;       // U^n
    CoeffField u_prev;  // U^{n-1}
    long step = 0;
    double time = 0.0;
    detail::CachePtr cache_u, cache_prev;

    // U^{-1} = U^0 = u0.
    static OKState initial(CoeffField u0) {
        OKState s;
        s.u_prev = u0;
        s.u = std::move(u0);
        return s;
    }
};

struct NOState {
    std::array<CoeffField, 2> u;
    std::array<CoeffField, 2> u_prev;
    long step = 0;
    double time = 0.0;
    std::array<detail::CachePtr, 2> cache_u, cache_prev;

    static NOState initial(CoeffField u1, CoeffField u2) {
        NOState s;
        s.u_prev = {u1, u2};
        s.u = {std::move(u1), std::move(u2)};
        return s;
    }
};

// ---------------------------------------------------------------------------
// Energies

struct OKEnergy {
    double gradient = 0.0;    // eps/2 * int U (-Lap U)
    double potential = 0.0;   // 1/eps * int W(U)
    double long_range = 0.0;  // gamma/2 * int (U - omega) (-Lap)^{-1} (U - omega)
    double penalty = 0.0;     // M/2 * (int U - omega pi)^2
    double total = 0.0;
};

struct NOEnergy {
    double gradient = 0.0;
    double potential = 0.0;
    double long_range = 0.0;
    double penalty = 0.0;
    double total = 0.0;
};

[[nodiscard]] inline OKEnergy ok_energy(const CoeffField& u, const OKParams& p, const HelmholtzSolver& solver) {
    const auto& g = *u.grid;
    const ValueField v = synthesize(u);
    const ValueField lap = solver.laplacian_values(u);
    OKEnergy e;
    e.gradient = -0.5 * p.epsilon * area_inner_product(v, lap);
    ValueField w(u.grid);
    for (Index i = 0; i < g.n_radial(); ++i)
        for (Index j = 0; j < g.n_theta(); ++j) w(i, j) = potential_W(v(i, j), p.potential);
    e.potential = disk_integral(w) / p.epsilon;
    if (p.gamma != 0.0) {
        const ValueField gl = synthesize(solver.inverse_laplacian(u));
        ValueField d = v;
        d.values.array() -= p.omega;
        e.long_range = 0.5 * p.gamma * area_inner_product(d, gl);
    }
    const double dv = disk_integral(u) - p.omega * std::numbers::pi;
    e.penalty = 0.5 * p.M * dv * dv;
    e.total = e.gradient + e.potential + e.long_range + e.penalty;
    return e;
}

[[nodiscard]] inline OKEnergy ok_energy(const CoeffField& u, const OKParams& p) {
    return ok_energy(u, p, HelmholtzSolver(u.grid));
}

[[nodiscard]] inline NOEnergy no_energy(const CoeffField& u1, const CoeffField& u2, const NOParams& p,
                                        const HelmholtzSolver& solver) {
    const auto& g = *u1.grid;
    const std::array<const CoeffField*, 2> u{&u1, &u2};
    std::array<ValueField, 2> v{synthesize(u1), synthesize(u2)};
    std::array<ValueField, 2> lap{solver.laplacian_values(u1), solver.laplacian_values(u2)};
    NOEnergy e;
    e.gradient = -0.5 * p.epsilon *
                 (area_inner_product(v[0], lap[0]) + area_inner_product(v[1], lap[1]) +
                  0.5 * (area_inner_product(v[0], lap[1]) + area_inner_product(v[1], lap[0])));
    ValueField w(u1.grid);
    for (Index i = 0; i < g.n_radial(); ++i)
        for (Index j = 0; j < g.n_theta(); ++j) w(i, j) = potential_W2(v[0](i, j), v[1](i, j), p.potential);
    e.potential = disk_integral(w) / p.epsilon;
    if ((p.gamma.array() != 0.0).any()) {
        std::array<ValueField, 2> gl{synthesize(solver.inverse_laplacian(u1)), synthesize(solver.inverse_laplacian(u2))};
        for (int i = 0; i < 2; ++i) {
            ValueField d = v[i];
            d.values.array() -= p.omega[i];
            for (int j = 0; j < 2; ++j)
                if (p.gamma(i, j) != 0.0) e.long_range += 0.5 * p.gamma(i, j) * area_inner_product(d, gl[j]);
        }
    }
    for (int i = 0; i < 2; ++i) {
        const double dv = disk_integral(*u[i]) - p.omega[i] * std::numbers::pi;
        e.penalty += 0.5 * p.M[i] * dv * dv;
    }
    e.total = e.gradient + e.potential + e.long_range + e.penalty;
    return e;
}

[[nodiscard]] inline NOEnergy no_energy(const CoeffField& u1, const CoeffField& u2, const NOParams& p) {
    return no_energy(u1, u2, p, HelmholtzSolver(u1.grid));
}

// Power iteration for the area-L2 operator norm of the zero-mean inverse Laplacian.
struct InvLapNormEstimate {
    double value = 0.0;
    CoeffField direction;  // unit area-norm eigen-direction
    int iterations = 0;
};

[[nodiscard]] inline InvLapNormEstimate estimate_invlap_norm_detailed(const HelmholtzSolver& solver,
                                                                      double rel_tol = 1e-6, int max_iter = 500) {
    const GridPtr& grid = solver.grid();
    auto normalize = [](CoeffField c) {
        c = enforce_parity(std::move(c));
        c.add_constant(-disk_integral(c) / std::numbers::pi);
        const double n = area_l2_norm(synthesize(c));
        c *= 1.0 / n;
        return c;
    };
    CoeffField v = normalize(analyze(sample_cartesian(grid, [](double x, double y) {
        return x + 0.7 * y + 0.3 * (x * x - y * y) + 0.2 * x * y + 0.1 * (x * x + y * y);
    })));
    double lambda = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        CoeffField w = solver.inverse_laplacian(v);
        const double next = area_l2_norm(synthesize(w));
        v = normalize(std::move(w));
        if (it > 1 && std::abs(next - lambda) <= rel_tol * next) return {next, v, it};
        lambda = next;
    }
    throw SolverError("estimate_invlap_norm: power iteration did not converge in " + std::to_string(max_iter) +
                      " iterations");
}

[[nodiscard]] inline double estimate_invlap_norm(const GridPtr& grid) {
    return estimate_invlap_norm_detailed(HelmholtzSolver(grid)).value;
}

// C = L_W''/(2 eps) + gamma/2 * ||(-Lap)^{-1}|| + M pi / 2.
[[nodiscard]] inline double ok_stability_constant(const OKParams& p, double invlap_norm) {
    return p.potential.L_Wpp / (2.0 * p.epsilon) + 0.5 * p.gamma * invlap_norm + 0.5 * p.M * std::numbers::pi;
}

// C_i = L_W''/(2 eps) + (gamma_i1 + gamma_i2)/2 * ||(-Lap)^{-1}|| + M_i pi / 2.
[[nodiscard]] inline std::array<double, 2> no_stability_constants(const NOParams& p, double invlap_norm) {
    std::array<double, 2> c{};
    for (int i = 0; i < 2; ++i)
        c[i] = p.potential.L_Wpp / (2.0 * p.epsilon) + 0.5 * (p.gamma(i, 0) + p.gamma(i, 1)) * invlap_norm +
               0.5 * p.M[i] * std::numbers::pi;
    return c;
}

namespace detail {
// (kappa/(2 eps) + 1/(4 tau) + C) ||d||^2 + gamma beta / 2 * int d (-Lap)^{-1} d, d = U^n - U^{n-1}.
inline double increment_terms(const CoeffField& u, const CoeffField& u_prev, double kappa, double eps, double tau,
                              double c, double gamma_beta, const HelmholtzSolver& solver) {
    const CoeffField d = u - u_prev;
    const ValueField dv = synthesize(d);
    double s = (kappa / (2.0 * eps) + 1.0 / (4.0 * tau) + c) * area_inner_product(dv, dv);
    if (gamma_beta != 0.0) s += 0.5 * gamma_beta * area_inner_product(dv, synthesize(solver.inverse_laplacian(d)));
    return s;
}
}  // namespace detail

[[nodiscard]] inline double ok_modified_energy(const OKState& s, const OKParams& p, double C,
                                               const HelmholtzSolver& solver) {
    return ok_energy(s.u, p, solver).total +
           detail::increment_terms(s.u, s.u_prev, p.kappa, p.epsilon, p.tau, C, p.gamma * p.beta, solver);
}

[[nodiscard]] inline double no_modified_energy(const NOState& s, const NOParams& p, const std::array<double, 2>& C,
                                               const HelmholtzSolver& solver) {
    double e = no_energy(s.u[0], s.u[1], p, solver).total;
    for (int i = 0; i < 2; ++i)
        e += detail::increment_terms(s.u[i], s.u_prev[i], p.kappa[i], p.epsilon, p.tau, C[i],
                                     p.gamma(i, i) * p.beta[i], solver);
    return e;
}

// ---------------------------------------------------------------------------
// Steppers

namespace detail {

// Backward-difference weights (a0, a1, a2): (a0 U^{n+1} - a1 U^n - a2 U^{n-1}) / tau.
struct TimeWeights {
    double a0, a1, a2;
};

inline TimeWeights time_weights(StartupKind kind, long step) {
    if (step == 0 && kind == StartupKind::Bdf1) return {1.0, 1.0, 0.0};
    return {1.5, 2.0, -0.5};
}

// Solve (alpha - Lap) U = (F + gamma_beta * (Gext - G U)) / eps + lap_c Lap V for U, where G
// is the inverse Laplacian, by fixed-point iteration on the implicit G U term. The Lap V
// term is applied inside the tau system; pass lap_src = nullptr to omit it.
inline CoeffField implicit_solve(const HelmholtzSolver& solver, double alpha, double eps, const CoeffField& F,
                                 double gamma_beta, const CoeffField& ext, const CoeffField& g_ext, long step,
                                 const char* who, const CoeffField* lap_src = nullptr, double lap_c = 0.0) {
    auto solve = [&](const CoeffField& rhs) {
        return lap_src ? solver.solve(alpha, (1.0 / eps) * rhs, *lap_src, lap_c) : solver.solve(alpha, (1.0 / eps) * rhs);
    };
    if (gamma_beta == 0.0) return enforce_parity(solve(F));
    constexpr int kMaxInner = 50;
    constexpr double kInnerTol = 1e-10;
    CoeffField cur = ext;
    CoeffField g_cur = g_ext;
    for (int it = 0; it < kMaxInner; ++it) {
        CoeffField rhs = F;
        if (it > 0) rhs += gamma_beta * (g_ext - g_cur);
        CoeffField next = enforce_parity(solve(rhs));
        check_finite(next, step, who);
        const double inc = max_abs_diff(next, cur);
        cur = std::move(next);
        if (inc < kInnerTol) return cur;
        g_cur = solver.inverse_laplacian(cur);
    }
    std::ostringstream msg;
    msg << who << ": implicit long-range iteration did not converge in " << kMaxInner << " iterations at step "
        << step;
    throw SolverError(msg.str());
}

}  // namespace detail

// Stabilized BDF2 stepper for the penalized Ohta-Kawasaki Allen-Cahn flow.
class OKStepper {
public:
    OKStepper(std::shared_ptr<const HelmholtzSolver> solver, OKParams p) : solver_(std::move(solver)), p_(p) {
        p_.validate();
    }
    OKStepper(GridPtr grid, OKParams p) : OKStepper(std::make_shared<const HelmholtzSolver>(std::move(grid)), p) {}

    [[nodiscard]] const OKParams& params() const { return p_; }
    [[nodiscard]] const HelmholtzSolver& solver() const { return *solver_; }
    [[nodiscard]] std::shared_ptr<const HelmholtzSolver> solver_ptr() const { return solver_; }

    [[nodiscard]] OKState step(const OKState& s) const {
        const auto& sol = *solver_;
        const bool need_g = p_.gamma != 0.0;
        const auto cn = detail::evaluate(sol, s.u, s.cache_u, need_g);
        const auto cp = detail::evaluate(sol, s.u_prev, s.cache_prev, need_g);
        const auto& g = *s.u.grid;
        const double eps = p_.epsilon, tau = p_.tau;

        ValueField nl(s.u.grid);
        for (Index j = 0; j < g.n_theta(); ++j)
            for (Index i = 0; i < g.n_radial(); ++i)
                nl(i, j) = -(2.0 * potential_dW(cn->values(i, j), p_.potential) -
                             potential_dW(cp->values(i, j), p_.potential)) /
                           eps;
        CoeffField F = enforce_parity(analyze(nl));
        const CoeffField ext = 2.0 * s.u - s.u_prev;
        const auto tw = detail::time_weights(p_.startup, s.step);
        F += (tw.a1 / tau) * s.u + (tw.a2 / tau) * s.u_prev + (p_.kappa / eps) * ext;
        CoeffField g_ext;
        if (need_g) {
            g_ext = 2.0 * cn->invlap - cp->invlap;
            F -= p_.gamma * g_ext;
        }
        F.add_constant(-p_.M * (2.0 * cn->volume - cp->volume - p_.omega * std::numbers::pi));

        const double alpha = (tw.a0 / tau + p_.kappa / eps) / eps;
        OKState out;
        out.u = detail::implicit_solve(sol, alpha, eps, F, p_.gamma * p_.beta, ext, g_ext, s.step + 1, "bdf2_step_ok");
        detail::check_finite(out.u, s.step + 1, "bdf2_step_ok");
        out.u_prev = s.u;
        out.cache_prev = cn;
        out.step = s.step + 1;
        out.time = s.time + tau;
        return out;
    }

private:
    std::shared_ptr<const HelmholtzSolver> solver_;
    OKParams p_;
};

[[nodiscard]] inline OKState bdf2_step_ok(const OKState& s, const OKParams& p) { return OKStepper(s.u.grid, p).step(s); }

// Stabilized BDF2 stepper for the penalized Nakazawa-Ohta system: a Gauss-Seidel
// sweep updating species 1 from explicit data, then species 2 using U_1^{n+1}.
class NOStepper {
public:
    NOStepper(std::shared_ptr<const HelmholtzSolver> solver, NOParams p) : solver_(std::move(solver)), p_(p) {
        p_.validate();
    }
    NOStepper(GridPtr grid, NOParams p) : NOStepper(std::make_shared<const HelmholtzSolver>(std::move(grid)), p) {}

    [[nodiscard]] const NOParams& params() const { return p_; }
    [[nodiscard]] const HelmholtzSolver& solver() const { return *solver_; }
    [[nodiscard]] std::shared_ptr<const HelmholtzSolver> solver_ptr() const { return solver_; }

    [[nodiscard]] NOState step(const NOState& s) const {
        const auto& sol = *solver_;
        const auto& g = *s.u[0].grid;
        const double eps = p_.epsilon, tau = p_.tau;
        const long n1 = s.step + 1;
        const bool coupled = !p_.coupling_disabled;
        std::array<bool, 2> need_g{};
        for (int i = 0; i < 2; ++i) need_g[i] = p_.gamma(0, i) != 0.0 || p_.gamma(1, i) != 0.0;

        std::array<detail::CachePtr, 2> cn, cp;
        for (int i = 0; i < 2; ++i) {
            cn[i] = detail::evaluate(sol, s.u[i], s.cache_u[i], need_g[i]);
            cp[i] = detail::evaluate(sol, s.u_prev[i], s.cache_prev[i], need_g[i]);
        }

        NOState out;
        out.step = n1;
        out.time = s.time + tau;
        out.u_prev = s.u;
        out.cache_prev = cn;

        // Species 1: all data explicit.
        {
            ValueField nl(s.u[0].grid);
            for (Index j = 0; j < g.n_theta(); ++j)
                for (Index i = 0; i < g.n_radial(); ++i) {
                    double a, b;
                    if (coupled) {
                        a = potential_W2_partials(cn[0]->values(i, j), cn[1]->values(i, j), p_.potential).first;
                        b = potential_W2_partials(cp[0]->values(i, j), cp[1]->values(i, j), p_.potential).first;
                    } else {
                        a = potential_dW(cn[0]->values(i, j), p_.potential);
                        b = potential_dW(cp[0]->values(i, j), p_.potential);
                    }
                    nl(i, j) = -(2.0 * a - b) / eps;
                }
            CoeffField g_cross;
            if (need_g[1]) g_cross = 2.0 * cn[1]->invlap - cp[1]->invlap;
            const CoeffField lap_src = 2.0 * s.u[1] - s.u_prev[1];
            out.u[0] = solve_species(0, s, cn[0], cp[0], std::move(nl), g_cross, n1, coupled ? &lap_src : nullptr);
        }

        // Species 2: species-1 data taken at step n+1.
        {
            const auto c1 = detail::evaluate(sol, out.u[0], nullptr, need_g[0]);
            out.cache_u[0] = c1;
            ValueField nl(s.u[1].grid);
            for (Index j = 0; j < g.n_theta(); ++j)
                for (Index i = 0; i < g.n_radial(); ++i) {
                    double a, b;
                    if (coupled) {
                        a = potential_W2_partials(c1->values(i, j), cn[1]->values(i, j), p_.potential).second;
                        b = potential_W2_partials(c1->values(i, j), cp[1]->values(i, j), p_.potential).second;
                    } else {
                        a = potential_dW(cn[1]->values(i, j), p_.potential);
                        b = potential_dW(cp[1]->values(i, j), p_.potential);
                    }
                    nl(i, j) = -(2.0 * a - b) / eps;
                }
            CoeffField g_cross;
            if (need_g[0]) g_cross = c1->invlap;
            out.u[1] = solve_species(1, s, cn[1], cp[1], std::move(nl), g_cross, n1, coupled ? &out.u[0] : nullptr);
        }
        return out;
    }

private:
    // Shared tail of the per-species update. `nl` holds the pointwise explicit terms,
    // `g_cross` the inverse Laplacian of the other species' extrapolant (empty if unused),
    // `lap_src` the field whose Laplacian enters with weight eps/2 (null if uncoupled).
    CoeffField solve_species(int i, const NOState& s, const detail::CachePtr& cn, const detail::CachePtr& cp,
                             ValueField nl, const CoeffField& g_cross, long step, const CoeffField* lap_src) const {
        const int j = 1 - i;
        const double eps = p_.epsilon, tau = p_.tau;
        CoeffField F = enforce_parity(analyze(nl));
        const CoeffField ext = 2.0 * s.u[i] - s.u_prev[i];
        const auto tw = detail::time_weights(p_.startup, s.step);
        F += (tw.a1 / tau) * s.u[i] + (tw.a2 / tau) * s.u_prev[i] + (p_.kappa[i] / eps) * ext;
        CoeffField g_ext;
        if (cn->invlap.grid) g_ext = 2.0 * cn->invlap - cp->invlap;
        if (p_.gamma(i, i) != 0.0) F -= p_.gamma(i, i) * g_ext;
        if (p_.gamma(i, j) != 0.0) F -= p_.gamma(i, j) * g_cross;
        F.add_constant(-p_.M[i] * (2.0 * cn->volume - cp->volume - p_.omega[i] * std::numbers::pi));
        const double alpha = (tw.a0 / tau + p_.kappa[i] / eps) / eps;
        CoeffField u = detail::implicit_solve(*solver_, alpha, eps, F, p_.gamma(i, i) * p_.beta[i], ext, g_ext, step,
                                              "bdf2_step_no", lap_src, 0.5);
        detail::check_finite(u, step, "bdf2_step_no");
        return u;
    }

    std::shared_ptr<const HelmholtzSolver> solver_;
    NOParams p_;
};

[[nodiscard]] inline NOState bdf2_step_no(const NOState& s, const NOParams& p) {
    return NOStepper(s.u[0].grid, p).step(s);
}

// ---------------------------------------------------------------------------
// Stopping criterion and energy trace

// max-norm of U^{n+1} - U^n on the grid, divided by tau.
[[nodiscard]] inline double ok_change_rate(const OKState& s, double tau) {
    return linf_norm(synthesize(s.u - s.u_prev)) / tau;
}

[[nodiscard]] inline double no_change_rate(const NOState& s, double tau) {
    return (linf_norm(synthesize(s.u[0] - s.u_prev[0])) + linf_norm(synthesize(s.u[1] - s.u_prev[1]))) / tau;
}

[[nodiscard]] inline bool stopping_check(const OKState& s, double tau, double tol = 1e-5) {
    return ok_change_rate(s, tau) <= tol;
}

[[nodiscard]] inline bool stopping_check(const NOState& s, double tau, double tol = 1e-5) {
    return no_change_rate(s, tau) <= tol;
}

struct EnergyRecord {
    long step = 0;
    double time = 0.0;
    double E_raw = 0.0;
    double E_modified = 0.0;
    double volume = 0.0;  // disk integral of U (sum over species for NO)
};

class EnergyTrace {
public:
    void push(const EnergyRecord& r) {
        if (!records_.empty() && !(r.time > records_.back().time))
            throw ParameterError("EnergyTrace: times must be strictly increasing");
        records_.push_back(r);
    }
    [[nodiscard]] const std::vector<EnergyRecord>& records() const { return records_; }
    [[nodiscard]] size_t size() const { return records_.size(); }
    [[nodiscard]] bool empty() const { return records_.empty(); }

    double stability_constant = 0.0;  // C used in the modified energy (max over species for NO)
    bool theorem_regime = false;      // tau <= 1/(3C)

private:
    std::vector<EnergyRecord> records_;
};

}  // namespace ultradisk
