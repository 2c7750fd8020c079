// Acceptance checks 1-10. Prints one PASS/FAIL line per criterion and exits nonzero
// if any fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ultradisk/harness.hpp"
#include "ultradisk/helmholtz.hpp"
#include "ultradisk/phase_field.hpp"
#include "ultradisk/ultraspherical.hpp"

using namespace ultradisk;
using std::numbers::pi;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

void log(const std::string& s) { std::fprintf(stderr, "  %s\n", s.c_str()); }

double grid_err(const ValueField& a, const ValueField& b) { return (a.values - b.values).cwiseAbs().maxCoeff(); }

Outcome criterion1() {
    const auto t0 = Clock::now();
    const auto g = make_grid(33, 32);
    const auto f = analyze(sample_cartesian(g, [](double x, double y) {
        const double r2 = x * x + y * y;
        return 8 - 16 * r2 + (1 - r2) * (1 - r2);
    }));
    const auto u = helmholtz_solve(1.0, f);
    const double sec = seconds_since(t0);
    const double err = grid_err(synthesize(u), sample_cartesian(g, [](double x, double y) {
                                    const double r2 = x * x + y * y;
                                    return (1 - r2) * (1 - r2);
                                }));
    return {err <= 1e-10 && sec < 1.0, "Linf error " + fmt("%.3e", err) + ", runtime " + fmt("%.3f", sec) + " s"};
}

Outcome criterion2() {
    const auto g = make_grid(33, 32);
    const auto u = inverse_laplacian(analyze(sample_cartesian(g, [](double x, double y) { return 8 - 16 * (x * x + y * y); })));
    const double err = grid_err(synthesize(u), sample_cartesian(g, [](double x, double y) {
                                    const double r2 = x * x + y * y;
                                    return (1 - r2) * (1 - r2) - 1.0 / 3;
                                }));
    const double mean = std::abs(disk_integral(u)) / pi;
    return {err <= 1e-10 && mean <= 1e-10, "Linf error " + fmt("%.3e", err) + ", |mean| " + fmt("%.3e", mean)};
}

Outcome criterion3() {
    const auto sol = solve_bvp_1d({}, std::vector<double>{2.0, 2.0}, BoundaryKind::Dirichlet, 16);
    Eigen::VectorXd want = Eigen::VectorXd::Zero(16);
    want(0) = -0.5;
    want(2) = 0.5;
    double err = (sol.coeffs - want).cwiseAbs().maxCoeff();
    for (double x = -1.0; x <= 1.0; x += 0.125) {
        double s = 0.0;
        for (Index k = 0; k < 16; ++k) s += sol.coeffs(k) * std::cos(static_cast<double>(k) * std::acos(std::clamp(x, -1.0, 1.0)));
        err = std::max(err, std::abs(s - (x * x - 1)));
    }
    return {err <= 1e-12, "max coefficient/pointwise error " + fmt("%.3e", err)};
}

Outcome rates_in_band(const ConvergenceReport& rep) {
    if (!rep.complete) return {false, "study aborted: " + rep.failure};
    bool ok = true;
    std::ostringstream d;
    d << "benchmark tau " << rep.benchmark_tau << ";";
    for (const auto& r : rep.rows) {
        d << " tau " << r.tau << " err " << fmt("%.4e", r.error);
        if (std::isfinite(r.rate)) d << " rate " << fmt("%.3f", r.rate);
        d << ";";
        if (r.tau <= 2.5e-4 + 1e-15 && !(r.rate >= 1.5 && r.rate <= 2.3)) ok = false;
    }
    return {ok, d.str()};
}

const std::vector<double> kTaus{5e-4, 2.5e-4, 1.25e-4, 6.25e-5, 3.125e-5};

Outcome criterion4() {
    SimulationConfig c;
    c.model = ModelKind::OK;
    c.n_r = 129;
    c.n_theta = 128;
    c.epsilon_h = 25;
    c.omega = 0.15;
    c.gamma = 100;
    c.kappa = 1000;
    c.beta = 5;
    c.M = 1000;
    c.initial = InitialKind::Disk;
    return rates_in_band(convergence_study(c, kTaus, 2e-6, 0.01, log));
}

Outcome criterion5() {
    SimulationConfig c;
    c.model = ModelKind::NO;
    c.n_r = 129;
    c.n_theta = 128;
    c.epsilon_h = 25;
    c.omega1 = c.omega2 = 0.09;
    c.gamma11 = c.gamma22 = 500;
    c.gamma12 = c.gamma21 = 0;
    c.kappa1 = c.kappa2 = 1000;
    c.beta1 = c.beta2 = 0;
    c.M1 = c.M2 = 1000;
    c.initial = InitialKind::TwoDisks;
    return rates_in_band(convergence_study(c, kTaus, 2e-6, 0.01, log));
}

SimulationConfig coarsening_config(double gamma) {
    SimulationConfig c;
    c.model = ModelKind::OK;
    c.n_r = 129;
    c.n_theta = 128;
    c.tau = 5e-4;
    c.omega = 0.15;
    c.kappa = 2000;
    c.beta = 0;
    c.M = 2000;
    c.gamma = gamma;
    c.initial = InitialKind::RandomBlocks;
    c.seed = 1;
    return c;
}

RunOptions progress_every(long k) {
    RunOptions o;
    o.progress = [k](long step, double t, double rate) {
        if (step % k == 0) log("step " + std::to_string(step) + " t = " + fmt("%.3f", t) + " rate " + fmt("%.3e", rate));
        return true;
    };
    return o;
}

Outcome criterion6() {
    auto c = coarsening_config(2500);
    c.T_final = 5.0;
    c.stop_tol = 0.0;
    const auto art = run_coarsening(c, progress_every(2000));
    const auto& rec = art.trace.records();
    bool raw_ok = art.stop_reason == StopReason::Horizon && std::abs(art.final_time - 5.0) < 1e-9;
    double worst = -std::numeric_limits<double>::infinity();
    for (size_t k = 1; k < rec.size(); ++k) {
        if (rec[k].time <= 0.1) continue;
        const double rise = rec[k].E_raw - rec[k - 1].E_raw;
        worst = std::max(worst, rise / std::abs(rec[k - 1].E_raw));
        if (rise > 1e-6 * std::abs(rec[k - 1].E_raw)) raw_ok = false;
    }

    // Reduced stiffness: tau = 1/(3C) with C from the estimated inverse-Laplacian norm.
    SimulationConfig r;
    r.model = ModelKind::OK;
    r.n_r = 65;
    r.n_theta = 64;
    r.epsilon_h = 2;
    r.omega = 0.15;
    r.gamma = 100;
    r.kappa = 100;
    r.beta = 1;
    r.M = 100;
    r.initial = InitialKind::RandomBlocks;
    const double norm = estimate_invlap_norm(make_grid(65, 64));
    const double C = ok_stability_constant(r.ok_params(), norm);
    r.tau = 1.0 / (3.0 * C);
    r.T_final = 600 * r.tau;
    r.stop_tol = 0.0;
    const auto red = run_coarsening(r);
    bool mod_ok = red.trace.theorem_regime && red.stop_reason == StopReason::Horizon;
    long bad = 0;
    const auto& rr = red.trace.records();
    for (size_t k = 1; k < rr.size(); ++k)
        if (rr[k].E_modified > rr[k - 1].E_modified) {
            mod_ok = false;
            ++bad;
        }
    std::ostringstream d;
    d << "E_raw " << rec.front().E_raw << " -> " << rec.back().E_raw << " over " << rec.size() - 1
      << " steps, worst relative rise for t > 0.1 " << fmt("%.3e", worst) << "; reduced config C = " << C
      << ", tau = " << r.tau << ", " << rr.size() - 1 << " steps, modified-energy increases " << bad;
    return {raw_ok && mod_ok, d.str()};
}

RunArtifacts stopped_run(double gamma) {
    auto c = coarsening_config(gamma);
    c.T_final = 40.0;
    log("gamma = " + fmt("%g", gamma));
    return run_coarsening(c, progress_every(5000));
}

RunArtifacts* run_2500 = nullptr;

Outcome criterion7() {
    static RunArtifacts a, b;
    a = stopped_run(2500);
    run_2500 = &a;
    b = stopped_run(4000);
    const bool stopped = a.stop_reason == StopReason::Tolerance && b.stop_reason == StopReason::Tolerance;
    std::ostringstream d;
    d << "gamma 2500: " << a.bubble_count << " bubbles (stop " << to_string(a.stop_reason) << " at t = " << a.final_time
      << "), gamma 4000: " << b.bubble_count << " bubbles (stop " << to_string(b.stop_reason) << " at t = "
      << b.final_time << ")";
    return {stopped && b.bubble_count > a.bubble_count, d.str()};
}

Outcome criterion8() {
    static RunArtifacts own;
    if (!run_2500) {
        own = stopped_run(2500);
        run_2500 = &own;
    }
    const double vol = disk_integral(run_2500->final_fields.at(0));
    const double target = 0.15 * pi;
    const double dev = std::abs(vol - target);
    return {run_2500->stop_reason == StopReason::Tolerance && dev <= 0.02 * target,
            "integral " + fmt("%.6f", vol) + ", target " + fmt("%.6f", target) + ", |diff| " + fmt("%.3e", dev) +
                " (limit " + fmt("%.3e", 0.02 * target) + ")"};
}

Outcome criterion9() {
    const auto t0 = Clock::now();
    std::vector<std::string> failed;
    auto check = [&](bool ok, const std::string& what) {
        if (!ok) failed.push_back(what);
    };

    // Operator bands.
    for (int m = 1; m <= 2; ++m) check(diff_operator(m, 64).offsets() == std::vector<int>{m}, "diff band");
    for (int l = 0; l <= 2; ++l) check(conversion_operator(l, 64).offsets() == (std::vector<int>{0, 2}), "conversion band");
    for (int l : {0, 1, 7, 64}) {
        const auto op = assemble_mode_operator(l, 3.0, 130);
        for (int off : op.offsets()) check(off >= -2 && off <= 6, "mode operator band");
        check(mode_system(l, 3.0, 130).matrix.border_rows() == 2, "border rows");
    }

    // Transform round trips.
    double rt = 0.0;
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> unif(-1, 1);
    for (auto [nr, nt] : {std::pair<Index, Index>{33, 32}, {129, 128}}) {
        const auto g = make_grid(nr, nt);
        const ValueField v = sample_cartesian(g, [](double x, double y) { return std::exp(0.7 * x - 0.4 * y) + x * y * y; });
        rt = std::max(rt, grid_err(synthesize(analyze(v)), v));
        ValueField w(g);
        for (Index i = 0; i < g->n_radial(); ++i)
            for (Index j = 0; j < nt; ++j) w(i, j) = unif(rng);
        rt = std::max(rt, grid_err(synthesize(analyze(w)), w));
    }
    check(rt <= 1e-12, "round trip");

    // Parity and block-mirror symmetry through 100 BDF2 steps.
    const auto g = make_grid(65, 64);
    OKParams p;
    p.epsilon = 2 * g->h_theta();
    p.tau = 5e-4;
    p.gamma = 2500;
    p.kappa = 2000;
    p.M = 2000;
    p.omega = 0.15;
    OKStepper st(g, p);
    OKState s = OKState::initial(initial_random_blocks(g, 8, 1));
    for (int k = 0; k < 100; ++k) s = st.step(s);
    const ValueField v = synthesize(s.u);
    double bmc = 0.0;
    for (Index i = 0; i < g->n_radial(); ++i)
        for (Index j = 0; j < g->n_theta(); ++j)
            bmc = std::max(bmc, std::abs(v(g->mirror_radial(i), g->shift_half_turn(j)) - v(i, j)));
    const double par = std::max(parity_residual(s.u), conjugate_symmetry_residual(s.u));
    check(par <= 1e-10 && bmc <= 1e-10, "parity after 100 steps");

    // Neumann rows.
    const HelmholtzSolver hs(make_grid(129, 128));
    const auto f = analyze(sample_cartesian(hs.grid(), [](double x, double y) {
        return std::exp(-2.0 * ((x - 0.2) * (x - 0.2) + (y + 0.1) * (y + 0.1))) + 0.3 * x;
    }));
    double neu = hs.boundary_derivatives(hs.inverse_laplacian(f)).cwiseAbs().maxCoeff();
    for (double alpha : {1e-3, 1.0, 1e6}) neu = std::max(neu, hs.boundary_derivatives(hs.solve(alpha, f)).cwiseAbs().maxCoeff());
    neu = std::max(neu, st.solver().boundary_derivatives(s.u).cwiseAbs().maxCoeff());
    check(neu <= 1e-9, "Neumann residual");

    // Mode decoupling.
    CoeffField single(hs.grid());
    single.set(2, 4, cplx(0.3, -0.1));
    single.set(6, 4, cplx(-0.2, 0.5));
    const auto u = hs.solve(5.0, single);
    double leak = 0.0;
    for (Index l = -64; l < 64; ++l)
        if (l != 4) leak = std::max(leak, u.mode(l).cwiseAbs().maxCoeff());
    check(leak == 0.0 && u.mode(4).cwiseAbs().maxCoeff() > 0.0, "mode decoupling");

    const double sec = seconds_since(t0);
    check(sec < 60.0, "runtime");
    std::ostringstream d;
    d << "round trip " << fmt("%.2e", rt) << ", parity " << fmt("%.2e", par) << ", BMC " << fmt("%.2e", bmc)
      << ", Neumann " << fmt("%.2e", neu) << ", mode leak " << leak << ", " << fmt("%.1f", sec) << " s";
    for (const auto& x : failed) d << "; failed: " << x;
    return {failed.empty(), d.str()};
}

Outcome criterion10() {
    const auto g = make_grid(129, 128);
    const double eps = 2 * g->h_theta();
    OKParams ok;
    ok.epsilon = eps;
    ok.tau = 5e-4;
    ok.gamma = 500;
    ok.omega = 0.15;
    ok.kappa = 1000;
    ok.beta = 1;
    ok.M = 1000;
    NOParams no;
    no.epsilon = eps;
    no.tau = ok.tau;
    no.gamma << 500, 0, 0, 500;
    no.omega = {0.15, 0.09};
    no.kappa = {1000, 1000};
    no.beta = {1, 0};
    no.M = {1000, 1000};
    no.coupling_disabled = true;
    const auto solver = std::make_shared<const HelmholtzSolver>(g);
    OKStepper os(solver, ok);
    NOStepper ns(solver, no);
    const CoeffField u0 = initial_random_blocks(g, 8, 1);
    OKState a = OKState::initial(u0);
    NOState b = NOState::initial(u0, initial_two_disks_no(g, 0.09, 0.09).second);
    double err = 0.0;
    for (int k = 0; k < 10; ++k) {
        a = os.step(a);
        b = ns.step(b);
        err = std::max(err, linf_norm(synthesize(a.u - b.u[0])));
    }
    return {err <= 1e-10, "max Linf difference over 10 steps " + fmt("%.3e", err)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::function<Outcome()>> all{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                    criterion6, criterion7, criterion8, criterion9, criterion10};
    std::set<int> pick;
    for (int i = 1; i < argc; ++i) {
        const int n = std::atoi(argv[i]);
        if (n < 1 || n > 10) {
            std::fprintf(stderr, "usage: %s [criterion numbers 1-10]\n", argv[0]);
            return 2;
        }
        pick.insert(n);
    }
    if (pick.empty())
        for (int n = 1; n <= 10; ++n) pick.insert(n);

    int failures = 0;
    for (int n : pick) {
        const auto t0 = Clock::now();
        std::fprintf(stderr, "criterion %d ...\n", n);
        Outcome o;
        try {
            o = all[static_cast<size_t>(n - 1)]();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s criterion %d: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", n, o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
