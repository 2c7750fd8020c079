// Command-line front end: simulate, convergence, selftest.
//
// Exit codes: 0 success, 1 usage or validation error, 2 runtime failure.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>

#include "ultradisk/config.hpp"
#include "ultradisk/harness.hpp"
#include "ultradisk/helmholtz.hpp"
#include "ultradisk/io.hpp"

namespace {

using namespace ultradisk;

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kRuntime = 2;

SimulationConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError({"cannot read config file " + path});
    std::stringstream ss;
    ss << f.rdbuf();
    SimulationConfig c = parse_config(ss.str());
    if (const char* env = std::getenv("ULTRADISK_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || n < 1) throw ConfigError({"ULTRADISK_THREADS must be a positive integer"});
        c.threads = n;
    }
    Eigen::setNbThreads(static_cast<int>(c.threads));
    return c;
}

int cmd_simulate(const std::string& config_path, const std::string& out_override) {
    const SimulationConfig c = load_config(config_path);
    const std::filesystem::path out = out_override.empty() ? c.output_dir : out_override;
    RunOptions opt;
    opt.progress = [](long step, double t, double rate) {
        if (step % 2000 == 0) std::fprintf(stderr, "step %ld  t = %.4f  change rate = %.3e\n", step, t, rate);
        return true;
    };
    const RunArtifacts a = run_coarsening(c, opt);
    write_run_artifacts(a, out);
    std::printf("stop_reason = %s\nsteps = %ld\nfinal_time = %.6g\nbubble_count = %d\nboundary_bubbles = %d\n",
                to_string(a.stop_reason), a.steps, a.final_time, a.bubble_count, a.boundary_bubbles);
    if (a.stop_reason == StopReason::Failure) {
        std::fprintf(stderr, "error: %s\n", a.failure.c_str());
        return kRuntime;
    }
    return kOk;
}

int cmd_convergence(const std::string& config_path, const std::string& out_override) {
    const SimulationConfig c = load_config(config_path);
    const std::filesystem::path out = out_override.empty() ? c.output_dir : out_override;
    const ConvergenceReport r = convergence_study(c, c.taus, c.benchmark_tau, c.T_convergence,
                                                  [](const std::string& m) { std::fprintf(stderr, "%s\n", m.c_str()); });
    write_report(r, out / "report.csv");
    std::printf("%-12s %-14s %s\n", "tau", "error", "rate");
    for (const auto& row : r.rows) std::printf("%-12.6g %-14.6e %.5f\n", row.tau, row.error, row.rate);
    std::printf("benchmark tau = %g, epsilon = %gh\n", r.benchmark_tau, r.epsilon_multiplier);
    if (!r.complete) {
        std::fprintf(stderr, "error: %s\n", r.failure.c_str());
        return kRuntime;
    }
    return kOk;
}

int cmd_selftest() {
    bool ok = true;
    auto report = [&](const char* name, double value, double limit) {
        const bool pass = value <= limit;
        ok = ok && pass;
        std::printf("%-28s %-4s residual %.3e (limit %.0e)\n", name, pass ? "PASS" : "FAIL", value, limit);
    };

    const GridPtr g = make_grid(33, 32);
    const HelmholtzSolver solver(g);
    auto bump = [](double r, double) { return (1 - r * r) * (1 - r * r); };

    const CoeffField f = analyze(dfs_extend(g, [](double r, double) {
        const double s = 1 - r * r;
        return 8 - 16 * r * r + s * s;
    }));
    const ValueField u = synthesize(solver.solve(1.0, f));
    report("helmholtz alpha=1", linf_norm(ValueField(g, u.values - dfs_extend(g, bump).values)), 1e-10);

    const CoeffField w = solver.inverse_laplacian(analyze(dfs_extend(g, [](double r, double) { return 8 - 16 * r * r; })));
    ValueField expect = dfs_extend(g, bump);
    expect.values.array() -= 1.0 / 3.0;
    report("inverse laplacian", linf_norm(ValueField(g, synthesize(w).values - expect.values)), 1e-10);
    report("inverse laplacian mean", std::abs(disk_integral(w)) / std::numbers::pi, 1e-10);

    const std::vector<double> rhs{2.0, 2.0};
    const BvpSolution b = solve_bvp_1d({}, rhs, BoundaryKind::Dirichlet, 16);
    Eigen::VectorXd exact = Eigen::VectorXd::Zero(16);
    exact(0) = -0.5;
    exact(2) = 0.5;
    report("bvp u''+u'=2+2x", (b.coeffs - exact).cwiseAbs().maxCoeff(), 1e-12);
    return ok ? kOk : kRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral phase-field solver for block copolymers on the unit disk"};
    app.require_subcommand(1);
    std::string config, out;

    auto* sim = app.add_subcommand("simulate", "Run a coarsening simulation");
    sim->add_option("-c,--config", config, "Configuration file")->required();
    sim->add_option("-o,--output", out, "Output directory (overrides output_dir)");

    auto* conv = app.add_subcommand("convergence", "Run a time-step convergence study");
    conv->add_option("-c,--config", config, "Configuration file")->required();
    conv->add_option("-o,--output", out, "Output directory (overrides output_dir)");

    app.add_subcommand("selftest", "Check the solvers against analytic solutions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        if (code != 0) std::cerr << app.help();
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (sim->parsed()) return cmd_simulate(config, out);
        if (conv->parsed()) return cmd_convergence(config, out);
        return cmd_selftest();
    } catch (const ConfigError& e) {
        std::cerr << "configuration error:\n" << e.what() << '\n';
        return kUsage;
    } catch (const ParameterError& e) {
        std::cerr << "invalid parameters: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
}
