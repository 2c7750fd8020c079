#pragma once

// Initial data, convergence studies, coarsening runs and bubble counting.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ultradisk/config.hpp"
#include "ultradisk/disk_field.hpp"
#include "ultradisk/errors.hpp"
#include "ultradisk/helmholtz.hpp"
#include "ultradisk/phase_field.hpp"

namespace ultradisk {

// ---------------------------------------------------------------------------
// Initial data

// Profile across a circle edge at signed distance d (positive inside): a sharp step
// for width 0, otherwise (1 + tanh(d / width)) / 2.
[[nodiscard]] inline double edge_profile(double d, double width) {
    if (width == 0.0) return d > 0.0 ? 1.0 : 0.0;
    return 0.5 * (1.0 + std::tanh(d / width));
}

inline void check_width(double width) {
    if (!(width >= 0) || !std::isfinite(width)) throw ParameterError("initial data: smoothing width must be >= 0");
}

// Indicator of the disk |(x, y) - (cx, cy)| < radius, optionally smoothed.
[[nodiscard]] inline ValueField disk_indicator(const GridPtr& grid, double cx, double cy, double radius,
                                              double width = 0.0) {
    check_width(width);
    return sample_cartesian(grid, [=](double x, double y) {
        const double dx = x - cx, dy = y - cy;
        if (width == 0.0) return dx * dx + dy * dy < radius * radius ? 1.0 : 0.0;
        return edge_profile(radius - std::hypot(dx, dy), width);
    });
}

[[nodiscard]] inline CoeffField initial_disk(const GridPtr& grid, double cx, double cy, double radius,
                                             double width = 0.0) {
    return enforce_parity(analyze(disk_indicator(grid, cx, cy, radius, width)));
}

// Disk of radius sqrt(omega) + 0.1 centred at (0, 0.2).
[[nodiscard]] inline CoeffField initial_disk_ok(const GridPtr& grid, double omega, double width = 0.0) {
    if (!(omega >= 0)) throw ParameterError("initial_disk_ok: omega must be >= 0");
    return initial_disk(grid, 0.0, 0.2, std::sqrt(omega) + 0.1, width);
}

// Disks of radii sqrt(omega_i) + 0.05 centred at (0.4, -0.3) and (-0.4, 0.3).
[[nodiscard]] inline std::pair<CoeffField, CoeffField> initial_two_disks_no(const GridPtr& grid, double omega1,
                                                                           double omega2, double width = 0.0) {
    if (!(omega1 >= 0 && omega2 >= 0)) throw ParameterError("initial_two_disks_no: omegas must be >= 0");
    return {initial_disk(grid, 0.4, -0.3, std::sqrt(omega1) + 0.05, width),
            initial_disk(grid, -0.4, 0.3, std::sqrt(omega2) + 0.05, width)};
}

// Piecewise-constant uniform random values on the physical half of the grid
// (r_i > 0, rows i = 0..(N_r-1)/2), mirrored to r < 0. Row 0 (r = 1) is split into
// angular blocks of `ratio` nodes; the remaining (N_r-1)/2 rows into blocks of
// `ratio` radial by ratio/4 angular nodes.
[[nodiscard]] inline ValueField random_block_values(const GridPtr& grid, long ratio, unsigned long long seed) {
    const Index half = (grid->n_r() - 1) / 2;  // rows below the outer ring
    const Index nt = grid->n_theta();
    if (ratio < 4 || ratio % 4 != 0) throw ParameterError("initial_random_blocks: ratio must be a positive multiple of 4");
    if (half % ratio != 0)
        throw ParameterError("initial_random_blocks: ratio must divide (N_r - 1) / 2 = " + std::to_string(half));
    if (nt % ratio != 0) throw ParameterError("initial_random_blocks: ratio must divide N_theta");
    const Index ang = ratio / 4;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    ValueField v(grid);
    for (Index b = 0; b < nt / ratio; ++b) {
        const double x = unif(rng);
        for (Index j = b * ratio; j < (b + 1) * ratio; ++j) v(0, j) = x;
    }
    for (Index br = 0; br < half / ratio; ++br)
        for (Index bt = 0; bt < nt / ang; ++bt) {
            const double x = unif(rng);
            for (Index i = 1 + br * ratio; i < 1 + (br + 1) * ratio; ++i)
                for (Index j = bt * ang; j < (bt + 1) * ang; ++j) v(i, j) = x;
        }
    for (Index i = 0; i <= half; ++i)
        for (Index j = 0; j < nt; ++j) v(grid->mirror_radial(i), grid->shift_half_turn(j)) = v(i, j);
    return v;
}

[[nodiscard]] inline CoeffField initial_random_blocks(const GridPtr& grid, long ratio, unsigned long long seed) {
    return enforce_parity(analyze(random_block_values(grid, ratio, seed)));
}

struct Circle {
    double x = 0, y = 0, r = 0;
    int species = 0;  // 0 or 1
};

// Random circle layout: count uniform in [count_min, count_max], radii uniform in
// [0.08, 0.18], centres uniform over the region keeping each circle inside r < 0.9,
// species alternating 0, 1, 0, ...
[[nodiscard]] inline std::vector<Circle> semi_random_circle_layout(long count_min, long count_max,
                                                                   unsigned long long seed) {
    if (count_min < 1 || count_max < count_min) throw ParameterError("semi_random_circles: need 1 <= min <= max");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<long> count(count_min, count_max);
    std::uniform_real_distribution<double> radius(0.08, 0.18);
    std::uniform_real_distribution<double> coord(-1.0, 1.0);
    const long n = count(rng);
    std::vector<Circle> out;
    for (long k = 0; k < n; ++k) {
        Circle c;
        c.r = radius(rng);
        const double reach = 0.9 - c.r;
        do {
            c.x = reach * coord(rng);
            c.y = reach * coord(rng);
        } while (c.x * c.x + c.y * c.y >= reach * reach);
        c.species = static_cast<int>(k % 2);
        out.push_back(c);
    }
    return out;
}

// Indicator fields of the layout; where circles of different species overlap the later one wins.
// With width > 0 each circle contributes a tanh profile and caps the other species by 1 - profile.
[[nodiscard]] inline std::pair<ValueField, ValueField> circle_values(const GridPtr& grid,
                                                                     const std::vector<Circle>& circles,
                                                                     double width = 0.0) {
    check_width(width);
    std::array<ValueField, 2> u{ValueField(grid), ValueField(grid)};
    for (Index i = 0; i < grid->n_radial(); ++i) {
        const double r = grid->r(i);
        for (Index j = 0; j < grid->n_theta(); ++j) {
            const double x = r * std::cos(grid->theta(j)), y = r * std::sin(grid->theta(j));
            for (const auto& c : circles) {
                const double dx = x - c.x, dy = y - c.y;
                if (width == 0.0) {
                    if (dx * dx + dy * dy < c.r * c.r) {
                        u[c.species](i, j) = 1.0;
                        u[1 - c.species](i, j) = 0.0;
                    }
                    continue;
                }
                const double p = edge_profile(c.r - std::hypot(dx, dy), width);
                u[c.species](i, j) = std::max(u[c.species](i, j), p);
                u[1 - c.species](i, j) = std::min(u[1 - c.species](i, j), 1.0 - p);
            }
        }
    }
    return {std::move(u[0]), std::move(u[1])};
}

[[nodiscard]] inline std::pair<CoeffField, CoeffField> initial_semi_random_circles(const GridPtr& grid,
                                                                                  long count_min, long count_max,
                                                                                  unsigned long long seed,
                                                                                  double width = 0.0) {
    auto [a, b] = circle_values(grid, semi_random_circle_layout(count_min, count_max, seed), width);
    return {enforce_parity(analyze(a)), enforce_parity(analyze(b))};
}

// ---------------------------------------------------------------------------
// Bubble counting

struct BubbleStats {
    int count = 0;           // connected components of {U > threshold}
    int boundary_count = 0;  // components touching r = 1
};

// Components of {U > threshold} on the physical half of the grid (r_i > 0).
// Neighbours: adjacent rings, adjacent angles with wrap-around, and across the
// origin on the innermost ring (theta_j and theta_j + pi).
[[nodiscard]] inline BubbleStats bubble_stats(const ValueField& u, double threshold = 0.5) {
    const auto& g = *u.grid;
    const Index rows = (g.n_r() + 1) / 2;  // i = 0 .. (N_r - 1)/2
    const Index nt = g.n_theta();
    std::vector<Index> parent(static_cast<size_t>(rows * nt));
    std::iota(parent.begin(), parent.end(), Index{0});
    auto id = [&](Index i, Index j) { return i * nt + j; };
    std::function<Index(Index)> find = [&](Index a) {
        while (parent[static_cast<size_t>(a)] != a) {
            parent[static_cast<size_t>(a)] = parent[static_cast<size_t>(parent[static_cast<size_t>(a)])];
            a = parent[static_cast<size_t>(a)];
        }
        return a;
    };
    auto unite = [&](Index a, Index b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[static_cast<size_t>(std::max(a, b))] = std::min(a, b);
    };
    auto on = [&](Index i, Index j) { return u(i, j) > threshold; };
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < nt; ++j) {
            if (!on(i, j)) continue;
            if (on(i, (j + 1) % nt)) unite(id(i, j), id(i, (j + 1) % nt));
            if (i + 1 < rows && on(i + 1, j)) unite(id(i, j), id(i + 1, j));
        }
    for (Index j = 0; j < nt / 2; ++j)
        if (on(rows - 1, j) && on(rows - 1, j + nt / 2)) unite(id(rows - 1, j), id(rows - 1, j + nt / 2));

    BubbleStats s;
    std::vector<char> boundary(parent.size(), 0);
    for (Index j = 0; j < nt; ++j)
        if (on(0, j)) boundary[static_cast<size_t>(find(id(0, j)))] = 1;
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < nt; ++j)
            if (on(i, j) && find(id(i, j)) == id(i, j)) {
                ++s.count;
                if (boundary[static_cast<size_t>(id(i, j))]) ++s.boundary_count;
            }
    return s;
}

[[nodiscard]] inline int bubble_count(const ValueField& u, double threshold = 0.5) {
    return bubble_stats(u, threshold).count;
}

// ---------------------------------------------------------------------------
// Runs

// Initial fields (one for OK, two for NO) selected by the configuration.
[[nodiscard]] inline std::vector<CoeffField> make_initial(const GridPtr& grid, const SimulationConfig& c) {
    switch (c.resolved_initial()) {
        case InitialKind::Disk:
            if (c.model == ModelKind::OK) return {initial_disk_ok(grid, c.omega, c.smoothing)};
            return {initial_disk_ok(grid, c.omega1, c.smoothing), CoeffField(grid)};
        case InitialKind::TwoDisks: {
            auto [a, b] = initial_two_disks_no(grid, c.model == ModelKind::OK ? c.omega : c.omega1, c.omega2,
                                               c.smoothing);
            if (c.model == ModelKind::OK) return {a + b};
            return {a, b};
        }
        case InitialKind::RandomBlocks:
            if (c.model == ModelKind::OK) return {initial_random_blocks(grid, c.ratio, c.seed)};
            return {initial_random_blocks(grid, c.ratio, c.seed), initial_random_blocks(grid, c.ratio, c.seed + 1)};
        case InitialKind::SemiRandomCircles: {
            auto [a, b] = initial_semi_random_circles(grid, c.circles_min, c.circles_max, c.seed, c.smoothing);
            if (c.model == ModelKind::OK) return {a};
            return {a, b};
        }
    }
    throw ParameterError("make_initial: unknown initial-data kind");
}

namespace detail {

// Type-erased single-model driver used by the harness.
class Simulation {
public:
    Simulation(const SimulationConfig& c, GridPtr grid, std::vector<CoeffField> init,
               std::shared_ptr<const HelmholtzSolver> solver = nullptr)
        : model_(c.model) {
        if (!solver) solver = std::make_shared<const HelmholtzSolver>(grid);
        if (model_ == ModelKind::OK) {
            ok_ = std::make_unique<OKStepper>(solver, c.ok_params());
            ok_state_ = OKState::initial(std::move(init.at(0)));
        } else {
            no_ = std::make_unique<NOStepper>(solver, c.no_params());
            no_state_ = NOState::initial(std::move(init.at(0)), std::move(init.at(1)));
        }
    }

    void step() {
        if (ok_)
            ok_state_ = ok_->step(ok_state_);
        else
            no_state_ = no_->step(no_state_);
    }

    [[nodiscard]] long steps() const { return ok_ ? ok_state_.step : no_state_.step; }
    [[nodiscard]] double time() const { return ok_ ? ok_state_.time : no_state_.time; }
    [[nodiscard]] double tau() const { return ok_ ? ok_->params().tau : no_->params().tau; }
    [[nodiscard]] const HelmholtzSolver& solver() const { return ok_ ? ok_->solver() : no_->solver(); }

    [[nodiscard]] std::vector<CoeffField> fields() const {
        if (ok_) return {ok_state_.u};
        return {no_state_.u[0], no_state_.u[1]};
    }

    [[nodiscard]] double change_rate() const {
        return ok_ ? ok_change_rate(ok_state_, tau()) : no_change_rate(no_state_, tau());
    }

    [[nodiscard]] double energy() const {
        if (ok_) return ok_energy(ok_state_.u, ok_->params(), solver()).total;
        return no_energy(no_state_.u[0], no_state_.u[1], no_->params(), solver()).total;
    }

    // Returns (E_raw, E_modified) with the supplied stability constants.
    [[nodiscard]] std::pair<double, double> energies(const std::array<double, 2>& C) const {
        if (ok_) {
            const double raw = ok_energy(ok_state_.u, ok_->params(), solver()).total;
            const auto& p = ok_->params();
            return {raw, raw + increment_terms(ok_state_.u, ok_state_.u_prev, p.kappa, p.epsilon, p.tau, C[0],
                                               p.gamma * p.beta, solver())};
        }
        const auto& p = no_->params();
        const double raw = no_energy(no_state_.u[0], no_state_.u[1], p, solver()).total;
        double mod = raw;
        for (int i = 0; i < 2; ++i)
            mod += increment_terms(no_state_.u[i], no_state_.u_prev[i], p.kappa[i], p.epsilon, p.tau, C[i],
                                   p.gamma(i, i) * p.beta[i], solver());
        return {raw, mod};
    }

    [[nodiscard]] std::array<double, 2> stability_constants(double invlap_norm) const {
        if (ok_) {
            const double c = ok_stability_constant(ok_->params(), invlap_norm);
            return {c, c};
        }
        return no_stability_constants(no_->params(), invlap_norm);
    }

    [[nodiscard]] double volume() const {
        if (ok_) return disk_integral(ok_state_.u);
        return disk_integral(no_state_.u[0]) + disk_integral(no_state_.u[1]);
    }

private:
    ModelKind model_;
    std::unique_ptr<OKStepper> ok_;
    std::unique_ptr<NOStepper> no_;
    OKState ok_state_;
    NOState no_state_;
};

inline long steps_for(double T, double tau) {
    const double n = T / tau;
    const long k = std::lround(n);
    if (k < 1 || std::abs(n - static_cast<double>(k)) > 1e-8 * n)
        throw ParameterError("time step " + std::to_string(tau) + " does not divide T = " + std::to_string(T));
    return k;
}

inline double field_error(const std::vector<CoeffField>& a, const std::vector<CoeffField>& b, NormKind norm) {
    double e = 0.0;
    for (size_t s = 0; s < a.size(); ++s) {
        const ValueField d = synthesize(a[s] - b[s]);
        e = std::max(e, norm == NormKind::Linf ? linf_norm(d) : area_l2_norm(d));
    }
    return e;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convergence study

struct ConvergenceRow {
    double tau = 0.0;
    double error = 0.0;
    double rate = std::numeric_limits<double>::quiet_NaN();  // NaN on the first row
};

struct ConvergenceReport {
    ModelKind model = ModelKind::OK;
    std::vector<ConvergenceRow> rows;
    double benchmark_tau = 0.0;
    NormKind norm = NormKind::Linf;
    double epsilon_multiplier = 0.0;  // epsilon / h
    double T = 0.0;
    bool complete = true;
    std::string failure;  // message of the run that aborted the study
};

// Run every tau (and the benchmark) to time T from the configured initial data and
// report errors against the benchmark with rates log2(e_{k-1} / e_k).
// Errors for the two-species model take the larger of the two species errors.
[[nodiscard]] inline ConvergenceReport convergence_study(const SimulationConfig& cfg, std::vector<double> taus,
                                                         double benchmark_tau, double T,
                                                         const std::function<void(const std::string&)>& log = {}) {
    for (size_t i = 1; i < taus.size(); ++i)
        if (!(taus[i] < taus[i - 1])) throw ParameterError("convergence_study: taus must be strictly decreasing");
    if (taus.empty()) throw ParameterError("convergence_study: no time steps given");
    if (!(benchmark_tau > 0) || benchmark_tau > taus.back())
        throw ParameterError("convergence_study: benchmark_tau must be positive and <= every tau");
    if (auto bad = validate_config(cfg); !bad.empty()) throw ConfigError(bad);

    ConvergenceReport rep;
    rep.model = cfg.model;
    rep.benchmark_tau = benchmark_tau;
    rep.norm = cfg.norm;
    rep.epsilon_multiplier = cfg.resolved_epsilon() / cfg.h();
    rep.T = T;

    const GridPtr grid = make_grid(cfg.n_r, cfg.n_theta);
    const auto solver = std::make_shared<const HelmholtzSolver>(grid);
    const auto init = make_initial(grid, cfg);
    auto run = [&](double tau) {
        SimulationConfig c = cfg;
        c.tau = tau;
        detail::Simulation sim(c, grid, init, solver);
        const long n = detail::steps_for(T, tau);
        for (long k = 0; k < n; ++k) sim.step();
        return sim.fields();
    };

    std::vector<CoeffField> ref;
    try {
        if (log) log("benchmark tau = " + detail::format_double(benchmark_tau));
        ref = run(benchmark_tau);
    } catch (const SolverError& e) {
        rep.complete = false;
        rep.failure = std::string("benchmark run failed: ") + e.what();
        return rep;
    }
    for (double tau : taus) {
        try {
            if (log) log("tau = " + detail::format_double(tau));
            const auto u = run(tau);
            ConvergenceRow row;
            row.tau = tau;
            row.error = detail::field_error(u, ref, cfg.norm);
            if (!rep.rows.empty() && row.error > 0 && rep.rows.back().error > 0)
                row.rate = std::log2(rep.rows.back().error / row.error);
            rep.rows.push_back(row);
        } catch (const SolverError& e) {
            rep.complete = false;
            rep.failure = "run with tau = " + detail::format_double(tau) + " failed: " + e.what();
            return rep;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Coarsening runs

enum class StopReason { Tolerance, Horizon, Failure };

[[nodiscard]] inline const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::Tolerance: return "tolerance";
        case StopReason::Horizon: return "horizon";
        case StopReason::Failure: return "failure";
    }
    return "unknown";
}

struct Snapshot {
    double time = 0.0;
    long step = 0;
    std::vector<CoeffField> fields;  // one per species
};

struct RunArtifacts {
    std::vector<Snapshot> snapshots;  // sorted by time
    EnergyTrace trace;
    StopReason stop_reason = StopReason::Horizon;
    std::string failure;
    std::vector<CoeffField> final_fields;  // last good state
    double final_time = 0.0;
    long steps = 0;
    double final_change_rate = 0.0;
    int bubble_count = 0;           // species 1 (U for OK)
    int boundary_bubbles = 0;
    std::vector<int> bubble_counts;  // per species
    double invlap_norm = 0.0;
};

struct RunOptions {
    std::vector<double> snapshot_times;
    long energy_every = 1;
    // Called after every step with (step, time, change rate); return false to stop early.
    std::function<bool(long, double, double)> progress;
};

// Advance from `init` until the stopping criterion holds or T_final is reached,
// recording energies and snapshots. Solver failures end the run with
// StopReason::Failure and keep the last good state.
[[nodiscard]] inline RunArtifacts run_coarsening(const SimulationConfig& cfg, std::vector<CoeffField> init,
                                                 const RunOptions& opt = {}) {
    if (auto bad = validate_config(cfg); !bad.empty()) throw ConfigError(bad);
    const GridPtr grid = init.at(0).grid;
    const auto solver = std::make_shared<const HelmholtzSolver>(grid);
    detail::Simulation sim(cfg, grid, std::move(init), solver);

    RunArtifacts art;
    art.invlap_norm = estimate_invlap_norm_detailed(*solver).value;
    const auto C = sim.stability_constants(art.invlap_norm);
    art.trace.stability_constant = std::max(C[0], C[1]);
    art.trace.theorem_regime = cfg.tau <= 1.0 / (3.0 * art.trace.stability_constant);

    std::vector<double> snaps = opt.snapshot_times;
    std::sort(snaps.begin(), snaps.end());
    size_t next_snap = 0;
    const double tau = cfg.tau;
    auto take_snapshots = [&]() {
        while (next_snap < snaps.size() && sim.time() >= snaps[next_snap] - 0.5 * tau) {
            art.snapshots.push_back({sim.time(), sim.steps(), sim.fields()});
            ++next_snap;
        }
    };
    auto record = [&]() {
        const auto [raw, mod] = sim.energies(C);
        art.trace.push({sim.steps(), sim.time(), raw, mod, sim.volume()});
    };

    record();
    take_snapshots();
    const long max_steps = static_cast<long>(std::floor(cfg.T_final / tau + 1e-9));
    art.stop_reason = StopReason::Horizon;
    try {
        while (sim.steps() < max_steps) {
            sim.step();
            const double rate = sim.change_rate();
            art.final_change_rate = rate;
            if (!std::isfinite(rate)) throw SolverError("non-finite state at step " + std::to_string(sim.steps()));
            const bool stop = rate <= cfg.stop_tol;
            if (stop || sim.steps() % cfg.energy_every == 0 || sim.steps() == max_steps) record();
            take_snapshots();
            if (stop) {
                art.stop_reason = StopReason::Tolerance;
                break;
            }
            if (opt.progress && !opt.progress(sim.steps(), sim.time(), rate)) break;
        }
    } catch (const SolverError& e) {
        art.stop_reason = StopReason::Failure;
        art.failure = e.what();
    }
    art.final_fields = sim.fields();
    art.final_time = sim.time();
    art.steps = sim.steps();
    for (size_t s = 0; s < art.final_fields.size(); ++s) {
        const auto st = bubble_stats(synthesize(art.final_fields[s]));
        art.bubble_counts.push_back(st.count);
        if (s == 0) {
            art.bubble_count = st.count;
            art.boundary_bubbles = st.boundary_count;
        }
    }
    return art;
}

// Convenience overload building the grid and initial data from the configuration.
[[nodiscard]] inline RunArtifacts run_coarsening(const SimulationConfig& cfg, const RunOptions& opt = {}) {
    const GridPtr grid = make_grid(cfg.n_r, cfg.n_theta);
    RunOptions o = opt;
    if (o.snapshot_times.empty()) o.snapshot_times = cfg.snapshot_times;
    if (o.energy_every == 1) o.energy_every = cfg.energy_every;
    return run_coarsening(cfg, make_initial(grid, cfg), o);
}

}  // namespace ultradisk
