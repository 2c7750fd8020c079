#pragma once

// CSV writers and readers for snapshots, coefficient sidecars, energy traces
// and convergence reports. Numbers use %.17g so doubles round-trip exactly.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ultradisk/disk_field.hpp"
#include "ultradisk/errors.hpp"
#include "ultradisk/harness.hpp"
#include "ultradisk/phase_field.hpp"

namespace ultradisk {

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    return f;
}

inline void finish(std::ofstream& f, const std::filesystem::path& path) {
    f.flush();
    if (!f) throw IoError("write failed: " + path.string());
}

inline std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for reading");
    return f;
}

inline std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_cell(const std::string& s, const std::filesystem::path& path, long line) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
        throw IoError(path.string() + ":" + std::to_string(line) + ": malformed number '" + s + "'");
    return v;
}

inline void expect_header(std::ifstream& f, const std::string& header, const std::filesystem::path& path) {
    std::string line;
    if (!std::getline(f, line) || line != header)
        throw IoError(path.string() + ": expected header '" + header + "'");
}

}  // namespace detail

// Path of the coefficient sidecar belonging to a snapshot file: name.csv -> name.coeff.csv.
[[nodiscard]] inline std::filesystem::path coeff_sidecar_path(const std::filesystem::path& snapshot) {
    std::filesystem::path p = snapshot;
    p.replace_extension(".coeff.csv");
    return p;
}

// Grid values as `r,theta,value`, rows in (i, j) lexicographic order.
inline void write_values_csv(const ValueField& v, const std::filesystem::path& path) {
    auto f = detail::open_out(path);
    const auto& g = *v.grid;
    f << "r,theta,value\n";
    for (Index i = 0; i < g.n_radial(); ++i)
        for (Index j = 0; j < g.n_theta(); ++j)
            f << detail::g17(g.r(i)) << ',' << detail::g17(g.theta(j)) << ',' << detail::g17(v(i, j)) << '\n';
    detail::finish(f, path);
}

// Coefficients as `k,l,re,im`, k ascending then l from -N_theta/2 to N_theta/2 - 1.
inline void write_coeffs_csv(const CoeffField& c, const std::filesystem::path& path) {
    auto f = detail::open_out(path);
    const auto& g = *c.grid;
    f << "k,l,re,im\n";
    for (Index k = 0; k < g.n_radial(); ++k)
        for (Index l = -g.n_theta() / 2; l < g.n_theta() / 2; ++l) {
            const cplx z = c.at(k, l);
            f << k << ',' << l << ',' << detail::g17(z.real()) << ',' << detail::g17(z.imag()) << '\n';
        }
    detail::finish(f, path);
}

// Snapshot: grid values at `path` plus the coefficient sidecar.
inline void write_snapshot(const CoeffField& c, const std::filesystem::path& path) {
    write_values_csv(synthesize(c), path);
    write_coeffs_csv(c, coeff_sidecar_path(path));
}

[[nodiscard]] inline ValueField read_values_csv(const GridPtr& grid, const std::filesystem::path& path) {
    auto f = detail::open_in(path);
    detail::expect_header(f, "r,theta,value", path);
    ValueField v(grid);
    std::string line;
    long ln = 1;
    for (Index i = 0; i < grid->n_radial(); ++i)
        for (Index j = 0; j < grid->n_theta(); ++j) {
            ++ln;
            if (!std::getline(f, line)) throw IoError(path.string() + ": too few rows for the grid");
            const auto cells = detail::split_csv(line);
            if (cells.size() != 3) throw IoError(path.string() + ":" + std::to_string(ln) + ": expected 3 columns");
            v(i, j) = detail::parse_cell(cells[2], path, ln);
        }
    return v;
}

[[nodiscard]] inline CoeffField read_coeffs_csv(const GridPtr& grid, const std::filesystem::path& path) {
    auto f = detail::open_in(path);
    detail::expect_header(f, "k,l,re,im", path);
    CoeffField c(grid);
    std::string line;
    long ln = 1;
    while (std::getline(f, line)) {
        ++ln;
        if (line.empty()) continue;
        const auto cells = detail::split_csv(line);
        if (cells.size() != 4) throw IoError(path.string() + ":" + std::to_string(ln) + ": expected 4 columns");
        const auto k = static_cast<Index>(detail::parse_cell(cells[0], path, ln));
        const auto l = static_cast<Index>(detail::parse_cell(cells[1], path, ln));
        if (k < 0 || k >= grid->n_radial() || l < -grid->n_theta() / 2 || l >= grid->n_theta() / 2)
            throw IoError(path.string() + ":" + std::to_string(ln) + ": index out of range for the grid");
        c.set(k, l, cplx(detail::parse_cell(cells[2], path, ln), detail::parse_cell(cells[3], path, ln)));
    }
    return c;
}

inline void write_trace(const EnergyTrace& t, const std::filesystem::path& path) {
    auto f = detail::open_out(path);
    f << "step,time,E_raw,E_modified,volume\n";
    for (const auto& r : t.records())
        f << r.step << ',' << detail::g17(r.time) << ',' << detail::g17(r.E_raw) << ',' << detail::g17(r.E_modified)
          << ',' << detail::g17(r.volume) << '\n';
    detail::finish(f, path);
}

[[nodiscard]] inline EnergyTrace read_trace(const std::filesystem::path& path) {
    auto f = detail::open_in(path);
    detail::expect_header(f, "step,time,E_raw,E_modified,volume", path);
    EnergyTrace t;
    std::string line;
    long ln = 1;
    while (std::getline(f, line)) {
        ++ln;
        if (line.empty()) continue;
        const auto c = detail::split_csv(line);
        if (c.size() != 5) throw IoError(path.string() + ":" + std::to_string(ln) + ": expected 5 columns");
        t.push({static_cast<long>(detail::parse_cell(c[0], path, ln)), detail::parse_cell(c[1], path, ln),
                detail::parse_cell(c[2], path, ln), detail::parse_cell(c[3], path, ln),
                detail::parse_cell(c[4], path, ln)});
    }
    return t;
}

// `tau,error,rate`; the first row has an empty rate, the last row is the benchmark
// (error 0, empty rate).
inline void write_report(const ConvergenceReport& r, const std::filesystem::path& path) {
    auto f = detail::open_out(path);
    f << "tau,error,rate\n";
    for (const auto& row : r.rows) {
        f << detail::g17(row.tau) << ',' << detail::g17(row.error) << ',';
        if (std::isfinite(row.rate)) f << detail::g17(row.rate);
        f << '\n';
    }
    f << detail::g17(r.benchmark_tau) << ",0,\n";
    detail::finish(f, path);
}

// Rows of a report file, benchmark row included.
[[nodiscard]] inline std::vector<ConvergenceRow> read_report(const std::filesystem::path& path) {
    auto f = detail::open_in(path);
    detail::expect_header(f, "tau,error,rate", path);
    std::vector<ConvergenceRow> rows;
    std::string line;
    long ln = 1;
    while (std::getline(f, line)) {
        ++ln;
        if (line.empty()) continue;
        const auto c = detail::split_csv(line);
        if (c.size() != 3) throw IoError(path.string() + ":" + std::to_string(ln) + ": expected 3 columns");
        ConvergenceRow row;
        row.tau = detail::parse_cell(c[0], path, ln);
        row.error = detail::parse_cell(c[1], path, ln);
        if (!c[2].empty()) row.rate = detail::parse_cell(c[2], path, ln);
        rows.push_back(row);
    }
    return rows;
}

// Write every artifact of a run under `dir`: snapshot_<n>[_u<s>].csv with sidecars,
// trace.csv, final state and summary.txt.
inline void write_run_artifacts(const RunArtifacts& a, const std::filesystem::path& dir) {
    auto name = [&](const std::string& stem, size_t species, size_t nspecies) {
        return dir / (nspecies == 1 ? stem + ".csv" : stem + "_u" + std::to_string(species + 1) + ".csv");
    };
    for (size_t k = 0; k < a.snapshots.size(); ++k) {
        const auto& s = a.snapshots[k];
        for (size_t sp = 0; sp < s.fields.size(); ++sp)
            write_snapshot(s.fields[sp], name("snapshot_" + std::to_string(k), sp, s.fields.size()));
    }
    for (size_t sp = 0; sp < a.final_fields.size(); ++sp)
        write_snapshot(a.final_fields[sp], name("final", sp, a.final_fields.size()));
    write_trace(a.trace, dir / "trace.csv");

    const auto path = dir / "summary.txt";
    auto f = detail::open_out(path);
    f << "stop_reason = " << to_string(a.stop_reason) << '\n';
    if (!a.failure.empty()) f << "failure = " << a.failure << '\n';
    f << "steps = " << a.steps << '\n';
    f << "final_time = " << detail::g17(a.final_time) << '\n';
    f << "final_change_rate = " << detail::g17(a.final_change_rate) << '\n';
    f << "bubble_count = " << a.bubble_count << '\n';
    f << "boundary_bubbles = " << a.boundary_bubbles << '\n';
    for (size_t sp = 0; sp < a.bubble_counts.size(); ++sp)
        f << "bubble_count_u" << sp + 1 << " = " << a.bubble_counts[sp] << '\n';
    f << "invlap_norm = " << detail::g17(a.invlap_norm) << '\n';
    f << "stability_constant = " << detail::g17(a.trace.stability_constant) << '\n';
    f << "theorem_regime = " << (a.trace.theorem_regime ? "true" : "false") << '\n';
    for (size_t k = 0; k < a.snapshots.size(); ++k)
        f << "snapshot_" << k << "_time = " << detail::g17(a.snapshots[k].time) << '\n';
    detail::finish(f, path);
}

}  // namespace ultradisk
