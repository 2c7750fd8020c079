#pragma once

// Plain-text run configuration: one `key = value` per line, `#` starts a comment.
//
//   model            ok | no                        (required)
//   n_r, n_theta     grid sizes (odd / even)        129, 128
//   epsilon          interface width; overrides epsilon_h
//   epsilon_h        interface width in units of h = 2 pi / n_theta
//   tau, T_final, stop_tol, startup (bdf1 | repeat)
//   gamma, omega, kappa, beta, M                    OK model
//   gamma11, gamma12, gamma21, gamma22, omega1, omega2,
//   kappa1, kappa2, beta1, beta2, M1, M2            NO model
//   coupling         on | off                       NO diagnostic switch
//   initial          disk | two_disks | random_blocks | semi_random_circles
//   seed, ratio, circles_min, circles_max
//   smoothing        tanh width of indicator initial data (0 = sharp)
//   snapshot_times   comma-separated list
//   energy_every     record energies every k steps (1 = every step)
//   taus, benchmark_tau, T_convergence              convergence study
//   norm             linf | l2
//   output_dir, threads

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ultradisk/errors.hpp"
#include "ultradisk/phase_field.hpp"

namespace ultradisk {

enum class ModelKind { OK, NO };
enum class NormKind { Linf, L2 };
enum class InitialKind { Disk, TwoDisks, RandomBlocks, SemiRandomCircles };

// Validation failure carrying every violation found.
class ConfigError : public ParameterError {
public:
    explicit ConfigError(std::vector<std::string> errs)
        : ParameterError(join(errs)), errors_(std::move(errs)) {}
    [[nodiscard]] const std::vector<std::string>& errors() const { return errors_; }

private:
    static std::string join(const std::vector<std::string>& e) {
        std::string s;
        for (size_t i = 0; i < e.size(); ++i) s += (i ? "\n" : "") + e[i];
        return s;
    }
    std::vector<std::string> errors_;
};

struct SimulationConfig {
    ModelKind model = ModelKind::OK;
    long n_r = 129;
    long n_theta = 128;
    std::optional<double> epsilon;  // absolute width; wins over epsilon_h
    double epsilon_h = 1.0;
    double tau = 5e-4;
    double T_final = 10.0;
    double stop_tol = 1e-5;
    StartupKind startup = StartupKind::Bdf1;

    // OK
    double gamma = 2500.0;
    double omega = 0.15;
    double kappa = 2000.0;
    double beta = 0.0;
    double M = 2000.0;

    // NO
    double gamma11 = 6000.0, gamma12 = 0.0, gamma21 = 0.0, gamma22 = 6000.0;
    double omega1 = 0.09, omega2 = 0.09;
    double kappa1 = 2000.0, kappa2 = 2000.0;
    double beta1 = 0.0, beta2 = 0.0;
    double M1 = 2000.0, M2 = 2000.0;
    bool coupling = true;

    std::optional<InitialKind> initial;  // default depends on the model
    unsigned long long seed = 1;
    long ratio = 8;
    long circles_min = 6, circles_max = 14;
    double smoothing = 0.0;
    std::vector<double> snapshot_times;
    long energy_every = 1;

    std::vector<double> taus{5e-4, 2.5e-4, 1.25e-4, 6.25e-5, 3.125e-5};
    double benchmark_tau = 2e-6;
    double T_convergence = 0.01;
    NormKind norm = NormKind::Linf;

    std::string output_dir = "out";
    long threads = 1;

    friend bool operator==(const SimulationConfig&, const SimulationConfig&) = default;

    [[nodiscard]] double h() const { return 2.0 * 3.14159265358979323846 / static_cast<double>(n_theta); }
    [[nodiscard]] double resolved_epsilon() const { return epsilon ? *epsilon : epsilon_h * h(); }
    [[nodiscard]] InitialKind resolved_initial() const {
        if (initial) return *initial;
        return model == ModelKind::OK ? InitialKind::RandomBlocks : InitialKind::SemiRandomCircles;
    }

    [[nodiscard]] OKParams ok_params() const {
        OKParams p;
        p.epsilon = resolved_epsilon();
        p.gamma = gamma;
        p.omega = omega;
        p.kappa = kappa;
        p.beta = beta;
        p.M = M;
        p.tau = tau;
        p.T_final = T_final;
        p.stop_tol = stop_tol;
        p.startup = startup;
        return p;
    }

    [[nodiscard]] NOParams no_params() const {
        NOParams p;
        p.epsilon = resolved_epsilon();
        p.gamma << gamma11, gamma12, gamma21, gamma22;
        p.omega = {omega1, omega2};
        p.kappa = {kappa1, kappa2};
        p.beta = {beta1, beta2};
        p.M = {M1, M2};
        p.tau = tau;
        p.T_final = T_final;
        p.stop_tol = stop_tol;
        p.startup = startup;
        p.coupling_disabled = !coupling;
        return p;
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::optional<double> to_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (errno == ERANGE || end != s.c_str() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<long long> to_integer(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (errno == ERANGE || end != s.c_str() + s.size()) return std::nullopt;
    return v;
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

// Check the parameter invariants; returns human-readable violations (empty if valid).
[[nodiscard]] inline std::vector<std::string> validate_config(const SimulationConfig& c) {
    std::vector<std::string> bad;
    if (c.n_r < 3 || c.n_r % 2 == 0) bad.push_back("n_r must be an odd integer >= 3");
    if (c.n_theta < 4 || c.n_theta % 2 != 0) bad.push_back("n_theta must be an even integer >= 4");
    const auto params = c.model == ModelKind::OK ? c.ok_params().violations() : c.no_params().violations();
    bad.insert(bad.end(), params.begin(), params.end());
    if (c.energy_every < 1) bad.push_back("energy_every must be >= 1");
    if (c.threads < 1) bad.push_back("threads must be >= 1");
    if (c.circles_min < 1 || c.circles_max < c.circles_min) bad.push_back("need 1 <= circles_min <= circles_max");
    if (c.ratio < 4 || c.ratio % 4 != 0) bad.push_back("ratio must be a positive multiple of 4");
    if (!(c.smoothing >= 0) || !std::isfinite(c.smoothing)) bad.push_back("smoothing must be >= 0");
    for (size_t i = 1; i < c.taus.size(); ++i)
        if (!(c.taus[i] < c.taus[i - 1])) {
            bad.push_back("taus must be strictly decreasing");
            break;
        }
    for (double t : c.taus)
        if (!(t > 0)) {
            bad.push_back("taus must be positive");
            break;
        }
    if (!(c.benchmark_tau > 0)) bad.push_back("benchmark_tau must be > 0");
    if (!c.taus.empty() && c.benchmark_tau > c.taus.back()) bad.push_back("benchmark_tau must not exceed the smallest tau");
    if (!(c.T_convergence > 0)) bad.push_back("T_convergence must be > 0");
    for (size_t i = 1; i < c.snapshot_times.size(); ++i)
        if (!(c.snapshot_times[i] > c.snapshot_times[i - 1])) {
            bad.push_back("snapshot_times must be strictly increasing");
            break;
        }
    return bad;
}

// Parse and validate configuration text. Throws ConfigError listing every problem.
[[nodiscard]] inline SimulationConfig parse_config(std::string_view text) {
    SimulationConfig c;
    std::vector<std::string> errs;
    std::map<std::string, long> seen;  // key -> line
    bool have_model = false;

    std::istringstream in{std::string(text)};
    std::string raw;
    long line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const std::string line = detail::trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string at = "line " + std::to_string(line_no) + ": ";
        if (eq == std::string::npos) {
            errs.push_back(at + "expected `key = value`");
            continue;
        }
        const std::string key = detail::trim(std::string_view(line).substr(0, eq));
        const std::string val = detail::trim(std::string_view(line).substr(eq + 1));
        if (seen.count(key)) {
            errs.push_back(at + "duplicate key " + key + " (first set on line " + std::to_string(seen[key]) + ")");
            continue;
        }
        seen[key] = line_no;

        auto number = [&](double& dst) {
            if (auto v = detail::to_double(val))
                dst = *v;
            else
                errs.push_back(at + key + " expects a number, got '" + val + "'");
        };
        auto integer = [&](long& dst) {
            if (auto v = detail::to_integer(val))
                dst = static_cast<long>(*v);
            else
                errs.push_back(at + key + " expects an integer, got '" + val + "'");
        };
        auto number_list = [&](std::vector<double>& dst) {
            dst.clear();
            if (val.empty()) return;
            std::stringstream ss(val);
            std::string item;
            while (std::getline(ss, item, ',')) {
                if (auto v = detail::to_double(detail::trim(item))) {
                    dst.push_back(*v);
                } else {
                    errs.push_back(at + key + " expects a comma-separated list of numbers, got '" + val + "'");
                    return;
                }
            }
        };
        auto choice = [&](std::initializer_list<const char*> opts) -> int {
            int i = 0;
            for (const char* o : opts) {
                if (val == o) return i;
                ++i;
            }
            std::string list;
            for (const char* o : opts) list += std::string(list.empty() ? "" : ", ") + o;
            errs.push_back(at + key + " must be one of {" + list + "}, got '" + val + "'");
            return -1;
        };

        if (key == "model") {
            if (int k = choice({"ok", "no"}); k >= 0) {
                c.model = k == 0 ? ModelKind::OK : ModelKind::NO;
                have_model = true;
            }
        } else if (key == "n_r") {
            integer(c.n_r);
        } else if (key == "n_theta") {
            integer(c.n_theta);
        } else if (key == "epsilon") {
            double v = 0;
            number(v);
            c.epsilon = v;
        } else if (key == "epsilon_h") {
            number(c.epsilon_h);
        } else if (key == "tau") {
            number(c.tau);
        } else if (key == "T_final") {
            number(c.T_final);
        } else if (key == "stop_tol") {
            number(c.stop_tol);
        } else if (key == "startup") {
            if (int k = choice({"bdf1", "repeat"}); k >= 0) c.startup = k == 0 ? StartupKind::Bdf1 : StartupKind::Repeat;
        } else if (key == "gamma") {
            number(c.gamma);
        } else if (key == "omega") {
            number(c.omega);
        } else if (key == "kappa") {
            number(c.kappa);
        } else if (key == "beta") {
            number(c.beta);
        } else if (key == "M") {
            number(c.M);
        } else if (key == "gamma11") {
            number(c.gamma11);
        } else if (key == "gamma12") {
            number(c.gamma12);
        } else if (key == "gamma21") {
            number(c.gamma21);
        } else if (key == "gamma22") {
            number(c.gamma22);
        } else if (key == "omega1") {
            number(c.omega1);
        } else if (key == "omega2") {
            number(c.omega2);
        } else if (key == "kappa1") {
            number(c.kappa1);
        } else if (key == "kappa2") {
            number(c.kappa2);
        } else if (key == "beta1") {
            number(c.beta1);
        } else if (key == "beta2") {
            number(c.beta2);
        } else if (key == "M1") {
            number(c.M1);
        } else if (key == "M2") {
            number(c.M2);
        } else if (key == "coupling") {
            if (int k = choice({"on", "off"}); k >= 0) c.coupling = k == 0;
        } else if (key == "initial") {
            if (int k = choice({"disk", "two_disks", "random_blocks", "semi_random_circles"}); k >= 0)
                c.initial = static_cast<InitialKind>(k);
        } else if (key == "seed") {
            if (auto v = detail::to_integer(val); v && *v >= 0)
                c.seed = static_cast<unsigned long long>(*v);
            else
                errs.push_back(at + "seed expects a non-negative integer, got '" + val + "'");
        } else if (key == "ratio") {
            integer(c.ratio);
        } else if (key == "circles_min") {
            integer(c.circles_min);
        } else if (key == "circles_max") {
            integer(c.circles_max);
        } else if (key == "smoothing") {
            number(c.smoothing);
        } else if (key == "snapshot_times") {
            number_list(c.snapshot_times);
        } else if (key == "energy_every") {
            integer(c.energy_every);
        } else if (key == "taus") {
            number_list(c.taus);
        } else if (key == "benchmark_tau") {
            number(c.benchmark_tau);
        } else if (key == "T_convergence") {
            number(c.T_convergence);
        } else if (key == "norm") {
            if (int k = choice({"linf", "l2"}); k >= 0) c.norm = k == 0 ? NormKind::Linf : NormKind::L2;
        } else if (key == "output_dir") {
            if (val.empty()) errs.push_back(at + "output_dir must not be empty");
            c.output_dir = val;
        } else if (key == "threads") {
            integer(c.threads);
        } else {
            errs.push_back(at + "unknown key '" + key + "'");
        }
    }
    if (!have_model && seen.count("model") == 0) errs.insert(errs.begin(), "missing required key: model");
    if (errs.empty()) {
        // Each violation starts with the offending key; point at its line when it was set.
        for (auto& v : validate_config(c)) {
            std::string key = v.substr(0, v.find(' '));
            if (key == "epsilon" && !seen.count("epsilon")) key = "epsilon_h";
            const auto it = seen.find(key);
            errs.push_back(it == seen.end() ? v : "line " + std::to_string(it->second) + ": " + v);
        }
    }
    if (!errs.empty()) throw ConfigError(std::move(errs));
    return c;
}

// Canonical text form; parse_config(format_config(c)) == c.
[[nodiscard]] inline std::string format_config(const SimulationConfig& c) {
    std::ostringstream o;
    auto num = [&](const char* k, double v) { o << k << " = " << detail::format_double(v) << '\n'; };
    auto list = [&](const char* k, const std::vector<double>& v) {
        o << k << " =";
        for (size_t i = 0; i < v.size(); ++i) o << (i ? ", " : " ") << detail::format_double(v[i]);
        o << '\n';
    };
    o << "model = " << (c.model == ModelKind::OK ? "ok" : "no") << '\n';
    o << "n_r = " << c.n_r << '\n' << "n_theta = " << c.n_theta << '\n';
    if (c.epsilon) num("epsilon", *c.epsilon);
    num("epsilon_h", c.epsilon_h);
    num("tau", c.tau);
    num("T_final", c.T_final);
    num("stop_tol", c.stop_tol);
    o << "startup = " << (c.startup == StartupKind::Bdf1 ? "bdf1" : "repeat") << '\n';
    num("gamma", c.gamma);
    num("omega", c.omega);
    num("kappa", c.kappa);
    num("beta", c.beta);
    num("M", c.M);
    num("gamma11", c.gamma11);
    num("gamma12", c.gamma12);
    num("gamma21", c.gamma21);
    num("gamma22", c.gamma22);
    num("omega1", c.omega1);
    num("omega2", c.omega2);
    num("kappa1", c.kappa1);
    num("kappa2", c.kappa2);
    num("beta1", c.beta1);
    num("beta2", c.beta2);
    num("M1", c.M1);
    num("M2", c.M2);
    o << "coupling = " << (c.coupling ? "on" : "off") << '\n';
    if (c.initial) {
        static const char* names[] = {"disk", "two_disks", "random_blocks", "semi_random_circles"};
        o << "initial = " << names[static_cast<int>(*c.initial)] << '\n';
    }
    o << "seed = " << c.seed << '\n' << "ratio = " << c.ratio << '\n';
    o << "circles_min = " << c.circles_min << '\n' << "circles_max = " << c.circles_max << '\n';
    num("smoothing", c.smoothing);
    list("snapshot_times", c.snapshot_times);
    o << "energy_every = " << c.energy_every << '\n';
    list("taus", c.taus);
    num("benchmark_tau", c.benchmark_tau);
    num("T_convergence", c.T_convergence);
    o << "norm = " << (c.norm == NormKind::Linf ? "linf" : "l2") << '\n';
    o << "output_dir = " << c.output_dir << '\n';
    o << "threads = " << c.threads << '\n';
    return o.str();
}

}  // namespace ultradisk
