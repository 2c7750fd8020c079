#pragma once

// Boundary-bordered ultraspherical solvers: the 1D two-point problem
// u'' + u' + a u = f on [-1, 1], and the Neumann Helmholtz problem
// -Lap u + alpha u = f on the unit disk, solved Fourier mode by Fourier mode
// in the r^2-premultiplied form
//   -r^2 u_l'' - r u_l' + l^2 u_l + alpha r^2 u_l = r^2 f_l,  r in [-1, 1].

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <shared_mutex>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ultradisk/chebyshev.hpp"
#include "ultradisk/disk_field.hpp"
#include "ultradisk/errors.hpp"
#include "ultradisk/ultraspherical.hpp"

namespace ultradisk {

enum class BoundaryKind { Dirichlet, Neumann };

// The two boundary rows: values or first derivatives of T_k at x = 1 and x = -1.
[[nodiscard]] inline Eigen::MatrixXd boundary_rows(BoundaryKind kind, Index n) {
    Eigen::MatrixXd b(2, n);
    for (Index k = 0; k < n; ++k) {
        const double sign = (k % 2 == 0) ? 1.0 : -1.0;
        if (kind == BoundaryKind::Dirichlet) {
            b(0, k) = 1.0;
            b(1, k) = sign;
        } else {
            const double k2 = static_cast<double>(k * k);
            b(0, k) = k2;
            b(1, k) = -sign * k2;
        }
    }
    return b;
}

// ---------------------------------------------------------------------------
// 1D boundary value problem

struct BvpSolution {
    Eigen::VectorXd coeffs;          // T coefficients of u
    bool rank_deficient = false;     // true when the bordered system is singular
    Eigen::VectorXd null_direction;  // unit null vector when rank deficient
    double rcond = 0.0;              // smallest / largest singular value
};

// Solve u'' + u' + a(x) u = f(x) with homogeneous Dirichlet or Neumann conditions.
// A singular but consistent system returns the minimal-norm solution together with
// the null direction; an inconsistent one throws SolverError.
[[nodiscard]] inline BvpSolution solve_bvp_1d(std::span<const double> a, std::span<const double> f, BoundaryKind bc,
                                              Index n) {
    if (n < 4) throw ParameterError("solve_bvp_1d: n must be >= 4");
    if (static_cast<Index>(a.size()) > n || static_cast<Index>(f.size()) > n)
        throw ParameterError("solve_bvp_1d: coefficient vectors longer than n");

    const auto d2 = diff_operator(2, n).dense();
    const auto s12d1 = (conversion_operator(1, n) * diff_operator(1, n)).dense();
    Eigen::MatrixXd op = d2 + s12d1;
    if (!a.empty()) op += mult_to_ultra(a, 2, n).dense();

    Eigen::VectorXd fh = Eigen::VectorXd::Zero(n);
    for (size_t k = 0; k < f.size(); ++k) fh(static_cast<Index>(k)) = f[k];
    const Eigen::VectorXd rhs_full = conversion_chain(BasisId{0}, BasisId{2}, n).apply<double>(fh);

    Eigen::MatrixXd sys(n, n);
    sys.topRows(n - 2) = op.topRows(n - 2);
    sys.bottomRows(2) = boundary_rows(bc, n);
    Eigen::VectorXd rhs(n);
    rhs.head(n - 2) = rhs_full.head(n - 2);
    rhs.tail(2).setZero();

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    BvpSolution out;
    out.rcond = sv(n - 1) / sv(0);
    svd.setThreshold(1e-10);
    out.coeffs = svd.solve(rhs);
    if (svd.rank() < n) {
        out.rank_deficient = true;
        out.null_direction = svd.matrixV().col(n - 1);
        const double resid = (sys * out.coeffs - rhs).norm();
        if (resid > 1e-8 * (1.0 + rhs.norm())) {
            std::ostringstream msg;
            msg << "solve_bvp_1d: singular system (rank " << svd.rank() << " of " << n << ", rcond " << out.rcond
                << ") with inconsistent right-hand side (residual " << resid << ")";
            throw SolverError(msg.str());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Disk Helmholtz / Poisson

namespace detail {

// Pieces of the r^2-premultiplied mode operator, exact n x n truncations.
struct ModeOperatorParts {
    Eigen::MatrixXd base;    // -M2[r^2] D02 - S12 M1[r] D01
    Eigen::MatrixXd s02;     // S_{0,2}
    Eigen::MatrixXd r2conv;  // S_{0,2} M_T[r^2]
};

inline ModeOperatorParts mode_operator_parts(Index n) {
    const Index np = n + 6;
    const std::vector<double> r1{0.0, 1.0};
    const std::vector<double> r2{0.5, 0.0, 0.5};
    const auto m2 = mult_operator_ultra(r2, 2, np);
    const auto m1 = mult_operator_ultra(r1, 1, np);
    const auto lap = (-1.0) * (m2 * diff_operator(2, np)) + (-1.0) * (conversion_operator(1, np) * (m1 * diff_operator(1, np)));
    ModeOperatorParts p;
    p.base = lap.dense().topLeftCorner(n, n);
    p.s02 = conversion_chain(BasisId{0}, BasisId{2}, n).dense();
    p.r2conv = mult_to_ultra(r2, 2, n).dense();
    return p;
}

}  // namespace detail

// L = -M2[r^2] D02 - S12 M1[r] D01 + l^2 S02 + alpha S02 M_T[r^2], mapping T
// coefficients of u_l to C^(2) coefficients of r^2 (-Lap + alpha) applied to u_l e^{il theta}.
[[nodiscard]] inline SpectralOperator assemble_mode_operator(Index l, double alpha, Index n) {
    if (n < 4) throw ParameterError("assemble_mode_operator: n must be >= 4");
    const auto p = detail::mode_operator_parts(n);
    const double l2 = static_cast<double>(l * l);
    return SpectralOperator::from_dense(p.base + l2 * p.s02 + alpha * p.r2conv, BasisId{0}, BasisId{2});
}

// Bordered mode system: top n-2 rows of the mode operator, Neumann rows below.
struct ModeSystem {
    Index l = 0;
    double alpha = 0.0;
    SpectralOperator matrix;
};

[[nodiscard]] inline ModeSystem mode_system(Index l, double alpha, Index n) {
    return ModeSystem{l, alpha, assemble_mode_operator(l, alpha, n).with_border(boundary_rows(BoundaryKind::Neumann, n))};
}

// Per-grid Neumann Helmholtz solver. Mode systems split exactly into an
// even-k and an odd-k block (the operator preserves parity and the Neumann
// rows combine into one row per parity); block LU factorizations are cached
// per (|l|, alpha) and shared safely between threads.
class HelmholtzSolver {
public:
    explicit HelmholtzSolver(GridPtr grid) : grid_(std::move(grid)) {
        const Index n = grid_->n_radial();
        parts_ = detail::mode_operator_parts(n);
        // Value-space derivative matrices acting on T coefficients.
        const auto& r = grid_->r_nodes();
        const auto e1 = cheb::basis_matrix(1, r, n);
        const auto e2 = cheb::basis_matrix(2, r, n);
        d1_values_ = e1 * diff_operator(1, n).dense();
        d2_values_ = e2 * diff_operator(2, n).dense();
    }

    [[nodiscard]] const GridPtr& grid() const { return grid_; }

    // Solve -Lap u + alpha u = f with u_r = 0 at r = 1. Every mode must be
    // nonsingular (alpha > 0); alpha = 0 fails on mode 0, use inverse_laplacian.
    [[nodiscard]] CoeffField solve(double alpha, const CoeffField& f) const {
        require_same_grid(grid_, f.grid, "HelmholtzSolver::solve");
        if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ParameterError("helmholtz_solve: alpha must be finite and >= 0");
        if (!f.all_finite()) throw SolverError("helmholtz_solve: right-hand side contains NaN or Inf");
        return solve_modes(alpha, f, /*mean_closure=*/false);
    }

    // Solve -Lap u + alpha u = f + c Lap v with u_r = 0 at r = 1. The Lap v term enters the
    // r^2-weighted equations as the exact polynomial -c (r^2-weighted -Lap) v, so no
    // division by r is needed.
    [[nodiscard]] CoeffField solve(double alpha, const CoeffField& f, const CoeffField& v, double c) const {
        require_same_grid(grid_, v.grid, "HelmholtzSolver::solve");
        if (!v.all_finite()) throw SolverError("helmholtz_solve: Laplacian source contains NaN or Inf");
        require_same_grid(grid_, f.grid, "HelmholtzSolver::solve");
        if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ParameterError("helmholtz_solve: alpha must be finite and >= 0");
        if (!f.all_finite()) throw SolverError("helmholtz_solve: right-hand side contains NaN or Inf");
        return solve_modes(alpha, f, /*mean_closure=*/false, &v, c);
    }

    // Zero-mean inverse of -Lap with Neumann conditions. The right-hand side is
    // projected to zero disk mean; mode 0 is closed by the zero-mean row.
    [[nodiscard]] CoeffField inverse_laplacian(const CoeffField& f) const {
        require_same_grid(grid_, f.grid, "HelmholtzSolver::inverse_laplacian");
        if (!f.all_finite()) throw SolverError("inverse_laplacian: right-hand side contains NaN or Inf");
        CoeffField g = f;
        g.add_constant(-disk_integral(f) / std::numbers::pi);
        return solve_modes(0.0, g, /*mean_closure=*/true);
    }

    // Lap u at the grid nodes: u_rr + u_r / r + u_thetatheta / r^2 (no node sits at r = 0).
    [[nodiscard]] ValueField laplacian_values(const CoeffField& u) const {
        require_same_grid(grid_, u.grid, "laplacian_values");
        const auto& g = *grid_;
        const Eigen::MatrixXcd v = g.synthesis_matrix() * u.coeffs;
        const Eigen::MatrixXcd vr = d1_values_ * u.coeffs;
        Eigen::MatrixXcd lap = d2_values_ * u.coeffs;
        for (Index col = 0; col < g.n_theta(); ++col) {
            const double l2 = static_cast<double>(g.mode_of_column(col) * g.mode_of_column(col));
            for (Index i = 0; i < g.n_radial(); ++i) {
                const double r = g.r(i);
                lap(i, col) += vr(i, col) / r - l2 * v(i, col) / (r * r);
            }
        }
        g.fft_rows(lap.data(), /*forward=*/false);
        return ValueField(grid_, lap.real());
    }

    [[nodiscard]] CoeffField laplacian(const CoeffField& u) const { return analyze(laplacian_values(u)); }

    // Radial derivative at the boundary per mode: rows (u_r(1), u_r(-1)) x columns (FFT order).
    [[nodiscard]] Eigen::MatrixXcd boundary_derivatives(const CoeffField& u) const {
        return boundary_rows(BoundaryKind::Neumann, grid_->n_radial()) * u.coeffs;
    }

    // Reference path: solve one bordered mode system without the parity split.
    [[nodiscard]] Eigen::VectorXcd solve_mode_full(Index l, double alpha, const Eigen::VectorXcd& f_l) const {
        const Index n = grid_->n_radial();
        const Eigen::MatrixXd a = mode_system(l, alpha, n).matrix.dense();
        Eigen::VectorXcd rhs = parts_.r2conv * f_l;
        rhs.tail(2).setZero();
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
        if (!(lu.rcond() > kSingularRcond)) throw SolverError(singular_message(l, alpha, lu.rcond()));
        Eigen::VectorXcd out(n);
        out.real() = lu.solve(Eigen::VectorXd(rhs.real()));
        out.imag() = lu.solve(Eigen::VectorXd(rhs.imag()));
        return out;
    }

    // Reciprocal condition estimates of the (even, odd) blocks for mode l.
    [[nodiscard]] std::pair<double, double> mode_rcond(Index l, double alpha, bool mean_closure = false) const {
        const auto f = factor(std::abs(l), alpha, mean_closure && l == 0 && alpha == 0.0);
        return {f->rcond[0], f->rcond[1]};
    }

    static constexpr double kSingularRcond = 1e-14;

private:
    struct Factorization {
        std::array<std::vector<Index>, 2> rows;  // equation rows of the full system used by each block
        std::array<std::vector<Index>, 2> cols;  // coefficient indices of each block
        std::array<Eigen::PartialPivLU<Eigen::MatrixXd>, 2> lu;
        std::array<double, 2> rcond{};
    };
    using Key = std::pair<Index, double>;

    static std::string singular_message(Index l, double alpha, double rcond) {
        std::ostringstream msg;
        msg << "helmholtz_solve: singular mode system for Fourier mode l = " << l << " (alpha = " << alpha
            << ", rcond = " << rcond << ")";
        return msg.str();
    }

    std::shared_ptr<const Factorization> factor(Index labs, double alpha, bool mean_closure) const {
        const Key key{mean_closure ? -1 - labs : labs, alpha};
        {
            std::shared_lock lock(mutex_);
            if (auto it = cache_.find(key); it != cache_.end()) return it->second;
        }
        const Index n = grid_->n_radial();
        const double l2 = static_cast<double>(labs * labs);
        const Eigen::MatrixXd op = parts_.base + l2 * parts_.s02 + alpha * parts_.r2conv;
        auto fac = std::make_shared<Factorization>();
        for (int p = 0; p < 2; ++p) {
            auto& rows = fac->rows[p];
            auto& cols = fac->cols[p];
            for (Index j = p; j < n - 2; j += 2) rows.push_back(j);
            for (Index k = p; k < n; k += 2) cols.push_back(k);
            const Index m = static_cast<Index>(cols.size());
            Eigen::MatrixXd blk(m, m);
            for (Index a = 0; a + 1 < m; ++a)
                for (Index b = 0; b < m; ++b) blk(a, b) = op(rows[a], cols[b]);
            // Neumann rows combined per parity: sum over k of k^2 u_k with k of this parity.
            for (Index b = 0; b < m; ++b) blk(m - 1, b) = static_cast<double>(cols[b] * cols[b]);
            if (mean_closure && p == 0) {
                // Zero disk-mean row replaces the highest even equation row.
                for (Index b = 0; b < m; ++b) blk(m - 2, b) = std::numbers::pi * grid_->moment(cols[b]);
            }
            fac->lu[p].compute(blk);
            fac->rcond[p] = fac->lu[p].rcond();
            if (!(fac->rcond[p] > kSingularRcond)) throw SolverError(singular_message(labs, alpha, fac->rcond[p]));
        }
        std::unique_lock lock(mutex_);
        return cache_.try_emplace(key, std::move(fac)).first->second;
    }

    CoeffField solve_modes(double alpha, const CoeffField& f, bool mean_closure, const CoeffField* lap_src = nullptr,
                           double lap_coef = 0.0) const {
        const auto& g = *grid_;
        const Index n = g.n_radial();
        const Index nt = g.n_theta();
        Eigen::MatrixXcd rhs = parts_.r2conv * f.coeffs;
        if (lap_src && lap_coef != 0.0) {
            rhs -= lap_coef * (parts_.base * lap_src->coeffs);
            for (Index col = 0; col < nt; ++col) {
                const double l2 = static_cast<double>(g.mode_of_column(col) * g.mode_of_column(col));
                rhs.col(col) -= (lap_coef * l2) * (parts_.s02 * lap_src->coeffs.col(col));
            }
        }
        CoeffField out(grid_);
        for (Index labs = 0; labs <= nt / 2; ++labs) {
            std::vector<Index> colset;
            if (labs == 0) {
                colset.push_back(0);
            } else if (labs == nt / 2) {
                colset.push_back(nt / 2);
            } else {
                colset.push_back(labs);
                colset.push_back(nt - labs);
            }
            const auto fac = factor(labs, alpha, mean_closure && labs == 0 && alpha == 0.0);
            const Index nc = static_cast<Index>(colset.size());
            for (int p = 0; p < 2; ++p) {
                const auto& rows = fac->rows[p];
                const auto& cols = fac->cols[p];
                const Index m = static_cast<Index>(cols.size());
                Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, 2 * nc);
                for (Index c = 0; c < nc; ++c)
                    for (Index a = 0; a + 1 < m; ++a) {
                        const cplx v = rhs(rows[a], colset[c]);
                        b(a, 2 * c) = v.real();
                        b(a, 2 * c + 1) = v.imag();
                    }
                if (mean_closure && labs == 0 && alpha == 0.0 && p == 0) b.row(m - 2).setZero();
                const Eigen::MatrixXd x = fac->lu[p].solve(b);
                for (Index c = 0; c < nc; ++c)
                    for (Index a = 0; a < m; ++a) out.coeffs(cols[a], colset[c]) = cplx(x(a, 2 * c), x(a, 2 * c + 1));
            }
        }
        (void)n;
        return out;
    }

    GridPtr grid_;
    detail::ModeOperatorParts parts_;
    Eigen::MatrixXd d1_values_, d2_values_;
    mutable std::shared_mutex mutex_;
    mutable std::map<Key, std::shared_ptr<const Factorization>> cache_;
};

// Convenience wrappers building a one-off solver.
[[nodiscard]] inline CoeffField helmholtz_solve(double alpha, const CoeffField& f,
                                                BoundaryKind bc = BoundaryKind::Neumann) {
    if (bc != BoundaryKind::Neumann) throw ParameterError("helmholtz_solve: only Neumann conditions are supported on the disk");
    return HelmholtzSolver(f.grid).solve(alpha, f);
}

[[nodiscard]] inline CoeffField inverse_laplacian(const CoeffField& f) { return HelmholtzSolver(f.grid).inverse_laplacian(f); }

[[nodiscard]] inline CoeffField laplacian_apply(const CoeffField& u) { return HelmholtzSolver(u.grid).laplacian(u); }

}  // namespace ultradisk
