#pragma once

// Fields on the unit disk, represented on the doubled domain
// (r, theta) in [-1, 1] x [0, 2pi) so that both directions admit global
// spectral bases (Chebyshev in r, Fourier in theta).

#include <fftw3.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "ultradisk/chebyshev.hpp"
#include "ultradisk/errors.hpp"

namespace ultradisk {

using Eigen::Index;
using cplx = std::complex<double>;

namespace detail {

struct FftwPlanDeleter {
    void operator()(fftw_plan_s* p) const {
        if (p) fftw_destroy_plan(p);
    }
};
using FftwPlan = std::unique_ptr<fftw_plan_s, FftwPlanDeleter>;

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

// fftw_malloc'd complex buffer; alignment matches the buffers the plans were made with.
class FftwBuffer {
public:
    explicit FftwBuffer(size_t n)
        : n_(n), data_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
        if (!data_) throw std::bad_alloc();
    }
    fftw_complex* get() { return data_.get(); }
    cplx* as_complex() { return reinterpret_cast<cplx*>(data_.get()); }
    [[nodiscard]] size_t size() const { return n_; }

private:
    size_t n_;
    std::unique_ptr<fftw_complex, FftwFree> data_;
};

}  // namespace detail

// Collocation grid: Chebyshev-Gauss-Lobatto nodes r_i = cos(i pi / N_r),
// i = 0..N_r, times uniform angles theta_j = 2 pi j / N_theta. N_r is odd, so
// the origin is never a node and the grid is closed under (r, theta) -> (-r, theta + pi).
class DiskGrid {
public:
    DiskGrid(Index n_r, Index n_theta) : nr_(n_r), nt_(n_theta) {
        if (n_r < 3 || n_r % 2 == 0) throw ParameterError("DiskGrid: N_r must be an odd integer >= 3");
        if (n_theta < 4 || n_theta % 2 != 0) throw ParameterError("DiskGrid: N_theta must be an even integer >= 4");
        const Index n = n_r + 1;
        r_ = cheb::lobatto_nodes(n_r);
        theta_.resize(static_cast<size_t>(n_theta));
        for (Index j = 0; j < n_theta; ++j)
            theta_[static_cast<size_t>(j)] = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n_theta);
        h_theta_ = 2.0 * std::numbers::pi / static_cast<double>(n_theta);

        cheb_weights_.resize(static_cast<size_t>(n));
        for (Index i = 0; i < n; ++i) {
            const double c = (i == 0 || i == n_r) ? 2.0 : 1.0;
            cheb_weights_[static_cast<size_t>(i)] = std::numbers::pi / (c * static_cast<double>(n_r));
        }

        compute_moments();

        analysis_ = cheb::analysis_matrix(n_r);
        synthesis_ = cheb::synthesis_matrix(n_r);

        // Area weights: integral of the grid interpolant = sum_ij a_i v_ij.
        area_weights_.assign(static_cast<size_t>(n), 0.0);
        for (Index i = 0; i < n; ++i) {
            double s = 0.0;
            for (Index k = 0; k < n; k += 2) s += moments_[static_cast<size_t>(k)] * analysis_(k, i);
            area_weights_[static_cast<size_t>(i)] = std::numbers::pi * s / static_cast<double>(n_theta);
        }

        detail::FftwBuffer buf(static_cast<size_t>(n * n_theta));
        const int len = static_cast<int>(n_theta);
        // Rows of a column-major (n x N_theta) array: stride n, distance 1.
        fwd_.reset(fftw_plan_many_dft(1, &len, static_cast<int>(n), buf.get(), nullptr, static_cast<int>(n), 1,
                                      buf.get(), nullptr, static_cast<int>(n), 1, FFTW_FORWARD, FFTW_ESTIMATE));
        bwd_.reset(fftw_plan_many_dft(1, &len, static_cast<int>(n), buf.get(), nullptr, static_cast<int>(n), 1,
                                      buf.get(), nullptr, static_cast<int>(n), 1, FFTW_BACKWARD, FFTW_ESTIMATE));
        if (!fwd_ || !bwd_) throw SolverError("DiskGrid: FFTW plan creation failed");
    }

    DiskGrid(const DiskGrid&) = delete;
    DiskGrid& operator=(const DiskGrid&) = delete;

    [[nodiscard]] Index n_r() const { return nr_; }
    [[nodiscard]] Index n_theta() const { return nt_; }
    // Number of radial nodes (N_r + 1).
    [[nodiscard]] Index n_radial() const { return nr_ + 1; }
    [[nodiscard]] double r(Index i) const { return r_[static_cast<size_t>(i)]; }
    [[nodiscard]] double theta(Index j) const { return theta_[static_cast<size_t>(j)]; }
    [[nodiscard]] const std::vector<double>& r_nodes() const { return r_; }
    [[nodiscard]] const std::vector<double>& theta_nodes() const { return theta_; }
    [[nodiscard]] double h_theta() const { return h_theta_; }
    [[nodiscard]] double cheb_weight(Index i) const { return cheb_weights_[static_cast<size_t>(i)]; }
    [[nodiscard]] double area_weight(Index i) const { return area_weights_[static_cast<size_t>(i)]; }
    // m_k = integral over [-1, 1] of T_k(r) |r| dr.
    [[nodiscard]] double moment(Index k) const { return moments_[static_cast<size_t>(k)]; }
    [[nodiscard]] const std::vector<double>& moments() const { return moments_; }
    [[nodiscard]] const Eigen::MatrixXd& analysis_matrix() const { return analysis_; }
    [[nodiscard]] const Eigen::MatrixXd& synthesis_matrix() const { return synthesis_; }

    // Signed Fourier index for storage column c (FFT order): l in [-N_theta/2, N_theta/2 - 1].
    [[nodiscard]] Index mode_of_column(Index c) const { return c < nt_ / 2 ? c : c - nt_; }
    [[nodiscard]] Index column_of_mode(Index l) const {
        if (l < -nt_ / 2 || l >= nt_ / 2) throw ParameterError("DiskGrid: Fourier index out of range");
        return (l + nt_) % nt_;
    }
    // Node index of the mirror point (-r_i, theta_j + pi).
    [[nodiscard]] Index mirror_radial(Index i) const { return nr_ - i; }
    [[nodiscard]] Index shift_half_turn(Index j) const { return (j + nt_ / 2) % nt_; }

    // In-place row-wise DFT of a column-major (n_radial x N_theta) complex array.
    void fft_rows(cplx* data, bool forward) const {
        const size_t total = static_cast<size_t>(n_radial() * nt_);
        detail::FftwBuffer buf(total);
        std::copy(data, data + total, buf.as_complex());
        fftw_execute_dft(forward ? fwd_.get() : bwd_.get(), buf.get(), buf.get());
        std::copy(buf.as_complex(), buf.as_complex() + total, data);
    }

private:
    void compute_moments() {
        const Index n = nr_ + 1;
        // Clenshaw-Curtis on [0, 1] with enough nodes to integrate T_k(r) r exactly.
        const Index q = nr_ + 3;
        const auto x = cheb::lobatto_nodes(q);
        const auto w = cheb::clenshaw_curtis_weights(q);
        moments_.assign(static_cast<size_t>(n), 0.0);
        for (Index p = 0; p <= q; ++p) {
            const double s = 0.5 * (x[static_cast<size_t>(p)] + 1.0);  // node in [0, 1]
            const double ws = 0.5 * w[static_cast<size_t>(p)];
            const auto t = cheb::basis_values(0, n, s);
            for (Index k = 0; k < n; k += 2) moments_[static_cast<size_t>(k)] += 2.0 * ws * t[static_cast<size_t>(k)] * s;
        }
        auto near = [](double a, double b) { return std::abs(a - b) <= 1e-13; };
        if (!near(moments_[0], 1.0) || !near(moments_[2], 0.0) || !near(moments_[4], -1.0 / 3.0))
            throw SolverError("DiskGrid: area moment quadrature failed validation");
    }

    Index nr_, nt_;
    std::vector<double> r_, theta_, cheb_weights_, area_weights_, moments_;
    double h_theta_ = 0.0;
    Eigen::MatrixXd analysis_, synthesis_;
    detail::FftwPlan fwd_, bwd_;
};

using GridPtr = std::shared_ptr<const DiskGrid>;

[[nodiscard]] inline GridPtr make_grid(Index n_r, Index n_theta) {
    return std::make_shared<const DiskGrid>(n_r, n_theta);
}

inline void require_same_grid(const GridPtr& a, const GridPtr& b, const char* what) {
    if (a.get() != b.get() && (a->n_r() != b->n_r() || a->n_theta() != b->n_theta()))
        throw ParameterError(std::string(what) + ": fields live on different grids");
}

// Real grid values v(i, j) at (r_i, theta_j).
struct ValueField {
    GridPtr grid;
    Eigen::MatrixXd values;

    ValueField() = default;
    explicit ValueField(GridPtr g) : grid(std::move(g)), values(Eigen::MatrixXd::Zero(grid->n_radial(), grid->n_theta())) {}
    ValueField(GridPtr g, Eigen::MatrixXd v) : grid(std::move(g)), values(std::move(v)) {
        if (values.rows() != grid->n_radial() || values.cols() != grid->n_theta())
            throw ParameterError("ValueField: value array shape does not match grid");
    }

    static ValueField constant(GridPtr g, double c) {
        ValueField f(g);
        f.values.setConstant(c);
        return f;
    }

    [[nodiscard]] double operator()(Index i, Index j) const { return values(i, j); }
    double& operator()(Index i, Index j) { return values(i, j); }
    [[nodiscard]] bool all_finite() const { return values.allFinite(); }
};

// Chebyshev-Fourier coefficients u_hat(k, l), k = 0..N_r, l = -N_theta/2..N_theta/2-1.
// Storage columns are in FFT order; use at()/set() with signed l.
struct CoeffField {
    GridPtr grid;
    Eigen::MatrixXcd coeffs;

    CoeffField() = default;
    explicit CoeffField(GridPtr g) : grid(std::move(g)), coeffs(Eigen::MatrixXcd::Zero(grid->n_radial(), grid->n_theta())) {}
    CoeffField(GridPtr g, Eigen::MatrixXcd c) : grid(std::move(g)), coeffs(std::move(c)) {
        if (coeffs.rows() != grid->n_radial() || coeffs.cols() != grid->n_theta())
            throw ParameterError("CoeffField: coefficient array shape does not match grid");
    }

    static CoeffField constant(GridPtr g, double c) {
        CoeffField f(g);
        f.coeffs(0, 0) = c;
        return f;
    }

    [[nodiscard]] cplx at(Index k, Index l) const { return coeffs(k, grid->column_of_mode(l)); }
    void set(Index k, Index l, cplx v) { coeffs(k, grid->column_of_mode(l)) = v; }
    // Radial coefficient vector of Fourier mode l.
    [[nodiscard]] Eigen::VectorXcd mode(Index l) const { return coeffs.col(grid->column_of_mode(l)); }

    CoeffField& operator+=(const CoeffField& o) {
        require_same_grid(grid, o.grid, "CoeffField +=");
        coeffs += o.coeffs;
        return *this;
    }
    CoeffField& operator-=(const CoeffField& o) {
        require_same_grid(grid, o.grid, "CoeffField -=");
        coeffs -= o.coeffs;
        return *this;
    }
    CoeffField& operator*=(double s) {
        coeffs *= s;
        return *this;
    }
    friend CoeffField operator+(CoeffField a, const CoeffField& b) { return a += b; }
    friend CoeffField operator-(CoeffField a, const CoeffField& b) { return a -= b; }
    friend CoeffField operator*(double s, CoeffField a) { return a *= s; }

    // Add a constant function (only the (0, 0) coefficient changes).
    CoeffField& add_constant(double c) {
        coeffs(0, 0) += c;
        return *this;
    }
    [[nodiscard]] bool all_finite() const { return coeffs.allFinite(); }
};

// Sample f(r, theta), defined for r in [0, 1], on the doubled grid:
// nodes with r_i < 0 take f(|r_i|, theta_j + pi).
template <typename F>
[[nodiscard]] ValueField dfs_extend(const GridPtr& grid, F&& f) {
    ValueField v(grid);
    for (Index i = 0; i < grid->n_radial(); ++i) {
        const double r = grid->r(i);
        for (Index j = 0; j < grid->n_theta(); ++j) {
            if (r >= 0.0) {
                v(i, j) = f(r, grid->theta(j));
            } else {
                v(i, j) = f(-r, grid->theta(grid->shift_half_turn(j)));
            }
        }
    }
    return v;
}

// Sample a Cartesian function g(x, y) at the grid's Cartesian images.
template <typename G>
[[nodiscard]] ValueField sample_cartesian(const GridPtr& grid, G&& g) {
    return dfs_extend(grid, [&](double r, double t) { return g(r * std::cos(t), r * std::sin(t)); });
}

// Discrete Chebyshev-Fourier transform of grid values.
[[nodiscard]] inline CoeffField analyze(const ValueField& v) {
    const auto& g = *v.grid;
    Eigen::MatrixXcd f = v.values.cast<cplx>();
    g.fft_rows(f.data(), /*forward=*/true);
    f /= static_cast<double>(g.n_theta());
    return CoeffField(v.grid, g.analysis_matrix() * f);
}

// Evaluate the truncated series at the grid nodes; the real part is returned.
[[nodiscard]] inline ValueField synthesize(const CoeffField& c) {
    const auto& g = *c.grid;
    Eigen::MatrixXcd f = g.synthesis_matrix() * c.coeffs;
    g.fft_rows(f.data(), /*forward=*/false);
    return ValueField(c.grid, f.real());
}

// Zero every coefficient with k + l odd (projection onto the mirror-symmetric subspace).
[[nodiscard]] inline CoeffField enforce_parity(CoeffField c) {
    const auto& g = *c.grid;
    for (Index col = 0; col < g.n_theta(); ++col) {
        const Index l = g.mode_of_column(col);
        for (Index k = 0; k < g.n_radial(); ++k)
            if (((k + l) % 2 + 2) % 2 == 1) c.coeffs(k, col) = 0.0;
    }
    return c;
}

// max |u_hat(k, l)| over k + l odd.
[[nodiscard]] inline double parity_residual(const CoeffField& c) {
    const auto& g = *c.grid;
    double m = 0.0;
    for (Index col = 0; col < g.n_theta(); ++col) {
        const Index l = g.mode_of_column(col);
        for (Index k = 0; k < g.n_radial(); ++k)
            if (((k + l) % 2 + 2) % 2 == 1) m = std::max(m, std::abs(c.coeffs(k, col)));
    }
    return m;
}

// max |u_hat(k, -l) - conj(u_hat(k, l))|; zero for coefficients of a real field.
[[nodiscard]] inline double conjugate_symmetry_residual(const CoeffField& c) {
    const auto& g = *c.grid;
    double m = 0.0;
    for (Index l = -g.n_theta() / 2 + 1; l < g.n_theta() / 2; ++l)
        for (Index k = 0; k < g.n_radial(); ++k) m = std::max(m, std::abs(c.at(k, -l) - std::conj(c.at(k, l))));
    for (Index k = 0; k < g.n_radial(); ++k) m = std::max(m, std::abs(c.at(k, -g.n_theta() / 2).imag()));
    return m;
}

// Integral of u over the unit disk with the area measure r dr dtheta:
// pi * sum_k Re u_hat(k, 0) m_k.
[[nodiscard]] inline double disk_integral(const CoeffField& c) {
    const auto& g = *c.grid;
    double s = 0.0;
    for (Index k = 0; k < g.n_radial(); k += 2) s += c.coeffs(k, 0).real() * g.moment(k);
    return std::numbers::pi * s;
}

// Same functional applied to grid values (integral of the grid interpolant).
[[nodiscard]] inline double disk_integral(const ValueField& v) {
    const auto& g = *v.grid;
    double s = 0.0;
    for (Index i = 0; i < g.n_radial(); ++i) s += g.area_weight(i) * v.values.row(i).sum();
    return s;
}

// Area inner product: disk integral of the pointwise product.
[[nodiscard]] inline double area_inner_product(const ValueField& f, const ValueField& g) {
    require_same_grid(f.grid, g.grid, "area_inner_product");
    const auto& gr = *f.grid;
    double s = 0.0;
    for (Index i = 0; i < gr.n_radial(); ++i) s += gr.area_weight(i) * f.values.row(i).dot(g.values.row(i));
    return s;
}

[[nodiscard]] inline double area_l2_norm(const ValueField& f) {
    return std::sqrt(std::max(0.0, area_inner_product(f, f)));
}

// Chebyshev-weighted discrete inner product h_theta * sum_ij f_ij g_ij w_i.
[[nodiscard]] inline double cheb_inner_product(const ValueField& f, const ValueField& g) {
    require_same_grid(f.grid, g.grid, "cheb_inner_product");
    const auto& gr = *f.grid;
    double s = 0.0;
    for (Index i = 0; i < gr.n_radial(); ++i) s += gr.cheb_weight(i) * f.values.row(i).dot(g.values.row(i));
    return gr.h_theta() * s;
}

[[nodiscard]] inline double cheb_l2_norm(const ValueField& f) { return std::sqrt(cheb_inner_product(f, f)); }

[[nodiscard]] inline double linf_norm(const ValueField& f) {
    return f.values.size() == 0 ? 0.0 : f.values.cwiseAbs().maxCoeff();
}

}  // namespace ultradisk
