#pragma once

// Sparse operators of the ultraspherical spectral method: differentiation
// T -> C^(m), basis conversion C^(lambda) -> C^(lambda+1), and multiplication
// by a Chebyshev series in the T and C^(lambda) bases.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ultradisk/errors.hpp"

namespace ultradisk {

using Eigen::Index;

// Polynomial basis label: 0 is Chebyshev T, m >= 1 is ultraspherical C^(m).
struct BasisId {
    int lambda = 0;

    constexpr BasisId() = default;
    constexpr explicit BasisId(int l) : lambda(l) {
        if (l < 0) throw ParameterError("BasisId: lambda must be >= 0");
    }
    friend constexpr bool operator==(BasisId, BasisId) = default;
};

// Rectangular operator on coefficient vectors stored by diagonals
// (offset = col - row), with optional dense boundary rows that replace the
// last rows of the banded part.
class SpectralOperator {
public:
    SpectralOperator(Index rows, Index cols, BasisId from, BasisId to)
        : rows_(rows), cols_(cols), from_(from), to_(to) {
        if (rows <= 0 || cols <= 0) throw ParameterError("SpectralOperator: dimensions must be positive");
    }

    // Build from a dense matrix, keeping every nonzero entry.
    static SpectralOperator from_dense(const Eigen::MatrixXd& m, BasisId from, BasisId to) {
        SpectralOperator op(m.rows(), m.cols(), from, to);
        for (Index i = 0; i < m.rows(); ++i)
            for (Index j = 0; j < m.cols(); ++j)
                if (m(i, j) != 0.0) op.set(i, j, m(i, j));
        return op;
    }

    [[nodiscard]] Index rows() const { return rows_; }
    [[nodiscard]] Index cols() const { return cols_; }
    [[nodiscard]] BasisId from_basis() const { return from_; }
    [[nodiscard]] BasisId to_basis() const { return to_; }
    [[nodiscard]] Index border_rows() const { return border_.rows(); }

    void set(Index i, Index j, double v) {
        check_index(i, j);
        const int off = static_cast<int>(j - i);
        auto [it, inserted] = diags_.try_emplace(off);
        if (inserted) it->second.assign(static_cast<size_t>(diag_length(off)), 0.0);
        it->second[static_cast<size_t>(std::min(i, j))] = v;
    }

    [[nodiscard]] double operator()(Index i, Index j) const {
        check_index(i, j);
        if (i >= rows_ - border_.rows()) return border_(i - (rows_ - border_.rows()), j);
        const auto it = diags_.find(static_cast<int>(j - i));
        if (it == diags_.end()) return 0.0;
        return it->second[static_cast<size_t>(std::min(i, j))];
    }

    // Offsets of stored diagonals with at least one nonzero entry in the banded rows.
    [[nodiscard]] std::vector<int> offsets() const {
        std::vector<int> out;
        const Index banded_rows = rows_ - border_.rows();
        for (const auto& [off, d] : diags_) {
            for (size_t t = 0; t < d.size(); ++t) {
                const Index i = off >= 0 ? static_cast<Index>(t) : static_cast<Index>(t) - off;
                if (i < banded_rows && d[t] != 0.0) {
                    out.push_back(off);
                    break;
                }
            }
        }
        return out;
    }

    // Copy with the last b rows replaced by the given dense rows.
    [[nodiscard]] SpectralOperator with_border(const Eigen::MatrixXd& rows) const {
        if (rows.cols() != cols_ || rows.rows() > rows_)
            throw ParameterError("SpectralOperator::with_border: row block has wrong shape");
        SpectralOperator op = *this;
        op.border_ = rows;
        return op;
    }

    [[nodiscard]] Eigen::MatrixXd dense() const {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows_, cols_);
        for (const auto& [off, d] : diags_)
            for (size_t t = 0; t < d.size(); ++t) {
                const Index i = off >= 0 ? static_cast<Index>(t) : static_cast<Index>(t) - off;
                m(i, i + off) = d[t];
            }
        if (border_.rows() > 0) m.bottomRows(border_.rows()) = border_;
        return m;
    }

    // y = A x for real or complex coefficient vectors.
    template <typename Scalar>
    [[nodiscard]] Eigen::Matrix<Scalar, Eigen::Dynamic, 1> apply(
        const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x) const {
        if (x.size() != cols_) throw ParameterError("SpectralOperator::apply: length mismatch");
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> y = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(rows_);
        const Index banded_rows = rows_ - border_.rows();
        for (const auto& [off, d] : diags_)
            for (size_t t = 0; t < d.size(); ++t) {
                const Index i = off >= 0 ? static_cast<Index>(t) : static_cast<Index>(t) - off;
                if (i < banded_rows) y(i) += d[t] * x(i + off);
            }
        for (Index b = 0; b < border_.rows(); ++b)
            y(banded_rows + b) = (border_.row(b).template cast<Scalar>() * x).value();
        return y;
    }

    [[nodiscard]] SpectralOperator leading_block(Index r, Index c) const {
        if (r > rows_ || c > cols_) throw ParameterError("SpectralOperator::leading_block: block too large");
        return from_dense(dense().topLeftCorner(r, c), from_, to_);
    }

    friend SpectralOperator operator*(const SpectralOperator& a, const SpectralOperator& b) {
        if (a.cols_ != b.rows_) throw ParameterError("SpectralOperator product: inner dimension mismatch");
        if (a.from_ != b.to_) throw ParameterError("SpectralOperator product: basis mismatch");
        return from_dense(a.dense() * b.dense(), b.from_, a.to_);
    }

    friend SpectralOperator operator+(const SpectralOperator& a, const SpectralOperator& b) {
        if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw ParameterError("SpectralOperator sum: shape mismatch");
        if (a.from_ != b.from_ || a.to_ != b.to_) throw ParameterError("SpectralOperator sum: basis mismatch");
        return from_dense(a.dense() + b.dense(), a.from_, a.to_);
    }

    friend SpectralOperator operator*(double s, const SpectralOperator& a) {
        return from_dense(s * a.dense(), a.from_, a.to_);
    }

private:
    void check_index(Index i, Index j) const {
        if (i < 0 || j < 0 || i >= rows_ || j >= cols_) throw ParameterError("SpectralOperator: index out of range");
    }
    [[nodiscard]] Index diag_length(int off) const {
        return off >= 0 ? std::min(rows_, cols_ - off) : std::min(rows_ + off, cols_);
    }

    Index rows_, cols_;
    BasisId from_, to_;
    std::map<int, std::vector<double>> diags_;
    Eigen::MatrixXd border_;
};

// n x n truncation of D_{0,m}: T coefficients to C^(m) coefficients of the m-th derivative.
[[nodiscard]] inline SpectralOperator diff_operator(int m, Index n) {
    if (m < 1) throw ParameterError("diff_operator: m must be >= 1, got " + std::to_string(m));
    if (n < m + 1) throw ParameterError("diff_operator: n must be >= m + 1");
    double scale = std::ldexp(1.0, m - 1);
    for (int q = 2; q < m; ++q) scale *= q;
    SpectralOperator op(n, n, BasisId{0}, BasisId{m});
    for (Index k = 0; k + m < n; ++k) op.set(k, k + m, scale * static_cast<double>(k + m));
    return op;
}

// n x n truncation of S_{lambda,lambda+1}.
[[nodiscard]] inline SpectralOperator conversion_operator(int lambda, Index n) {
    if (lambda < 0) throw ParameterError("conversion_operator: lambda must be >= 0");
    if (n < 3) throw ParameterError("conversion_operator: n must be >= 3");
    SpectralOperator op(n, n, BasisId{lambda}, BasisId{lambda + 1});
    if (lambda == 0) {
        op.set(0, 0, 1.0);
        for (Index k = 1; k < n; ++k) op.set(k, k, 0.5);
        for (Index k = 0; k + 2 < n; ++k) op.set(k, k + 2, -0.5);
    } else {
        const double lam = lambda;
        for (Index k = 0; k < n; ++k) op.set(k, k, lam / (lam + static_cast<double>(k)));
        for (Index k = 0; k + 2 < n; ++k) op.set(k, k + 2, -lam / (lam + static_cast<double>(k) + 2.0));
    }
    return op;
}

// S_{from,to} = S_{to-1,to} ... S_{from,from+1}.
[[nodiscard]] inline SpectralOperator conversion_chain(BasisId from, BasisId to, Index n) {
    if (to.lambda <= from.lambda)
        throw ParameterError("conversion_chain: target basis must be above the source basis");
    SpectralOperator op = conversion_operator(from.lambda, n);
    for (int l = from.lambda + 1; l < to.lambda; ++l) op = conversion_operator(l, n) * op;
    return op;
}

// n x n Toeplitz-plus-Hankel multiplication matrix M_T[a] in the T basis.
// Tail coefficients of a*u beyond degree n-1 are dropped.
[[nodiscard]] inline SpectralOperator mult_operator_cheb(std::span<const double> a, Index n) {
    if (n < static_cast<Index>(a.size()))
        throw ParameterError("mult_operator_cheb: n must be >= number of coefficients of a");
    for (double v : a)
        if (!std::isfinite(v)) throw ParameterError("mult_operator_cheb: non-finite coefficient");
    auto coef = [&](Index k) { return k < static_cast<Index>(a.size()) ? a[static_cast<size_t>(k)] : 0.0; };
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (Index j = 0; j < n; ++j)
        for (Index k = 0; k < n; ++k) {
            double v = (j == k) ? coef(0) : 0.5 * coef(std::abs(j - k));
            if (j >= 1) v += 0.5 * coef(j + k);
            m(j, k) = v;
        }
    return SpectralOperator::from_dense(m, BasisId{0}, BasisId{0});
}

namespace detail {

// Solve U X = B for upper-triangular banded U by back substitution, column by column.
inline Eigen::MatrixXd upper_back_substitute(const Eigen::MatrixXd& u, const Eigen::MatrixXd& b) {
    const Index n = u.rows();
    // Upper bandwidth of U.
    Index bw = 0;
    for (Index i = 0; i < n; ++i)
        for (Index j = n - 1; j > i + bw; --j)
            if (u(i, j) != 0.0) {
                bw = j - i;
                break;
            }
    Eigen::MatrixXd x(n, b.cols());
    for (Index c = 0; c < b.cols(); ++c)
        for (Index i = n - 1; i >= 0; --i) {
            double s = b(i, c);
            for (Index j = i + 1; j <= std::min(n - 1, i + bw); ++j) s -= u(i, j) * x(j, c);
            if (u(i, i) == 0.0) throw SolverError("upper_back_substitute: zero pivot");
            x(i, c) = s / u(i, i);
        }
    return x;
}

}  // namespace detail

// M_lambda[a] = S_{0,lambda} M_T[a] S_{lambda,0}, multiplication by a acting within C^(lambda).
// Formed as the exact leading n x n block of the infinite product: M_T is
// evaluated with 2*lambda extra rows so the conversion sees no truncated tail.
[[nodiscard]] inline SpectralOperator mult_operator_ultra(std::span<const double> a, int lambda, Index n) {
    if (lambda < 1 || lambda > 2) throw ParameterError("mult_operator_ultra: lambda must be 1 or 2");
    if (n < static_cast<Index>(a.size()) || n < 3) throw ParameterError("mult_operator_ultra: n too small");
    const Index pad = 2 * lambda;
    const Index np = n + pad;
    const Eigen::MatrixXd s_up = conversion_chain(BasisId{0}, BasisId{lambda}, np).dense();
    // S_{lambda,0} restricted to the first n columns: only rows < n are nonzero.
    const Eigen::MatrixXd s_down =
        detail::upper_back_substitute(s_up.topLeftCorner(n, n), Eigen::MatrixXd::Identity(n, n));
    const Eigen::MatrixXd mt = mult_operator_cheb(a, np).dense();
    Eigen::MatrixXd prod = s_up.topRows(n) * (mt.leftCols(n) * s_down);
    // The exact product has bandwidth deg(a); clear rounding residue outside the band.
    const Index bw = static_cast<Index>(a.size()) - 1;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (std::abs(i - j) > bw) prod(i, j) = 0.0;
    return SpectralOperator::from_dense(prod, BasisId{lambda}, BasisId{lambda});
}

// Exact leading n x n block of S_{0,lambda} M_T[a]: T coefficients of u to
// C^(lambda) coefficients of a*u.
[[nodiscard]] inline SpectralOperator mult_to_ultra(std::span<const double> a, int lambda, Index n) {
    const Index np = n + 2 * lambda;
    const Eigen::MatrixXd s_up = conversion_chain(BasisId{0}, BasisId{lambda}, np).dense();
    const Eigen::MatrixXd mt = mult_operator_cheb(a, std::max<Index>(np, static_cast<Index>(a.size()))).dense();
    const Eigen::MatrixXd prod = s_up.topRows(n) * mt.topLeftCorner(np, n);
    return SpectralOperator::from_dense(prod, BasisId{0}, BasisId{lambda});
}

}  // namespace ultradisk
