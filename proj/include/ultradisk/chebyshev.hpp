#pragma once

// Scalar Chebyshev / ultraspherical utilities: nodes, series evaluation,
// Gauss-Lobatto transforms and Clenshaw-Curtis weights.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "ultradisk/errors.hpp"

namespace ultradisk::cheb {

using Eigen::Index;

// Chebyshev-Gauss-Lobatto nodes x_i = cos(i*pi/n), i = 0..n (descending).
[[nodiscard]] inline std::vector<double> lobatto_nodes(Index n) {
    if (n < 1) throw ParameterError("lobatto_nodes: n must be >= 1");
    std::vector<double> x(static_cast<size_t>(n + 1));
    for (Index i = 0; i <= n; ++i) {
        // Symmetric formula keeps x_{n-i} == -x_i bitwise.
        x[static_cast<size_t>(i)] =
            std::sin(std::numbers::pi * static_cast<double>(n - 2 * i) / (2.0 * static_cast<double>(n)));
    }
    return x;
}

// Evaluate sum_k c_k T_k(x) by Clenshaw's recurrence.
[[nodiscard]] inline double eval_t(std::span<const double> c, double x) {
    double b1 = 0.0, b2 = 0.0;
    for (size_t k = c.size(); k-- > 1;) {
        const double b0 = 2.0 * x * b1 - b2 + c[k];
        b2 = b1;
        b1 = b0;
    }
    return c.empty() ? 0.0 : x * b1 - b2 + c[0];
}

// Values C_k^{(lambda)}(x) for k = 0..n-1. lambda = 0 returns T_k(x).
[[nodiscard]] inline std::vector<double> basis_values(int lambda, Index n, double x) {
    std::vector<double> v(static_cast<size_t>(std::max<Index>(n, 0)));
    if (n == 0) return v;
    v[0] = 1.0;
    if (n == 1) return v;
    if (lambda == 0) {
        v[1] = x;
        for (Index k = 1; k + 1 < n; ++k)
            v[static_cast<size_t>(k + 1)] = 2.0 * x * v[static_cast<size_t>(k)] - v[static_cast<size_t>(k - 1)];
        return v;
    }
    const double lam = lambda;
    v[1] = 2.0 * lam * x;
    for (Index k = 1; k + 1 < n; ++k) {
        const double kk = static_cast<double>(k);
        v[static_cast<size_t>(k + 1)] =
            (2.0 * (kk + lam) * x * v[static_cast<size_t>(k)] - (kk + 2.0 * lam - 1.0) * v[static_cast<size_t>(k - 1)]) /
            (kk + 1.0);
    }
    return v;
}

// Evaluate a series in the C^{(lambda)} basis (lambda = 0 is Chebyshev T).
[[nodiscard]] inline double eval_series(int lambda, std::span<const double> c, double x) {
    if (lambda == 0) return eval_t(c, x);
    const auto b = basis_values(lambda, static_cast<Index>(c.size()), x);
    double s = 0.0;
    for (size_t k = 0; k < c.size(); ++k) s += c[k] * b[k];
    return s;
}

// Dense evaluation matrix E(i,k) = C_k^{(lambda)}(x_i).
[[nodiscard]] inline Eigen::MatrixXd basis_matrix(int lambda, std::span<const double> x, Index n) {
    Eigen::MatrixXd e(static_cast<Index>(x.size()), n);
    for (Index i = 0; i < e.rows(); ++i) {
        const auto b = basis_values(lambda, n, x[static_cast<size_t>(i)]);
        for (Index k = 0; k < n; ++k) e(i, k) = b[static_cast<size_t>(k)];
    }
    return e;
}

// Values-to-coefficients matrix on the n+1 Lobatto nodes (discrete Chebyshev transform).
// c_k = 2/(ct_k n) * sum_i f_i T_k(x_i) / ct_i, ct_0 = ct_n = 2, else 1.
[[nodiscard]] inline Eigen::MatrixXd analysis_matrix(Index n) {
    Eigen::MatrixXd a(n + 1, n + 1);
    for (Index k = 0; k <= n; ++k) {
        const double ck = (k == 0 || k == n) ? 2.0 : 1.0;
        for (Index i = 0; i <= n; ++i) {
            const double ci = (i == 0 || i == n) ? 2.0 : 1.0;
            // cos(k i pi / n) with the product reduced mod 2n to keep the argument small.
            const Index m = (k * i) % (2 * n);
            a(k, i) = 2.0 / (ck * static_cast<double>(n) * ci) *
                      std::cos(std::numbers::pi * static_cast<double>(m) / static_cast<double>(n));
        }
    }
    return a;
}

// Coefficients-to-values matrix on the Lobatto nodes, S(i,k) = T_k(x_i).
[[nodiscard]] inline Eigen::MatrixXd synthesis_matrix(Index n) {
    Eigen::MatrixXd s(n + 1, n + 1);
    for (Index i = 0; i <= n; ++i)
        for (Index k = 0; k <= n; ++k) {
            const Index m = (k * i) % (2 * n);
            s(i, k) = std::cos(std::numbers::pi * static_cast<double>(m) / static_cast<double>(n));
        }
    return s;
}

// Chebyshev coefficients of the degree-n interpolant of f on the Lobatto nodes.
template <typename F>
[[nodiscard]] Eigen::VectorXd interpolate(F&& f, Index n) {
    const auto x = lobatto_nodes(n);
    Eigen::VectorXd v(n + 1);
    for (Index i = 0; i <= n; ++i) v(i) = f(x[static_cast<size_t>(i)]);
    return analysis_matrix(n) * v;
}

// Clenshaw-Curtis weights on [-1, 1] for the n+1 Lobatto nodes (exact for degree <= n).
[[nodiscard]] inline std::vector<double> clenshaw_curtis_weights(Index n) {
    if (n < 1) throw ParameterError("clenshaw_curtis_weights: n must be >= 1");
    std::vector<double> w(static_cast<size_t>(n + 1), 0.0);
    const double nn = static_cast<double>(n);
    std::vector<double> v(static_cast<size_t>(n > 1 ? n - 1 : 0), 1.0);
    auto theta = [&](Index i) { return std::numbers::pi * static_cast<double>(i) / nn; };
    if (n % 2 == 0) {
        w[0] = w[static_cast<size_t>(n)] = 1.0 / (nn * nn - 1.0);
        for (Index k = 1; k < n / 2; ++k)
            for (Index i = 1; i < n; ++i)
                v[static_cast<size_t>(i - 1)] -= 2.0 * std::cos(2.0 * k * theta(i)) / (4.0 * k * k - 1.0);
        for (Index i = 1; i < n; ++i) v[static_cast<size_t>(i - 1)] -= std::cos(nn * theta(i)) / (nn * nn - 1.0);
    } else {
        w[0] = w[static_cast<size_t>(n)] = 1.0 / (nn * nn);
        for (Index k = 1; k <= (n - 1) / 2; ++k)
            for (Index i = 1; i < n; ++i)
                v[static_cast<size_t>(i - 1)] -= 2.0 * std::cos(2.0 * k * theta(i)) / (4.0 * k * k - 1.0);
    }
    for (Index i = 1; i < n; ++i) w[static_cast<size_t>(i)] = 2.0 * v[static_cast<size_t>(i - 1)] / nn;
    return w;
}

}  // namespace ultradisk::cheb
