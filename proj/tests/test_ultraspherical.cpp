#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ultradisk/chebyshev.hpp"
#include "ultradisk/ultraspherical.hpp"

using namespace ultradisk;

namespace {

// Monomial-coefficient polynomials, built independently of the library.
using Poly = std::vector<double>;

Poly cheb_t_poly(int k) {
    Poly a{1.0}, b{0.0, 1.0};
    if (k == 0) return a;
    for (int m = 1; m < k; ++m) {
        Poly c(b.size() + 1, 0.0);
        for (size_t i = 0; i < b.size(); ++i) c[i + 1] += 2.0 * b[i];
        for (size_t i = 0; i < a.size(); ++i) c[i] -= a[i];
        a = b;
        b = c;
    }
    return b;
}

Poly derivative(const Poly& p) {
    if (p.size() <= 1) return {0.0};
    Poly d(p.size() - 1);
    for (size_t i = 1; i < p.size(); ++i) d[i - 1] = static_cast<double>(i) * p[i];
    return d;
}

double horner(const Poly& p, double x) {
    double s = 0.0;
    for (size_t i = p.size(); i-- > 0;) s = s * x + p[i];
    return s;
}

// Gegenbauer C^(lambda)_k(x) by the three-term recurrence; lambda = 0 means T_k.
double gegenbauer(int lambda, int k, double x) {
    if (lambda == 0) return std::cos(k * std::acos(x));
    double c0 = 1.0, c1 = 2.0 * lambda * x;
    if (k == 0) return c0;
    for (int m = 1; m < k; ++m) {
        const double c2 = (2.0 * x * (m + lambda) * c1 - (m + 2.0 * lambda - 1.0) * c0) / (m + 1.0);
        c0 = c1;
        c1 = c2;
    }
    return c1;
}

double eval(int lambda, const Eigen::VectorXd& c, double x) {
    double s = 0.0;
    for (Index k = 0; k < c.size(); ++k) s += c(k) * gegenbauer(lambda, static_cast<int>(k), x);
    return s;
}

Eigen::VectorXd random_coeffs(Index n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd c(n);
    for (auto& v : c) v = u(rng);
    return c;
}

const std::vector<double> kPoints{-0.97, -0.6, -0.13, 0.0, 0.31, 0.77, 0.999};

}  // namespace

TEST(Ultraspherical, DiffOperatorIsSingleSuperdiagonal) {
    for (int m = 1; m <= 2; ++m) {
        const auto d = diff_operator(m, 12);
        EXPECT_EQ(d.offsets(), std::vector<int>{m});
        EXPECT_EQ(d.from_basis().lambda, 0);
        EXPECT_EQ(d.to_basis().lambda, m);
    }
}

TEST(Ultraspherical, ConversionIsTwoBanded) {
    for (int lambda = 0; lambda <= 2; ++lambda) {
        const auto s = conversion_operator(lambda, 10);
        EXPECT_EQ(s.offsets(), (std::vector<int>{0, 2}));
    }
}

TEST(Ultraspherical, MultiplicationBandwidthFollowsDegree) {
    const std::vector<double> r2{0.5, 0.0, 0.5};
    for (int lambda = 1; lambda <= 2; ++lambda) {
        for (int off : mult_operator_ultra(r2, lambda, 16).offsets()) EXPECT_LE(std::abs(off), 2);
        for (int off : mult_to_ultra(r2, lambda, 16).offsets()) EXPECT_LE(std::abs(off), 2 + 2 * lambda);
    }
    for (int off : mult_operator_cheb(r2, 16).offsets()) EXPECT_LE(std::abs(off), 2);
}

TEST(Ultraspherical, DiffMatchesMonomialDerivative) {
    const Index n = 12;
    const auto c = random_coeffs(n, 7);
    for (int m = 1; m <= 2; ++m) {
        const Eigen::VectorXd dc = diff_operator(m, n).apply<double>(c);
        for (double x : kPoints) {
            double want = 0.0;
            for (Index k = 0; k < n; ++k) {
                Poly p = cheb_t_poly(static_cast<int>(k));
                for (int q = 0; q < m; ++q) p = derivative(p);
                want += c(k) * horner(p, x);
            }
            EXPECT_NEAR(eval(m, dc, x), want, 1e-9 * (1.0 + std::abs(want)));
        }
    }
}

TEST(Ultraspherical, ConversionPreservesFunction) {
    const Index n = 14;
    const auto c = random_coeffs(n, 3);
    for (int lambda = 0; lambda <= 1; ++lambda) {
        const Eigen::VectorXd up = conversion_operator(lambda, n).apply<double>(c);
        for (double x : kPoints) EXPECT_NEAR(eval(lambda + 1, up, x), eval(lambda, c, x), 1e-12);
    }
    const Eigen::VectorXd up2 = conversion_chain(BasisId{0}, BasisId{2}, n).apply<double>(c);
    for (double x : kPoints) EXPECT_NEAR(eval(2, up2, x), eval(0, c, x), 1e-12);
}

TEST(Ultraspherical, MultiplicationIsExactForLowDegree) {
    const std::vector<double> a{0.3, -0.2, 0.7};
    const Index n = 12;
    Eigen::VectorXd g = random_coeffs(n, 11);
    g.tail(2).setZero();  // a*g fits in n coefficients
    auto a_of = [&](double x) { return a[0] + a[1] * x + a[2] * (2 * x * x - 1); };

    const Eigen::VectorXd t = mult_operator_cheb(a, n).apply<double>(g);
    for (double x : kPoints) EXPECT_NEAR(eval(0, t, x), a_of(x) * eval(0, g, x), 1e-12);

    for (int lambda = 1; lambda <= 2; ++lambda) {
        const Eigen::VectorXd m = mult_operator_ultra(a, lambda, n).apply<double>(g);
        for (double x : kPoints) EXPECT_NEAR(eval(lambda, m, x), a_of(x) * eval(lambda, g, x), 1e-11);
        const Eigen::VectorXd u = mult_to_ultra(a, lambda, n).apply<double>(g);
        for (double x : kPoints) EXPECT_NEAR(eval(lambda, u, x), a_of(x) * eval(0, g, x), 1e-11);
    }
}

TEST(Ultraspherical, ProductAndSumMatchDense) {
    const auto s = conversion_operator(1, 9);
    const auto d = diff_operator(1, 9);
    const Eigen::MatrixXd p = (s * d).dense();
    EXPECT_LT((p - s.dense() * d.dense()).norm(), 1e-14);
    const Eigen::MatrixXd q = (s + 2.0 * s).dense();
    EXPECT_LT((q - 3.0 * s.dense()).norm(), 1e-14);
    const auto lb = s.leading_block(4, 5);
    EXPECT_EQ(lb.rows(), 4);
    EXPECT_EQ(lb.cols(), 5);
    EXPECT_DOUBLE_EQ(lb(2, 4), s(2, 4));
}

TEST(Ultraspherical, BorderRowsReplaceTail) {
    const auto d = diff_operator(2, 8);
    Eigen::MatrixXd rows = Eigen::MatrixXd::Ones(2, 8);
    const auto b = d.with_border(rows);
    EXPECT_EQ(b.border_rows(), 2);
    const Eigen::MatrixXd m = b.dense();
    EXPECT_TRUE(m.bottomRows(2).isApprox(rows));
    EXPECT_TRUE(m.topRows(6).isApprox(d.dense().topRows(6)));
    const Eigen::VectorXd x = random_coeffs(8, 5);
    EXPECT_LT((b.apply<double>(x) - m * x).norm(), 1e-13);
    const Eigen::VectorXcd xc = x.cast<std::complex<double>>() * std::complex<double>(0.0, 1.0);
    EXPECT_LT((b.apply<std::complex<double>>(xc) - (m * x).cast<std::complex<double>>() * std::complex<double>(0.0, 1.0)).norm(), 1e-13);
}

TEST(Ultraspherical, RejectsBadArguments) {
    EXPECT_THROW(mult_operator_ultra(std::vector<double>{1.0}, 3, 8), ParameterError);
    EXPECT_THROW(mult_operator_cheb(std::vector<double>(10, 1.0), 4), ParameterError);
    EXPECT_THROW(diff_operator(1, 8).apply<double>(Eigen::VectorXd::Zero(3)), ParameterError);
}

TEST(Chebyshev, TransformRoundTrip) {
    const Index n = 20;
    const Eigen::MatrixXd a = cheb::analysis_matrix(n);
    const Eigen::MatrixXd s = cheb::synthesis_matrix(n);
    EXPECT_LT((a * s - Eigen::MatrixXd::Identity(n + 1, n + 1)).cwiseAbs().maxCoeff(), 1e-12);
    const auto x = cheb::lobatto_nodes(n);
    Eigen::VectorXd c = random_coeffs(n + 1, 9);
    const Eigen::VectorXd v = s * c;
    for (Index i = 0; i <= n; ++i) EXPECT_NEAR(v(i), eval(0, c, x[static_cast<size_t>(i)]), 1e-12);
}

TEST(Chebyshev, ClenshawCurtisIntegratesPolynomials) {
    const Index n = 16;
    const auto w = cheb::clenshaw_curtis_weights(n);
    const auto x = cheb::lobatto_nodes(n);
    for (int p = 0; p <= 15; ++p) {
        double s = 0.0;
        for (Index i = 0; i <= n; ++i) s += w[static_cast<size_t>(i)] * std::pow(x[static_cast<size_t>(i)], p);
        const double want = p % 2 == 0 ? 2.0 / (p + 1) : 0.0;
        EXPECT_NEAR(s, want, 1e-13) << "x^" << p;
    }
}
