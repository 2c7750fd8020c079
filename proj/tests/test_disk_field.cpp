#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ultradisk/disk_field.hpp"

using namespace ultradisk;
using std::numbers::pi;

namespace {

double smooth(double x, double y) { return std::exp(0.7 * x - 0.4 * y) + x * y * y; }

}  // namespace

TEST(DiskGrid, RejectsBadSizes) {
    EXPECT_THROW(DiskGrid(16, 16), ParameterError);
    EXPECT_THROW(DiskGrid(1, 16), ParameterError);
    EXPECT_THROW(DiskGrid(17, 15), ParameterError);
    EXPECT_THROW(DiskGrid(17, 2), ParameterError);
    EXPECT_NO_THROW(DiskGrid(17, 16));
}

TEST(DiskGrid, NodesAndIndexMaps) {
    const auto g = make_grid(17, 16);
    EXPECT_EQ(g->n_radial(), 18);
    EXPECT_DOUBLE_EQ(g->r(0), 1.0);
    EXPECT_DOUBLE_EQ(g->r(17), -1.0);
    for (Index i = 0; i < g->n_radial(); ++i) {
        EXPECT_NEAR(g->r(i), std::cos(pi * static_cast<double>(i) / 17.0), 1e-15);
        EXPECT_EQ(g->r(g->mirror_radial(i)), -g->r(i));
    }
    for (Index c = 0; c < 16; ++c) EXPECT_EQ(g->column_of_mode(g->mode_of_column(c)), c);
    EXPECT_EQ(g->mode_of_column(8), -8);
    EXPECT_EQ(g->shift_half_turn(3), 11);
    EXPECT_EQ(g->shift_half_turn(12), 4);
    EXPECT_NEAR(g->h_theta(), 2 * pi / 16, 1e-15);
}

TEST(DiskField, DfsExtensionIsBlockMirrorSymmetric) {
    const auto g = make_grid(33, 32);
    const ValueField v = sample_cartesian(g, smooth);
    for (Index i = 0; i < g->n_radial(); ++i)
        for (Index j = 0; j < g->n_theta(); ++j)
            EXPECT_EQ(v(g->mirror_radial(i), g->shift_half_turn(j)), v(i, j));
}

TEST(DiskField, TransformRoundTrip) {
    for (auto [nr, nt] : {std::pair<Index, Index>{17, 16}, {33, 32}, {65, 64}, {129, 128}}) {
        const auto g = make_grid(nr, nt);
        const ValueField v = sample_cartesian(g, smooth);
        EXPECT_LE(linf_norm(ValueField(g, synthesize(analyze(v)).values - v.values)), 1e-12) << nr;

        // Arbitrary (non-symmetric) grid data also round-trips: the transform is a bijection.
        std::mt19937 rng(5);
        std::uniform_real_distribution<double> u(-1, 1);
        ValueField w(g);
        for (Index i = 0; i < g->n_radial(); ++i)
            for (Index j = 0; j < nt; ++j) w(i, j) = u(rng);
        EXPECT_LE(linf_norm(ValueField(g, synthesize(analyze(w)).values - w.values)), 1e-12) << nr;
    }
}

TEST(DiskField, KnownCoefficients) {
    const auto g = make_grid(17, 16);
    // x = r cos(theta) = T_1(r) (e^{i theta} + e^{-i theta}) / 2
    const CoeffField c = analyze(sample_cartesian(g, [](double x, double) { return x; }));
    EXPECT_NEAR(std::abs(c.at(1, 1) - cplx(0.5, 0)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(c.at(1, -1) - cplx(0.5, 0)), 0.0, 1e-14);
    double rest = 0.0;
    for (Index k = 0; k < g->n_radial(); ++k)
        for (Index l = -8; l < 8; ++l)
            if (!(k == 1 && std::abs(l) == 1)) rest = std::max(rest, std::abs(c.at(k, l)));
    EXPECT_LT(rest, 1e-14);
    // x^2 + y^2 = r^2 = (T_0 + T_2) / 2
    const CoeffField r2 = analyze(sample_cartesian(g, [](double x, double y) { return x * x + y * y; }));
    EXPECT_NEAR(r2.at(0, 0).real(), 0.5, 1e-14);
    EXPECT_NEAR(r2.at(2, 0).real(), 0.5, 1e-14);
}

TEST(DiskField, ParityAndConjugateSymmetryOfSampledFields) {
    const auto g = make_grid(33, 32);
    const CoeffField c = analyze(sample_cartesian(g, smooth));
    EXPECT_LT(parity_residual(c), 1e-13);
    EXPECT_LT(conjugate_symmetry_residual(c), 1e-13);

    CoeffField d = c;
    d.coeffs(1, 0) = 3.0;  // k + l odd
    EXPECT_GT(parity_residual(d), 2.9);
    EXPECT_EQ(parity_residual(enforce_parity(d)), 0.0);
    EXPECT_EQ(enforce_parity(d).coeffs(0, 0), c.coeffs(0, 0));
}

TEST(DiskField, DiskIntegralAgreesWithBesselOracle) {
    const auto g = make_grid(33, 32);
    // Integral of e^x over the unit disk is 2 pi I_1(1).
    const double want = 2 * pi * std::cyl_bessel_i(1.0, 1.0);
    const ValueField v = sample_cartesian(g, [](double x, double) { return std::exp(x); });
    EXPECT_NEAR(disk_integral(analyze(v)), want, 1e-13);
    EXPECT_NEAR(disk_integral(v), want, 1e-13);

    const ValueField r2 = sample_cartesian(g, [](double x, double y) { return x * x + y * y; });
    EXPECT_NEAR(disk_integral(r2), pi / 2, 1e-14);
    const ValueField one = ValueField::constant(g, 1.0);
    EXPECT_NEAR(disk_integral(one), pi, 1e-14);
    EXPECT_NEAR(area_inner_product(r2, r2), pi / 3, 1e-14);
    EXPECT_NEAR(area_l2_norm(one), std::sqrt(pi), 1e-14);
    EXPECT_NEAR(cheb_inner_product(one, one), 2 * pi * pi, 1e-12);
}

TEST(DiskField, CoeffArithmetic) {
    const auto g = make_grid(17, 16);
    const CoeffField a = analyze(sample_cartesian(g, smooth));
    CoeffField b = a;
    b.add_constant(2.0);
    EXPECT_NEAR(disk_integral(b) - disk_integral(a), 2 * pi, 1e-13);
    const CoeffField z = (a + a) - 2.0 * a;
    EXPECT_EQ(z.coeffs.cwiseAbs().maxCoeff(), 0.0);
    CoeffField c = a;
    c *= 0.5;
    c += c;
    EXPECT_LT((c.coeffs - a.coeffs).cwiseAbs().maxCoeff(), 1e-15);
    const CoeffField k = CoeffField::constant(g, 3.0);
    EXPECT_LT(linf_norm(ValueField(g, synthesize(k).values.array() - 3.0)), 1e-14);
}

TEST(DiskField, GridMismatchIsRejected) {
    const auto g1 = make_grid(17, 16);
    const auto g2 = make_grid(17, 32);
    EXPECT_THROW((void)area_inner_product(ValueField(g1), ValueField(g2)), ParameterError);
    EXPECT_THROW((void)(CoeffField(g1) + CoeffField(g2)), ParameterError);
}

TEST(DiskField, FiniteChecks) {
    const auto g = make_grid(17, 16);
    ValueField v = ValueField::constant(g, 1.0);
    EXPECT_TRUE(v.all_finite());
    v(3, 4) = std::nan("");
    EXPECT_FALSE(v.all_finite());
    EXPECT_FALSE(analyze(v).all_finite());
}
