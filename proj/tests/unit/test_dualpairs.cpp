#include <glab/dualpairs.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace glab;

TEST(QuadraticPair, ClosedForms)
{
    const auto p = make_quadratic_pair();
    EXPECT_DOUBLE_EQ(p.psi_star(2.0), 2.0);
    EXPECT_DOUBLE_EQ(p.psi(3.0), 4.5);
    // Theta(e, 1) = e - 1
    EXPECT_NEAR(p.theta(std::exp(1.0), 1.0), std::exp(1.0) - 1.0, 1e-14);
    EXPECT_NEAR(p.theta(3.0, 3.0), 3.0, 1e-15);
    EXPECT_EQ(p.theta(0.0, 2.0), 0.0);
    // compatibility at s = e^2, t = 1: r (e^2-1)/r
    const double s = std::exp(2.0);
    EXPECT_NEAR(p.psi_star_prime(2.0) * p.theta(s, 1.0), 6.38905609893065, 1e-12);
    EXPECT_NEAR(p.theta_exp(1e-10), 1.0, 1e-9);
    EXPECT_NEAR(p.theta_exp(1.0), std::exp(1.0) - 1.0, 1e-14);
}

TEST(CoshPair, ClosedForms)
{
    const auto p = make_cosh_pair();
    EXPECT_NEAR(p.psi_star(2.0), 2.172322539260975, 1e-14);
    EXPECT_NEAR(p.theta(4.0, 1.0), 2.0, 1e-15);
    EXPECT_DOUBLE_EQ(cosh_psi(0.0), 0.0);
    // conjugate at a = (Psi*)'(b): Psi(a) = a b - Psi*(b)
    for (double b : {-3.0, -0.5, 0.7, 2.0, 6.0}) {
        const double a = p.psi_star_prime(b);
        EXPECT_NEAR(p.psi(a), a * b - p.psi_star(b), 1e-12 * std::max(1.0, std::abs(a * b)));
    }
    // sqrt lower bound is an identity for this pair: 4(cosh(r/2)-1) sqrt(st) = 2(sqrt s - sqrt t)^2
    const double s = 5.0, t = 0.3;
    EXPECT_NEAR(p.psi_star(std::log(s / t)) * p.theta(s, t), 2.0 * std::pow(std::sqrt(s) - std::sqrt(t), 2), 1e-12);
}

TEST(LogMean, Examples)
{
    EXPECT_NEAR(log_mean(std::exp(1.0), 1.0), std::exp(1.0) - 1.0, 1e-14);
    EXPECT_DOUBLE_EQ(log_mean(2.0, 2.0), 2.0);
    EXPECT_EQ(log_mean(-1.0, 2.0), 0.0);
}

TEST(DeriveTheta, ReproducesQuadraticAndRejectsBadDerivative)
{
    const auto th = derive_theta([](double r) { return r; });
    for (double s : {0.1, 1.0, 7.0})
        for (double t : {0.2, 1.0, 3.0}) EXPECT_NEAR(th(s, t), log_mean(s, t), 1e-13 * (s + t));
    EXPECT_THROW(derive_theta([](double r) { return r * r; }), InputError);
    EXPECT_THROW(derive_theta([](double r) { return -r; }), InputError);
}

TEST(LegendreTransform, MatchesClosedForms)
{
    auto ps = [](double r) { return 0.5 * r * r; };
    auto dps = [](double r) { return r; };
    for (double a : {-4.0, 0.0, 0.5, 9.0}) EXPECT_NEAR(legendre_transform(ps, dps, a), 0.5 * a * a, 1e-10);
    auto cs = [](double r) { return 4.0 * (std::cosh(0.5 * r) - 1.0); };
    auto dcs = [](double r) { return 2.0 * std::sinh(0.5 * r); };
    for (double a : {-10.0, -1.0, 0.3, 2.0, 50.0})
        EXPECT_NEAR(legendre_transform(cs, dcs, a), cosh_psi(a), 1e-10 * std::max(1.0, cosh_psi(a)));
    EXPECT_THROW(legendre_transform(ps, dps, NAN), InputError);
}

TEST(CheckPair, BuiltInPairsPass)
{
    for (const auto& p : {make_quadratic_pair(), make_cosh_pair()}) {
        const auto rep = check_pair(p);
        EXPECT_TRUE(rep.passed()) << p.name;
        ASSERT_NE(rep.find("compatibility"), nullptr);
        EXPECT_LT(rep.find("compatibility")->worst, 1e-10);
        EXPECT_TRUE(rep.find("sqrt_lower_bound")->passed) << p.name;
        EXPECT_LE(rep.find("theta_mean_bound")->worst, 1e-12);
    }
}

TEST(CheckPair, CustomCoshMatchesBuiltIn)
{
    const auto p = make_pair_by_name("custom", "cosh_numeric");
    EXPECT_TRUE(p.satisfies_coth);
    EXPECT_NEAR(p.mean_constant, 0.5, 1e-12);
    EXPECT_NEAR(p.theta(4.0, 1.0), 2.0, 1e-12);
    EXPECT_NEAR(p.psi(1.5), cosh_psi(1.5), 1e-10);
    EXPECT_TRUE(check_pair(p).passed());
}

TEST(CheckPair, QuarticViolatesCothCondition)
{
    const auto p = make_pair_by_name("quartic");
    EXPECT_FALSE(p.satisfies_coth);
    const auto rep = check_pair(p);
    EXPECT_FALSE(rep.find("coth_condition")->passed);
    EXPECT_FALSE(rep.find("coth_condition")->required);
}

TEST(PairRegistry, UnknownNamesRejected)
{
    EXPECT_THROW(make_pair_by_name("nope"), InputError);
    EXPECT_THROW(make_pair_by_name("custom", "nope"), InputError);
}
