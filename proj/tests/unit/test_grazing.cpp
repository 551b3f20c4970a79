#include <glab/grazing.hpp>

#include <gtest/gtest.h>

using namespace glab;

namespace {

KernelSet kernels(int d, double eps = 1.0, double gamma = 0.0)
{
    return KernelSet(KineticKernel::power_law(gamma, d), make_power_law_beta(0.5, d), SpatialKernel::constant(1.0),
                     eps);
}

} // namespace

TEST(TestFunctions, BumpDerivativesMatchFiniteDifferences)
{
    const Vec<2> x(0.4, -0.9), v(1.1, 0.3);
    for (int which : {1, 2, 3}) {
        const auto phi = bump_polynomial<2>(which);
        const Vec<2> fd = fd_grad_v<2>(phi.value, x, v);
        EXPECT_LT((phi.grad_v(x, v) - fd).norm(), 1e-8) << which;
        const double h = 1e-4;
        for (int i = 0; i < 2; ++i) {
            Vec<2> e = Vec<2>::Zero();
            e(i) = h;
            const Vec<2> col = (phi.grad_v(x, v + e) - phi.grad_v(x, v - e)) / (2 * h);
            EXPECT_LT((phi.hess_v(x, v).col(i) - col).norm(), 1e-6) << which;
        }
    }
    EXPECT_EQ(bump_polynomial<2>(2).value(Vec<2>(3.0, 0.0), v), 0.0);
    EXPECT_NEAR(Bump<2>{}.value(Vec<2>::Zero()), std::exp(-1.0), 1e-15);
    EXPECT_THROW(probe_polynomial<2>(4), InputError);
}

TEST(TestFunctions, SmoothStepAndGuardedPair)
{
    const SmoothStep chi{0.2};
    EXPECT_EQ(chi.value(0.1), 0.0);
    EXPECT_EQ(chi.value(0.5), 1.0);
    EXPECT_NEAR(chi.value(0.3), 0.5, 1e-15);
    EXPECT_NEAR(chi.derivative(0.27), (chi.value(0.27 + 1e-6) - chi.value(0.27 - 1e-6)) / 2e-6, 1e-6);

    const auto Phi = guarded_symmetric_pair<2>(bump_polynomial<2>(2), 0.5);
    const Vec<2> x(0.1, 0.2), xs(-0.3, 0.4), v(0.5, 0.1), vs(0.0, -0.3); // |v - v*| ~ 0.64, inside the ramp
    const Vec<2> gv = fd_grad_v<2>([&](const Vec<2>&, const Vec<2>& u) { return Phi.value(x, xs, u, vs); }, x, v);
    const Vec<2> gs = fd_grad_v<2>([&](const Vec<2>&, const Vec<2>& u) { return Phi.value(x, xs, v, u); }, x, vs);
    EXPECT_LT((Phi.grad_v(x, xs, v, vs) - gv).norm(), 1e-8);
    EXPECT_LT((Phi.grad_vs(x, xs, v, vs) - gs).norm(), 1e-8);
    EXPECT_EQ(Phi.value(x, xs, v, v), 0.0);
}

TEST(Probes, MinimumSpeedAndDeterminism)
{
    const auto a = make_probes<3>(200, 5, 0.5), b = make_probes<3>(200, 5, 0.5);
    ASSERT_EQ(a.size(), 200u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_GE((a[i].v - a[i].vs).norm(), 0.5);
        EXPECT_EQ(a[i].x, b[i].x);
    }
}

TEST(Fits, LogLogSlope)
{
    const std::vector<double> x = {0.1, 0.01, 0.001}, y = {3e-2, 3e-4, 3e-6};
    EXPECT_NEAR(fit_loglog_slope(x, y), 2.0, 1e-12);
    EXPECT_NEAR(fit_tail_slope({1.0, 0.1, 0.01, 0.001}, {5.0, 3e-2, 3e-4, 3e-6}, 3), 2.0, 1e-12);
    EXPECT_TRUE(std::isnan(fit_loglog_slope({1.0}, {1.0})));
}

TEST(GradientLemma, BoundsAndRates)
{
    const auto probes = make_probes<2>(40, 3, 0.1);
    const std::vector<double> thetas = {1e-1, 1e-2, 1e-3, 1e-4};
    for (int which : {1, 2, 3}) {
        const auto rep = check_gradient_lemma<2>(bump_polynomial<2>(which), probes, thetas);
        EXPECT_LT(rep.c1_spread, 2.0) << which;
        EXPECT_LT(rep.c2_spread, 3.0) << which;
        EXPECT_GE(rep.conv1_slope, 0.9) << which;
        EXPECT_GE(rep.conv2_slope, 0.9) << which;
    }
    const auto r3 = check_gradient_lemma<3>(bump_polynomial<3>(2), make_probes<3>(20, 4, 0.1), thetas);
    EXPECT_GE(r3.conv1_slope, 0.9);
    EXPECT_GE(r3.conv2_slope, 0.9);
}

TEST(SphereSquare, ConvergesToLandauTarget)
{
    const auto Phi = guarded_symmetric_pair<2>(bump_polynomial<2>(2), 0.2);
    const auto rep = sweep_sphere_square<2>(Phi, kernels(2), {0.4, 0.2, 0.1, 0.05}, make_probes<2>(20, 8), 0.4);
    EXPECT_GT(rep.probes, 0u);
    EXPECT_LT(rep.square_gap.back(), rep.square_gap.front());
    EXPECT_GE(rep.square_slope, 0.9);
    EXPECT_GE(rep.moment_slope, 0.9);
    EXPECT_THROW(sweep_sphere_square<2>(Phi, kernels(2), {0.1}, make_probes<2>(3, 8), 1e9), InputError);
}

TEST(Sweeps, EpsListValidation)
{
    EXPECT_THROW(check_eps_list({}), InputError);
    EXPECT_THROW(check_eps_list({0.1, 0.2}), InputError);
    EXPECT_THROW(check_eps_list({1.5}), InputError);
    EXPECT_NO_THROW(check_eps_list({1.0, 0.5}));
}

TEST(Sweeps, WeakOperatorCollisionInvariantsAndGap)
{
    const auto f = anisotropic_gaussian<2>(0.3);
    SamplerConfig cfg;
    cfg.n_samples = 4000;
    const auto inv = sweep_weak_operator<2>(f, velocity_component<2>(1), kernels(2), {0.5, 0.2}, cfg);
    for (const auto& v : inv.values) EXPECT_LT(std::abs(v.value), 1e-10);
    const auto r = sweep_weak_operator<2>(f, position_velocity<2>(0, 0), kernels(2), {0.5, 0.1}, cfg);
    EXPECT_NEAR(r.landau_target.value, -0.6, 5.0 * r.landau_target.std_error);
    EXPECT_EQ(r.gaps.size(), 2u);
}

TEST(Sweeps, DissipationAgainstLandauTarget)
{
    const auto f = anisotropic_gaussian<2>();
    SamplerConfig cfg;
    cfg.n_samples = 20000;
    Estimate target = exact_estimate(2.25);
    target.n_samples = 1;
    const auto r = sweep_dissipation<2>(f, make_cosh_pair(), kernels(2), {0.4, 0.1}, cfg, target);
    EXPECT_EQ(r.values.size(), 2u);
    EXPECT_LT(r.gaps.back(), r.gaps.front());
    EXPECT_NEAR(r.values.back().value, 2.25, 0.1 * 2.25);
}
