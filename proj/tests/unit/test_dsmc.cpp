#include <glab/dsmc.hpp>

#include <gtest/gtest.h>

using namespace glab;

namespace {

KernelSet kernels(int d, double eps, double gamma = 0.0, SpatialKernel kap = SpatialKernel::constant(1.0))
{
    return KernelSet(KineticKernel::power_law(gamma, d), make_power_law_beta(0.5, d), kap, eps);
}

SolverConfig small(std::size_t n, double horizon, std::uint64_t seed = 1)
{
    SolverConfig c;
    c.n = n;
    c.horizon = horizon;
    c.dt = 0.01;
    c.seed = seed;
    c.trace_every = 10;
    return c;
}

} // namespace

TEST(Dsmc, ZeroKappaIsFreeStreaming)
{
    const auto f = anisotropic_gaussian<2>();
    const SolverConfig cfg = small(500, 0.5);
    Simulator<2> sim(cfg, kernels(2, 0.5, 0.0, SpatialKernel::constant(0.0)));
    Rng rng = make_stream(cfg.seed, 0);
    const auto e0 = sim.sample_initial(f, rng);
    const auto res = sim.run(f);
    ASSERT_EQ(res.final_state.size(), e0.size());
    for (std::size_t i = 0; i < e0.size(); ++i) {
        EXPECT_EQ(res.final_state.v[i], e0.v[i]);
        EXPECT_LT((res.final_state.x[i] - (e0.x[i] + 0.5 * e0.v[i])).norm(), 1e-12);
    }
    EXPECT_EQ(res.trace.back().collisions, 0u);
    EXPECT_EQ(res.steps, 50u);
}

TEST(Dsmc, CollisionsConserveMomentumAndEnergy)
{
    const auto f = anisotropic_gaussian<3>(0.3);
    SolverConfig cfg = small(2000, 0.3);
    for (double gamma : {0.0, 1.0}) {
        Simulator<3> sim(cfg, kernels(3, 0.5, gamma, SpatialKernel::exp_bracket(1.0)));
        const auto res = sim.run(f);
        EXPECT_LT(res.max_momentum_drift, 1e-10);
        EXPECT_LT(res.max_energy_drift, 1e-10);
        EXPECT_GT(res.trace.back().collisions, 0u);
        EXPECT_NEAR(res.trace.back().energy, res.trace.front().energy, 1e-10 * res.trace.front().energy);
    }
}

TEST(Dsmc, DeterministicForFixedSeed)
{
    const auto f = standard_gaussian<2>();
    const KernelSet ks = kernels(2, 0.5);
    const auto a = Simulator<2>(small(300, 0.2, 9), ks).run(f);
    const auto b = Simulator<2>(small(300, 0.2, 9), ks).run(f);
    const auto c = Simulator<2>(small(300, 0.2, 10), ks).run(f);
    EXPECT_EQ(a.final_state.v, b.final_state.v);
    EXPECT_EQ(a.trace.back().entropy, b.trace.back().entropy);
    EXPECT_NE(a.final_state.v, c.final_state.v);
}

TEST(Dsmc, AnisotropicVelocitiesRelax)
{
    const auto f = anisotropic_gaussian<2>();
    SolverConfig cfg = small(3000, 1.0);
    Simulator<2> sim(cfg, kernels(2, 0.5));
    const auto res = sim.run(f);
    const Mat<2> C = res.final_state.velocity_covariance();
    // energy stays at 5/2 while the variances move towards each other
    EXPECT_GT(C(0, 0), 1.3);
    EXPECT_LT(C(1, 1), 3.7);
    EXPECT_NEAR(C(0, 0) + C(1, 1), 5.0, 0.2);
}

TEST(Dsmc, DefaultCutoffAndValidation)
{
    const KernelSet ks = kernels(2, 0.5);
    Simulator<2> sim(SolverConfig{}, ks);
    EXPECT_GT(sim.theta_min(), 0.0);
    EXPECT_LT(sim.neglected_fraction(), 1e-3);
    EXPECT_NEAR(sim.neglected_fraction(), 0.9e-3, 1e-9);
    SolverConfig bad;
    bad.theta_min = 0.2;
    EXPECT_THROW(Simulator<2>(bad, ks), InputError);
    bad = SolverConfig{};
    bad.n = 10;
    EXPECT_THROW(Simulator<2>(bad, ks), InputError);
    bad = SolverConfig{};
    bad.dt = 0.0;
    EXPECT_THROW(Simulator<2>(bad, ks), InputError);
    EXPECT_THROW(Simulator<3>(SolverConfig{}, ks), InputError);
}

TEST(Dsmc, SingularKernelIsCappedAndMajorantGrows)
{
    const auto f = standard_gaussian<2>();
    SolverConfig cfg = small(400, 0.2);
    cfg.a0_cap = 5.0;
    Simulator<2> sim(cfg, kernels(2, 0.5, -1.0));
    const auto res = sim.run(f);
    EXPECT_GT(res.cap_exceedances, 0u);
    EXPECT_LE(sim.a0_majorant(), 4.0 * cfg.a0_cap);
    EXPECT_LT(res.max_energy_drift, 1e-10);
}

TEST(Dsmc, TraceAndEntropyBalance)
{
    const auto f = anisotropic_gaussian<2>();
    SolverConfig cfg = small(1000, 0.2);
    cfg.dissipation_samples = 2000;
    const auto res = Simulator<2>(cfg, kernels(2, 0.5)).run(f);
    ASSERT_EQ(res.trace.size(), 3u);
    EXPECT_NEAR(res.trace[1].t, 0.1, 1e-12);
    for (const auto& row : res.trace) {
        EXPECT_GT(row.dissipation, 0.0);
        EXPECT_GT(row.entropy_err, 0.0);
        EXPECT_GT(row.moment, 1.0);
    }
    // initial entropy against the closed form
    EXPECT_NEAR(res.trace.front().entropy, f.entropy(), 0.1);
    const auto [bal, sigma] = entropy_balance<2>(res.trace);
    EXPECT_TRUE(std::isfinite(bal));
    EXPECT_GT(sigma, 0.0);
    std::vector<TraceRow<2>> rows(2);
    rows[0].entropy = 1.0;
    rows[1].t = 2.0;
    rows[1].entropy = 0.5;
    rows[0].dissipation = rows[1].dissipation = 0.25;
    EXPECT_DOUBLE_EQ(entropy_balance<2>(rows).first, 0.0);
}
