#include <glab/quadrature.hpp>

#include <gtest/gtest.h>

using namespace glab;

namespace {

KernelSet kernels2(double eps, double gamma = 0.0)
{
    return KernelSet(KineticKernel::power_law(gamma, 2), make_power_law_beta(0.5, 2), SpatialKernel::constant(1.0),
                     eps);
}

} // namespace

TEST(AxisRules, Exactness)
{
    EXPECT_NEAR(gauss_legendre(5).integrate([](double x) { return std::pow(x, 8); }), 2.0 / 9.0, 1e-14);
    EXPECT_NEAR(gauss_hermite(6).integrate([](double z) { return z * z * z * z; }), 0.75 * std::sqrt(kPi), 1e-13);
    // E x^2 under N(1, 4)
    const AxisRule h = hermite_envelope(1.0, 2.0, 8);
    EXPECT_NEAR(h.integrate([](double x) { return x * x * std::exp(-0.125 * (x - 1) * (x - 1)) / std::sqrt(8 * kPi); }),
                5.0, 1e-12);
    EXPECT_NEAR(legendre_box(1.0, 3.0, 4).integrate([](double x) { return x * x * x; }), 20.0, 1e-13);
    EXPECT_NEAR(midpoint_box(0.0, 1.0, 1000).integrate([](double x) { return x; }), 0.5, 1e-14);
    EXPECT_NEAR(graded_rule(2.0, 20, 3.0).integrate([](double t) { return std::sqrt(t); }),
                2.0 / 3.0 * std::pow(2.0, 1.5), 1e-10);
    EXPECT_THROW(gauss_legendre(0), InputError);
}

TEST(Integrate1d, GradedSingularity)
{
    EXPECT_NEAR(integrate_1d([](double t) { return 1.0 / std::sqrt(t); }, 0.0, 1.0, 1e-12, 2.0), 2.0, 1e-11);
    EXPECT_NEAR(integrate_1d([](double t) { return std::sin(t); }, 0.0, kPi), 2.0, 1e-13);
    EXPECT_EQ(integrate_1d([](double) { return 1.0; }, 1.0, 1.0), 0.0);
    EXPECT_THROW(integrate_1d([](double) { return NAN; }, 0.0, 1.0), NumericalError);
}

TEST(AngleDistribution, PowerAndTabulated)
{
    const auto p = AngleDistribution::power(0.5, 0.0, 0.25);
    EXPECT_NEAR(p.mass(), std::pow(0.25, 1.5) / 1.5, 1e-15);
    EXPECT_NEAR(integrate_1d([&](double t) { return p.pdf(t); }, 0.0, 0.25, 1e-12, 2.0), 1.0, 1e-10);
    // inverse cdf: P(T <= t) = (t/0.25)^1.5
    EXPECT_NEAR(p.sample(0.3), 0.25 * std::pow(0.3, 1.0 / 1.5), 1e-15);
    const auto q = AngleDistribution::tabulated([](double t) { return std::exp(-t); }, 0.0, 2.0, 1.0, 2048);
    EXPECT_NEAR(q.mass(), 1.0 - std::exp(-2.0), 1e-12);
    const double m = q.sample(0.5);
    EXPECT_NEAR(m, -std::log(1.0 - 0.5 * q.mass()), 1e-3);
    EXPECT_EQ(q.pdf(3.0), 0.0);
    EXPECT_THROW(AngleDistribution::power(-2.0, 0.0, 1.0), InputError);
}

TEST(FrameSampler, PairIntegralsAreUnbiased)
{
    const auto f = standard_gaussian<2>();
    const KernelSet ks = kernels2(0.5);
    SamplerConfig cfg;
    cfg.n_samples = 40000;
    cfg.seed = 9;
    FrameSampler<2> s(f, ks, cfg, false);
    auto mass = estimate_pair<2>(s, [&](auto& x, auto& xs, auto& v, auto& vs) { return f.eval(x, v) * f.eval(xs, vs); });
    EXPECT_NEAR(mass.value, 1.0, 1e-12);
    auto e2 = estimate_pair<2>(s, [&](auto& x, auto& xs, auto& v, auto& vs) {
        return f.eval(x, v) * f.eval(xs, vs) * (v - vs).squaredNorm();
    });
    EXPECT_NEAR(e2.value, 4.0, 4.0 * e2.std_error);
    EXPECT_FALSE(e2.unreliable);

    cfg.pair_proposal = PairProposal::GaussianOverdispersed;
    FrameSampler<2> so(f, ks, cfg, false);
    auto e3 = estimate_pair<2>(so, [&](auto& x, auto& xs, auto& v, auto& vs) {
        return f.eval(x, v) * f.eval(xs, vs) * (v - vs).squaredNorm();
    });
    EXPECT_NEAR(e3.value, 4.0, 4.0 * e3.std_error);
}

TEST(FrameSampler, AngularMomentumIntegral)
{
    const auto f = standard_gaussian<2>();
    for (double eps : {1.0, 0.1}) {
        const KernelSet ks = kernels2(eps);
        SamplerConfig cfg;
        cfg.n_samples = 20000;
        FrameSampler<2> s(f, ks, cfg);
        auto g = [&](const CollisionFrame<2>& fr) {
            return fr.theta * fr.theta * ks.beta_eps(fr.theta) * f.eval(fr.x, fr.v) * f.eval(fr.xs, fr.vs);
        };
        const double exact = 2.0 * 4.0; // |S^0| times the normalisation
        EXPECT_NEAR(estimate<2>(s, g).value, exact, 1e-9);
        cfg.theta_strategy = ThetaStrategy::UniformOnSupport;
        FrameSampler<2> u(f, ks, cfg);
        const auto e = estimate<2>(u, g);
        EXPECT_NEAR(e.value, exact, 5.0 * e.std_error);
    }
}

TEST(FrameSampler, DeterministicAcrossRunsAndWorkers)
{
    const auto f = anisotropic_gaussian<2>(0.3);
    const KernelSet ks = kernels2(0.3);
    SamplerConfig cfg;
    cfg.n_samples = 5000;
    cfg.seed = 77;
    auto g = [&](const CollisionFrame<2>& fr) { return fr.vp(0) * fr.x(0) * f.eval(fr.x, fr.v) * f.eval(fr.xs, fr.vs); };
    const double a = estimate<2>(FrameSampler<2>(f, ks, cfg), g).value;
    const double b = estimate<2>(FrameSampler<2>(f, ks, cfg), g).value;
    EXPECT_EQ(a, b);
    cfg.workers = 3;
    const double c = estimate<2>(FrameSampler<2>(f, ks, cfg), g).value;
    const double d = estimate<2>(FrameSampler<2>(f, ks, cfg), g).value;
    EXPECT_EQ(c, d);
    EXPECT_NE(a, c);
}

TEST(FrameSampler, RejectsDimensionMismatch)
{
    const auto f = standard_gaussian<2>();
    KernelSet ks(KineticKernel::power_law(0.0, 3), make_power_law_beta(0.5, 3), SpatialKernel::constant(1.0), 1.0);
    EXPECT_THROW(FrameSampler<2>(f, ks, SamplerConfig{}), InputError);
}

TEST(TensorGrid, PolynomialMomentsExact)
{
    const auto f = anisotropic_gaussian<2>(0.3);
    const auto grid = whitened_grid<2>(f, 3, 4);
    auto prep = [&](GridNode<2>& n) { n.aux = f.log_eval(n.x, n.v); };
    const auto e = tensor_grid_pair<2>(grid, prep, [](const GridNode<2>& a, const GridNode<2>& b) {
        return std::exp(a.aux + b.aux) * ((a.v - b.v).squaredNorm() + a.x(0) * a.v(0));
    });
    // E|v - v*|^2 = 2 (1 + 4), E x1 v1 = 0.3
    EXPECT_NEAR(e.value, 10.3, 1e-11);
    EXPECT_EQ(e.method, Method::TensorGrid);
    const auto box = box_grid<2>(standard_gaussian<2>(), 8.0, 30);
    EXPECT_THROW(tensor_grid_pair<2>(box, [](GridNode<2>&) {}, [](auto&, auto&) { return 0.0; }, 1e6),
                 InputError);
    EXPECT_THROW(whitened_grid<2>(symmetric_mixture<2>(), 2, 2), InputError);
}

TEST(Streams, IndependentPerWorker)
{
    Rng a = make_stream(1, 0), b = make_stream(1, 1), c = make_stream(1, 0);
    const auto x = a(), y = b(), z = c();
    EXPECT_NE(x, y);
    EXPECT_EQ(x, z);
}
