#include <glab/geometry.hpp>
#include <glab/grazing.hpp>

#include <gtest/gtest.h>

using namespace glab;

namespace {

Vec<2> v2(double a, double b) { return Vec<2>(a, b); }
Vec<3> v3(double a, double b, double c) { return Vec<3>(a, b, c); }

} // namespace

TEST(PostCollision, RightAngleDeflection)
{
    auto [vp, vsp] = post_collision<2>(v2(1, 0), v2(-1, 0), v2(0, 1));
    EXPECT_NEAR(vp(0), 0.0, 1e-15);
    EXPECT_NEAR(vp(1), 1.0, 1e-15);
    EXPECT_NEAR(vsp(0), 0.0, 1e-15);
    EXPECT_NEAR(vsp(1), -1.0, 1e-15);
}

TEST(PostCollision, SigmaEqualKIsIdentity)
{
    const Vec<3> v = v3(0.3, -1.2, 2.0), vs = v3(-0.7, 0.4, 1.1);
    auto [vp, vsp] = post_collision<3>(v, vs, relative_direction<3>(v, vs));
    EXPECT_LT((vp - v).norm(), 1e-14);
    EXPECT_LT((vsp - vs).norm(), 1e-14);
}

TEST(PostCollision, ConservesAtThirtyDegrees)
{
    const Vec<2> v = v2(2, 1), vs = v2(0, 1);
    const Vec<2> sigma = v2(std::cos(kPi / 6), std::sin(kPi / 6));
    auto [vp, vsp] = post_collision<2>(v, vs, sigma);
    // direct summation oracle
    const double px = v(0) + vs(0), py = v(1) + vs(1);
    const double e = v(0) * v(0) + v(1) * v(1) + vs(0) * vs(0) + vs(1) * vs(1);
    EXPECT_NEAR(vp(0) + vsp(0), px, 1e-12 * std::abs(px));
    EXPECT_NEAR(vp(1) + vsp(1), py, 1e-12 * std::abs(py));
    EXPECT_NEAR(vp.squaredNorm() + vsp.squaredNorm(), e, 1e-12 * e);
    // frozen: v' = (1,1) + (cos 30, sin 30)
    EXPECT_NEAR(vp(0), 1.8660254037844386, 1e-14);
    EXPECT_NEAR(vp(1), 1.5, 1e-14);
}

TEST(PostCollision, RejectsNonUnitSigma)
{
    EXPECT_THROW(post_collision<2>(v2(1, 0), v2(0, 0), v2(1, 1)), InputError);
}

TEST(DeviationAngle, Examples)
{
    EXPECT_NEAR(deviation_angle<2>(v2(1, 0), v2(-1, 0), v2(1, 0)), 0.0, 1e-15);
    EXPECT_NEAR(deviation_angle<2>(v2(1, 0), v2(-1, 0), v2(0, 1)), kPi / 2, 1e-15);
    EXPECT_NEAR(deviation_angle<2>(v2(1, 0), v2(-1, 0), v2(std::cos(0.3), std::sin(0.3))), 0.3, 1e-14);
    EXPECT_THROW(deviation_angle<2>(v2(1, 1), v2(1, 1), v2(1, 0)), DegenerateFrame);
}

TEST(TangentFrame, ConventionAndOrthogonality)
{
    const Vec<2> p = tangent_frame<2>(v2(1, 0), 1.0);
    EXPECT_NEAR(p(0), 0.0, 1e-15);
    EXPECT_NEAR(p(1), -1.0, 1e-15);
    const Vec<2> q = tangent_frame<2>(v2(1, 0), -1.0);
    EXPECT_NEAR(q(1), 1.0, 1e-15);
    const Vec<3> e = tangent_frame<3>(v3(0, 0, 1), 0.0);
    EXPECT_NEAR(e(0), 1.0, 1e-15);
    EXPECT_NEAR(e(2), 0.0, 1e-15);
    const Vec<3> k = v3(1, 2, 3).normalized();
    for (double a : {0.0, 1.0, 2.5, 4.0}) {
        const Vec<3> t = tangent_frame<3>(k, a);
        EXPECT_NEAR(t.norm(), 1.0, 1e-14);
        EXPECT_NEAR(t.dot(k), 0.0, 1e-14);
    }
    EXPECT_THROW(tangent_frame<2>(v2(2, 0), 1.0), InputError);
}

TEST(TangentFrame, QuadratureWeightsSumToSphereMeasure)
{
    double s2 = 0, s3 = 0;
    for (const auto& [p, w] : tangent_directions<2>(v2(0.6, 0.8))) s2 += w;
    for (const auto& [p, w] : tangent_directions<3>(v3(0, 0.6, 0.8))) s3 += w;
    EXPECT_NEAR(s2, 2.0, 1e-14);
    EXPECT_NEAR(s3, 2.0 * kPi, 1e-13);
}

TEST(Projection, Examples)
{
    const Mat<2> P = projection<2>(v2(2, 0), v2(0, 0));
    EXPECT_NEAR(P(0, 0), 0.0, 1e-15);
    EXPECT_NEAR(P(1, 1), 1.0, 1e-15);
    EXPECT_NEAR(P(0, 1), 0.0, 1e-15);
    const Mat<3> Q = projection<3>(v3(1, 1, 1), v3(0, 0, 0));
    EXPECT_LT((Q * Q - Q).cwiseAbs().maxCoeff(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Mat<3>> es(Q);
    EXPECT_NEAR(es.eigenvalues()(0), 0.0, 1e-12);
    EXPECT_NEAR(es.eigenvalues()(1), 1.0, 1e-12);
    EXPECT_NEAR(es.eigenvalues()(2), 1.0, 1e-12);
    EXPECT_THROW(projection<2>(v2(1, 1), v2(1, 1)), DegenerateFrame);
}

TEST(BoltzmannGradient, CollisionInvariantsVanish)
{
    const auto f = make_frame_polar<2>(v2(0.1, 0.2), v2(-1, 0.5), v2(1.5, -0.3), v2(-0.2, 0.9), 0.4,
                                       tangent_frame<2>(relative_direction<2>(v2(1.5, -0.3), v2(-0.2, 0.9)), 1));
    EXPECT_NEAR(boltzmann_gradient<2>(kinetic_energy<2>(), f), 0.0, 1e-13);
    EXPECT_NEAR(boltzmann_gradient<2>(velocity_component<2>(0), f), 0.0, 1e-14);
}

TEST(BoltzmannGradient, MatchesDirectFourPointEvaluation)
{
    const Vec<2> x(0.7, -0.4), xs(-1.1, 0.3), v(0.9, 0.1), vs(-0.5, 1.2);
    const Vec<2> sigma = v2(std::cos(1.0), std::sin(1.0));
    const auto f = make_frame<2>(x, xs, v, vs, sigma);
    // oracle: recompute v', v*' by hand
    const Vec<2> c = 0.5 * (v + vs);
    const double h = 0.5 * (v - vs).norm();
    const Vec<2> vp = c + h * sigma, vsp = c - h * sigma;
    const double oracle = x(0) * vp(0) + xs(0) * vsp(0) - x(0) * v(0) - xs(0) * vs(0);
    EXPECT_NEAR(boltzmann_gradient<2>(position_velocity<2>(0, 0), f), oracle, 1e-14);
}

TEST(LandauGradient, Examples)
{
    const KineticKernel a0 = KineticKernel::power_law(0.0, 2);
    const Vec<2> z = Vec<2>::Zero();
    EXPECT_LT(landau_gradient<2>(kinetic_energy<2>(), z, z, v2(1, 2), v2(-0.3, 0.5), a0).norm(), 1e-13);
    EXPECT_LT(landau_gradient<2>(velocity_component<2>(1), z, z, v2(1, 0), v2(0, 0), a0).norm(), 1e-15);
    // phi = x1 v2, x=(1,0), x*=0, v-v*=(2,0): grad difference (0,1), Pi keeps it, sqrt(A) = 2
    const Vec<2> g = landau_gradient<2>(position_velocity<2>(0, 1), v2(1, 0), z, v2(2, 0), z, a0);
    // finite-difference oracle for the velocity gradient
    TestFunction<2> fd;
    fd.value = [](const Vec<2>& x, const Vec<2>& v) { return x(0) * v(1); };
    const Vec<2> h = landau_gradient<2>(fd, v2(1, 0), z, v2(2, 0), z, a0);
    EXPECT_NEAR(g(0), 0.0, 1e-14);
    EXPECT_NEAR(g(1), 2.0, 1e-14);
    EXPECT_NEAR(h(1), 2.0, 1e-8);
}

TEST(LandauGradientExt, SymmetricProductAndFiniteDifferences)
{
    const KineticKernel a0 = KineticKernel::power_law(0.0, 3);
    const auto phi = bump_polynomial<3>(2);
    PairFunction<3> prod;
    prod.value = [phi](const Vec<3>& x, const Vec<3>& xs, const Vec<3>& v, const Vec<3>& vs) {
        return phi.value(x, v) * phi.value(xs, vs);
    };
    const Vec<3> x = v3(0.2, -0.1, 0.4), xs = v3(-0.3, 0.5, 0.1), v = v3(0.4, 0.3, -0.2), vs = v3(-0.6, 0.1, 0.5);
    // symmetric Phi: ext gradient = sqrt(A) Pi (grad_v - grad_v*) Phi
    const Vec<3> ext = landau_gradient_ext<3>(prod, x, xs, v, vs, a0);
    const Vec<3> gv = fd_grad_v<3>([&](const Vec<3>&, const Vec<3>& u) { return prod.value(x, xs, u, vs); }, x, v);
    const Vec<3> gvs = fd_grad_v<3>([&](const Vec<3>&, const Vec<3>& u) { return prod.value(x, xs, v, u); }, x, vs);
    const double r = (v - vs).norm();
    const Vec<3> expect = r * (projection<3>(v, vs) * (gv - gvs));
    EXPECT_LT((ext - expect).norm(), 1e-7 * std::max(1.0, expect.norm()));

    PairFunction<3> flat;
    flat.value = [](const Vec<3>& x, const Vec<3>& xs, const Vec<3>&, const Vec<3>&) { return x.dot(xs); };
    EXPECT_LT(landau_gradient_ext<3>(flat, x, xs, v, vs, a0).norm(), 1e-9);
}

TEST(GeometryProperties, RandomFrames)
{
    for (const auto& r : {check_geometry<2>(10000, 20000, 3), check_geometry<2>(10000, 20000, 4)}) {
        EXPECT_TRUE(r.passed()) << "d=2";
        EXPECT_LT(r.momentum_err, 1e-12);
        EXPECT_LT(r.energy_err, 1e-12);
    }
    const auto r3 = check_geometry<3>(10000, 20000, 3);
    EXPECT_TRUE(r3.passed()) << "z=" << r3.second_moment_z;
}

TEST(GeometryProperties, GradientBoundOnRandomFrames)
{
    // |grad-bar phi| <= C1 theta |v - v*| for a compactly supported phi
    const auto phi = bump_polynomial<2>(2);
    const auto probes = make_probes<2>(500, 11);
    double worst = 0.0;
    for (const auto& pr : probes)
        for (double th : {1e-1, 1e-2, 1e-3}) {
            const Vec<2> p = tangent_frame<2>(relative_direction<2>(pr.v, pr.vs), 1.0);
            const auto f = make_frame_polar<2>(pr.x, pr.xs, pr.v, pr.vs, th, p);
            worst = std::max(worst, std::abs(boltzmann_gradient<2>(phi, f)) / (th * f.speed));
        }
    EXPECT_LT(worst, 50.0);
    EXPECT_GT(worst, 0.0);
}
