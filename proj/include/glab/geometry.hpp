#pragma once

#include "core.hpp"

#include <algorithm>
#include <functional>
#include <random>
#include <tuple>
#include <utility>
#include <vector>

namespace glab {

template <int D> struct CollisionFrame {
    Vec<D> x, xs, v, vs;
    Vec<D> sigma;
    Vec<D> vp, vsp; // post-collision velocities v', v*'
    Vec<D> k;       // (v - v*)/|v - v*|
    Vec<D> p;       // unit, orthogonal to k
    double theta = 0.0;
    double speed = 0.0; // |v - v*|
};

// Test function on phase space R^{2d}. Derivative callbacks are optional;
// missing ones fall back to central differences.
template <int D> struct TestFunction {
    std::function<double(const Vec<D>&, const Vec<D>&)> value;
    std::function<Vec<D>(const Vec<D>&, const Vec<D>&)> grad_v;
    std::function<Mat<D>(const Vec<D>&, const Vec<D>&)> hess_v;
};

// Test function on R^{4d}, arguments (x, x*, v, v*).
template <int D> struct PairFunction {
    std::function<double(const Vec<D>&, const Vec<D>&, const Vec<D>&, const Vec<D>&)> value;
    std::function<Vec<D>(const Vec<D>&, const Vec<D>&, const Vec<D>&, const Vec<D>&)> grad_v;
    std::function<Vec<D>(const Vec<D>&, const Vec<D>&, const Vec<D>&, const Vec<D>&)> grad_vs;
};

inline constexpr double kFdStep = 1e-5;

template <int D> Vec<D> relative_direction(const Vec<D>& v, const Vec<D>& vs)
{
    const Vec<D> w = v - vs;
    const double r = w.norm();
    if (!(r > 0.0)) throw DegenerateFrame("v == v*: relative direction undefined");
    return w / r;
}

template <int D> void require_unit(const Vec<D>& u, const char* what, double tol = 1e-10)
{
    if (!u.allFinite() || std::abs(u.norm() - 1.0) > tol)
        throw InputError(std::string(what) + " must be a unit vector");
}

template <int D>
std::pair<Vec<D>, Vec<D>> post_collision(const Vec<D>& v, const Vec<D>& vs, const Vec<D>& sigma)
{
    require_unit<D>(sigma, "sigma");
    const Vec<D> c = 0.5 * (v + vs);
    const double h = 0.5 * (v - vs).norm();
    return {c + h * sigma, c - h * sigma};
}

template <int D> double deviation_angle(const Vec<D>& v, const Vec<D>& vs, const Vec<D>& sigma)
{
    const Vec<D> k = relative_direction<D>(v, vs);
    return std::acos(std::clamp(k.dot(sigma), -1.0, 1.0));
}

// d=2: sign >= 0 selects (k2,-k1), sign < 0 selects (-k2,k1).
// d=3: point at the given angle on the unit circle of k-perp; angle 0 is the
// projection of the coordinate axis least aligned with k.
template <int D> Vec<D> tangent_frame(const Vec<D>& k, double angle_or_sign)
{
    check_dimension<D>();
    require_unit<D>(k, "k");
    if constexpr (D == 2) {
        Vec<D> p(k(1), -k(0));
        return angle_or_sign >= 0 ? p : Vec<D>(-p);
    } else {
        int axis = 0;
        for (int i = 1; i < D; ++i)
            if (std::abs(k(i)) < std::abs(k(axis))) axis = i;
        Vec<D> a = Vec<D>::Zero();
        a(axis) = 1.0;
        const Vec<D> e1 = (a - a.dot(k) * k).normalized();
        const Vec<D> e2 = k.cross(e1);
        return std::cos(angle_or_sign) * e1 + std::sin(angle_or_sign) * e2;
    }
}

// Deterministic quadrature on S^{d-2}_{k-perp}: d=2 the two points (weight 1),
// d=3 an n-point trapezoid rule (weights 2 pi / n). Weights sum to |S^{d-2}|.
template <int D>
std::vector<std::pair<Vec<D>, double>> tangent_directions(const Vec<D>& k, int n = 64)
{
    std::vector<std::pair<Vec<D>, double>> out;
    if constexpr (D == 2) {
        out.emplace_back(tangent_frame<D>(k, 1.0), 1.0);
        out.emplace_back(tangent_frame<D>(k, -1.0), 1.0);
    } else {
        for (int i = 0; i < n; ++i)
            out.emplace_back(tangent_frame<D>(k, 2.0 * kPi * i / n), 2.0 * kPi / n);
    }
    return out;
}

template <int D> Mat<D> projection(const Vec<D>& v, const Vec<D>& vs)
{
    const Vec<D> k = relative_direction<D>(v, vs);
    return Mat<D>::Identity() - k * k.transpose();
}

template <int D>
CollisionFrame<D> make_frame(const Vec<D>& x, const Vec<D>& xs, const Vec<D>& v, const Vec<D>& vs,
                             const Vec<D>& sigma)
{
    require_unit<D>(sigma, "sigma");
    CollisionFrame<D> f;
    f.x = x;
    f.xs = xs;
    f.v = v;
    f.vs = vs;
    f.k = relative_direction<D>(v, vs);
    f.speed = (v - vs).norm();
    f.sigma = sigma;
    f.theta = std::acos(std::clamp(f.k.dot(sigma), -1.0, 1.0));
    const Vec<D> t = sigma - f.k.dot(sigma) * f.k;
    f.p = t.norm() > 1e-14 ? Vec<D>(t.normalized()) : tangent_frame<D>(f.k, 1.0);
    std::tie(f.vp, f.vsp) = post_collision<D>(v, vs, sigma);
    return f;
}

// Frame from spherical coordinates sigma = k cos(theta) + p sin(theta).
template <int D>
CollisionFrame<D> make_frame_polar(const Vec<D>& x, const Vec<D>& xs, const Vec<D>& v,
                                   const Vec<D>& vs, double theta, const Vec<D>& p)
{
    CollisionFrame<D> f;
    f.x = x;
    f.xs = xs;
    f.v = v;
    f.vs = vs;
    f.k = relative_direction<D>(v, vs);
    f.speed = (v - vs).norm();
    f.theta = theta;
    f.p = p;
    f.sigma = f.k * std::cos(theta) + p * std::sin(theta);
    // v' - v = (|w|/2)(sigma - k), with cos - 1 written as -2 sin^2(theta/2)
    const double s = std::sin(0.5 * theta);
    const Vec<D> dv = 0.5 * f.speed * (-2.0 * s * s * f.k + std::sin(theta) * p);
    f.vp = v + dv;
    f.vsp = vs - dv;
    return f;
}

template <int D>
Vec<D> fd_grad_v(const std::function<double(const Vec<D>&, const Vec<D>&)>& phi, const Vec<D>& x,
                 const Vec<D>& v, double h = kFdStep)
{
    Vec<D> g;
    for (int i = 0; i < D; ++i) {
        Vec<D> a = v, b = v;
        a(i) += h;
        b(i) -= h;
        g(i) = (phi(x, a) - phi(x, b)) / (2.0 * h);
    }
    return g;
}

template <int D>
Mat<D> fd_hess_v(const std::function<Vec<D>(const Vec<D>&, const Vec<D>&)>& grad, const Vec<D>& x,
                 const Vec<D>& v, double h = kFdStep)
{
    Mat<D> H;
    for (int j = 0; j < D; ++j) {
        Vec<D> a = v, b = v;
        a(j) += h;
        b(j) -= h;
        H.col(j) = (grad(x, a) - grad(x, b)) / (2.0 * h);
    }
    return 0.5 * (H + H.transpose());
}

template <int D> Vec<D> grad_v_of(const TestFunction<D>& phi, const Vec<D>& x, const Vec<D>& v)
{
    if (phi.grad_v) return phi.grad_v(x, v);
    return fd_grad_v<D>(phi.value, x, v);
}

template <int D> Mat<D> hess_v_of(const TestFunction<D>& phi, const Vec<D>& x, const Vec<D>& v)
{
    if (phi.hess_v) return phi.hess_v(x, v);
    if (phi.grad_v) return fd_hess_v<D>(phi.grad_v, x, v);
    // second differences of the value, step chosen for O(h^2) + O(eps/h^2) balance
    const double h = 1e-4;
    Mat<D> H;
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) {
            Vec<D> pp = v, pm = v, mp = v, mm = v;
            pp(i) += h; pp(j) += h;
            pm(i) += h; pm(j) -= h;
            mp(i) -= h; mp(j) += h;
            mm(i) -= h; mm(j) -= h;
            H(i, j) = (phi.value(x, pp) - phi.value(x, pm) - phi.value(x, mp) + phi.value(x, mm)) /
                      (4.0 * h * h);
        }
    return H;
}

template <int D> double boltzmann_gradient(const TestFunction<D>& phi, const CollisionFrame<D>& f)
{
    return phi.value(f.x, f.vp) + phi.value(f.xs, f.vsp) - phi.value(f.x, f.v) -
           phi.value(f.xs, f.vs);
}

// sqrt(A) Pi (grad_v phi - (grad_v phi)*), A = A0(|v - v*|) |v - v*|^2.
template <int D, class A0>
Vec<D> landau_gradient(const TestFunction<D>& phi, const Vec<D>& x, const Vec<D>& xs,
                       const Vec<D>& v, const Vec<D>& vs, const A0& a0)
{
    const double r = (v - vs).norm();
    const Mat<D> P = projection<D>(v, vs);
    const double sqrtA = std::sqrt(a0(r)) * r;
    return sqrtA * (P * (grad_v_of<D>(phi, x, v) - grad_v_of<D>(phi, xs, vs)));
}

namespace detail {

template <int D>
Vec<D> pair_grad(const PairFunction<D>& Phi, bool wrt_v, const Vec<D>& x, const Vec<D>& xs,
                 const Vec<D>& v, const Vec<D>& vs)
{
    if (wrt_v && Phi.grad_v) return Phi.grad_v(x, xs, v, vs);
    if (!wrt_v && Phi.grad_vs) return Phi.grad_vs(x, xs, v, vs);
    Vec<D> g;
    for (int i = 0; i < D; ++i) {
        Vec<D> a = wrt_v ? v : vs, b = a;
        a(i) += kFdStep;
        b(i) -= kFdStep;
        const double fa = wrt_v ? Phi.value(x, xs, a, vs) : Phi.value(x, xs, v, a);
        const double fb = wrt_v ? Phi.value(x, xs, b, vs) : Phi.value(x, xs, v, b);
        g(i) = (fa - fb) / (2.0 * kFdStep);
    }
    return g;
}

} // namespace detail

// (grad_v - grad_v*)(Phi + Phi*) with Phi*(x,x*,v,v*) = Phi(x*,x,v*,v).
template <int D>
Vec<D> symmetric_relative_gradient(const PairFunction<D>& Phi, const Vec<D>& x, const Vec<D>& xs,
                                   const Vec<D>& v, const Vec<D>& vs)
{
    using detail::pair_grad;
    return pair_grad<D>(Phi, true, x, xs, v, vs) - pair_grad<D>(Phi, false, x, xs, v, vs) +
           pair_grad<D>(Phi, false, xs, x, vs, v) - pair_grad<D>(Phi, true, xs, x, vs, v);
}

// (sqrt(A)/2) Pi (grad_v - grad_v*)(Phi + Phi*).
template <int D, class A0>
Vec<D> landau_gradient_ext(const PairFunction<D>& Phi, const Vec<D>& x, const Vec<D>& xs,
                           const Vec<D>& v, const Vec<D>& vs, const A0& a0)
{
    const double r = (v - vs).norm();
    const Mat<D> P = projection<D>(v, vs);
    const double sqrtA = std::sqrt(a0(r)) * r;
    return 0.5 * sqrtA * (P * symmetric_relative_gradient<D>(Phi, x, xs, v, vs));
}

// Phi'_* + Phi' - Phi_* - Phi along a frame.
template <int D>
double boltzmann_gradient_ext(const PairFunction<D>& Phi, const CollisionFrame<D>& f)
{
    return Phi.value(f.xs, f.x, f.vsp, f.vp) + Phi.value(f.x, f.xs, f.vp, f.vsp) -
           Phi.value(f.xs, f.x, f.vs, f.v) - Phi.value(f.x, f.xs, f.v, f.vs);
}

// Randomised self-check of the collision geometry: conservation on random frames,
// |sigma - k| <= 2 theta, and the Monte Carlo second moment of p over S^{d-2}_{k-perp}
// against |S^{d-2}|/(d-1) Pi_{k-perp}.
struct GeometryReport {
    int dim = 0;
    std::size_t frames = 0;
    double momentum_err = 0.0;   // max relative
    double energy_err = 0.0;     // max relative
    double size_violation = 0.0; // max of |sigma - k| - 2 theta (<= 0 passes)
    double size_sq_violation = 0.0; // max of |sigma - k|^2 - theta^2
    double second_moment_z = 0.0;   // max |z| over matrix entries
    double second_moment_abs = 0.0; // max |error| on zero-variance entries
    bool passed(double tol = 1e-12) const
    {
        return momentum_err < tol && energy_err < tol && size_violation <= 1e-15 &&
               size_sq_violation <= 1e-15 && second_moment_z < 3.0 && second_moment_abs < 1e-10;
    }
};

template <int D> Vec<D> random_unit(std::mt19937_64& rng)
{
    std::normal_distribution<double> N;
    Vec<D> u;
    do {
        for (int i = 0; i < D; ++i) u(i) = N(rng);
    } while (u.norm() < 1e-8);
    return u.normalized();
}

template <int D>
GeometryReport check_geometry(std::size_t n_frames = 100000, std::size_t n_moment = 100000,
                              std::uint64_t seed = 7)
{
    check_dimension<D>();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N;
    std::uniform_real_distribution<double> U(0.0, 1.0);
    GeometryReport r;
    r.dim = D;
    r.frames = n_frames;
    for (std::size_t i = 0; i < n_frames; ++i) {
        Vec<D> v, vs;
        const double scale = std::exp(3.0 * N(rng));
        for (int a = 0; a < D; ++a) {
            v(a) = scale * N(rng);
            vs(a) = scale * N(rng);
        }
        const Vec<D> k = relative_direction<D>(v, vs);
        const double theta = 0.5 * kPi * U(rng);
        const Vec<D> p = D == 2 ? tangent_frame<D>(k, U(rng) < 0.5 ? 1.0 : -1.0)
                                : tangent_frame<D>(k, 2.0 * kPi * U(rng));
        const Vec<D> sigma = (std::cos(theta) * k + std::sin(theta) * p).normalized();
        const auto [vp, vsp] = post_collision<D>(v, vs, sigma);
        const double ps = v.norm() + vs.norm();
        r.momentum_err = std::max(r.momentum_err, (vp + vsp - v - vs).norm() / ps);
        const double e0 = v.squaredNorm() + vs.squaredNorm();
        r.energy_err = std::max(r.energy_err, std::abs(vp.squaredNorm() + vsp.squaredNorm() - e0) / e0);
        const double th = deviation_angle<D>(v, vs, sigma);
        const double gap = (sigma - k).norm();
        r.size_violation = std::max(r.size_violation, gap - 2.0 * th);
        r.size_sq_violation = std::max(r.size_sq_violation, gap * gap - th * th - 1e-15 * th * th);
    }
    const Vec<D> k = random_unit<D>(rng);
    const double S = tangent_sphere_measure(D);
    Mat<D> sum = Mat<D>::Zero(), sum2 = Mat<D>::Zero();
    for (std::size_t i = 0; i < n_moment; ++i) {
        const Vec<D> p = D == 2 ? tangent_frame<D>(k, U(rng) < 0.5 ? 1.0 : -1.0)
                                : tangent_frame<D>(k, 2.0 * kPi * U(rng));
        const Mat<D> m = S * p * p.transpose();
        sum += m;
        sum2 += m.cwiseProduct(m);
    }
    const double n = double(n_moment);
    const Mat<D> target = S / (D - 1) * (Mat<D>::Identity() - k * k.transpose());
    for (int a = 0; a < D; ++a)
        for (int b = 0; b < D; ++b) {
            const double mean = sum(a, b) / n;
            const double var = std::max(0.0, sum2(a, b) / n - mean * mean);
            const double se = std::sqrt(var / (n - 1));
            if (se > 1e-12 * S)
                r.second_moment_z = std::max(r.second_moment_z, std::abs(mean - target(a, b)) / se);
            else
                r.second_moment_abs = std::max(r.second_moment_abs, std::abs(mean - target(a, b)));
        }
    return r;
}

} // namespace glab
