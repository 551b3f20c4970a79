#pragma once

#include "functionals.hpp"

#include <random>
#include <string>
#include <vector>

namespace glab {

// ---------------------------------------------------------------------------
// Probe test functions

// exp(-1/(1 - |y|^2/R^2)) inside the ball of radius R, zero outside.
template <int D> struct Bump {
    double R = 3.0;

    double value(const Vec<D>& y) const
    {
        const double s = 1.0 - y.squaredNorm() / (R * R);
        return s > 0.0 ? std::exp(-1.0 / s) : 0.0;
    }
    Vec<D> grad(const Vec<D>& y) const
    {
        const double s = 1.0 - y.squaredNorm() / (R * R);
        if (s <= 0.0) return Vec<D>::Zero();
        return std::exp(-1.0 / s) * (-2.0 / (R * R * s * s)) * y;
    }
    Mat<D> hess(const Vec<D>& y) const
    {
        const double s = 1.0 - y.squaredNorm() / (R * R);
        if (s <= 0.0) return Mat<D>::Zero();
        const double b = std::exp(-1.0 / s);
        const Vec<D> g = (-2.0 / (R * R * s * s)) * y;
        const Mat<D> dg = -2.0 / (R * R) *
                          (Mat<D>::Identity() / (s * s) + 4.0 / (R * R * s * s * s) * y * y.transpose());
        return b * (g * g.transpose() + dg);
    }
};

// A polynomial in (x, v) with its velocity derivatives.
template <int D> struct Polynomial {
    std::function<double(const Vec<D>&, const Vec<D>&)> value;
    std::function<Vec<D>(const Vec<D>&, const Vec<D>&)> grad_v;
    std::function<Mat<D>(const Vec<D>&, const Vec<D>&)> hess_v;
};

// which = 1: v_2;  which = 2: x_1 v_2 + v_1^2;  which = 3: v_1 v_2 + x_2.
template <int D> Polynomial<D> probe_polynomial(int which)
{
    Polynomial<D> p;
    if (which == 1) {
        p.value = [](const Vec<D>&, const Vec<D>& v) { return v(1); };
        p.grad_v = [](const Vec<D>&, const Vec<D>&) { Vec<D> g = Vec<D>::Zero(); g(1) = 1.0; return g; };
        p.hess_v = [](const Vec<D>&, const Vec<D>&) { return Mat<D>::Zero().eval(); };
    } else if (which == 2) {
        p.value = [](const Vec<D>& x, const Vec<D>& v) { return x(0) * v(1) + v(0) * v(0); };
        p.grad_v = [](const Vec<D>& x, const Vec<D>& v) {
            Vec<D> g = Vec<D>::Zero();
            g(0) = 2.0 * v(0);
            g(1) = x(0);
            return g;
        };
        p.hess_v = [](const Vec<D>&, const Vec<D>&) {
            Mat<D> H = Mat<D>::Zero();
            H(0, 0) = 2.0;
            return H;
        };
    } else if (which == 3) {
        p.value = [](const Vec<D>& x, const Vec<D>& v) { return v(0) * v(1) + x(1); };
        p.grad_v = [](const Vec<D>&, const Vec<D>& v) {
            Vec<D> g = Vec<D>::Zero();
            g(0) = v(1);
            g(1) = v(0);
            return g;
        };
        p.hess_v = [](const Vec<D>&, const Vec<D>&) {
            Mat<D> H = Mat<D>::Zero();
            H(0, 1) = H(1, 0) = 1.0;
            return H;
        };
    } else {
        throw InputError("probe polynomial index must be 1, 2 or 3");
    }
    return p;
}

// phi(x, v) = bump(x) bump(v) P(x, v), compactly supported and smooth.
template <int D> TestFunction<D> bump_polynomial(int which, double Rx = 3.0, double Rv = 3.0)
{
    const Polynomial<D> P = probe_polynomial<D>(which);
    const Bump<D> bx{Rx}, bv{Rv};
    TestFunction<D> t;
    t.value = [=](const Vec<D>& x, const Vec<D>& v) { return bx.value(x) * bv.value(v) * P.value(x, v); };
    t.grad_v = [=](const Vec<D>& x, const Vec<D>& v) {
        return Vec<D>(bx.value(x) * (bv.grad(v) * P.value(x, v) + bv.value(v) * P.grad_v(x, v)));
    };
    t.hess_v = [=](const Vec<D>& x, const Vec<D>& v) {
        const Vec<D> gb = bv.grad(v), gp = P.grad_v(x, v);
        return Mat<D>(bx.value(x) * (bv.hess(v) * P.value(x, v) + gb * gp.transpose() +
                                     gp * gb.transpose() + bv.value(v) * P.hess_v(x, v)));
    };
    return t;
}

// Plain polynomial test functions (collision invariants and friends).
template <int D> TestFunction<D> constant_function(double c = 1.0)
{
    TestFunction<D> t;
    t.value = [c](const Vec<D>&, const Vec<D>&) { return c; };
    t.grad_v = [](const Vec<D>&, const Vec<D>&) { return Vec<D>::Zero().eval(); };
    t.hess_v = [](const Vec<D>&, const Vec<D>&) { return Mat<D>::Zero().eval(); };
    return t;
}

template <int D> TestFunction<D> velocity_component(int i)
{
    TestFunction<D> t;
    t.value = [i](const Vec<D>&, const Vec<D>& v) { return v(i); };
    t.grad_v = [i](const Vec<D>&, const Vec<D>&) { Vec<D> g = Vec<D>::Zero(); g(i) = 1.0; return g; };
    t.hess_v = [](const Vec<D>&, const Vec<D>&) { return Mat<D>::Zero().eval(); };
    return t;
}

template <int D> TestFunction<D> kinetic_energy()
{
    TestFunction<D> t;
    t.value = [](const Vec<D>&, const Vec<D>& v) { return v.squaredNorm(); };
    t.grad_v = [](const Vec<D>&, const Vec<D>& v) { return Vec<D>(2.0 * v); };
    t.hess_v = [](const Vec<D>&, const Vec<D>&) { return Mat<D>(2.0 * Mat<D>::Identity()); };
    return t;
}

// phi = x_i v_j
template <int D> TestFunction<D> position_velocity(int i, int j)
{
    TestFunction<D> t;
    t.value = [i, j](const Vec<D>& x, const Vec<D>& v) { return x(i) * v(j); };
    t.grad_v = [i, j](const Vec<D>& x, const Vec<D>&) { Vec<D> g = Vec<D>::Zero(); g(j) = x(i); return g; };
    t.hess_v = [](const Vec<D>&, const Vec<D>&) { return Mat<D>::Zero().eval(); };
    return t;
}

// Smooth step: 0 for r <= delta, 1 for r >= 2 delta.
struct SmoothStep {
    double delta = 0.2;

    double value(double r) const
    {
        const double t = (r - delta) / delta;
        if (t <= 0.0) return 0.0;
        if (t >= 1.0) return 1.0;
        const double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
        return a / (a + b);
    }
    double derivative(double r) const
    {
        const double t = (r - delta) / delta;
        if (t <= 0.0 || t >= 1.0) return 0.0;
        const double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
        return a * b * (1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t))) / ((a + b) * (a + b)) / delta;
    }
};

// Phi(x, x*, v, v*) = chi(|v - v*|) (phi(x, v) + phi(x*, v*)), vanishing for |v - v*| < delta.
template <int D> PairFunction<D> guarded_symmetric_pair(const TestFunction<D>& phi, double delta)
{
    const SmoothStep chi{delta};
    PairFunction<D> P;
    P.value = [=](const Vec<D>& x, const Vec<D>& xs, const Vec<D>& v, const Vec<D>& vs) {
        return chi.value((v - vs).norm()) * (phi.value(x, v) + phi.value(xs, vs));
    };
    auto grad = [=](bool wrt_v, const Vec<D>& x, const Vec<D>& xs, const Vec<D>& v, const Vec<D>& vs) {
        const double r = (v - vs).norm();
        const double c = chi.value(r), dc = chi.derivative(r);
        Vec<D> g = wrt_v ? Vec<D>(c * grad_v_of<D>(phi, x, v)) : Vec<D>(c * grad_v_of<D>(phi, xs, vs));
        if (dc != 0.0 && r > 0.0) {
            const Vec<D> k = (v - vs) / r;
            g += (wrt_v ? 1.0 : -1.0) * dc * (phi.value(x, v) + phi.value(xs, vs)) * k;
        }
        return g;
    };
    P.grad_v = [=](const Vec<D>& x, const Vec<D>& xs, const Vec<D>& v, const Vec<D>& vs) {
        return grad(true, x, xs, v, vs);
    };
    P.grad_vs = [=](const Vec<D>& x, const Vec<D>& xs, const Vec<D>& v, const Vec<D>& vs) {
        return grad(false, x, xs, v, vs);
    };
    return P;
}

// ---------------------------------------------------------------------------
// Probe frames and fits

template <int D> struct Probe {
    Vec<D> x, xs, v, vs;
};

// Points with standard normal coordinates, |v - v*| >= min_speed.
template <int D> std::vector<Probe<D>> make_probes(std::size_t n, std::uint64_t seed, double min_speed = 0.0)
{
    Rng rng = make_stream(seed, 0);
    std::normal_distribution<double> N(0.0, 1.0);
    auto draw = [&] {
        Vec<D> y;
        for (int i = 0; i < D; ++i) y(i) = N(rng);
        return y;
    };
    std::vector<Probe<D>> out;
    while (out.size() < n) {
        Probe<D> p{draw(), draw(), draw(), draw()};
        if ((p.v - p.vs).norm() >= std::max(min_speed, 1e-8)) out.push_back(p);
    }
    return out;
}

// Least-squares slope of log y against log x; non-positive y are skipped.
inline double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
        const double a = std::log(x[i]), b = std::log(y[i]);
        sx += a;
        sy += b;
        sxx += a * a;
        sxy += a * b;
        ++n;
    }
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Fit on the last `tail` points of a sweep.
inline double fit_tail_slope(const std::vector<double>& x, const std::vector<double>& y, std::size_t tail = 3)
{
    const std::size_t k = std::min(tail, x.size());
    return fit_loglog_slope(std::vector<double>(x.end() - k, x.end()), std::vector<double>(y.end() - k, y.end()));
}

// ---------------------------------------------------------------------------
// Gradient lemma: bounds and pointwise limits

struct GradientLemmaReport {
    std::vector<double> thetas;
    std::vector<double> c1;         // max |grad-bar phi| / (theta |w|)
    std::vector<double> c2;         // max |int grad-bar phi dp| / (theta^2 (|w| + |w|^2))
    std::vector<double> conv1_err;  // max |grad-bar phi / theta - (|w|/2) p.N|
    std::vector<double> conv2_err;  // max |theta^-2 int grad-bar phi dp - limit|
    double c1_spread = 0.0, c2_spread = 0.0; // max/min of the fitted constants over theta
    double conv1_slope = 0.0, conv2_slope = 0.0;
};

// (grad_v - grad_v*) . G by central differences along (e_i, -e_i).
template <int D, class Field>
double fd_relative_divergence(const Field& G, const Vec<D>& v, const Vec<D>& vs, double h = kFdStep)
{
    double s = 0.0;
    for (int i = 0; i < D; ++i) {
        Vec<D> e = Vec<D>::Zero();
        e(i) = h;
        s += (G(Vec<D>(v + e), Vec<D>(vs - e))(i) - G(Vec<D>(v - e), Vec<D>(vs + e))(i)) / (2.0 * h);
    }
    return s;
}

// (grad_v - grad_v*) . (|w|^2 Pi (grad phi - grad phi*)) by the finite-difference oracle.
template <int D>
double fd_landau_divergence(const TestFunction<D>& phi, const Vec<D>& x, const Vec<D>& xs, const Vec<D>& v,
                            const Vec<D>& vs)
{
    auto G = [&](const Vec<D>& a, const Vec<D>& b) {
        const Vec<D> w = a - b;
        const Vec<D> n = grad_v_of<D>(phi, x, a) - grad_v_of<D>(phi, xs, b);
        return Vec<D>(w.squaredNorm() * n - w.dot(n) * w);
    };
    return fd_relative_divergence<D>(G, v, vs);
}

template <int D>
GradientLemmaReport check_gradient_lemma(const TestFunction<D>& phi, const std::vector<Probe<D>>& probes,
                                         const std::vector<double>& thetas, std::uint64_t seed = 7,
                                         const std::vector<double>& slope_thetas = {1e-1, 1e-2, 1e-3, 1e-4})
{
    GradientLemmaReport rep;
    rep.thetas = thetas;
    const double Sd = tangent_sphere_measure(D);
    Rng rng = make_stream(seed, 1);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<Vec<D>> pdirs;
    std::vector<double> limit2(probes.size());
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const auto& q = probes[i];
        const Vec<D> k = relative_direction<D>(q.v, q.vs);
        pdirs.push_back(D == 2 ? tangent_frame<D>(k, U(rng) < 0.5 ? 1.0 : -1.0)
                               : tangent_frame<D>(k, 2.0 * kPi * U(rng)));
        limit2[i] = Sd / (8.0 * (D - 1)) * fd_landau_divergence<D>(phi, q.x, q.xs, q.v, q.vs);
    }
    for (double th : thetas) {
        double c1 = 0, c2 = 0, e1 = 0, e2 = 0;
        for (std::size_t i = 0; i < probes.size(); ++i) {
            const auto& q = probes[i];
            const double r = (q.v - q.vs).norm();
            const auto fr = make_frame_polar<D>(q.x, q.xs, q.v, q.vs, th, pdirs[i]);
            const double g = boltzmann_gradient<D>(phi, fr);
            c1 = std::max(c1, std::abs(g) / (th * r));
            const Vec<D> N = grad_v_of<D>(phi, q.x, q.v) - grad_v_of<D>(phi, q.xs, q.vs);
            e1 = std::max(e1, std::abs(g / th - 0.5 * r * pdirs[i].dot(N)));
            double avg = 0.0;
            for (const auto& [p, w] : tangent_directions<D>(fr.k))
                avg += w * boltzmann_gradient<D>(phi, make_frame_polar<D>(q.x, q.xs, q.v, q.vs, th, p));
            c2 = std::max(c2, std::abs(avg) / (th * th * (r + r * r)));
            e2 = std::max(e2, std::abs(avg / (th * th) - limit2[i]));
        }
        rep.c1.push_back(c1);
        rep.c2.push_back(c2);
        rep.conv1_err.push_back(e1);
        rep.conv2_err.push_back(e2);
    }
    auto spread = [](const std::vector<double>& c) {
        const auto [mn, mx] = std::minmax_element(c.begin(), c.end());
        return *mn > 0 ? *mx / *mn : kInf;
    };
    rep.c1_spread = spread(rep.c1);
    rep.c2_spread = spread(rep.c2);
    std::vector<double> s1, s2, ts;
    for (std::size_t j = 0; j < thetas.size(); ++j)
        if (std::find(slope_thetas.begin(), slope_thetas.end(), thetas[j]) != slope_thetas.end()) {
            ts.push_back(thetas[j]);
            s1.push_back(rep.conv1_err[j]);
            s2.push_back(rep.conv2_err[j]);
        }
    rep.conv1_slope = fit_loglog_slope(ts, s1);
    rep.conv2_slope = fit_loglog_slope(ts, s2);
    return rep;
}

// ---------------------------------------------------------------------------
// Sphere integrals of the extended Boltzmann gradient

struct SphereSweepReport {
    std::vector<double> epsilons;
    std::vector<double> square_gap;  // max relative gap of int |grad-bar Phi|^2 B vs 8 |grad~ Phi|^2
    std::vector<double> moment_gap;  // max relative gap of int grad-bar Phi B vs 2 grad~ . grad~ Phi
    double square_slope = 0.0, moment_slope = 0.0;
    std::size_t probes = 0;
};

// A0 (grad_v - grad_v*) . (|w|^2 Pi (grad_v - grad_v*)(Phi + Phi*)), finite-difference divergence.
template <int D>
double landau_double_divergence(const PairFunction<D>& Phi, const KernelSet& ks, const Vec<D>& x,
                                const Vec<D>& xs, const Vec<D>& v, const Vec<D>& vs)
{
    auto G = [&](const Vec<D>& a, const Vec<D>& b) {
        const Vec<D> w = a - b;
        const Vec<D> n = symmetric_relative_gradient<D>(Phi, x, xs, a, b);
        return Vec<D>(w.squaredNorm() * n - w.dot(n) * w);
    };
    return ks.a0((v - vs).norm()) * fd_relative_divergence<D>(G, v, vs);
}

template <int D>
SphereSweepReport sweep_sphere_square(const PairFunction<D>& Phi, const KernelSet& base,
                                      const std::vector<double>& eps_list, const std::vector<Probe<D>>& probes,
                                      double delta_guard, int theta_nodes = 64, double floor_fraction = 0.01)
{
    SphereSweepReport rep;
    rep.epsilons = eps_list;
    std::vector<Probe<D>> ok;
    for (const auto& q : probes)
        if ((q.v - q.vs).norm() >= delta_guard) ok.push_back(q);
    rep.probes = ok.size();
    if (ok.empty()) throw InputError("sweep_sphere_square: every probe violates the guard");
    std::vector<double> sq_target(ok.size()), mo_target(ok.size());
    double sq_rms = 0, mo_rms = 0;
    for (std::size_t i = 0; i < ok.size(); ++i) {
        const auto& q = ok[i];
        const Vec<D> lg = landau_gradient_ext<D>(Phi, q.x, q.xs, q.v, q.vs, base.a0);
        sq_target[i] = 8.0 * lg.squaredNorm();
        mo_target[i] = landau_double_divergence<D>(Phi, base, q.x, q.xs, q.v, q.vs);
        sq_rms += sq_target[i] * sq_target[i];
        mo_rms += mo_target[i] * mo_target[i];
    }
    sq_rms = std::sqrt(sq_rms / ok.size());
    mo_rms = std::sqrt(mo_rms / ok.size());
    for (double eps : eps_list) {
        const KernelSet ks = base.with_epsilon(eps);
        const AxisRule rule = ks.theta_rule(theta_nodes);
        double gs = 0, gm = 0;
        for (std::size_t i = 0; i < ok.size(); ++i) {
            const auto& q = ok[i];
            const double r = (q.v - q.vs).norm();
            const Vec<D> k = (q.v - q.vs) / r;
            const double a = ks.a0(r);
            double sq = 0, mo = 0;
            for (const auto& [p, pw] : tangent_directions<D>(k)) {
                for (std::size_t j = 0; j < rule.size(); ++j) {
                    const double t = rule.nodes[j];
                    const double g = boltzmann_gradient_ext<D>(Phi, make_frame_polar<D>(q.x, q.xs, q.v, q.vs, t, p));
                    const double w = pw * rule.weights[j] * ks.beta_eps(t) * a;
                    sq += w * g * g;
                    mo += w * g;
                }
            }
            gs = std::max(gs, std::abs(sq - sq_target[i]) / std::max(std::abs(sq_target[i]), floor_fraction * sq_rms));
            gm = std::max(gm, std::abs(mo - mo_target[i]) / std::max(std::abs(mo_target[i]), floor_fraction * mo_rms));
        }
        rep.square_gap.push_back(gs);
        rep.moment_gap.push_back(gm);
    }
    rep.square_slope = fit_tail_slope(eps_list, rep.square_gap);
    rep.moment_slope = fit_tail_slope(eps_list, rep.moment_gap);
    return rep;
}

// ---------------------------------------------------------------------------
// epsilon sweeps of functionals at fixed f

struct SweepResult {
    std::vector<double> epsilons;
    std::vector<Estimate> values;        // D^eps_cosh, or <Q_B, phi>
    std::vector<Estimate> pair_values;   // D^eps_psi* for the configured pair (dissipation sweeps)
    Estimate landau_target;              // 1/2 D_L, or <Q_L, phi>
    std::vector<double> gaps;            // |value - target|
    std::vector<double> gap_stderr;
    double fitted_rate = 0.0;
    double achieved_gap = 0.0;           // gap at the smallest epsilon
    std::string note;
};

inline void check_eps_list(const std::vector<double>& eps)
{
    if (eps.empty()) throw InputError("eps_list is empty");
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (!(eps[i] > 0.0 && eps[i] <= 1.0)) throw InputError("eps values must lie in (0, 1]");
        if (i > 0 && !(eps[i] < eps[i - 1])) throw InputError("eps_list must be strictly decreasing");
    }
}

inline void finish_sweep(SweepResult& r)
{
    r.fitted_rate = r.epsilons.size() >= 2 ? fit_tail_slope(r.epsilons, r.gaps) : 0.0;
    r.achieved_gap = r.gaps.back();
    bool noisy = false;
    for (std::size_t i = 0; i < r.gaps.size(); ++i) noisy = noisy || r.gaps[i] < 2.0 * r.gap_stderr[i];
    if (noisy)
        r.note = "Monte Carlo noise exceeds the signal on part of the sweep; widen eps_list towards "
                 "larger epsilon or raise the sample count";
}

// D^eps_cosh and D^eps_psi* against 1/2 D_L at fixed f. If `target` has no samples the
// Landau dissipation is estimated by Monte Carlo with the same sampler settings.
template <int D>
SweepResult sweep_dissipation(const DensityModel<D>& f, const DualPair& pair, const KernelSet& base,
                              const std::vector<double>& eps_list, const SamplerConfig& cfg,
                              Estimate half_dl_target = Estimate{})
{
    check_eps_list(eps_list);
    SweepResult r;
    r.epsilons = eps_list;
    if (half_dl_target.n_samples == 0) {
        const Estimate dl = dissipation_landau<D>(f, base, cfg);
        half_dl_target = dl;
        half_dl_target.value *= 0.5;
        half_dl_target.std_error *= 0.5;
    }
    r.landau_target = half_dl_target;
    for (double eps : eps_list) {
        const KernelSet ks = base.with_epsilon(eps);
        const double am = ks.angular_momentum();
        if (std::abs(am / angular_momentum_constant(ks.dim) - 1.0) > 1e-6)
            throw NumericalError("angular momentum check failed at eps = " + std::to_string(eps));
        const auto est = boltzmann_functionals<D>(f, ks, pair, cfg);
        r.values.push_back(est[2]);
        r.pair_values.push_back(est[1]);
        r.gaps.push_back(std::abs(est[2].value - half_dl_target.value));
        r.gap_stderr.push_back(std::hypot(est[2].std_error, half_dl_target.std_error));
    }
    finish_sweep(r);
    return r;
}

// <Q^eps_B(f,f), phi> against <Q_L(f,f), phi>, both on one frame stream per epsilon.
template <int D>
SweepResult sweep_weak_operator(const DensityModel<D>& f, const TestFunction<D>& phi, const KernelSet& base,
                                const std::vector<double>& eps_list, const SamplerConfig& cfg)
{
    check_eps_list(eps_list);
    SweepResult r;
    r.epsilons = eps_list;
    for (double eps : eps_list) {
        const KernelSet ks = base.with_epsilon(eps);
        const auto est = weak_Q_coupled<D>(f, phi, ks, cfg);
        r.values.push_back(est[0]);
        r.landau_target = est[1];
        r.gaps.push_back(std::abs(est[2].value));
        r.gap_stderr.push_back(est[2].std_error);
    }
    finish_sweep(r);
    return r;
}

} // namespace glab
