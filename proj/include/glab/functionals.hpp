#pragma once

#include "dualpairs.hpp"
#include "quadrature.hpp"

#include <functional>
#include <string>

namespace glab {

enum class FunctionalKind { DB, DPsiStar, DCosh, DL, ActionR, ActionL, JBoltzmann, JLandau, WeakQB, WeakQL };

inline const char* functional_name(FunctionalKind k)
{
    switch (k) {
    case FunctionalKind::DB: return "D_B";
    case FunctionalKind::DPsiStar: return "D_psi_star";
    case FunctionalKind::DCosh: return "D_cosh";
    case FunctionalKind::DL: return "D_L";
    case FunctionalKind::ActionR: return "R";
    case FunctionalKind::ActionL: return "A_L";
    case FunctionalKind::JBoltzmann: return "J_B";
    case FunctionalKind::JLandau: return "J_L";
    case FunctionalKind::WeakQB: return "weak_Q_B";
    case FunctionalKind::WeakQL: return "weak_Q_L";
    }
    return "?";
}

struct FunctionalResult {
    FunctionalKind kind;
    Estimate estimate;
    double epsilon = 1.0;
    std::string pair;
};

// Per-frame integrands (against dsigma deta) of the Boltzmann-side functionals.
struct BoltzmannTerms {
    double db = 0.0;    // 1/4 kappa B (F' - F)(log F' - log F)
    double dpsi = 0.0;  // 1/4 Psi*(-grad log f) Theta(F', F) B kappa
    double dcosh = 0.0; // 1/2 |sqrt F' - sqrt F|^2 B kappa
    double r_ub = 0.0;  // 1/4 Psi(U_B/(Theta B kappa)) Theta B kappa with U_B = B kappa (F - F')
    double bk = 0.0;    // B kappa
    double log_F = 0.0, delta = 0.0; // log(f f*) and the log-gap log F' - log F
};

template <int D>
BoltzmannTerms boltzmann_terms(const DensityModel<D>& f, const KernelSet& ks, const DualPair* pair,
                               const CollisionFrame<D>& fr, double log_f, double log_fs)
{
    BoltzmannTerms t;
    t.bk = collision_kernel<D>(ks, fr) * ks.kappa(fr.x, fr.xs);
    if (t.bk == 0.0) return t;
    const double lF = log_f + log_fs;
    const double lFp = f.log_eval(fr.x, fr.vp) + f.log_eval(fr.xs, fr.vsp);
    if (!std::isfinite(lF) || !std::isfinite(lFp)) return t; // 0 log 0 = 0 convention
    const double F = std::exp(lF);
    const double d = lFp - lF;
    t.log_F = lF;
    t.delta = d;
    t.db = 0.25 * t.bk * F * std::expm1(d) * d;
    const double h = std::expm1(0.5 * d);
    t.dcosh = 0.5 * t.bk * F * h * h;
    if (pair) {
        const double th = F * pair->theta_exp(d); // Theta(F', F) by homogeneity
        t.dpsi = 0.25 * pair->psi_star(-d) * th * t.bk;
        const double den = th * t.bk;
        if (den > 0.0) {
            const double U = -t.bk * F * std::expm1(d);
            t.r_ub = 0.25 * pair->psi(U / den) * den;
        }
    }
    return t;
}

// D_B, D_psi*, D_cosh and R(f, U_B) on one frame stream, averaged over the p / -p mirror.
template <int D>
std::array<Estimate, 4> boltzmann_functionals(const DensityModel<D>& f, const KernelSet& ks,
                                              const DualPair& pair, const SamplerConfig& cfg)
{
    FrameSampler<D> sampler(f, ks, cfg);
    return estimate_many<4, D>(sampler, [&](const FrameSample<D>& s, std::array<double, 4>& out) {
        const auto a = boltzmann_terms<D>(f, ks, &pair, s.frame, s.log_f, s.log_fs);
        const auto b = boltzmann_terms<D>(f, ks, &pair, s.mirror, s.log_f, s.log_fs);
        const double w = 0.5 * s.weight;
        out = {w * (a.db + b.db), w * (a.dpsi + b.dpsi), w * (a.dcosh + b.dcosh),
               w * (a.r_ub + b.r_ub)};
        return true;
    });
}

template <int D>
Estimate dissipation_boltzmann(const DensityModel<D>& f, const KernelSet& ks, const SamplerConfig& cfg)
{
    return boltzmann_functionals<D>(f, ks, make_quadratic_pair(), cfg)[0];
}

template <int D>
Estimate dissipation_psi(const DensityModel<D>& f, const KernelSet& ks, const DualPair& pair,
                         const SamplerConfig& cfg)
{
    return boltzmann_functionals<D>(f, ks, pair, cfg)[1];
}

template <int D>
Estimate dissipation_cosh(const DensityModel<D>& f, const KernelSet& ks, const SamplerConfig& cfg)
{
    return boltzmann_functionals<D>(f, ks, make_cosh_pair(), cfg)[2];
}

// 1/2 kappa f f* |sqrt(A) Pi (grad_v log f - (grad_v log f)*)|^2.
template <int D>
double landau_dissipation_integrand(const KernelSet& ks, const Vec<D>& x, const Vec<D>& xs,
                                    const Vec<D>& v, const Vec<D>& vs, double log_F,
                                    const Vec<D>& g, const Vec<D>& gs)
{
    const Vec<D> w = v - vs;
    const double r2 = w.squaredNorm();
    if (!(r2 > 0.0) || !std::isfinite(log_F)) return 0.0;
    const Vec<D> n = g - gs;
    const Vec<D> pn = n - (w.dot(n) / r2) * w;
    const double A = ks.a0(std::sqrt(r2)) * r2;
    return 0.5 * ks.kappa(x, xs) * std::exp(log_F) * A * pn.squaredNorm();
}

template <int D>
Estimate dissipation_landau(const DensityModel<D>& f, const KernelSet& ks, SamplerConfig cfg)
{
    FrameSampler<D> sampler(f, ks, cfg, false);
    return estimate_many<1, D>(sampler, [&](const FrameSample<D>& s, std::array<double, 1>& out) {
        const auto& q = s.frame;
        out[0] = s.pair_weight *
                 landau_dissipation_integrand<D>(ks, q.x, q.xs, q.v, q.vs, s.log_f + s.log_fs,
                                                 f.grad_v_log(q.x, q.v), f.grad_v_log(q.xs, q.vs));
        return true;
    })[0];
}

// Collision rate field on frames, for the Boltzmann action.
template <int D> using RateField = std::function<double(const CollisionFrame<D>&)>;
// Flux field on (x, x*, v, v*), for the Landau action.
template <int D>
using FluxField = std::function<Vec<D>(const Vec<D>&, const Vec<D>&, const Vec<D>&, const Vec<D>&)>;

// 1/4 int Psi(U/(Theta B kappa)) Theta B kappa. Frames with vanishing Theta B kappa but
// U != 0 are rejected (and counted).
template <int D>
Estimate action_R(const DensityModel<D>& f, const RateField<D>& U, const KernelSet& ks,
                  const DualPair& pair, const SamplerConfig& cfg)
{
    FrameSampler<D> sampler(f, ks, cfg);
    auto one = [&](const CollisionFrame<D>& fr, const FrameSample<D>& s, double& val) {
        const double u = U(fr);
        const double bk = collision_kernel<D>(ks, fr) * ks.kappa(fr.x, fr.xs);
        const double lF = s.log_f + s.log_fs;
        const double lFp = f.log_eval(fr.x, fr.vp) + f.log_eval(fr.xs, fr.vsp);
        const double den = (std::isfinite(lF) && std::isfinite(lFp))
                               ? std::exp(lF) * pair.theta_exp(lFp - lF) * bk
                               : 0.0;
        if (!(den > 0.0)) {
            val = 0.0;
            return u == 0.0;
        }
        val = 0.25 * pair.psi(u / den) * den;
        return true;
    };
    return estimate_many<1, D>(sampler, [&](const FrameSample<D>& s, std::array<double, 1>& out) {
        double a, b;
        if (!one(s.frame, s, a) || !one(s.mirror, s, b)) return false;
        out[0] = 0.5 * s.weight * (a + b);
        return true;
    })[0];
}

// 1/2 int |U|^2/(f f* kappa) deta.
template <int D>
Estimate action_landau(const DensityModel<D>& f, const FluxField<D>& U, const KernelSet& ks,
                       const SamplerConfig& cfg)
{
    FrameSampler<D> sampler(f, ks, cfg, false);
    return estimate_many<1, D>(sampler, [&](const FrameSample<D>& s, std::array<double, 1>& out) {
        const auto& q = s.frame;
        const Vec<D> u = U(q.x, q.xs, q.v, q.vs);
        const double u2 = u.squaredNorm();
        const double den = std::exp(s.log_f + s.log_fs) * ks.kappa(q.x, q.xs);
        if (!(den > 0.0)) {
            out[0] = 0.0;
            return u2 == 0.0;
        }
        out[0] = s.pair_weight * 0.5 * u2 / den;
        return true;
    })[0];
}

// The optimal Landau flux -kappa f f* grad~ log f.
template <int D> FluxField<D> landau_optimal_flux(const DensityModel<D>& f, const KernelSet& ks)
{
    return [&f, ks](const Vec<D>& x, const Vec<D>& xs, const Vec<D>& v, const Vec<D>& vs) {
        const Vec<D> w = v - vs;
        const double r2 = w.squaredNorm();
        const Vec<D> n = f.grad_v_log(x, v) - f.grad_v_log(xs, vs);
        const Vec<D> pn = n - (w.dot(n) / r2) * w;
        const double sqrtA = std::sqrt(ks.a0(std::sqrt(r2)) * r2);
        return Vec<D>(-ks.kappa(x, xs) * f.eval(x, v) * f.eval(xs, vs) * sqrtA * pn);
    };
}

// The optimal Boltzmann rate U_B = B kappa (f f* - f' f*').
template <int D> RateField<D> boltzmann_optimal_rate(const DensityModel<D>& f, const KernelSet& ks)
{
    return [&f, ks](const CollisionFrame<D>& fr) {
        const double bk = collision_kernel<D>(ks, fr) * ks.kappa(fr.x, fr.xs);
        if (bk == 0.0) return 0.0;
        const double lF = f.log_eval(fr.x, fr.v) + f.log_eval(fr.xs, fr.vs);
        const double lFp = f.log_eval(fr.x, fr.vp) + f.log_eval(fr.xs, fr.vsp);
        return -bk * std::exp(lF) * std::expm1(lFp - lF);
    };
}

// 1/2 int kappa f f* int grad-bar(phi) B^eps dsigma deta, averaged over p / -p.
template <int D>
Estimate weak_Q_boltzmann(const DensityModel<D>& f, const TestFunction<D>& phi, const KernelSet& ks,
                          const SamplerConfig& cfg)
{
    FrameSampler<D> sampler(f, ks, cfg);
    return estimate_many<1, D>(sampler, [&](const FrameSample<D>& s, std::array<double, 1>& out) {
        const auto& a = s.frame;
        const double g = 0.5 * (boltzmann_gradient<D>(phi, a) + boltzmann_gradient<D>(phi, s.mirror));
        out[0] = s.weight * 0.5 * ks.kappa(a.x, a.xs) * std::exp(s.log_f + s.log_fs) *
                 collision_kernel<D>(ks, a) * g;
        return true;
    })[0];
}

// (grad_v - grad_v*) . (|w|^2 Pi N) = -2(d-1) w.N + |w|^2 Pi : (H + H*).
template <int D>
double landau_weak_integrand(const TestFunction<D>& phi, const Vec<D>& x, const Vec<D>& xs,
                             const Vec<D>& v, const Vec<D>& vs)
{
    const Vec<D> w = v - vs;
    const double r2 = w.squaredNorm();
    const Vec<D> N = grad_v_of<D>(phi, x, v) - grad_v_of<D>(phi, xs, vs);
    const Mat<D> H = hess_v_of<D>(phi, x, v) + hess_v_of<D>(phi, xs, vs);
    const Mat<D> P = Mat<D>::Identity() - w * w.transpose() / r2;
    return -2.0 * (D - 1) * w.dot(N) + r2 * (P.cwiseProduct(H)).sum();
}

template <int D>
Estimate weak_Q_landau(const DensityModel<D>& f, const TestFunction<D>& phi, const KernelSet& ks,
                       const SamplerConfig& cfg)
{
    FrameSampler<D> sampler(f, ks, cfg, false);
    return estimate_many<1, D>(sampler, [&](const FrameSample<D>& s, std::array<double, 1>& out) {
        const auto& q = s.frame;
        out[0] = s.pair_weight * 0.5 * ks.kappa(q.x, q.xs) * ks.a0(q.speed) *
                 std::exp(s.log_f + s.log_fs) * landau_weak_integrand<D>(phi, q.x, q.xs, q.v, q.vs);
        return true;
    })[0];
}

// Boltzmann and Landau pairings on one stream: out = {Q_B, Q_L, Q_B - Q_L}.
template <int D>
std::array<Estimate, 3> weak_Q_coupled(const DensityModel<D>& f, const TestFunction<D>& phi,
                                       const KernelSet& ks, const SamplerConfig& cfg)
{
    FrameSampler<D> sampler(f, ks, cfg);
    return estimate_many<3, D>(sampler, [&](const FrameSample<D>& s, std::array<double, 3>& out) {
        const auto& a = s.frame;
        const double F = std::exp(s.log_f + s.log_fs);
        const double kap = ks.kappa(a.x, a.xs);
        const double g = 0.5 * (boltzmann_gradient<D>(phi, a) + boltzmann_gradient<D>(phi, s.mirror));
        out[0] = s.weight * 0.5 * kap * F * collision_kernel<D>(ks, a) * g;
        out[1] = s.pair_weight * 0.5 * kap * ks.a0(a.speed) * F *
                 landau_weak_integrand<D>(phi, a.x, a.xs, a.v, a.vs);
        out[2] = out[0] - out[1];
        return true;
    });
}

// H(f_T) - H(f_0) + int D + int A.
inline double assemble_J(double entropy_T, double entropy_0, double dissipation_integral,
                         double action_integral)
{
    if (!std::isfinite(entropy_T) || !std::isfinite(entropy_0) || !std::isfinite(dissipation_integral) ||
        !std::isfinite(action_integral))
        throw InputError("assemble_J: all terms must be finite");
    return entropy_T - entropy_0 + dissipation_integral + action_integral;
}

// Trapezoid rule over snapshot values.
inline double trapezoid(const std::vector<double>& t, const std::vector<double>& y)
{
    if (t.size() != y.size()) throw InputError("trapezoid: size mismatch");
    double s = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i) s += 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
    return s;
}

// ---------------------------------------------------------------------------
// Tensor-grid oracles (d = 2 in practice; written for any D).

template <int D>
Estimate oracle_dissipation_landau(const DensityModel<D>& f, const KernelSet& ks, const GridSpec<D>& grid)
{
    auto prep = [&](GridNode<D>& n) {
        n.aux = f.log_eval(n.x, n.v);
        n.aux_v = f.grad_v_log(n.x, n.v);
    };
    return tensor_grid_pair<D>(grid, prep, [&](const GridNode<D>& a, const GridNode<D>& b) {
        return landau_dissipation_integrand<D>(ks, a.x, b.x, a.v, b.v, a.aux + b.aux, a.aux_v, b.aux_v);
    });
}

// which: 0 = D_B, 1 = D_psi*, 2 = D_cosh
template <int D>
Estimate oracle_boltzmann(const DensityModel<D>& f, const KernelSet& ks, const DualPair& pair,
                          const GridSpec<D>& grid, const AxisRule& theta, int which)
{
    auto prep = [&](GridNode<D>& n) { n.aux = f.log_eval(n.x, n.v); };
    return tensor_grid_collision<D>(grid, theta, prep,
                                    [&](const CollisionFrame<D>& fr, const GridNode<D>& a,
                                        const GridNode<D>& b) {
                                        const auto t = boltzmann_terms<D>(f, ks, &pair, fr, a.aux, b.aux);
                                        return which == 0 ? t.db : which == 1 ? t.dpsi : t.dcosh;
                                    });
}

template <int D>
Estimate oracle_weak_Q_landau(const DensityModel<D>& f, const TestFunction<D>& phi, const KernelSet& ks,
                              const GridSpec<D>& grid)
{
    auto prep = [&](GridNode<D>& n) { n.aux = f.log_eval(n.x, n.v); };
    return tensor_grid_pair<D>(grid, prep, [&](const GridNode<D>& a, const GridNode<D>& b) {
        const double r = (a.v - b.v).norm();
        if (!(r > 0.0)) return 0.0;
        return 0.5 * ks.kappa(a.x, b.x) * ks.a0(r) * std::exp(a.aux + b.aux) *
               landau_weak_integrand<D>(phi, a.x, b.x, a.v, b.v);
    });
}

} // namespace glab
