#pragma once

#include "geometry.hpp"
#include "rules.hpp"

#include <algorithm>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace glab {

struct KineticKernel {
    enum class Form { PowerLaw, Bracket };
    Form form = Form::PowerLaw;
    double gamma = 0.0;
    double c_low = 1.0;
    double c_high = 1.0;

    static KineticKernel power_law(double gamma, int d = 3)
    {
        const bool ok = d == 2 ? (gamma > -2.0 && gamma <= 1.0) : (gamma >= -2.0 && gamma <= 1.0);
        if (!ok)
            throw InputError("PowerLaw kinetic kernel needs gamma in " +
                             std::string(d == 2 ? "(-2, 1]" : "[-2, 1]") + ", got " +
                             std::to_string(gamma));
        KineticKernel k;
        k.gamma = gamma;
        return k;
    }

    // c_low <bracket r>^gamma at r = 0 rising smoothly to c_high <bracket r>^gamma as r grows.
    static KineticKernel bracket_form(double gamma, double c_low, double c_high)
    {
        if (!(gamma <= 1.0)) throw InputError("Bracket kinetic kernel needs gamma <= 1");
        if (!(c_low > 0.0 && c_low <= c_high))
            throw InputError("Bracket kinetic kernel needs 0 < c_low <= c_high");
        KineticKernel k;
        k.form = Form::Bracket;
        k.gamma = gamma;
        k.c_low = c_low;
        k.c_high = c_high;
        return k;
    }

    double operator()(double r) const
    {
        if (!(r >= 0.0)) throw InputError("kinetic kernel evaluated at negative speed");
        if (form == Form::PowerLaw) {
            if (r == 0.0) return gamma < 0.0 ? kInf : (gamma == 0.0 ? 1.0 : 0.0);
            return gamma == 0.0 ? 1.0 : std::pow(r, gamma);
        }
        const double s = r * r / (1.0 + r * r);
        return (c_low + (c_high - c_low) * s) * std::pow(bracket(r), gamma);
    }

    // A0(r e^s) - A0(r) for r > 0, accurate when s is tiny.
    double dilation_increment(double r, double s) const
    {
        if (form == Form::PowerLaw) return (*this)(r) * std::expm1(gamma * s);
        const double r2 = r * r;
        const double d2 = r2 * std::expm1(2.0 * s); // r1^2 - r^2
        const double r1 = r * std::exp(s);
        const double p0 = c_low + (c_high - c_low) * r2 / (1.0 + r2);
        const double dp = (c_high - c_low) * d2 / ((1.0 + r2) * (1.0 + r1 * r1));
        const double b0 = std::pow(1.0 + r2, 0.5 * gamma);
        const double db = b0 * std::expm1(0.5 * gamma * std::log1p(d2 / (1.0 + r2)));
        return dp * std::pow(bracket(r1), gamma) + p0 * db;
    }

    bool singular_at_zero() const { return form == Form::PowerLaw && gamma < 0.0; }
};

// Probability density on [a,b] used for angle sampling. Power densities c t^s
// are handled in closed form; anything else through a tabulated piecewise-constant
// density whose pdf is reported exactly, so importance weights stay unbiased.
class AngleDistribution {
public:
    static AngleDistribution power(double s, double a, double b)
    {
        AngleDistribution d;
        d.a_ = a;
        d.b_ = b;
        d.s_ = s;
        d.closed_ = true;
        const double q = s + 1.0;
        if (std::abs(q) < 1e-14) {
            if (!(a > 0.0)) throw InputError("angle density t^-1 needs a > 0");
            d.mass_ = std::log(b / a);
        } else {
            if (q < 0.0 && !(a > 0.0)) throw InputError("non-integrable angle density at 0");
            d.mass_ = (std::pow(b, q) - std::pow(a, q)) / q;
        }
        return d;
    }

    static AngleDistribution tabulated(const std::function<double(double)>& g, double a, double b,
                                       double grade, int cells = 4096)
    {
        AngleDistribution d;
        d.a_ = a;
        d.b_ = b;
        d.closed_ = false;
        const AxisRule gl = gauss_legendre(8);
        d.edges_.resize(cells + 1);
        for (int i = 0; i <= cells; ++i) d.edges_[i] = a + (b - a) * std::pow(double(i) / cells, grade);
        d.cdf_.assign(cells + 1, 0.0);
        for (int i = 0; i < cells; ++i) {
            const double lo = d.edges_[i], hi = d.edges_[i + 1];
            double m = 0.0;
            for (std::size_t j = 0; j < gl.size(); ++j)
                m += gl.weights[j] * g(0.5 * (lo + hi) + 0.5 * (hi - lo) * gl.nodes[j]);
            d.cdf_[i + 1] = d.cdf_[i] + std::max(0.0, 0.5 * (hi - lo) * m);
        }
        d.mass_ = d.cdf_.back();
        if (!(d.mass_ > 0.0)) throw NumericalError("angle density has zero mass");
        return d;
    }

    double mass() const { return mass_; }
    double lower() const { return a_; }
    double upper() const { return b_; }

    double sample(double u) const
    {
        if (closed_) {
            const double q = s_ + 1.0;
            if (std::abs(q) < 1e-14) return a_ * std::exp(u * std::log(b_ / a_));
            const double aq = std::pow(a_, q), bq = std::pow(b_, q);
            return std::pow(aq + u * (bq - aq), 1.0 / q);
        }
        const double target = u * mass_;
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
        std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - cdf_.begin() - 1, 0),
                                              edges_.size() - 2);
        const double cm = cdf_[i + 1] - cdf_[i];
        const double frac = cm > 0 ? (target - cdf_[i]) / cm : 0.5;
        return edges_[i] + std::clamp(frac, 0.0, 1.0) * (edges_[i + 1] - edges_[i]);
    }

    double pdf(double t) const
    {
        if (t < a_ || t > b_) return 0.0;
        if (closed_) return std::pow(t, s_) / mass_;
        auto it = std::upper_bound(edges_.begin(), edges_.end(), t);
        std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - edges_.begin() - 1, 0),
                                              edges_.size() - 2);
        return (cdf_[i + 1] - cdf_[i]) / ((edges_[i + 1] - edges_[i]) * mass_);
    }

private:
    double a_ = 0.0, b_ = 1.0, s_ = 0.0, mass_ = 1.0;
    bool closed_ = true;
    std::vector<double> edges_, cdf_;
};

struct AngularKernel {
    // Unnormalised base profile on (0, pi/2]. Empty means the built-in power law
    // theta^{-1-nu}, truncated below `cutoff` when cutoff > 0.
    std::function<double(double)> profile;
    double nu = 0.5;
    double cutoff = 0.0;
    double c0 = 0.0; // lower bound constant: beta(theta) >= c0 theta^{-1-nu} on the support
    double norm_const = 1.0;
    int dim = 2;

    bool is_power_law() const { return !profile; }

    double operator()(double theta) const
    {
        if (!(theta > 0.0) || theta > 0.5 * kPi || theta < cutoff) return 0.0;
        if (is_power_law()) return norm_const * std::pow(theta, -1.0 - nu);
        return norm_const * profile(theta);
    }

    // Grading exponent that turns theta^{1-nu} x smooth into a polynomial-like integrand.
    double grade() const { return 3.0 / (2.0 - nu); }
};

inline void check_nu(double nu)
{
    if (!(nu > 0.0 && nu < 2.0)) throw InputError("angular singularity nu must lie in (0, 2)");
}

// Normalise an arbitrary profile so that int theta^2 beta = 8(d-1)/|S^{d-2}|.
inline AngularKernel normalize_beta(std::function<double(double)> profile, double nu, int d,
                                    double cutoff = 0.0)
{
    check_nu(nu);
    if (d != 2 && d != 3) throw InputError("dimension must be 2 or 3");
    AngularKernel k;
    k.profile = std::move(profile);
    k.nu = nu;
    k.cutoff = cutoff;
    k.dim = d;
    double m;
    try {
        m = integrate_1d(
            [&](double t) { return t > 0 && t >= cutoff ? t * t * k.profile(t) : 0.0; },
            cutoff, 0.5 * kPi, 1e-12, cutoff > 0 ? 1.0 : k.grade());
    } catch (const NumericalError&) {
        throw InputError("theta^2 * profile is not integrable on (0, pi/2]");
    }
    if (!(m > 0.0) || !std::isfinite(m)) throw InputError("theta^2 * profile has no finite positive mass");
    k.norm_const = angular_momentum_constant(d) / m;
    // c0: inf of beta(theta) theta^{1+nu} sampled on the support
    double c0 = kInf;
    for (int i = 1; i <= 400; ++i) {
        const double t = std::max(cutoff, 0.5 * kPi * i / 400.0);
        c0 = std::min(c0, k(t) * std::pow(t, 1.0 + nu));
    }
    k.c0 = c0;
    return k;
}

// Built-in profile: norm theta^{-1-nu} on (0, pi/2] (or on [cutoff, pi/2]).
inline AngularKernel make_power_law_beta(double nu, int d, double cutoff = 0.0)
{
    check_nu(nu);
    if (d != 2 && d != 3) throw InputError("dimension must be 2 or 3");
    if (!(cutoff >= 0.0 && cutoff < 0.5 * kPi)) throw InputError("cutoff must lie in [0, pi/2)");
    AngularKernel k;
    k.nu = nu;
    k.cutoff = cutoff;
    k.dim = d;
    const double q = 2.0 - nu;
    const double m = (std::pow(0.5 * kPi, q) - std::pow(cutoff, q)) / q;
    k.norm_const = angular_momentum_constant(d) / m;
    k.c0 = k.norm_const;
    return k;
}

// beta^eps(theta) = (pi/eps)^3 beta(pi theta / eps), supported on theta <= eps/2.
inline double beta_scaled(const AngularKernel& beta, double eps, double theta)
{
    if (!(theta > 0.0) || theta > 0.5 * eps) return 0.0;
    const double s = kPi / eps;
    return s * s * s * beta(s * theta);
}

struct SpatialKernel {
    enum class Form { Constant, ExpBracket, PowerBracket };
    Form form = Form::Constant;
    double c = 1.0;
    double alpha = 1.0;

    static SpatialKernel constant(double c)
    {
        if (!(c >= 0.0)) throw InputError("kappa constant must be >= 0");
        return SpatialKernel{Form::Constant, c, 1.0};
    }
    static SpatialKernel exp_bracket(double c)
    {
        if (!(c >= 0.0)) throw InputError("kappa constant must be >= 0");
        return SpatialKernel{Form::ExpBracket, c, 1.0};
    }
    static SpatialKernel power_bracket(double c, double alpha)
    {
        if (!(c >= 0.0) || !(alpha >= 0.0)) throw InputError("kappa needs c >= 0 and alpha >= 0");
        return SpatialKernel{Form::PowerBracket, c, alpha};
    }

    double at_distance(double r) const
    {
        switch (form) {
        case Form::Constant: return c;
        case Form::ExpBracket: return c * std::exp(-bracket(r));
        case Form::PowerBracket: return c * std::pow(bracket(r), -alpha);
        }
        return 0.0;
    }

    template <int D> double operator()(const Vec<D>& x, const Vec<D>& xs) const
    {
        return at_distance((x - xs).norm());
    }

    // C_kappa: global upper bound, attained at x = x*.
    double upper_bound() const { return at_distance(0.0); }
};

template <int D> double kappa_eval(const SpatialKernel& k, const Vec<D>& x, const Vec<D>& xs)
{
    return k(x, xs);
}

struct KernelSet {
    KineticKernel a0;
    AngularKernel beta;
    SpatialKernel kappa;
    double epsilon = 1.0;
    int dim = 2;

    KernelSet() { beta = make_power_law_beta(0.5, 2); }

    KernelSet(KineticKernel a, AngularKernel b, SpatialKernel k, double eps)
        : a0(a), beta(std::move(b)), kappa(k), epsilon(eps), dim(beta.dim)
    {
        validate();
    }

    void validate() const
    {
        if (!(epsilon > 0.0 && epsilon <= 1.0)) throw InputError("epsilon must lie in (0, 1]");
        if (dim != 2 && dim != 3) throw InputError("dimension must be 2 or 3");
    }

    KernelSet with_epsilon(double eps) const
    {
        KernelSet k = *this;
        k.epsilon = eps;
        k.validate();
        return k;
    }

    double beta_eps(double theta) const { return beta_scaled(beta, epsilon, theta); }

    // Support of beta^eps: [theta_lo, eps/2].
    double theta_lo() const { return epsilon * beta.cutoff / kPi; }
    double theta_hi() const { return 0.5 * epsilon; }

    // b^eps = beta^eps / sin^{d-2}.
    double b_eps(double theta) const
    {
        const double be = beta_eps(theta);
        if (dim == 2 || be == 0.0) return be;
        return be / std::pow(std::sin(theta), dim - 2);
    }

    // Density proportional to theta^2 beta^eps on the support (total mass = the
    // angular momentum constant up to normalisation error).
    AngleDistribution theta_sq_distribution() const
    {
        if (beta.is_power_law()) return AngleDistribution::power(1.0 - beta.nu, theta_lo(), theta_hi());
        return AngleDistribution::tabulated([this](double t) { return t * t * beta_eps(t); },
                                            theta_lo(), theta_hi(), beta.grade());
    }

    // Density proportional to beta^eps on [theta_min, eps/2] (rate sampling in DSMC).
    AngleDistribution rate_distribution(double theta_min) const
    {
        if (!(theta_min > 0.0 && theta_min < theta_hi()))
            throw InputError("theta_min must lie in (0, eps/2)");
        const double lo = std::max(theta_min, theta_lo());
        if (beta.is_power_law()) return AngleDistribution::power(-1.0 - beta.nu, lo, theta_hi());
        return AngleDistribution::tabulated([this](double t) { return beta_eps(t); }, lo, theta_hi(),
                                            1.0);
    }

    // int_{theta_min}^{eps/2} beta^eps dtheta.
    double rate_mass(double theta_min) const
    {
        const AngleDistribution d = rate_distribution(theta_min);
        if (beta.is_power_law()) {
            const double s = kPi / epsilon;
            return beta.norm_const * std::pow(s, 2.0 - beta.nu) * d.mass();
        }
        return d.mass();
    }

    // Fraction of the theta^2 beta^eps mass lying below theta_min.
    double neglected_momentum_fraction(double theta_min) const
    {
        const double lo = theta_lo();
        if (theta_min <= lo) return 0.0;
        const double part = integrate_1d([this](double t) { return t * t * beta_eps(t); }, lo,
                                         std::min(theta_min, theta_hi()), 1e-14, beta.grade());
        return part / angular_momentum();
    }

    // Smallest theta_min with neglected theta^2-mass below `fraction`.
    double default_theta_min(double fraction = 1e-3) const
    {
        if (beta.is_power_law()) {
            const double q = 2.0 - beta.nu;
            const double a = std::pow(theta_lo(), q), b = std::pow(theta_hi(), q);
            // 10% safety margin below the requested fraction
            return std::pow(a + 0.9 * fraction * (b - a), 1.0 / q);
        }
        double lo = theta_lo(), hi = theta_hi();
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (neglected_momentum_fraction(mid) < 0.9 * fraction ? lo : hi) = mid;
        }
        return lo;
    }

    double angular_momentum() const
    {
        return integrate_1d([this](double t) { return t * t * beta_eps(t); }, theta_lo(),
                            theta_hi(), 1e-13, theta_lo() > 0 ? 1.0 : beta.grade());
    }

    // Lebesgue-measure rule on the angular support, graded at the singular end.
    AxisRule theta_rule(int n) const
    {
        AxisRule r = graded_rule(theta_hi() - theta_lo(), n, beta.grade());
        for (auto& t : r.nodes) t += theta_lo();
        return r;
    }

    // int beta^eps (1 - cos theta) dtheta
    double momentum_transfer_integral() const
    {
        return integrate_1d(
            [this](double t) {
                const double s = std::sin(0.5 * t);
                return beta_eps(t) * 2.0 * s * s;
            },
            theta_lo(), theta_hi(), 1e-12, theta_lo() > 0 ? 1.0 : 2.0 / (2.0 - beta.nu));
    }
};

template <int D> double collision_kernel(const KernelSet& ks, const CollisionFrame<D>& f)
{
    const double be = ks.beta_eps(f.theta);
    if (be == 0.0) return 0.0;
    const double a = ks.a0(f.speed);
    if (!std::isfinite(a)) throw DegenerateFrame("singular kinetic kernel at v == v*");
    if constexpr (D == 2) return a * be;
    else return a * be / std::pow(std::sin(f.theta), D - 2);
}

// Lambda(r) = |S^{d-2}| A0(r) int beta^eps (1 - cos theta) dtheta.
inline double cross_section_lambda(const KernelSet& ks, double r)
{
    if (!(r > 0.0)) throw InputError("cross section needs r > 0");
    return tangent_sphere_measure(ks.dim) * ks.a0(r) * ks.momentum_transfer_integral();
}

// Central difference with relative step 1e-6.
inline double cross_section_lambda_prime(const KernelSet& ks, double r)
{
    if (!(r > 0.0)) throw InputError("cross section needs r > 0");
    const double h = 1e-6 * r;
    const double I = tangent_sphere_measure(ks.dim) * ks.momentum_transfer_integral();
    return I * (ks.a0(r + h) - ks.a0(r - h)) / (2.0 * h);
}

// S(z) = |S^{d-2}| int (A0(z/c)/c^d - A0(z)) beta^eps(theta) dtheta, c = cos(theta/2).
inline double cancellation_S(const KernelSet& ks, double z)
{
    if (!(z > 0.0)) throw InputError("cancellation function needs z > 0");
    const int d = ks.dim;
    const double az = ks.a0(z);
    // A0(z/c)/c^d - A0(z) = (A0(z/c) - A0(z))/c^d + A0(z)(c^{-d} - 1), both pieces
    // without cancellation, log c = log1p(-sin^2(t/2))/2
    auto g = [&](double t) {
        const double sh = std::sin(0.5 * t);
        const double logc = 0.5 * std::log1p(-sh * sh);
        return ks.beta_eps(t) * (ks.a0.dilation_increment(z, -logc) * std::exp(-d * logc) +
                                 az * std::expm1(-d * logc));
    };
    return tangent_sphere_measure(d) *
           integrate_1d(g, ks.theta_lo(), ks.theta_hi(), 1e-10,
                        ks.theta_lo() > 0 ? 1.0 : 2.0 / (2.0 - ks.beta.nu));
}

inline double cancellation_bound(const KernelSet& ks, double z)
{
    const int d = ks.dim;
    const double c = std::cos(kPi / 8.0);
    return std::pow(2.0, 0.5 * (d - 4)) / (c * c) *
           (d * cross_section_lambda(ks, z) + z * std::abs(cross_section_lambda_prime(ks, z)));
}

// Deterministic evaluation of int B(|v-v*|,sigma) (g(v*') - g(v*)) dv* dsigma for a
// velocity function g, over a tensor grid of v* (one rule per axis), a theta rule
// and the deterministic tangent directions.
template <int D>
double cancellation_lhs_grid(const KernelSet& ks, const std::function<double(const Vec<D>&)>& g,
                             const Vec<D>& v, const std::array<AxisRule, D>& axes,
                             const AxisRule& theta)
{
    double total = 0.0;
    std::array<std::size_t, D> idx{};
    while (true) {
        Vec<D> vs;
        double w = 1.0;
        for (int i = 0; i < D; ++i) {
            vs(i) = axes[i].nodes[idx[i]];
            w *= axes[i].weights[idx[i]];
        }
        const double r = (v - vs).norm();
        if (r > 0.0) {
            const Vec<D> k = (v - vs) / r;
            const double a = ks.a0(r);
            const double gs = g(vs);
            double inner = 0.0;
            for (const auto& [p, pw] : tangent_directions<D>(k)) {
                for (std::size_t j = 0; j < theta.size(); ++j) {
                    const double t = theta.nodes[j];
                    const double s = std::sin(0.5 * t);
                    const Vec<D> dv = 0.5 * r * (-2.0 * s * s * k + std::sin(t) * p);
                    // beta^eps = b^eps sin^{d-2} absorbs the sphere Jacobian
                    inner += pw * theta.weights[j] * ks.beta_eps(t) * (g(vs - dv) - gs);
                }
            }
            total += w * a * inner;
        }
        int i = 0;
        while (i < D && ++idx[i] == axes[i].size()) idx[i++] = 0;
        if (i == D) break;
    }
    return total;
}

// [g *_v S](v) on the same v* grid. For a constant kernel (gamma = 0 power law) S is
// evaluated once.
template <int D>
double cancellation_rhs_grid(const KernelSet& ks, const std::function<double(const Vec<D>&)>& g,
                             const Vec<D>& v, const std::array<AxisRule, D>& axes)
{
    const bool constant = ks.a0.form == KineticKernel::Form::PowerLaw && ks.a0.gamma == 0.0;
    const double s_const = constant ? cancellation_S(ks, 1.0) : 0.0;
    double total = 0.0;
    std::array<std::size_t, D> idx{};
    while (true) {
        Vec<D> vs;
        double w = 1.0;
        for (int i = 0; i < D; ++i) {
            vs(i) = axes[i].nodes[idx[i]];
            w *= axes[i].weights[idx[i]];
        }
        const double r = (v - vs).norm();
        if (r > 0.0) total += w * g(vs) * (constant ? s_const : cancellation_S(ks, r));
        int i = 0;
        while (i < D && ++idx[i] == axes[i].size()) idx[i++] = 0;
        if (i == D) break;
    }
    return total;
}

} // namespace glab
