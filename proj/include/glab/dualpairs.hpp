#pragma once

#include "core.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace glab {

struct DualPair {
    std::string name;
    std::function<double(double)> psi_star;
    std::function<double(double)> psi_star_prime;
    std::function<double(double)> psi;
    std::function<double(double, double)> theta;
    // Theta(e^r, 1), evaluated without the cancellation in e^r - 1
    std::function<double(double)> theta_unit;
    bool satisfies_coth = false;

    double theta_exp(double r) const
    {
        return theta_unit ? theta_unit(r) : theta(std::exp(r), 1.0);
    }
    double mean_constant = 0.5; // C with Theta(s,t) <= C (s + t)
};

// log(s/t) accurate near the diagonal, where s - t is exact
inline double log_ratio(double s, double t) { return std::log1p((s - t) / t); }

// Logarithmic mean with the diagonal value t.
inline double log_mean(double s, double t)
{
    if (s <= 0.0 || t <= 0.0) return 0.0;
    const double r = log_ratio(s, t);
    if (std::abs(r) < 1e-8) return 0.5 * (s + t);
    return (s - t) / r;
}

// Theta(s,t) = (s - t)/(Psi*)'(log(s/t)); diagonal value t via the expansion
// (s + t)/2, which is accurate to second order in log(s/t).
inline std::function<double(double, double)>
derive_theta(std::function<double(double)> psi_star_prime)
{
    // (Psi*)' must be odd and strictly increasing on (0, inf)
    double prev = 0.0;
    for (int i = 1; i <= 400; ++i) {
        const double r = 0.05 * i;
        const double v = psi_star_prime(r);
        if (!(v > prev) || std::abs(v + psi_star_prime(-r)) > 1e-10 * std::max(1.0, std::abs(v)))
            throw InputError("derive_theta: (Psi*)' is not odd and strictly increasing");
        prev = v;
    }
    return [dp = std::move(psi_star_prime)](double s, double t) {
        if (s <= 0.0 || t <= 0.0) return 0.0;
        const double r = log_ratio(s, t);
        if (std::abs(r) < 1e-8) return 0.5 * (s + t);
        return (s - t) / dp(r);
    };
}

// sup_r { a r - Psi*(r) }: safeguarded Newton on (Psi*)'(r) = a.
inline double legendre_transform(const std::function<double(double)>& psi_star,
                                 const std::function<double(double)>& psi_star_prime, double a)
{
    if (!std::isfinite(a)) throw InputError("legendre_transform: non-finite argument");
    auto h = [&](double r) { return psi_star_prime(r) - a; };
    // bracket the root of the increasing function h
    double lo = -1.0, hi = 1.0;
    for (int i = 0; h(hi) < 0.0; ++i) {
        hi *= 2.0;
        if (i > 200) throw NumericalError("legendre_transform: no upper bracket");
    }
    for (int i = 0; h(lo) > 0.0; ++i) {
        lo *= 2.0;
        if (i > 200) throw NumericalError("legendre_transform: no lower bracket");
    }
    double r = std::clamp(0.0, lo, hi);
    bool converged = false;
    for (int it = 0; it < 200; ++it) {
        const double hr = h(r);
        if (hr == 0.0) {
            converged = true;
            break;
        }
        (hr > 0.0 ? hi : lo) = r;
        const double step = 1e-6 * std::max(1.0, std::abs(r));
        const double slope = (h(r + step) - h(r - step)) / (2.0 * step);
        double next = slope > 0.0 ? r - hr / slope : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - r) < 1e-13 * std::max(1.0, std::abs(r)) || hi - lo < 1e-14) {
            r = next;
            converged = true;
            break;
        }
        r = next;
    }
    if (!converged) throw NumericalError("legendre_transform: Newton/bisection did not converge");
    return a * r - psi_star(r);
}

inline DualPair make_quadratic_pair()
{
    DualPair p;
    p.name = "quadratic";
    p.psi_star = [](double r) { return 0.5 * r * r; };
    p.psi_star_prime = [](double r) { return r; };
    p.psi = [](double r) { return 0.5 * r * r; };
    p.theta = log_mean;
    p.theta_unit = [](double r) { return std::abs(r) < 1e-8 ? 1.0 + 0.5 * r : std::expm1(r) / r; };
    p.satisfies_coth = true;
    p.mean_constant = 0.5;
    return p;
}

// The conjugate of 4(cosh(r/2) - 1) is 2r asinh(r/2) - 2 sqrt(r^2+4) + 4; note
// asinh(r/2) = log((r + sqrt(r^2+4))/2).
inline double cosh_psi(double r)
{
    const double q = std::sqrt(r * r + 4.0);
    return 2.0 * r * std::asinh(0.5 * r) - 2.0 * q + 4.0;
}

inline DualPair make_cosh_pair()
{
    DualPair p;
    p.name = "cosh";
    p.psi_star = [](double r) { return 4.0 * (std::cosh(0.5 * r) - 1.0); };
    p.psi_star_prime = [](double r) { return 2.0 * std::sinh(0.5 * r); };
    p.psi = cosh_psi;
    p.theta = [](double s, double t) { return s > 0.0 && t > 0.0 ? std::sqrt(s * t) : 0.0; };
    p.theta_unit = [](double r) { return std::exp(0.5 * r); };
    p.satisfies_coth = true;
    p.mean_constant = 0.5;
    return p;
}

// Scan-based check of (log Psi*)'(r) <= coth(r/4)/2 on (0, 20].
inline double coth_condition_violation(const std::function<double(double)>& psi_star,
                                       const std::function<double(double)>& psi_star_prime)
{
    double worst = -kInf;
    for (int i = 1; i <= 2000; ++i) {
        const double r = 0.01 * i;
        const double lhs = psi_star_prime(r) / psi_star(r);
        const double rhs = 0.5 / std::tanh(0.25 * r);
        worst = std::max(worst, (lhs - rhs) / rhs);
    }
    return worst;
}

// Pair built from Psi* alone: Theta by the quotient formula, Psi by numeric Legendre.
inline DualPair make_custom_pair(std::string name, std::function<double(double)> psi_star,
                                 std::function<double(double)> psi_star_prime)
{
    DualPair p;
    p.name = std::move(name);
    p.psi_star = psi_star;
    p.psi_star_prime = psi_star_prime;
    p.theta = derive_theta(psi_star_prime);
    p.theta_unit = [psi_star_prime](double r) {
        return std::abs(r) < 1e-8 ? 1.0 + 0.5 * r : std::expm1(r) / psi_star_prime(r);
    };
    p.psi = [psi_star, psi_star_prime](double a) {
        return legendre_transform(psi_star, psi_star_prime, a);
    };
    p.satisfies_coth = coth_condition_violation(psi_star, psi_star_prime) <= 1e-9;
    // C = sup Theta(s,t)/(s+t) = sup_r tanh(r/2)/(Psi*)'(r)
    double c = 0.5;
    for (int i = 1; i <= 4000; ++i) {
        const double r = 0.005 * i;
        c = std::max(c, std::tanh(0.5 * r) / psi_star_prime(r));
    }
    p.mean_constant = c;
    return p;
}

// Named Psi* registry for config-driven custom pairs.
inline std::map<std::string, std::pair<std::function<double(double)>, std::function<double(double)>>>
psi_star_registry()
{
    return {
        {"quartic",
         {[](double r) { return r * r * r * r / 12.0 + 0.5 * r * r; },
          [](double r) { return r * r * r / 3.0 + r; }}},
        {"cosh_numeric",
         {[](double r) { return 4.0 * (std::cosh(0.5 * r) - 1.0); },
          [](double r) { return 2.0 * std::sinh(0.5 * r); }}},
    };
}

inline DualPair make_pair_by_name(const std::string& name, const std::string& custom = "")
{
    if (name == "quadratic") return make_quadratic_pair();
    if (name == "cosh") return make_cosh_pair();
    if (name == "custom") {
        auto reg = psi_star_registry();
        auto it = reg.find(custom);
        if (it == reg.end()) throw InputError("unknown custom Psi* '" + custom + "'");
        return make_custom_pair(custom, it->second.first, it->second.second);
    }
    // registry names are accepted directly as well
    auto reg = psi_star_registry();
    auto it = reg.find(name);
    if (it != reg.end()) return make_custom_pair(name, it->second.first, it->second.second);
    throw InputError("unknown pair '" + name + "' (expected quadratic, cosh or custom)");
}

struct PairCheck {
    std::string name;
    bool passed = false;
    bool required = true;
    double worst = 0.0;
    double tolerance = 0.0;
    std::string note;
};

struct PairReport {
    std::string pair;
    std::vector<PairCheck> checks;

    bool passed() const
    {
        return std::all_of(checks.begin(), checks.end(),
                           [](const PairCheck& c) { return c.passed || !c.required; });
    }

    const PairCheck* find(const std::string& n) const
    {
        for (const auto& c : checks)
            if (c.name == n) return &c;
        return nullptr;
    }
};

inline PairReport check_pair(const DualPair& pr, std::uint64_t seed = 12345)
{
    PairReport rep;
    rep.pair = pr.name;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto pos = [&] { return 10.0 * (1.0 - U(rng)); }; // (0, 10]
    auto add = [&](std::string n, double worst, double tol, bool required = true,
                   std::string note = "") {
        rep.checks.push_back({std::move(n), worst <= tol, required, worst, tol, std::move(note)});
    };
    const auto& Ps = pr.psi_star;
    const auto& dPs = pr.psi_star_prime;
    const auto& Th = pr.theta;

    {
        double w = std::abs(Ps(0.0));
        for (int i = 0; i < 1000; ++i) {
            const double r = 20.0 * (U(rng) - 0.5);
            w = std::max(w, std::abs(Ps(r) - Ps(-r)) / std::max(1.0, std::abs(Ps(r))));
        }
        add("psi_star_even_zero", w, 1e-12);
    }
    {
        const double h = 1e-4;
        const double second = (Ps(h) - 2.0 * Ps(0.0) + Ps(-h)) / (h * h);
        add("psi_star_second_derivative_one", std::abs(second - 1.0), 1e-6);
    }
    {
        double w = 0.0;
        for (int i = 0; i < 10000; ++i) {
            const double s = pos(), t = pos();
            const double lhs = dPs(log_ratio(s, t)) * Th(s, t);
            w = std::max(w, std::abs(lhs - (s - t)) / std::max({std::abs(s - t), 1e-300, 1e-12 * (s + t)}));
        }
        add("compatibility", w, 1e-10);
    }
    {
        double w = std::abs(Th(1.0, 1.0) - 1.0);
        for (int i = 0; i < 1000; ++i) {
            const double s = pos(), t = pos(), l = pos();
            w = std::max(w, std::abs(Th(s, t) - Th(t, s)) / Th(s, t));
            w = std::max(w, std::abs(Th(l * s, l * t) - l * Th(s, t)) / (l * Th(s, t)));
            w = std::max(w, std::abs(Th(0.0, t)));
            w = std::max(w, std::abs(Th(t, t) - t) / t);
        }
        add("theta_axioms", w, 1e-10);
    }
    {
        // midpoint concavity of Theta along random segments
        double w = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const double s1 = pos(), t1 = pos(), s2 = pos(), t2 = pos();
            const double mid = Th(0.5 * (s1 + s2), 0.5 * (t1 + t2));
            const double avg = 0.5 * (Th(s1, t1) + Th(s2, t2));
            w = std::max(w, (avg - mid) / std::max(1.0, mid));
        }
        add("theta_jointly_concave", w, 1e-10);
    }
    {
        double w = 0.0;
        for (int i = 0; i < 10000; ++i) {
            const double s = pos(), t = pos();
            w = std::max(w, Th(s, t) / (s + t) - pr.mean_constant);
        }
        add("theta_mean_bound", w, 1e-12, true, "C = " + std::to_string(pr.mean_constant));
    }
    auto G = [&](double s, double t) { return 0.25 * Ps(log_ratio(s, t)) * Th(s, t); };
    {
        double w = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const double s1 = pos(), t1 = pos(), s2 = pos(), t2 = pos();
            const double mid = G(0.5 * (s1 + s2), 0.5 * (t1 + t2));
            const double avg = 0.5 * (G(s1, t1) + G(s2, t2));
            w = std::max(w, (mid - avg) / std::max(1.0, avg));
        }
        add("G_jointly_convex", w, 1e-10);
    }
    {
        // Psi*(log s - log t) Theta <= (s - t)(log s - log t)
        double w = 0.0;
        for (int i = 0; i < 10000; ++i) {
            const double s = pos(), t = pos();
            const double r = log_ratio(s, t);
            const double rhs = (s - t) * r;
            w = std::max(w, (Ps(r) * Th(s, t) - rhs) / std::max(1.0, rhs));
        }
        add("dissipation_upper_bound", w, 1e-10);
    }
    {
        double w = 0.0;
        for (int i = 0; i < 10000; ++i) {
            const double s = pos(), t = pos();
            const double r = log_ratio(s, t);
            const double lhs = 2.0 * std::pow(std::sqrt(s) - std::sqrt(t), 2);
            w = std::max(w, (lhs - Ps(r) * Th(s, t)) / std::max(1.0, lhs));
        }
        add("sqrt_lower_bound", w, 1e-10, pr.satisfies_coth,
            pr.satisfies_coth ? "" : "informational: coth condition not satisfied");
    }
    {
        const double v = coth_condition_violation(Ps, dPs);
        add("coth_condition", v, 1e-9, false,
            v <= 1e-9 ? (v > -1e-9 ? "holds with equality" : "holds") : "violated on (0, 20]");
    }
    {
        // Fenchel: Psi(a) + Psi*(b) >= ab, equality at a = (Psi*)'(b)
        double gap = 0.0, eq = 0.0;
        for (int i = 0; i < 20; ++i)
            for (int j = 0; j < 20; ++j) {
                const double a = -5.0 + 10.0 * i / 19.0, b = -5.0 + 10.0 * j / 19.0;
                gap = std::max(gap, a * b - pr.psi(a) - Ps(b));
            }
        for (int j = 0; j < 20; ++j) {
            const double b = -5.0 + 10.0 * j / 19.0;
            const double a = dPs(b);
            eq = std::max(eq, std::abs(pr.psi(a) + Ps(b) - a * b) / std::max(1.0, std::abs(a * b)));
        }
        add("fenchel_inequality", gap, 1e-8);
        add("fenchel_equality", eq, 1e-8);
        add("psi_zero", std::abs(pr.psi(0.0)), 1e-10);
    }
    {
        // Psi(r)/r nondecreasing on (0, 20]
        double w = 0.0, prev = 0.0;
        for (int i = 1; i <= 400; ++i) {
            const double r = 0.05 * i;
            const double q = pr.psi(r) / r;
            w = std::max(w, prev - q);
            prev = q;
        }
        add("psi_over_r_monotone", w, 1e-10);
    }
    return rep;
}

} // namespace glab
