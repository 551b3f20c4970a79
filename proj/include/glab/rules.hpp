#pragma once

// Fixed Gauss rules (Golub-Welsch) and the adaptive 1-D integrator shared by
// the kernel normalisation, cross-section and oracle code.

#include "core.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cstdio>
#include <functional>
#include <vector>

namespace glab {

struct AxisRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const { return nodes.size(); }

    double integrate(const std::function<double(double)>& g) const
    {
        double s = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * g(nodes[i]);
        return s;
    }
};

namespace detail {

// Eigen-decomposition of the symmetric tridiagonal Jacobi matrix.
inline AxisRule golub_welsch(const std::vector<double>& offdiag, double mu0)
{
    const int n = int(offdiag.size()) + 1;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) {
        J(i, i + 1) = offdiag[i];
        J(i + 1, i) = offdiag[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    AxisRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        r.nodes[i] = es.eigenvalues()(i);
        const double v0 = es.eigenvectors()(0, i);
        r.weights[i] = mu0 * v0 * v0;
    }
    return r;
}

} // namespace detail

// Gauss-Legendre on [-1,1].
inline AxisRule gauss_legendre(int n)
{
    if (n < 1) throw InputError("gauss_legendre: n must be >= 1");
    if (n == 1) return AxisRule{{0.0}, {2.0}};
    std::vector<double> b(n - 1);
    for (int k = 1; k < n; ++k) b[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
    return detail::golub_welsch(b, 2.0);
}

// Gauss-Hermite for the weight exp(-z^2) on R.
inline AxisRule gauss_hermite(int n)
{
    if (n < 1) throw InputError("gauss_hermite: n must be >= 1");
    if (n == 1) return AxisRule{{0.0}, {std::sqrt(kPi)}};
    std::vector<double> b(n - 1);
    for (int k = 1; k < n; ++k) b[k - 1] = std::sqrt(0.5 * k);
    return detail::golub_welsch(b, std::sqrt(kPi));
}

// Gauss-Legendre mapped to [a,b] for Lebesgue measure.
inline AxisRule legendre_box(double a, double b, int n)
{
    AxisRule r = gauss_legendre(n);
    const double h = 0.5 * (b - a), c = 0.5 * (a + b);
    for (std::size_t i = 0; i < r.size(); ++i) {
        r.nodes[i] = c + h * r.nodes[i];
        r.weights[i] *= h;
    }
    return r;
}

// Midpoint rule on [a,b].
inline AxisRule midpoint_box(double a, double b, int n)
{
    AxisRule r;
    const double h = (b - a) / n;
    for (int i = 0; i < n; ++i) {
        r.nodes.push_back(a + (i + 0.5) * h);
        r.weights.push_back(h);
    }
    return r;
}

// Lebesgue-measure rule exact for N(mean, sd^2) times a polynomial of degree < 2n:
// nodes mean + sqrt(2) sd z_i, weights w_i exp(z_i^2) sqrt(2) sd.
inline AxisRule hermite_envelope(double mean, double sd, int n)
{
    AxisRule r = gauss_hermite(n);
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double z = r.nodes[i];
        r.nodes[i] = mean + std::sqrt(2.0) * sd * z;
        r.weights[i] *= std::exp(z * z) * std::sqrt(2.0) * sd;
    }
    return r;
}

// Rule on [0, b] for Lebesgue measure, graded towards 0 through t = b s^m.
inline AxisRule graded_rule(double b, int n, double m)
{
    AxisRule g = gauss_legendre(n);
    AxisRule r;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = 0.5 * (g.nodes[i] + 1.0);
        r.nodes.push_back(b * std::pow(s, m));
        r.weights.push_back(0.5 * g.weights[i] * b * m * std::pow(s, m - 1.0));
    }
    return r;
}

// Adaptive Gauss-Kronrod on [a,b]. grade > 1 substitutes x = a + (b-a) s^grade,
// which flattens integrable power singularities at the left endpoint.
inline double integrate_1d(const std::function<double(double)>& f, double a, double b,
                           double abs_tol = 1e-10, double grade = 1.0)
{
    if (!(b > a)) return 0.0;
    const double len = b - a;
    auto g = [&](double s) {
        if (grade == 1.0) return f(a + len * s) * len;
        if (s <= 0.0) return 0.0;
        return f(a + len * std::pow(s, grade)) * len * grade * std::pow(s, grade - 1.0);
    };
    double err = 0.0;
    const double val = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        g, 0.0, 1.0, 20, 1e-13, &err);
    if (!std::isfinite(val))
        throw NumericalError("integrate_1d: non-finite integral on [" + std::to_string(a) + ", " +
                             std::to_string(b) + "]");
    if (err > abs_tol && err > 1e-9 * std::abs(val))
    {
        char msg[160];
        std::snprintf(msg, sizeof msg, "integrate_1d: error estimate %.3g exceeds tolerance on [%.6g, %.6g]",
                      err, a, b);
        throw NumericalError(msg);
    }
    return val;
}

} // namespace glab
