#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace glab {

template <int D> using Vec = Eigen::Matrix<double, D, 1>;
template <int D> using Mat = Eigen::Matrix<double, D, D>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Bad user input: wrong ranges, malformed configs, non-unit vectors.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// v == v*: the projection and the relative direction are undefined.
class DegenerateFrame : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Quadrature or root finding failed to converge.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Surface measure of the unit sphere S^n in R^{n+1}.
inline double sphere_measure(int n)
{
    // |S^n| = 2 pi^{(n+1)/2} / Gamma((n+1)/2)
    return 2.0 * std::pow(kPi, 0.5 * (n + 1)) / std::tgamma(0.5 * (n + 1));
}

// |S^{d-2}|: the measure of the circle of directions p orthogonal to k.
inline double tangent_sphere_measure(int d) { return sphere_measure(d - 2); }

// Target value of the angular momentum integral of beta: 8(d-1)/|S^{d-2}|.
inline double angular_momentum_constant(int d)
{
    return 8.0 * (d - 1) / tangent_sphere_measure(d);
}

inline double bracket(double r) { return std::sqrt(1.0 + r * r); }

template <int D> inline void check_dimension()
{
    static_assert(D == 2 || D == 3, "only d = 2 and d = 3 are supported");
}

enum class Method { MonteCarlo, TensorGrid };

inline const char* method_name(Method m)
{
    return m == Method::MonteCarlo ? "monte_carlo" : "tensor_grid";
}

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_samples = 0;
    std::size_t n_rejected = 0;
    Method method = Method::MonteCarlo;
    bool unreliable = false;

    double rejected_fraction() const
    {
        const double total = double(n_samples + n_rejected);
        return total > 0 ? double(n_rejected) / total : 0.0;
    }
};

inline Estimate exact_estimate(double value, Method m = Method::TensorGrid)
{
    Estimate e;
    e.value = value;
    e.method = m;
    return e;
}

} // namespace glab
