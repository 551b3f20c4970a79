#pragma once

#include "core.hpp"

#include <random>
#include <string>
#include <utility>
#include <vector>

namespace glab {

template <int D> using PhaseVec = Eigen::Matrix<double, 2 * D, 1>;
template <int D> using PhaseMat = Eigen::Matrix<double, 2 * D, 2 * D>;

template <int D> PhaseVec<D> join(const Vec<D>& x, const Vec<D>& v)
{
    PhaseVec<D> z;
    z << x, v;
    return z;
}

template <int D> struct GaussianComponent {
    double weight = 1.0;
    PhaseVec<D> mean = PhaseVec<D>::Zero();
    PhaseMat<D> cov = PhaseMat<D>::Identity();

    // cached
    PhaseMat<D> chol = PhaseMat<D>::Identity(); // lower factor L, cov = L L^T
    PhaseMat<D> prec = PhaseMat<D>::Identity();
    double log_norm = 0.0; // log of the Gaussian normalising constant

    void prepare()
    {
        if (!cov.allFinite() || (cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * cov.cwiseAbs().maxCoeff())
            throw InputError("component covariance must be finite and symmetric");
        Eigen::LLT<PhaseMat<D>> llt(cov);
        if (llt.info() != Eigen::Success) throw InputError("component covariance is not positive definite");
        chol = llt.matrixL();
        prec = llt.solve(PhaseMat<D>::Identity());
        double logdet = 0.0;
        for (int i = 0; i < 2 * D; ++i) logdet += 2.0 * std::log(chol(i, i));
        log_norm = -0.5 * (2 * D) * std::log(2.0 * kPi) - 0.5 * logdet;
    }

    double log_det() const
    {
        double s = 0.0;
        for (int i = 0; i < 2 * D; ++i) s += 2.0 * std::log(chol(i, i));
        return s;
    }
};

template <int D> class DensityModel {
public:
    DensityModel() = default;

    explicit DensityModel(std::vector<GaussianComponent<D>> comps, std::string name = "custom")
        : comps_(std::move(comps)), name_(std::move(name))
    {
        check_dimension<D>();
        if (comps_.empty()) throw InputError("density needs at least one component");
        double total = 0.0;
        for (auto& c : comps_) {
            if (!(c.weight >= 0.0)) throw InputError("component weights must be >= 0");
            total += c.weight;
            c.prepare();
        }
        if (std::abs(total - 1.0) > 1e-12) throw InputError("component weights must sum to 1");
        cum_.clear();
        double acc = 0.0;
        for (const auto& c : comps_) cum_.push_back(acc += c.weight);
    }

    const std::vector<GaussianComponent<D>>& components() const { return comps_; }
    const std::string& name() const { return name_; }
    bool single_gaussian() const { return comps_.size() == 1; }

    double log_eval(const Vec<D>& x, const Vec<D>& v) const { return log_eval(join<D>(x, v)); }

    double log_eval(const PhaseVec<D>& z) const
    {
        if (comps_.size() == 1) return comp_log(comps_[0], z);
        double m = -kInf;
        for (const auto& c : comps_)
            if (c.weight > 0) m = std::max(m, std::log(c.weight) + comp_log(c, z));
        if (!std::isfinite(m)) return -kInf;
        double s = 0.0;
        for (const auto& c : comps_)
            if (c.weight > 0) s += std::exp(std::log(c.weight) + comp_log(c, z) - m);
        return m + std::log(s);
    }

    double eval(const Vec<D>& x, const Vec<D>& v) const { return std::exp(log_eval(x, v)); }

    // grad_v log f: responsibility-weighted component gradients.
    Vec<D> grad_v_log(const Vec<D>& x, const Vec<D>& v) const
    {
        const PhaseVec<D> z = join<D>(x, v);
        if (comps_.size() == 1) return comp_grad(comps_[0], z);
        const double lf = log_eval(z);
        Vec<D> g = Vec<D>::Zero();
        for (const auto& c : comps_) {
            if (c.weight <= 0) continue;
            const double resp = std::exp(std::log(c.weight) + comp_log(c, z) - lf);
            g += resp * comp_grad(c, z);
        }
        return g;
    }

    template <class Rng> PhaseVec<D> sample(Rng& rng) const
    {
        std::size_t ci = 0;
        if (comps_.size() > 1) {
            const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            while (ci + 1 < cum_.size() && u >= cum_[ci]) ++ci;
        }
        std::normal_distribution<double> N(0.0, 1.0);
        PhaseVec<D> z;
        for (int i = 0; i < 2 * D; ++i) z(i) = N(rng);
        return comps_[ci].mean + comps_[ci].chol * z;
    }

    PhaseVec<D> mean() const
    {
        PhaseVec<D> m = PhaseVec<D>::Zero();
        for (const auto& c : comps_) m += c.weight * c.mean;
        return m;
    }

    PhaseMat<D> covariance() const
    {
        const PhaseVec<D> m = mean();
        PhaseMat<D> S = PhaseMat<D>::Zero();
        for (const auto& c : comps_) {
            const PhaseVec<D> d = c.mean - m;
            S += c.weight * (c.cov + d * d.transpose());
        }
        return S;
    }

    // H(f) = int f log f. Closed form for a single Gaussian, else Monte Carlo.
    template <class Rng> Estimate entropy(Rng& rng, std::size_t n = 200000) const
    {
        if (single_gaussian()) {
            Estimate e = exact_estimate(-double(D) * (1.0 + std::log(2.0 * kPi)) -
                                            0.5 * comps_[0].log_det(),
                                        Method::TensorGrid);
            return e;
        }
        double mean = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double y = log_eval(sample(rng));
            const double d = y - mean;
            mean += d / double(i + 1);
            m2 += d * (y - mean);
        }
        Estimate e;
        e.value = mean;
        e.std_error = std::sqrt(m2 / double(n - 1) / double(n));
        e.n_samples = n;
        return e;
    }

    double entropy() const
    {
        if (!single_gaussian()) throw InputError("closed-form entropy needs a single Gaussian");
        return -double(D) * (1.0 + std::log(2.0 * kPi)) - 0.5 * comps_[0].log_det();
    }

    // int (<x>^a + <v>^b) f. Closed form for a, b in {0, 2, 4}, else Monte Carlo.
    template <class Rng> Estimate moment_L1(double a, double b, Rng& rng, std::size_t n = 200000) const
    {
        if (!(a >= 0.0 && b >= 0.0)) throw InputError("moment exponents must be >= 0");
        auto closed = [](double e) { return e == 0.0 || e == 2.0 || e == 4.0; };
        if (closed(a) && closed(b)) {
            double s = 0.0;
            for (const auto& c : comps_)
                s += c.weight * (bracket_moment(c, 0, a) + bracket_moment(c, D, b));
            return exact_estimate(s, Method::TensorGrid);
        }
        double mean = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const PhaseVec<D> z = sample(rng);
            const double y = std::pow(bracket(z.template head<D>().norm()), a) +
                             std::pow(bracket(z.template tail<D>().norm()), b);
            const double d = y - mean;
            mean += d / double(i + 1);
            m2 += d * (y - mean);
        }
        Estimate e;
        e.value = mean;
        e.std_error = std::sqrt(m2 / double(n - 1) / double(n));
        e.n_samples = n;
        return e;
    }

    // E(f) = 1/2 int |v|^2 f.
    double energy() const
    {
        double s = 0.0;
        for (const auto& c : comps_)
            s += c.weight * 0.5 * (c.cov.template bottomRightCorner<D, D>().trace() +
                                   c.mean.template tail<D>().squaredNorm());
        return s;
    }

private:
    static double comp_log(const GaussianComponent<D>& c, const PhaseVec<D>& z)
    {
        const PhaseVec<D> d = z - c.mean;
        return c.log_norm - 0.5 * d.dot(c.prec * d);
    }

    static Vec<D> comp_grad(const GaussianComponent<D>& c, const PhaseVec<D>& z)
    {
        return -(c.prec * (z - c.mean)).template tail<D>();
    }

    // E <y>^e for the block starting at `off`, e in {0, 2, 4}.
    static double bracket_moment(const GaussianComponent<D>& c, int off, double e)
    {
        if (e == 0.0) return 1.0;
        const Mat<D> S = c.cov.template block<D, D>(off, off);
        const Vec<D> mu = c.mean.template segment<D>(off);
        const double m2 = S.trace() + mu.squaredNorm(); // E|y|^2
        if (e == 2.0) return 1.0 + m2;
        const double m4 = m2 * m2 + 2.0 * (S * S).trace() + 4.0 * mu.dot(S * mu);
        return 1.0 + 2.0 * m2 + m4;
    }

    std::vector<GaussianComponent<D>> comps_;
    std::vector<double> cum_;
    std::string name_ = "custom";
};

// Single Gaussian with independent coordinates.
template <int D>
DensityModel<D> gaussian_diag(const PhaseVec<D>& mean, const PhaseVec<D>& var, std::string name = "gaussian")
{
    GaussianComponent<D> c;
    c.mean = mean;
    c.cov = var.asDiagonal();
    return DensityModel<D>({c}, std::move(name));
}

template <int D> DensityModel<D> standard_gaussian()
{
    return gaussian_diag<D>(PhaseVec<D>::Zero(), PhaseVec<D>::Ones(), "standard");
}

// rho(x) M(v) with rho ~ N(0, sx^2 I) and M ~ N(0, T I).
template <int D> DensityModel<D> factorised_maxwellian(double sx = 1.0, double temperature = 1.0)
{
    PhaseVec<D> var;
    var << Vec<D>::Constant(sx * sx), Vec<D>::Constant(temperature);
    return gaussian_diag<D>(PhaseVec<D>::Zero(), var, "maxwellian");
}

// x ~ N(0, I), v ~ N(0, diag(1, 4, ...)) with an optional x1-v1 correlation c.
template <int D> DensityModel<D> anisotropic_gaussian(double c = 0.0)
{
    GaussianComponent<D> g;
    g.cov.setIdentity();
    g.cov(D + 1, D + 1) = 4.0;
    g.cov(0, D) = g.cov(D, 0) = c;
    return DensityModel<D>({g}, c == 0.0 ? "anisotropic" : "anisotropic_correlated");
}

// Equal-weight two-component mixture with velocity means at +/- shift e_1.
template <int D> DensityModel<D> symmetric_mixture(double shift = 1.5)
{
    GaussianComponent<D> a, b;
    a.weight = b.weight = 0.5;
    a.mean(D) = shift;
    b.mean(D) = -shift;
    return DensityModel<D>({a, b}, "mixture");
}

} // namespace glab
