#pragma once

// Particle solver for the scaled fuzzy Boltzmann equation: free transport followed by
// delocalised binary collisions between arbitrary pairs, selected against a majorant
// and accepted with probability kappa(x_i - x_j) A0(|v_i - v_j|) / (C_kappa A0_hat).

#include "functionals.hpp"
#include "knn.hpp"

#include <random>
#include <vector>

namespace glab {

struct SolverConfig {
    std::size_t n = 10000;
    double dt = 0.002;
    double horizon = 2.0;
    double theta_min = 0.0;   // 0 selects the smallest cutoff with neglected theta^2-mass < 1e-3
    double a0_cap = 1e3;      // clip for singular kinetic kernels
    std::uint64_t seed = 1;
    std::size_t trace_every = 0; // steps between trace rows; 0 gives about 32 snapshots
    int knn_k = 4;
    bool whiten_entropy = true;
    std::size_t dissipation_samples = 0; // > 0: D_B of a Gaussian refit per trace row
};

template <int D> struct Ensemble {
    std::vector<Vec<D>> x, v;
    double t = 0.0;

    std::size_t size() const { return x.size(); }

    Vec<D> momentum() const
    {
        Vec<D> p = Vec<D>::Zero();
        for (const auto& u : v) p += u;
        return p / double(v.size());
    }
    // 1/2 mean |v|^2
    double energy() const
    {
        double e = 0.0;
        for (const auto& u : v) e += u.squaredNorm();
        return 0.5 * e / double(v.size());
    }
    double speed_scale() const
    {
        double s = 0.0;
        for (const auto& u : v) s += u.norm();
        return s / double(v.size());
    }
    Mat<D> velocity_covariance() const
    {
        const Vec<D> m = momentum();
        Mat<D> C = Mat<D>::Zero();
        for (const auto& u : v) C += (u - m) * (u - m).transpose();
        return C / double(v.size() - 1);
    }
    std::vector<double> phase_points() const
    {
        std::vector<double> out;
        out.reserve(2 * D * size());
        for (std::size_t i = 0; i < size(); ++i) {
            for (int a = 0; a < D; ++a) out.push_back(x[i](a));
            for (int a = 0; a < D; ++a) out.push_back(v[i](a));
        }
        return out;
    }
    // Moment-matched single Gaussian on phase space.
    DensityModel<D> gaussian_refit() const
    {
        PhaseVec<D> m = PhaseVec<D>::Zero();
        for (std::size_t i = 0; i < size(); ++i) m += join<D>(x[i], v[i]);
        m /= double(size());
        PhaseMat<D> C = PhaseMat<D>::Zero();
        for (std::size_t i = 0; i < size(); ++i) {
            const PhaseVec<D> d = join<D>(x[i], v[i]) - m;
            C += d * d.transpose();
        }
        GaussianComponent<D> g;
        g.mean = m;
        g.cov = C / double(size() - 1);
        g.cov = 0.5 * (g.cov + g.cov.transpose()).eval();
        return DensityModel<D>({g}, "refit");
    }
};

template <int D> struct TraceRow {
    double t = 0.0;
    double mass = 1.0;
    Vec<D> momentum = Vec<D>::Zero();
    double energy = 0.0;
    double entropy = 0.0, entropy_err = 0.0;
    std::size_t collisions = 0; // accepted since the start
    double moment = 0.0;        // mean <v>^{2 + gamma_+}
    double dissipation = 0.0, dissipation_err = 0.0;
};

struct StepStats {
    std::size_t candidates = 0, accepted = 0;
    std::size_t majorant_doublings = 0, cap_exceedances = 0;
    double momentum_drift = 0.0, energy_drift = 0.0; // relative, collision stage
};

template <int D> struct RunResult {
    std::vector<TraceRow<D>> trace;
    Ensemble<D> final_state;
    std::size_t steps = 0;
    std::size_t majorant_doublings = 0, cap_exceedances = 0;
    double max_momentum_drift = 0.0, max_energy_drift = 0.0;
    double theta_min = 0.0;
    double neglected_fraction = 0.0;
};

template <int D> class Simulator {
public:
    Simulator(const SolverConfig& cfg, const KernelSet& ks) : cfg_(cfg), ks_(ks)
    {
        if (ks.dim != D) throw InputError("kernel dimension does not match the solver dimension");
        if (!(cfg.dt > 0.0)) throw InputError("dt must be > 0");
        if (!(cfg.horizon >= 0.0)) throw InputError("horizon must be >= 0");
        if (cfg.n < 100) throw InputError("solver needs N >= 100");
        theta_min_ = cfg.theta_min > 0.0 ? cfg.theta_min : ks.default_theta_min(1e-3);
        if (!(theta_min_ < ks.theta_hi())) throw InputError("theta_min must be below eps/2");
        neglected_ = ks.neglected_momentum_fraction(theta_min_);
        if (neglected_ >= 1e-3)
            throw InputError("theta_min too large: neglected angular momentum fraction " +
                             std::to_string(neglected_) + " >= 1e-3");
        angles_ = ks.rate_distribution(theta_min_);
        angular_rate_ = tangent_sphere_measure(D) * ks.rate_mass(theta_min_);
        c_kappa_ = ks.kappa.upper_bound();
    }

    double theta_min() const { return theta_min_; }
    double neglected_fraction() const { return neglected_; }
    double a0_majorant() const { return a0_hat_; }

    Ensemble<D> sample_initial(const DensityModel<D>& f0, Rng& rng) const
    {
        Ensemble<D> e;
        e.x.resize(cfg_.n);
        e.v.resize(cfg_.n);
        for (std::size_t i = 0; i < cfg_.n; ++i) {
            const PhaseVec<D> z = f0.sample(rng);
            e.x[i] = z.template head<D>();
            e.v[i] = z.template tail<D>();
        }
        return e;
    }

    // Initial majorant from random pairs, with head room.
    void init_majorant(const Ensemble<D>& e, Rng& rng)
    {
        std::uniform_int_distribution<std::size_t> pick(0, e.size() - 1);
        double m = 0.0;
        for (int s = 0; s < 2000; ++s) {
            const std::size_t i = pick(rng), j = pick(rng);
            if (i != j) m = std::max(m, a0_clipped(e.v[i], e.v[j]));
        }
        a0_hat_ = std::max(1.5 * m, 1e-12);
    }

    StepStats step(Ensemble<D>& e, Rng& rng)
    {
        StepStats st;
        if (a0_hat_ <= 0.0) init_majorant(e, rng);
        for (std::size_t i = 0; i < e.size(); ++i) e.x[i] += e.v[i] * cfg_.dt;
        e.t += cfg_.dt;
        if (c_kappa_ <= 0.0) return st;
        const Vec<D> p0 = e.momentum() * double(e.size());
        const double e0 = e.energy();
        const double scale = e.speed_scale() * double(e.size());
        std::vector<Vec<D>> backup;
        while (true) {
            backup = e.v;
            const double mean = 0.5 * double(e.size() - 1) * c_kappa_ * a0_hat_ * angular_rate_ * cfg_.dt;
            std::poisson_distribution<std::size_t> P(mean);
            const std::size_t m = P(rng);
            st.candidates = m;
            st.accepted = 0;
            std::uniform_int_distribution<std::size_t> pick(0, e.size() - 1);
            std::uniform_real_distribution<double> U(0.0, 1.0);
            bool violated = false;
            for (std::size_t c = 0; c < m; ++c) {
                const std::size_t i = pick(rng);
                std::size_t j = pick(rng);
                while (j == i) j = pick(rng);
                const double a = a0_clipped(e.v[i], e.v[j], &st.cap_exceedances);
                if (a > a0_hat_) {
                    violated = true;
                    break;
                }
                const double acc = ks_.kappa(e.x[i], e.x[j]) * a / (c_kappa_ * a0_hat_);
                const double u = U(rng);
                const double th = angles_.sample(U(rng));
                const double ang = U(rng);
                if (u >= acc) continue;
                const Vec<D> w = e.v[i] - e.v[j];
                const double r = w.norm();
                if (!(r > 0.0)) continue;
                const Vec<D> k = w / r;
                const Vec<D> p = D == 2 ? tangent_frame<D>(k, ang < 0.5 ? 1.0 : -1.0)
                                        : tangent_frame<D>(k, 2.0 * kPi * ang);
                const double s = std::sin(0.5 * th);
                const Vec<D> dv = 0.5 * r * (-2.0 * s * s * k + std::sin(th) * p);
                e.v[i] += dv;
                e.v[j] -= dv;
                ++st.accepted;
            }
            if (!violated) break;
            e.v = backup;
            a0_hat_ *= 2.0;
            ++st.majorant_doublings;
        }
        const Vec<D> p1 = e.momentum() * double(e.size());
        st.momentum_drift = (p1 - p0).norm() / std::max(scale, 1e-300);
        st.energy_drift = std::abs(e.energy() - e0) / std::max(e0, 1e-300);
        return st;
    }

    TraceRow<D> trace_row(const Ensemble<D>& e, std::size_t collisions, Rng& rng) const
    {
        TraceRow<D> row;
        row.t = e.t;
        row.momentum = e.momentum();
        row.energy = e.energy();
        const auto h = entropy_knn(e.phase_points(), 2 * D, cfg_.knn_k, cfg_.whiten_entropy);
        row.entropy = h.value;
        row.entropy_err = h.std_error;
        row.collisions = collisions;
        const double g = std::max(0.0, ks_.a0.gamma);
        double m = 0.0;
        for (const auto& u : e.v) m += std::pow(1.0 + u.squaredNorm(), 0.5 * (2.0 + g));
        row.moment = m / double(e.size());
        if (cfg_.dissipation_samples > 0) {
            SamplerConfig sc;
            sc.n_samples = cfg_.dissipation_samples;
            sc.seed = std::uniform_int_distribution<std::uint64_t>()(rng);
            const auto refit = e.gaussian_refit();
            const Estimate db = dissipation_boltzmann<D>(refit, ks_, sc);
            row.dissipation = db.value;
            row.dissipation_err = db.std_error;
        }
        return row;
    }

    RunResult<D> run(const DensityModel<D>& f0)
    {
        Rng rng = make_stream(cfg_.seed, 0);
        Rng aux = make_stream(cfg_.seed, 1); // trace-side randomness, keeps the dynamics stream clean
        RunResult<D> res;
        res.theta_min = theta_min_;
        res.neglected_fraction = neglected_;
        Ensemble<D> e = sample_initial(f0, rng);
        a0_hat_ = 0.0;
        init_majorant(e, rng);
        const std::size_t steps = std::size_t(std::llround(cfg_.horizon / cfg_.dt));
        std::size_t collisions = 0;
        const std::size_t every = cfg_.trace_every > 0 ? cfg_.trace_every : std::max<std::size_t>(1, steps / 32);
        res.trace.push_back(trace_row(e, 0, aux));
        for (std::size_t s = 1; s <= steps; ++s) {
            const StepStats st = step(e, rng);
            collisions += st.accepted;
            res.majorant_doublings += st.majorant_doublings;
            res.cap_exceedances += st.cap_exceedances;
            res.max_momentum_drift = std::max(res.max_momentum_drift, st.momentum_drift);
            res.max_energy_drift = std::max(res.max_energy_drift, st.energy_drift);
            if (s % every == 0 || s == steps)
                if (res.trace.back().t < e.t) res.trace.push_back(trace_row(e, collisions, aux));
        }
        res.steps = steps;
        res.final_state = std::move(e);
        return res;
    }

private:
    double a0_clipped(const Vec<D>& a, const Vec<D>& b, std::size_t* exceed = nullptr) const
    {
        const double r = (a - b).norm();
        const double v = ks_.a0(r);
        if (!(v <= cfg_.a0_cap)) {
            if (exceed) ++*exceed;
            return cfg_.a0_cap;
        }
        return v;
    }

    SolverConfig cfg_;
    KernelSet ks_;
    double theta_min_ = 0.0;
    double neglected_ = 0.0;
    AngleDistribution angles_;
    double angular_rate_ = 0.0;
    double c_kappa_ = 1.0;
    double a0_hat_ = 0.0;
};

// Entropy-inequality bookkeeping over a trace: H_T - H_0 + trapezoid of the refit
// dissipation, with a one-sigma error combining the two entropy estimates and the
// dissipation errors.
template <int D> std::pair<double, double> entropy_balance(const std::vector<TraceRow<D>>& trace)
{
    std::vector<double> t, d;
    double var = 0.0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        t.push_back(trace[i].t);
        d.push_back(trace[i].dissipation);
    }
    const double integral = trapezoid(t, d);
    for (std::size_t i = 1; i < trace.size(); ++i) {
        const double h = 0.5 * (t[i] - t[i - 1]);
        var += h * h * (trace[i].dissipation_err * trace[i].dissipation_err +
                        trace[i - 1].dissipation_err * trace[i - 1].dissipation_err);
    }
    var += trace.front().entropy_err * trace.front().entropy_err + trace.back().entropy_err * trace.back().entropy_err;
    return {trace.back().entropy - trace.front().entropy + integral, std::sqrt(var)};
}

} // namespace glab
