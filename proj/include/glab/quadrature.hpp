#pragma once

#include "densities.hpp"
#include "geometry.hpp"
#include "kernels.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

namespace glab {

enum class ThetaStrategy { WeightTimesThetaSq, UniformOnSupport };
enum class PairProposal { ProductOfDensity, GaussianOverdispersed };

struct SamplerConfig {
    std::size_t n_samples = 100000;
    std::uint64_t seed = 1;
    ThetaStrategy theta_strategy = ThetaStrategy::WeightTimesThetaSq;
    PairProposal pair_proposal = PairProposal::ProductOfDensity;
    double overdispersion = 1.5; // covariance inflation of the Gaussian proposal
    double speed_floor = 1e-8;   // draws with |v - v*| below this are rejected
    double unreliable_fraction = 1e-3;
    int workers = 1;
};

using Rng = std::mt19937_64;

// Independent stream for (master seed, worker).
inline Rng make_stream(std::uint64_t seed, std::uint64_t worker)
{
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(worker),
                      std::uint32_t(worker >> 32), 0x5eedu};
    return Rng(seq);
}

template <int D> struct FrameSample {
    CollisionFrame<D> frame;  // sigma built from p
    CollisionFrame<D> mirror; // same frame with p -> -p
    double weight = 0.0;      // importance weight for int g dsigma deta
    double pair_weight = 0.0; // importance weight for int g deta
    double log_f = 0.0, log_fs = 0.0;
    bool has_angle = true;
};

template <int D> class FrameSampler {
public:
    FrameSampler(const DensityModel<D>& f, const KernelSet& ks, const SamplerConfig& cfg,
                 bool with_angle = true)
        : f_(&f), ks_(ks), cfg_(cfg), with_angle_(with_angle)
    {
        if (ks.dim != D) throw InputError("kernel dimension does not match density dimension");
        ks_.validate();
        if (cfg.pair_proposal == PairProposal::GaussianOverdispersed) {
            GaussianComponent<D> g;
            g.mean = f.mean();
            g.cov = cfg.overdispersion * f.covariance();
            proposal_ = DensityModel<D>({g}, "proposal");
            own_proposal_ = true;
        }
        if (with_angle_) theta_dist_ = ks_.theta_sq_distribution();
        sphere_ = tangent_sphere_measure(D);
    }

    const KernelSet& kernels() const { return ks_; }
    const DensityModel<D>& density() const { return *f_; }
    const SamplerConfig& config() const { return cfg_; }

    // Draws one accepted sample; degenerate pairs are counted in `rejected`.
    bool draw(Rng& rng, FrameSample<D>& s, std::size_t& rejected) const
    {
        const DensityModel<D>& q = own_proposal_ ? proposal_ : *f_;
        std::uniform_real_distribution<double> U(0.0, 1.0);
        for (int attempt = 0; attempt < 1000; ++attempt) {
            const PhaseVec<D> a = q.sample(rng);
            const PhaseVec<D> b = q.sample(rng);
            const Vec<D> x = a.template head<D>(), v = a.template tail<D>();
            const Vec<D> xs = b.template head<D>(), vs = b.template tail<D>();
            if (!((v - vs).norm() >= cfg_.speed_floor)) {
                ++rejected;
                continue;
            }
            double lq = q.log_eval(a) + q.log_eval(b);
            if (own_proposal_) {
                s.log_f = f_->log_eval(a);
                s.log_fs = f_->log_eval(b);
            } else {
                s.log_f = q.log_eval(a);
                s.log_fs = q.log_eval(b);
            }
            s.pair_weight = std::exp(-lq);
            s.has_angle = with_angle_;
            if (!with_angle_) {
                s.frame.x = x;
                s.frame.xs = xs;
                s.frame.v = v;
                s.frame.vs = vs;
                s.frame.speed = (v - vs).norm();
                s.weight = s.pair_weight;
                return true;
            }
            double theta, qtheta;
            if (cfg_.theta_strategy == ThetaStrategy::WeightTimesThetaSq) {
                theta = theta_dist_.sample(U(rng));
                qtheta = theta_dist_.pdf(theta);
            } else {
                const double lo = ks_.theta_lo(), hi = ks_.theta_hi();
                theta = lo + (hi - lo) * U(rng);
                qtheta = 1.0 / (hi - lo);
            }
            const Vec<D> k = (v - vs) / (v - vs).norm();
            Vec<D> p;
            if constexpr (D == 2) p = tangent_frame<D>(k, U(rng) < 0.5 ? 1.0 : -1.0);
            else p = tangent_frame<D>(k, 2.0 * kPi * U(rng));
            s.frame = make_frame_polar<D>(x, xs, v, vs, theta, p);
            s.mirror = make_frame_polar<D>(x, xs, v, vs, theta, Vec<D>(-p));
            const double jac = D == 2 ? 1.0 : std::pow(std::sin(theta), D - 2);
            s.weight = sphere_ * jac / qtheta * s.pair_weight;
            if (!std::isfinite(s.weight) || qtheta <= 0.0) {
                ++rejected;
                continue;
            }
            return true;
        }
        return false;
    }

private:
    const DensityModel<D>* f_;
    KernelSet ks_;
    SamplerConfig cfg_;
    bool with_angle_;
    DensityModel<D> proposal_;
    bool own_proposal_ = false;
    AngleDistribution theta_dist_;
    double sphere_ = 2.0;
};

namespace detail {

struct Welford {
    double n = 0.0, mean = 0.0, m2 = 0.0;
    void add(double y)
    {
        n += 1.0;
        const double d = y - mean;
        mean += d / n;
        m2 += d * (y - mean);
    }
    void merge(const Welford& o)
    {
        if (o.n == 0.0) return;
        if (n == 0.0) {
            *this = o;
            return;
        }
        const double tot = n + o.n;
        const double d = o.mean - mean;
        mean += d * o.n / tot;
        m2 += o.m2 + d * d * n * o.n / tot;
        n = tot;
    }
};

} // namespace detail

// Runs the sampler with K simultaneous integrands on one frame stream. The callback
// fills `out` with weighted contributions (the estimator of each integral is their
// mean) and returns false to reject the draw.
template <std::size_t K, int D, class F>
std::array<Estimate, K> estimate_many(const FrameSampler<D>& sampler, F&& contrib)
{
    const SamplerConfig& cfg = sampler.config();
    const int W = std::max(1, cfg.workers);
    const std::size_t n = cfg.n_samples;
    struct Part {
        std::array<detail::Welford, K> acc;
        std::size_t rejected = 0;
        bool exhausted = false;
    };
    std::vector<Part> parts(W);
    auto work = [&](int w) {
        Rng rng = make_stream(cfg.seed, std::uint64_t(w));
        const std::size_t quota = n / W + (std::size_t(w) < n % W ? 1 : 0);
        FrameSample<D> s;
        std::array<double, K> out;
        Part& P = parts[w];
        std::size_t done = 0;
        while (done < quota) {
            if (!sampler.draw(rng, s, P.rejected)) {
                P.exhausted = true;
                break;
            }
            out.fill(0.0);
            bool ok = contrib(s, out);
            for (double y : out) ok = ok && std::isfinite(y);
            if (!ok) {
                ++P.rejected;
                if (P.rejected > 1000 * (quota + 1)) {
                    P.exhausted = true;
                    break;
                }
                continue;
            }
            for (std::size_t j = 0; j < K; ++j) P.acc[j].add(out[j]);
            ++done;
        }
    };
    if (W == 1) work(0);
    else {
        std::vector<std::thread> th;
        for (int w = 0; w < W; ++w) th.emplace_back(work, w);
        for (auto& t : th) t.join();
    }
    std::array<detail::Welford, K> acc;
    std::size_t rejected = 0;
    bool exhausted = false;
    for (const auto& P : parts) {
        for (std::size_t j = 0; j < K; ++j) acc[j].merge(P.acc[j]);
        rejected += P.rejected;
        exhausted = exhausted || P.exhausted;
    }
    if (acc[0].n == 0.0) throw NumericalError("estimate: every draw was rejected");
    std::array<Estimate, K> res;
    for (std::size_t j = 0; j < K; ++j) {
        Estimate& e = res[j];
        e.value = acc[j].mean;
        e.n_samples = std::size_t(acc[j].n);
        e.std_error = acc[j].n > 1 ? std::sqrt(acc[j].m2 / (acc[j].n - 1.0) / acc[j].n) : 0.0;
        e.n_rejected = rejected;
        e.method = Method::MonteCarlo;
        e.unreliable = exhausted || e.rejected_fraction() > cfg.unreliable_fraction;
    }
    return res;
}

// Estimate of int g dsigma deta for an integrand on frames.
template <int D, class G> Estimate estimate(const FrameSampler<D>& sampler, G&& g)
{
    return estimate_many<1, D>(sampler, [&](const FrameSample<D>& s, std::array<double, 1>& out) {
        out[0] = g(s.frame) * s.weight;
        return true;
    })[0];
}

// Estimate of int g deta for an integrand on (x, x*, v, v*).
template <int D, class G> Estimate estimate_pair(const FrameSampler<D>& sampler, G&& g)
{
    return estimate_many<1, D>(sampler, [&](const FrameSample<D>& s, std::array<double, 1>& out) {
        out[0] = g(s.frame.x, s.frame.xs, s.frame.v, s.frame.vs) * s.pair_weight;
        return true;
    })[0];
}

// ---------------------------------------------------------------------------
// Deterministic tensor grids for d = 2.

// Phase-space grid: eta = mu + M z with z on a tensor product of axis rules,
// Lebesgue weights include |det M|.
template <int D> struct GridSpec {
    std::array<AxisRule, 2 * D> axes;
    PhaseVec<D> mu = PhaseVec<D>::Zero();
    PhaseMat<D> M = PhaseMat<D>::Identity();
    std::string label;
};

template <int D> struct GridNode {
    Vec<D> x, v;
    double w = 0.0;
    double aux = 0.0;             // optional per-node scalar (for instance log f)
    Vec<D> aux_v = Vec<D>::Zero(); // optional per-node vector (for instance grad_v log f)
};

// Box [mu_i - L sd_i, mu_i + L sd_i] per coordinate with n Gauss-Legendre points.
template <int D> GridSpec<D> box_grid(const DensityModel<D>& f, double L, int n)
{
    GridSpec<D> g;
    const PhaseVec<D> m = f.mean();
    const PhaseMat<D> S = f.covariance();
    for (int i = 0; i < 2 * D; ++i) {
        const double sd = std::sqrt(S(i, i));
        g.axes[i] = legendre_box(m(i) - L * sd, m(i) + L * sd, n);
    }
    g.label = "box L=" + std::to_string(L) + " n=" + std::to_string(n);
    return g;
}

// Whitened Gauss-Hermite grid for a single Gaussian: velocities are factored first so
// that z_v alone determines v, and x-axes (where integrands are polynomial) can be coarse.
template <int D> GridSpec<D> whitened_grid(const DensityModel<D>& f, int n_x, int n_v)
{
    if (!f.single_gaussian()) throw InputError("whitened_grid needs a single Gaussian");
    const auto& c = f.components()[0];
    // permutation to (v, x) order
    PhaseMat<D> P = PhaseMat<D>::Zero();
    for (int i = 0; i < D; ++i) {
        P(i, D + i) = 1.0;
        P(D + i, i) = 1.0;
    }
    const PhaseMat<D> Cp = P * c.cov * P.transpose();
    Eigen::LLT<PhaseMat<D>> llt(Cp);
    const PhaseMat<D> Lp = llt.matrixL();
    GridSpec<D> g;
    g.mu = c.mean;
    // eta = mu + P^T Lp z_perm, z_perm = (z_v, z_x); store axes in z_perm order
    g.M = P.transpose() * Lp;
    for (int i = 0; i < D; ++i) g.axes[i] = hermite_envelope(0.0, 1.0, n_v);
    for (int i = 0; i < D; ++i) g.axes[D + i] = hermite_envelope(0.0, 1.0, n_x);
    g.label = "whitened n_x=" + std::to_string(n_x) + " n_v=" + std::to_string(n_v);
    return g;
}

template <int D, class Prep>
std::vector<GridNode<D>> grid_nodes(const GridSpec<D>& g, Prep&& prep)
{
    std::vector<GridNode<D>> out;
    const double jac = std::abs(g.M.determinant());
    std::array<std::size_t, 2 * D> idx{};
    while (true) {
        PhaseVec<D> z;
        double w = jac;
        for (int i = 0; i < 2 * D; ++i) {
            z(i) = g.axes[i].nodes[idx[i]];
            w *= g.axes[i].weights[idx[i]];
        }
        const PhaseVec<D> eta = g.mu + g.M * z;
        GridNode<D> nd;
        nd.x = eta.template head<D>();
        nd.v = eta.template tail<D>();
        nd.w = w;
        prep(nd);
        out.push_back(nd);
        int i = 0;
        while (i < 2 * D && ++idx[i] == g.axes[i].size()) idx[i++] = 0;
        if (i == 2 * D) break;
    }
    return out;
}

inline constexpr double kGridNodeCap = 1e9;

// sum over node pairs of w w* g(node, node*); g handles v == v* itself.
template <int D, class Prep, class G>
Estimate tensor_grid_pair(const GridSpec<D>& g1, Prep&& prep, G&& g, double cap = kGridNodeCap)
{
    const auto nodes = grid_nodes<D>(g1, prep);
    const double total = double(nodes.size()) * double(nodes.size());
    if (total > cap) throw InputError("tensor grid exceeds the node cap");
    double s = 0.0;
    for (const auto& a : nodes) {
        double row = 0.0;
        for (const auto& b : nodes) row += b.w * g(a, b);
        s += a.w * row;
    }
    Estimate e = exact_estimate(s, Method::TensorGrid);
    e.n_samples = std::size_t(total);
    return e;
}

// Collision-space grid: node pairs x theta rule x deterministic tangent directions.
// g(frame, node, node*) is the integrand against dsigma deta; the sphere Jacobian
// sin^{d-2} theta is applied here.
template <int D, class Prep, class G>
Estimate tensor_grid_collision(const GridSpec<D>& g1, const AxisRule& theta, Prep&& prep, G&& g,
                               double cap = kGridNodeCap)
{
    const auto nodes = grid_nodes<D>(g1, prep);
    const int np = D == 2 ? 2 : 64;
    const double total = double(nodes.size()) * double(nodes.size()) * double(theta.size()) * np;
    if (total > cap) throw InputError("tensor grid exceeds the node cap");
    double s = 0.0;
    for (const auto& a : nodes) {
        for (const auto& b : nodes) {
            const double r = (a.v - b.v).norm();
            if (!(r > 0.0)) continue;
            const Vec<D> k = (a.v - b.v) / r;
            double inner = 0.0;
            for (const auto& [p, pw] : tangent_directions<D>(k)) {
                for (std::size_t j = 0; j < theta.size(); ++j) {
                    const double t = theta.nodes[j];
                    const auto fr = make_frame_polar<D>(a.x, b.x, a.v, b.v, t, p);
                    const double jac = D == 2 ? 1.0 : std::pow(std::sin(t), D - 2);
                    inner += pw * theta.weights[j] * jac * g(fr, a, b);
                }
            }
            s += a.w * b.w * inner;
        }
    }
    Estimate e = exact_estimate(s, Method::TensorGrid);
    e.n_samples = std::size_t(total);
    return e;
}

} // namespace glab
