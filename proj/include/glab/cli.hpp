#pragma once

// Experiment runner behind the grazing_lab tool. Configs are JSON documents; command
// line flags override config values, and GRAZING_LAB_SEED overrides the config seed.

#include "dsmc.hpp"
#include "grazing.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

namespace glab::cli {

using nlohmann::json;

enum ExitCode { kOk = 0, kValidation = 1, kNumerical = 2 };

// ---------------------------------------------------------------------------
// config document

struct DensitySpec {
    std::string kind = "anisotropic"; // anisotropic | maxwellian | standard | mixture
    double correlation = 0.0;
    double sx = 1.0;
    double temperature = 1.0;
    double shift = 1.5;
};

struct KernelSpec {
    std::string a0_form = "power_law"; // power_law | bracket
    double gamma = 0.0;
    double c_low = 1.0, c_high = 1.0;
    std::string profile = "power_law"; // power_law | tapered
    double nu = 0.5;
    double cutoff = 0.0;
    std::string kappa_form = "constant"; // constant | exp_bracket | power_bracket
    double kappa_c = 1.0;
    double kappa_alpha = 1.0;
    double epsilon = 1.0;
};

struct SweepSpec {
    std::string kind = "dissipation"; // dissipation | weak
    std::vector<double> eps_list{0.4, 0.2, 0.1, 0.05, 0.025};
    std::string test_function = "x1v1";
    int landau_grid = 0; // > 0: 1/2 D_L from the whitened tensor grid with this many v-nodes
};

struct OutputSpec {
    std::string csv, plot, json, trace, snapshot;
};

struct ExperimentConfig {
    int dimension = 2;
    std::uint64_t seed = 1;
    DensitySpec density;
    KernelSpec kernels;
    std::string pair = "cosh";
    std::string custom_psi_star;
    SamplerConfig sampler;
    std::vector<double> functional_eps{1.0};
    SweepSpec sweep;
    SolverConfig solver;
    OutputSpec output;
};

namespace detail {

inline std::string join_path(const std::string& path, const std::string& key)
{
    return path.empty() ? key : path + "." + key;
}

inline void allow_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys)
{
    if (!obj.is_object())
        throw InputError("key '" + (path.empty() ? std::string("<root>") : path) + "' must be an object");
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!ok.count(it.key())) throw InputError("unknown key '" + join_path(path, it.key()) + "'");
}

template <class T> T as(const json& v, const std::string& where)
{
    try {
        if constexpr (std::is_same_v<T, double>) {
            if (!v.is_number()) throw InputError("");
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw InputError("");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw InputError("");
            if constexpr (std::is_unsigned_v<T>)
                if (v.get<long long>() < 0) throw InputError("");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw InputError("");
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
            if (!v.is_array()) throw InputError("");
            for (const auto& e : v)
                if (!e.is_number()) throw InputError("");
        }
        return v.get<T>();
    } catch (const InputError&) {
        const char* kind = std::is_same_v<T, double>        ? "a number"
                           : std::is_same_v<T, bool>        ? "a boolean"
                           : std::is_integral_v<T>          ? "a non-negative integer"
                           : std::is_same_v<T, std::string> ? "a string"
                                                            : "an array of numbers";
        throw InputError("key '" + where + "' must be " + kind);
    }
}

template <class T> void read(const json& obj, const std::string& path, const char* key, T& out)
{
    if (obj.contains(key)) out = as<T>(obj.at(key), join_path(path, key));
}

template <class T> void require(const json& obj, const std::string& path, const char* key, T& out)
{
    if (!obj.contains(key)) throw InputError("missing required key '" + join_path(path, key) + "'");
    out = as<T>(obj.at(key), join_path(path, key));
}

inline std::vector<double> parse_list(const std::string& s, const std::string& what)
{
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw InputError(what + ": cannot parse '" + tok + "' as a number");
        }
    }
    if (out.empty()) throw InputError(what + " is empty");
    return out;
}

} // namespace detail

// Parses a config document. Sections are optional; inside a present section the
// identifying key (density.kind, kernels.a0.gamma, kernels.beta.nu, kernels.kappa.form)
// is required. Unknown keys are rejected with their full path.
inline ExperimentConfig parse_config(const json& j)
{
    using namespace detail;
    ExperimentConfig c;
    allow_keys(j, "", {"dimension", "seed", "density", "kernels", "pair", "custom_psi_star", "sampler",
                       "functionals", "sweep", "solver", "output"});
    read(j, "", "dimension", c.dimension);
    read(j, "", "seed", c.seed);
    read(j, "", "pair", c.pair);
    read(j, "", "custom_psi_star", c.custom_psi_star);
    if (j.contains("density")) {
        const json& d = j.at("density");
        allow_keys(d, "density", {"kind", "correlation", "sx", "temperature", "shift"});
        require(d, "density", "kind", c.density.kind);
        read(d, "density", "correlation", c.density.correlation);
        read(d, "density", "sx", c.density.sx);
        read(d, "density", "temperature", c.density.temperature);
        read(d, "density", "shift", c.density.shift);
    }
    if (j.contains("kernels")) {
        const json& k = j.at("kernels");
        allow_keys(k, "kernels", {"a0", "beta", "kappa", "epsilon"});
        read(k, "kernels", "epsilon", c.kernels.epsilon);
        if (k.contains("a0")) {
            const json& a = k.at("a0");
            allow_keys(a, "kernels.a0", {"form", "gamma", "c_low", "c_high"});
            require(a, "kernels.a0", "gamma", c.kernels.gamma);
            read(a, "kernels.a0", "form", c.kernels.a0_form);
            read(a, "kernels.a0", "c_low", c.kernels.c_low);
            read(a, "kernels.a0", "c_high", c.kernels.c_high);
        }
        if (k.contains("beta")) {
            const json& b = k.at("beta");
            allow_keys(b, "kernels.beta", {"nu", "profile", "cutoff"});
            require(b, "kernels.beta", "nu", c.kernels.nu);
            read(b, "kernels.beta", "profile", c.kernels.profile);
            read(b, "kernels.beta", "cutoff", c.kernels.cutoff);
        }
        if (k.contains("kappa")) {
            const json& q = k.at("kappa");
            allow_keys(q, "kernels.kappa", {"form", "c", "alpha"});
            require(q, "kernels.kappa", "form", c.kernels.kappa_form);
            read(q, "kernels.kappa", "c", c.kernels.kappa_c);
            read(q, "kernels.kappa", "alpha", c.kernels.kappa_alpha);
        }
    }
    if (j.contains("sampler")) {
        const json& s = j.at("sampler");
        allow_keys(s, "sampler", {"samples", "workers", "theta_strategy", "pair_proposal", "overdispersion",
                                  "speed_floor", "unreliable_fraction"});
        read(s, "sampler", "samples", c.sampler.n_samples);
        read(s, "sampler", "workers", c.sampler.workers);
        std::string ts = "theta_sq", pp = "density";
        read(s, "sampler", "theta_strategy", ts);
        read(s, "sampler", "pair_proposal", pp);
        if (ts == "theta_sq") c.sampler.theta_strategy = ThetaStrategy::WeightTimesThetaSq;
        else if (ts == "uniform") c.sampler.theta_strategy = ThetaStrategy::UniformOnSupport;
        else throw InputError("key 'sampler.theta_strategy' must be theta_sq or uniform");
        if (pp == "density") c.sampler.pair_proposal = PairProposal::ProductOfDensity;
        else if (pp == "gaussian") c.sampler.pair_proposal = PairProposal::GaussianOverdispersed;
        else throw InputError("key 'sampler.pair_proposal' must be density or gaussian");
        read(s, "sampler", "overdispersion", c.sampler.overdispersion);
        read(s, "sampler", "speed_floor", c.sampler.speed_floor);
        read(s, "sampler", "unreliable_fraction", c.sampler.unreliable_fraction);
    }
    if (j.contains("functionals")) {
        const json& f = j.at("functionals");
        allow_keys(f, "functionals", {"eps_list"});
        read(f, "functionals", "eps_list", c.functional_eps);
    }
    if (j.contains("sweep")) {
        const json& s = j.at("sweep");
        allow_keys(s, "sweep", {"kind", "eps_list", "test_function", "landau_grid"});
        read(s, "sweep", "kind", c.sweep.kind);
        read(s, "sweep", "eps_list", c.sweep.eps_list);
        read(s, "sweep", "test_function", c.sweep.test_function);
        read(s, "sweep", "landau_grid", c.sweep.landau_grid);
    }
    if (j.contains("solver")) {
        const json& s = j.at("solver");
        allow_keys(s, "solver", {"n", "dt", "horizon", "theta_min", "a0_cap", "trace_every", "knn_k",
                                 "whiten_entropy", "dissipation_samples"});
        read(s, "solver", "n", c.solver.n);
        read(s, "solver", "dt", c.solver.dt);
        read(s, "solver", "horizon", c.solver.horizon);
        read(s, "solver", "theta_min", c.solver.theta_min);
        read(s, "solver", "a0_cap", c.solver.a0_cap);
        read(s, "solver", "trace_every", c.solver.trace_every);
        read(s, "solver", "knn_k", c.solver.knn_k);
        read(s, "solver", "whiten_entropy", c.solver.whiten_entropy);
        read(s, "solver", "dissipation_samples", c.solver.dissipation_samples);
    }
    if (j.contains("output")) {
        const json& o = j.at("output");
        allow_keys(o, "output", {"csv", "plot", "json", "trace", "snapshot"});
        read(o, "output", "csv", c.output.csv);
        read(o, "output", "plot", c.output.plot);
        read(o, "output", "json", c.output.json);
        read(o, "output", "trace", c.output.trace);
        read(o, "output", "snapshot", c.output.snapshot);
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file '" + path + "'");
    json j;
    try {
        j = json::parse(in, nullptr, true, false);
    } catch (const json::parse_error& e) {
        throw InputError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

// The resolved config, embedded in every output header.
inline json to_json(const ExperimentConfig& c)
{
    json j;
    j["dimension"] = c.dimension;
    j["seed"] = c.seed;
    j["density"] = {{"kind", c.density.kind},
                    {"correlation", c.density.correlation},
                    {"sx", c.density.sx},
                    {"temperature", c.density.temperature},
                    {"shift", c.density.shift}};
    j["kernels"] = {
        {"a0", {{"form", c.kernels.a0_form}, {"gamma", c.kernels.gamma}, {"c_low", c.kernels.c_low},
                {"c_high", c.kernels.c_high}}},
        {"beta", {{"nu", c.kernels.nu}, {"profile", c.kernels.profile}, {"cutoff", c.kernels.cutoff}}},
        {"kappa", {{"form", c.kernels.kappa_form}, {"c", c.kernels.kappa_c}, {"alpha", c.kernels.kappa_alpha}}},
        {"epsilon", c.kernels.epsilon}};
    j["pair"] = c.pair;
    if (!c.custom_psi_star.empty()) j["custom_psi_star"] = c.custom_psi_star;
    j["sampler"] = {
        {"samples", c.sampler.n_samples},
        {"workers", c.sampler.workers},
        {"theta_strategy",
         c.sampler.theta_strategy == ThetaStrategy::WeightTimesThetaSq ? "theta_sq" : "uniform"},
        {"pair_proposal", c.sampler.pair_proposal == PairProposal::ProductOfDensity ? "density" : "gaussian"},
        {"overdispersion", c.sampler.overdispersion},
        {"speed_floor", c.sampler.speed_floor},
        {"unreliable_fraction", c.sampler.unreliable_fraction}};
    j["functionals"] = {{"eps_list", c.functional_eps}};
    j["sweep"] = {{"kind", c.sweep.kind},
                  {"eps_list", c.sweep.eps_list},
                  {"test_function", c.sweep.test_function},
                  {"landau_grid", c.sweep.landau_grid}};
    j["solver"] = {{"n", c.solver.n},
                   {"dt", c.solver.dt},
                   {"horizon", c.solver.horizon},
                   {"theta_min", c.solver.theta_min},
                   {"a0_cap", c.solver.a0_cap},
                   {"trace_every", c.solver.trace_every},
                   {"knn_k", c.solver.knn_k},
                   {"whiten_entropy", c.solver.whiten_entropy},
                   {"dissipation_samples", c.solver.dissipation_samples}};
    j["output"] = {{"csv", c.output.csv},
                   {"plot", c.output.plot},
                   {"json", c.output.json},
                   {"trace", c.output.trace},
                   {"snapshot", c.output.snapshot}};
    return j;
}

// ---------------------------------------------------------------------------
// model construction

inline KernelSet build_kernels(const KernelSpec& k, int d)
{
    KineticKernel a0;
    if (k.a0_form == "power_law") a0 = KineticKernel::power_law(k.gamma, d);
    else if (k.a0_form == "bracket") a0 = KineticKernel::bracket_form(k.gamma, k.c_low, k.c_high);
    else throw InputError("kernels.a0.form must be power_law or bracket");
    AngularKernel beta;
    if (k.profile == "power_law") {
        beta = make_power_law_beta(k.nu, d, k.cutoff);
    } else if (k.profile == "tapered") {
        const double nu = k.nu;
        beta = normalize_beta([nu](double t) { return 0.5 * (1.0 + std::cos(t)) * std::pow(t, -1.0 - nu); },
                              nu, d, k.cutoff);
    } else {
        throw InputError("kernels.beta.profile must be power_law or tapered");
    }
    SpatialKernel kappa;
    if (k.kappa_form == "constant") kappa = SpatialKernel::constant(k.kappa_c);
    else if (k.kappa_form == "exp_bracket") kappa = SpatialKernel::exp_bracket(k.kappa_c);
    else if (k.kappa_form == "power_bracket") kappa = SpatialKernel::power_bracket(k.kappa_c, k.kappa_alpha);
    else throw InputError("kernels.kappa.form must be constant, exp_bracket or power_bracket");
    return KernelSet(a0, beta, kappa, k.epsilon);
}

template <int D> DensityModel<D> build_density(const DensitySpec& s)
{
    if (s.kind == "anisotropic") return anisotropic_gaussian<D>(s.correlation);
    if (s.kind == "maxwellian") {
        if (!(s.sx > 0.0 && s.temperature > 0.0))
            throw InputError("density.sx and density.temperature must be > 0");
        return factorised_maxwellian<D>(s.sx, s.temperature);
    }
    if (s.kind == "standard") return standard_gaussian<D>();
    if (s.kind == "mixture") return symmetric_mixture<D>(s.shift);
    throw InputError("density.kind must be anisotropic, maxwellian, standard or mixture");
}

template <int D> TestFunction<D> build_test_function(const std::string& name)
{
    if (name == "x1v1") return position_velocity<D>(0, 0);
    if (name == "v1") return velocity_component<D>(0);
    if (name == "energy") return kinetic_energy<D>();
    if (name == "one") return constant_function<D>();
    if (name == "bump1") return bump_polynomial<D>(1);
    if (name == "bump2") return bump_polynomial<D>(2);
    if (name == "bump3") return bump_polynomial<D>(3);
    throw InputError("sweep.test_function must be one of x1v1, v1, energy, one, bump1, bump2, bump3");
}

// ---------------------------------------------------------------------------
// output helpers

inline std::string num(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string timestamp()
{
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

// CSV sink: stdout when the path is empty. The first line carries the timestamp and is
// the only line that differs between identical runs.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& command, const ExperimentConfig& cfg)
    {
        if (!path.empty()) {
            file_.open(path);
            if (!file_) throw InputError("cannot write '" + path + "'");
        }
        out() << "# generated " << timestamp() << "\n";
        out() << "# command " << command << "\n";
        out() << "# seed " << cfg.seed << "\n";
        out() << "# config " << to_json(cfg).dump() << "\n";
    }
    void row(const std::vector<std::string>& cells)
    {
        for (std::size_t i = 0; i < cells.size(); ++i) out() << (i ? "," : "") << cells[i];
        out() << "\n";
    }
    std::ostream& out() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

private:
    std::ofstream file_;
};

struct PlotSeries {
    std::string label;
    std::vector<double> x, y, err;
};

// Minimal log-log SVG: points with error bars and an optional reference slope line.
inline bool write_loglog_svg(const std::string& path, const std::string& title, const std::string& xlabel,
                             const std::string& ylabel, const std::vector<PlotSeries>& series,
                             double ref_slope = 0.0)
{
    double x0 = kInf, x1 = -kInf, y0 = kInf, y1 = -kInf;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!(s.x[i] > 0.0 && s.y[i] > 0.0)) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            const double e = i < s.err.size() ? s.err[i] : 0.0;
            y0 = std::min(y0, std::max(s.y[i] - e, 0.3 * s.y[i]));
            y1 = std::max(y1, s.y[i] + e);
        }
    if (!(x1 >= x0 && y1 >= y0)) return false;
    const double lx0 = std::log10(x0) - 0.1, lx1 = std::log10(x1) + 0.1;
    const double ly0 = std::log10(y0) - 0.2, ly1 = std::log10(y1) + 0.2;
    const double W = 640, H = 440, L = 80, R = 30, T = 40, B = 60;
    auto px = [&](double x) { return L + (std::log10(x) - lx0) / (lx1 - lx0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (std::log10(std::max(y, 1e-300)) - ly0) / (ly1 - ly0) * (H - T - B); };
    std::ofstream o(path);
    if (!o) return false;
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int e = int(std::ceil(lx0)); e <= int(std::floor(lx1)); ++e) {
        const double X = px(std::pow(10.0, e));
        o << "<line x1=\"" << X << "\" y1=\"" << H - B << "\" x2=\"" << X << "\" y2=\"" << H - B + 5
          << "\" stroke=\"black\"/><text x=\"" << X << "\" y=\"" << H - B + 18
          << "\" text-anchor=\"middle\">1e" << e << "</text>\n";
    }
    for (int e = int(std::ceil(ly0)); e <= int(std::floor(ly1)); ++e) {
        const double Y = py(std::pow(10.0, e));
        o << "<line x1=\"" << L - 5 << "\" y1=\"" << Y << "\" x2=\"" << L << "\" y2=\"" << Y
          << "\" stroke=\"black\"/><text x=\"" << L - 8 << "\" y=\"" << Y + 4
          << "\" text-anchor=\"end\">1e" << e << "</text>\n";
    }
    o << "<text x=\"" << W / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
    o << "<text x=\"18\" y=\"" << H / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << H / 2
      << ")\">" << ylabel << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* col = colors[k % 4];
        std::string poly;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!(s.x[i] > 0.0 && s.y[i] > 0.0)) continue;
            const double X = px(s.x[i]), Y = py(s.y[i]);
            poly += num(X) + "," + num(Y) + " ";
            o << "<circle cx=\"" << X << "\" cy=\"" << Y << "\" r=\"3.5\" fill=\"" << col << "\"/>\n";
            if (i < s.err.size() && s.err[i] > 0.0) {
                const double lo = std::max(s.y[i] - s.err[i], std::pow(10.0, ly0));
                o << "<line x1=\"" << X << "\" y1=\"" << py(lo) << "\" x2=\"" << X << "\" y2=\""
                  << py(s.y[i] + s.err[i]) << "\" stroke=\"" << col << "\"/>\n";
            }
        }
        o << "<polyline points=\"" << poly << "\" fill=\"none\" stroke=\"" << col << "\"/>\n";
        o << "<text x=\"" << L + 10 << "\" y=\"" << T + 18 + 16 * k << "\" fill=\"" << col << "\">" << s.label
          << "</text>\n";
    }
    if (ref_slope != 0.0 && !series.empty() && !series[0].x.empty()) {
        const auto& s = series[0];
        const double xa = s.x.front(), ya = s.y.front();
        const double xb = s.x.back(), yb = ya * std::pow(xb / xa, ref_slope);
        if (ya > 0 && yb > 0)
            o << "<line x1=\"" << px(xa) << "\" y1=\"" << py(ya) << "\" x2=\"" << px(xb) << "\" y2=\"" << py(yb)
              << "\" stroke=\"gray\" stroke-dasharray=\"5,4\"/>\n<text x=\"" << W - R - 10 << "\" y=\""
              << H - B - 10 << "\" text-anchor=\"end\" fill=\"gray\">fitted slope " << num(ref_slope)
              << "</text>\n";
    }
    o << "</svg>\n";
    return bool(o);
}

// ---------------------------------------------------------------------------
// subcommands

template <int D> int run_functionals(const ExperimentConfig& cfg, const std::string& command)
{
    const KernelSet base = build_kernels(cfg.kernels, D);
    const DensityModel<D> f = build_density<D>(cfg.density);
    const DualPair pair = make_pair_by_name(cfg.pair, cfg.custom_psi_star);
    SamplerConfig sc = cfg.sampler;
    sc.seed = cfg.seed;
    CsvWriter csv(cfg.output.csv, command, cfg);
    csv.row({"functional", "epsilon", "pair", "density", "seed", "value", "value_stderr", "n_samples",
             "rejected_fraction", "method"});
    bool unreliable = false;
    auto emit = [&](const char* name, double eps, const Estimate& e) {
        unreliable = unreliable || e.unreliable;
        csv.row({name, num(eps), pair.name, f.name(), std::to_string(cfg.seed), num(e.value), num(e.std_error),
                 std::to_string(e.n_samples), num(e.rejected_fraction()), method_name(e.method)});
    };
    std::vector<double> eps = cfg.functional_eps;
    if (eps.empty()) throw InputError("functionals.eps_list is empty");
    for (double e : eps) {
        const KernelSet ks = base.with_epsilon(e);
        const auto est = boltzmann_functionals<D>(f, ks, pair, sc);
        emit("D_B", e, est[0]);
        emit("D_psi_star", e, est[1]);
        emit("D_cosh", e, est[2]);
        emit("R_optimal", e, est[3]);
    }
    // Landau side: epsilon column 0 marks the grazing limit
    const Estimate dl = dissipation_landau<D>(f, base, sc);
    emit("D_L", 0.0, dl);
    const Estimate al = action_landau<D>(f, landau_optimal_flux<D>(f, base), base, sc);
    emit("A_L_optimal", 0.0, al);
    if (cfg.sweep.landau_grid > 0) {
        const Estimate g = oracle_dissipation_landau<D>(f, base, whitened_grid<D>(f, 4, cfg.sweep.landau_grid));
        emit("D_L", 0.0, g);
    }
    return unreliable ? kNumerical : kOk;
}

template <int D> int run_sweep(const ExperimentConfig& cfg, const std::string& command)
{
    const KernelSet base = build_kernels(cfg.kernels, D);
    const DensityModel<D> f = build_density<D>(cfg.density);
    SamplerConfig sc = cfg.sampler;
    sc.seed = cfg.seed;
    SweepResult r;
    std::string pair_name = "-";
    if (cfg.sweep.kind == "dissipation") {
        const DualPair pair = make_pair_by_name(cfg.pair, cfg.custom_psi_star);
        pair_name = pair.name;
        Estimate target{};
        if (cfg.sweep.landau_grid > 0) {
            target = oracle_dissipation_landau<D>(f, base, whitened_grid<D>(f, 4, cfg.sweep.landau_grid));
            target.value *= 0.5;
            target.std_error *= 0.5;
            target.n_samples = std::max<std::size_t>(target.n_samples, 1);
        }
        r = sweep_dissipation<D>(f, pair, base, cfg.sweep.eps_list, sc, target);
    } else if (cfg.sweep.kind == "weak") {
        r = sweep_weak_operator<D>(f, build_test_function<D>(cfg.sweep.test_function), base, cfg.sweep.eps_list, sc);
    } else {
        throw InputError("sweep.kind must be dissipation or weak");
    }
    CsvWriter csv(cfg.output.csv, command, cfg);
    csv.row({"epsilon", "value", "value_stderr", "pair_value", "pair_value_stderr", "target", "target_stderr",
             "gap", "gap_stderr", "rate"});
    bool unreliable = r.landau_target.unreliable;
    for (std::size_t i = 0; i < r.epsilons.size(); ++i) {
        const Estimate& v = r.values[i];
        const Estimate pv = i < r.pair_values.size() ? r.pair_values[i] : Estimate{};
        unreliable = unreliable || v.unreliable;
        csv.row({num(r.epsilons[i]), num(v.value), num(v.std_error),
                 i < r.pair_values.size() ? num(pv.value) : "nan",
                 i < r.pair_values.size() ? num(pv.std_error) : "nan", num(r.landau_target.value),
                 num(r.landau_target.std_error), num(r.gaps[i]), num(r.gap_stderr[i]), num(r.fitted_rate)});
    }
    if (!r.note.empty()) std::cerr << "note: " << r.note << "\n";
    std::string plot = cfg.output.plot;
    if (plot.empty() && !cfg.output.csv.empty()) plot = cfg.output.csv + ".svg";
    if (!plot.empty()) {
        const std::string title = cfg.sweep.kind == "dissipation"
                                      ? "|D_cosh(eps) - D_L/2| (" + pair_name + ")"
                                      : "|<Q_B(eps), phi> - <Q_L, phi>| (" + cfg.sweep.test_function + ")";
        if (!write_loglog_svg(plot, title, "epsilon", "gap", {{"gap", r.epsilons, r.gaps, r.gap_stderr}},
                              r.fitted_rate))
            std::cerr << "warning: could not write plot '" << plot << "'\n";
    }
    return unreliable ? kNumerical : kOk;
}

template <int D> int run_simulate(const ExperimentConfig& cfg, const std::string& command)
{
    const KernelSet ks = build_kernels(cfg.kernels, D);
    const DensityModel<D> f0 = build_density<D>(cfg.density);
    SolverConfig sc = cfg.solver;
    sc.seed = cfg.seed;
    Simulator<D> sim(sc, ks);
    const RunResult<D> res = sim.run(f0);
    CsvWriter csv(cfg.output.trace, command, cfg);
    std::vector<std::string> head{"t", "mass"};
    for (int a = 0; a < D; ++a) head.push_back("momentum_" + std::to_string(a + 1));
    for (const char* h : {"energy", "entropy", "entropy_stderr", "collisions", "moment", "dissipation",
                          "dissipation_stderr"})
        head.push_back(h);
    csv.row(head);
    for (const auto& r : res.trace) {
        std::vector<std::string> row{num(r.t), num(r.mass)};
        for (int a = 0; a < D; ++a) row.push_back(num(r.momentum(a)));
        for (double v : {r.energy, r.entropy, r.entropy_err}) row.push_back(num(v));
        row.push_back(std::to_string(r.collisions));
        for (double v : {r.moment, r.dissipation, r.dissipation_err}) row.push_back(num(v));
        csv.row(row);
    }
    if (!cfg.output.snapshot.empty()) {
        std::ofstream o(cfg.output.snapshot);
        if (!o) throw InputError("cannot write '" + cfg.output.snapshot + "'");
        for (int a = 0; a < D; ++a) o << (a ? "," : "") << "x" << a + 1;
        for (int a = 0; a < D; ++a) o << ",v" << a + 1;
        o << "\n";
        const auto& e = res.final_state;
        for (std::size_t i = 0; i < e.size(); ++i) {
            for (int a = 0; a < D; ++a) o << (a ? "," : "") << num(e.x[i](a));
            for (int a = 0; a < D; ++a) o << "," << num(e.v[i](a));
            o << "\n";
        }
    }
    std::ostream& log = cfg.output.trace.empty() ? std::cerr : std::cout;
    log << "steps " << res.steps << ", theta_min " << num(res.theta_min) << ", neglected fraction "
        << num(res.neglected_fraction) << ", majorant doublings " << res.majorant_doublings
        << ", cap exceedances " << res.cap_exceedances << ", max drift (momentum, energy) "
        << num(res.max_momentum_drift) << ", " << num(res.max_energy_drift) << "\n";
    const bool ok = res.max_momentum_drift < 1e-10 && res.max_energy_drift < 1e-10;
    if (!ok) std::cerr << "error: conservation drift above 1e-10 per step\n";
    return ok ? kOk : kNumerical;
}

inline json pair_report_json(const PairReport& rep)
{
    json j;
    j["pair"] = rep.pair;
    j["passed"] = rep.passed();
    j["checks"] = json::array();
    for (const auto& c : rep.checks)
        j["checks"].push_back({{"name", c.name},
                               {"passed", c.passed},
                               {"required", c.required},
                               {"worst", std::isfinite(c.worst) ? json(c.worst) : json(num(c.worst))},
                               {"tolerance", c.tolerance},
                               {"note", c.note}});
    return j;
}

inline int run_check_pairs(const ExperimentConfig& cfg, const std::string& which)
{
    std::vector<std::string> names;
    // all = the admissible built-ins; registry pairs such as quartic are checked by name
    if (which == "all") names = {"quadratic", "cosh", "cosh_numeric"};
    else names = {which};
    json out = json::array();
    bool all = true;
    for (const auto& n : names) {
        const DualPair p = make_pair_by_name(n, cfg.custom_psi_star);
        const PairReport rep = check_pair(p, cfg.seed);
        all = all && rep.passed();
        std::cout << "pair " << rep.pair << ": " << (rep.passed() ? "PASS" : "FAIL") << "\n";
        for (const auto& c : rep.checks) {
            char buf[256];
            std::snprintf(buf, sizeof buf, "  %-34s %-4s worst %-12.4g tol %-10.3g%s%s\n", c.name.c_str(),
                          c.passed ? "ok" : (c.required ? "FAIL" : "info"), c.worst, c.tolerance,
                          c.note.empty() ? "" : " ", c.note.c_str());
            std::cout << buf;
        }
        out.push_back(pair_report_json(rep));
    }
    if (!cfg.output.json.empty()) {
        std::ofstream o(cfg.output.json);
        if (!o) throw InputError("cannot write '" + cfg.output.json + "'");
        o << json{{"seed", cfg.seed}, {"reports", out}}.dump(2) << "\n";
    }
    return all ? kOk : kValidation;
}

inline int run_check_geometry(const ExperimentConfig& cfg, std::size_t frames)
{
    bool ok = true;
    auto show = [&](const GeometryReport& r) {
        const bool p = r.passed();
        ok = ok && p;
        std::printf("d=%d frames=%zu momentum %.3g energy %.3g |sigma-k|-2theta %.3g "
                    "|sigma-k|^2-theta^2 %.3g second-moment z %.3g abs %.3g : %s\n",
                    r.dim, r.frames, r.momentum_err, r.energy_err, r.size_violation, r.size_sq_violation,
                    r.second_moment_z, r.second_moment_abs, p ? "PASS" : "FAIL");
    };
    show(check_geometry<2>(frames, frames, cfg.seed));
    show(check_geometry<3>(frames, frames, cfg.seed));
    for (int d : {2, 3})
        for (double eps : {1.0, 0.5, 0.1, 0.02}) {
            KernelSpec k = cfg.kernels;
            k.epsilon = eps;
            const KernelSet ks = build_kernels(k, d);
            const double rel = std::abs(ks.angular_momentum() / angular_momentum_constant(d) - 1.0);
            const bool p = rel < 1e-6;
            ok = ok && p;
            std::printf("d=%d eps=%g angular momentum relative error %.3g : %s\n", d, eps, rel, p ? "PASS" : "FAIL");
        }
    return ok ? kOk : kNumerical;
}

// ---------------------------------------------------------------------------
// entry point

inline int run_command(int argc, const char* const* argv)
{
    CLI::App app{"grazing_lab: entropy-dissipation functionals, grazing limits and particle simulation"};
    app.require_subcommand(1);
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    app.add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "random seed (overrides config and GRAZING_LAB_SEED)");
    app.add_option("--workers", workers, "Monte Carlo worker threads");

    // shared model flags
    std::optional<int> dim;
    std::optional<double> gamma, nu, eps;
    std::optional<std::string> pair, density, out, plot;
    std::optional<std::size_t> samples;
    auto model_flags = [&](CLI::App* s) {
        s->add_option("--dimension", dim, "velocity dimension (2 or 3)");
        s->add_option("--gamma", gamma, "kinetic kernel exponent");
        s->add_option("--nu", nu, "angular singularity exponent");
        s->add_option("--density", density, "anisotropic | maxwellian | standard | mixture");
    };

    CLI::App* fn = app.add_subcommand("functionals", "dissipations and actions at fixed epsilon values");
    model_flags(fn);
    std::optional<std::string> fn_eps;
    std::optional<int> landau_grid;
    fn->add_option("--pair", pair, "quadratic | cosh | quartic | cosh_numeric | custom");
    fn->add_option("--eps-list", fn_eps, "comma-separated epsilon values");
    fn->add_option("--samples", samples, "Monte Carlo samples per estimate");
    fn->add_option("--landau-grid", landau_grid, "also evaluate D_L on a tensor grid with this many v-nodes");
    fn->add_option("--out", out, "CSV path (default stdout)");

    CLI::App* sw = app.add_subcommand("grazing-sweep", "epsilon sweep against the Landau limit");
    model_flags(sw);
    std::optional<std::string> sw_eps, kind, test_fn;
    sw->add_option("--pair", pair, "dual pair for D_psi*");
    sw->add_option("--eps-list", sw_eps, "comma-separated, strictly decreasing epsilon values");
    sw->add_option("--samples", samples, "Monte Carlo samples per epsilon");
    sw->add_option("--kind", kind, "dissipation | weak");
    sw->add_option("--test-function", test_fn, "weak sweep test function (x1v1, v1, energy, bump1..3)");
    sw->add_option("--landau-grid", landau_grid, "Landau target from a tensor grid with this many v-nodes");
    sw->add_option("--out", out, "CSV path (default stdout)");
    sw->add_option("--plot", plot, "SVG path (default <out>.svg)");

    CLI::App* sim = app.add_subcommand("simulate", "particle simulation with trace output");
    model_flags(sim);
    std::optional<std::size_t> n, trace_every, dissipation_samples;
    std::optional<double> dt, horizon, theta_min;
    std::optional<std::string> kappa, trace_out, snapshot_out;
    sim->add_option("--n", n, "particle count");
    sim->add_option("--dt", dt, "time step");
    sim->add_option("--horizon", horizon, "final time");
    sim->add_option("--theta-min", theta_min, "angular cutoff (default: neglected theta^2-mass below 1e-3)");
    sim->add_option("--eps", eps, "grazing parameter epsilon");
    sim->add_option("--kappa", kappa, "spatial kernel: number c (constant) or FORM[:c[:alpha]]");
    sim->add_option("--trace-every", trace_every, "steps between trace rows (0: about 32 snapshots)");
    sim->add_option("--dissipation-samples", dissipation_samples, "samples for the refit D_B per trace row");
    sim->add_option("--trace-out", trace_out, "trace CSV path (default stdout)");
    sim->add_option("--snapshot-out", snapshot_out, "final particle CSV path");

    CLI::App* cp = app.add_subcommand("check-pairs", "verify the dual-pair conditions");
    std::optional<std::string> which_pair;
    std::optional<std::string> json_out;
    cp->add_option("--pair", which_pair, "pair name or 'all' (default: the config pair, else all)");
    cp->add_option("--json-out", json_out, "JSON report path");

    CLI::App* cg = app.add_subcommand("check-geometry", "randomised checks of the collision geometry");
    std::size_t frames = 100000;
    cg->add_option("--frames", frames, "random frames per dimension");
    cg->add_option("--nu", nu, "angular singularity exponent for the normalisation check");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    std::string command;
    for (int i = 0; i < argc; ++i) command += (i ? " " : "") + std::string(argv[i]);

    try {
        ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
        if (const char* env = std::getenv("GRAZING_LAB_SEED")) {
            try {
                std::size_t used = 0;
                const std::string s(env);
                cfg.seed = std::stoull(s, &used);
                if (used != s.size()) throw std::invalid_argument(s);
            } catch (const std::exception&) {
                throw InputError("GRAZING_LAB_SEED must be a non-negative integer");
            }
        }
        if (seed) cfg.seed = *seed;
        if (workers) cfg.sampler.workers = *workers;
        if (dim) cfg.dimension = *dim;
        if (gamma) cfg.kernels.gamma = *gamma;
        if (nu) cfg.kernels.nu = *nu;
        if (density) cfg.density.kind = *density;
        if (pair) cfg.pair = *pair;
        if (samples) cfg.sampler.n_samples = *samples;
        if (landau_grid) cfg.sweep.landau_grid = *landau_grid;
        if (out) cfg.output.csv = *out;
        if (plot) cfg.output.plot = *plot;
        if (fn_eps) cfg.functional_eps = detail::parse_list(*fn_eps, "--eps-list");
        if (sw_eps) cfg.sweep.eps_list = detail::parse_list(*sw_eps, "--eps-list");
        if (kind) cfg.sweep.kind = *kind;
        if (test_fn) cfg.sweep.test_function = *test_fn;
        if (n) cfg.solver.n = *n;
        if (dt) cfg.solver.dt = *dt;
        if (horizon) cfg.solver.horizon = *horizon;
        if (theta_min) cfg.solver.theta_min = *theta_min;
        if (eps) cfg.kernels.epsilon = *eps;
        if (trace_every) cfg.solver.trace_every = *trace_every;
        if (dissipation_samples) cfg.solver.dissipation_samples = *dissipation_samples;
        if (trace_out) cfg.output.trace = *trace_out;
        if (snapshot_out) cfg.output.snapshot = *snapshot_out;
        if (json_out) cfg.output.json = *json_out;
        if (kappa) {
            const auto parts = [&] {
                std::vector<std::string> v;
                std::stringstream ss(*kappa);
                std::string t;
                while (std::getline(ss, t, ':')) v.push_back(t);
                return v;
            }();
            const bool numeric = !parts.empty() && (std::isdigit(static_cast<unsigned char>(parts[0][0])) ||
                                                    parts[0][0] == '.');
            if (numeric) {
                cfg.kernels.kappa_form = "constant";
                cfg.kernels.kappa_c = detail::parse_list(parts[0], "--kappa")[0];
            } else {
                if (parts.empty() || parts.size() > 3) throw InputError("--kappa expects FORM[:c[:alpha]]");
                cfg.kernels.kappa_form = parts[0];
                if (parts.size() > 1) cfg.kernels.kappa_c = detail::parse_list(parts[1], "--kappa")[0];
                if (parts.size() > 2) cfg.kernels.kappa_alpha = detail::parse_list(parts[2], "--kappa")[0];
            }
        }
        if (cfg.dimension != 2 && cfg.dimension != 3) throw InputError("dimension must be 2 or 3");
        if (cfg.sampler.workers < 1) throw InputError("workers must be >= 1");

        const bool d2 = cfg.dimension == 2;
        if (fn->parsed()) return d2 ? run_functionals<2>(cfg, command) : run_functionals<3>(cfg, command);
        if (sw->parsed()) return d2 ? run_sweep<2>(cfg, command) : run_sweep<3>(cfg, command);
        if (sim->parsed()) return d2 ? run_simulate<2>(cfg, command) : run_simulate<3>(cfg, command);
        if (cp->parsed())
            return run_check_pairs(cfg, which_pair ? *which_pair : config_path.empty() ? "all" : cfg.pair);
        if (cg->parsed()) return run_check_geometry(cfg, frames);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const DegenerateFrame& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    }
    return kValidation;
}

} // namespace glab::cli
