#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "donsker/error_structure.hpp"
#include "donsker/functionals.hpp"
#include "donsker/montecarlo.hpp"
#include "donsker/walk.hpp"
#include "donsker/wiener.hpp"

namespace donsker::experiments {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class ExperimentKind {
    prop1,
    thm1,
    thm2,
    application,
    prop2,
    prop3,
    thm3,
    diagnostics,
    selftest,
};

inline const std::vector<std::pair<std::string, ExperimentKind>>& experiment_names() {
    static const std::vector<std::pair<std::string, ExperimentKind>> names = {
        {"prop1", ExperimentKind::prop1},
        {"thm1", ExperimentKind::thm1},
        {"thm2", ExperimentKind::thm2},
        {"application", ExperimentKind::application},
        {"prop2", ExperimentKind::prop2},
        {"prop3", ExperimentKind::prop3},
        {"thm3", ExperimentKind::thm3},
        {"diagnostics", ExperimentKind::diagnostics},
        {"selftest", ExperimentKind::selftest},
    };
    return names;
}

inline ExperimentKind experiment_from_string(const std::string& s) {
    for (const auto& [name, kind] : experiment_names())
        if (name == s) return kind;
    throw std::invalid_argument("unknown experiment '" + s + "'");
}

inline std::string experiment_to_string(ExperimentKind kind) {
    for (const auto& [name, k] : experiment_names())
        if (k == kind) return name;
    return "unknown";
}

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::selftest;
    std::string structure = "ou_gauss";
    double kappa = 0.5;                 // weighted_uniform parameter
    std::string functional;             // empty: per-experiment default
    std::string y_name;                 // prop3 / thm3 built-in Y
    std::string z_name;                 // thm3 built-in Z
    std::string psi_name;               // thm3 cylindrical psi
    std::vector<std::size_t> n_list;    // empty: per-experiment default
    std::uint64_t samples = 20000;
    std::size_t m = 10000;              // Brownian grid resolution
    std::uint64_t seed = 20250808;
    unsigned workers = 1;               // 0: hardware concurrency
    std::string out;                    // empty: stdout
    std::string format = "csv";         // csv | json
    std::string fixtures_path;          // empty: compiled-in default
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) parts.push_back(trim(item));
    return parts;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const std::uint64_t v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw std::invalid_argument("config key '" + key + "': expected integer, got '" + value + "'");
    }
}

inline double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw std::invalid_argument("config key '" + key + "': expected number, got '" + value + "'");
    }
}

}  // namespace detail

// Flat key = value text, '#' comments. Shared by the experiment config and the
// oracle fixtures file.
inline std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file '" + path + "'");
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string text = detail::trim(line);
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected 'key = value'");
        kv[detail::trim(text.substr(0, eq))] = detail::trim(text.substr(eq + 1));
    }
    return kv;
}

inline void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                               const std::string& value) {
    if (key == "experiment") {
        cfg.experiment = experiment_from_string(value);
    } else if (key == "structure") {
        cfg.structure = value;
    } else if (key == "kappa") {
        cfg.kappa = detail::parse_double(key, value);
    } else if (key == "functional") {
        cfg.functional = value;
    } else if (key == "y") {
        cfg.y_name = value;
    } else if (key == "z") {
        cfg.z_name = value;
    } else if (key == "psi") {
        cfg.psi_name = value;
    } else if (key == "n_list" || key == "n") {
        cfg.n_list.clear();
        for (const std::string& part : detail::split(value, ','))
            cfg.n_list.push_back(static_cast<std::size_t>(detail::parse_u64(key, part)));
    } else if (key == "samples") {
        cfg.samples = detail::parse_u64(key, value);
    } else if (key == "m") {
        cfg.m = static_cast<std::size_t>(detail::parse_u64(key, value));
    } else if (key == "seed") {
        cfg.seed = detail::parse_u64(key, value);
    } else if (key == "workers") {
        cfg.workers = static_cast<unsigned>(detail::parse_u64(key, value));
    } else if (key == "out") {
        cfg.out = value;
    } else if (key == "format") {
        if (value != "csv" && value != "json")
            throw std::invalid_argument("config key 'format': expected csv or json");
        cfg.format = value;
    } else if (key == "fixtures") {
        cfg.fixtures_path = value;
    } else {
        throw std::invalid_argument("unknown config key '" + key + "'");
    }
}

inline ExperimentConfig load_config(const std::string& path) {
    ExperimentConfig cfg;
    for (const auto& [key, value] : parse_kv_file(path)) apply_config_entry(cfg, key, value);
    return cfg;
}

// ---------------------------------------------------------------------------
// Oracle fixtures
// ---------------------------------------------------------------------------

struct FixtureEntry {
    double value = 0.0;
    double std_error = 0.0;
};

// Pre-registered Brownian oracle constants (fine grid, fixed seed) consumed as
// reference limits. Regenerate with the CLI 'oracle' subcommand.
struct Fixtures {
    std::uint64_t seed = 0;
    std::uint64_t m = 0;
    std::uint64_t paths = 0;
    std::map<std::string, FixtureEntry> entries;

    const FixtureEntry& at(const std::string& name) const {
        const auto it = entries.find(name);
        if (it == entries.end())
            throw std::runtime_error("fixtures: missing constant '" + name + "'");
        return it->second;
    }
};

inline Fixtures load_fixtures(const std::string& path) {
    Fixtures fx;
    std::map<std::string, std::string> kv;
    try {
        kv = parse_kv_file(path);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string(e.what()) +
                                 " (generate the Brownian oracle fixtures with "
                                 "'donsker oracle --out <path>')");
    }
    for (const auto& [key, value] : kv) {
        if (key == "seed") {
            fx.seed = detail::parse_u64(key, value);
        } else if (key == "m") {
            fx.m = detail::parse_u64(key, value);
        } else if (key == "paths") {
            fx.paths = detail::parse_u64(key, value);
        } else {
            const auto dot = key.find('.');
            if (dot == std::string::npos)
                throw std::runtime_error("fixtures: unexpected key '" + key + "'");
            const std::string name = key.substr(0, dot);
            const std::string field = key.substr(dot + 1);
            if (field == "value")
                fx.entries[name].value = detail::parse_double(key, value);
            else if (field == "stderr")
                fx.entries[name].std_error = detail::parse_double(key, value);
            else
                throw std::runtime_error("fixtures: unexpected key '" + key + "'");
        }
    }
    return fx;
}

namespace detail {
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace detail

inline void write_fixtures(const Fixtures& fx, std::ostream& out) {
    out << "# Brownian oracle constants (grid argmax functionals, fine grid)\n";
    out << "seed = " << fx.seed << "\n";
    out << "m = " << fx.m << "\n";
    out << "paths = " << fx.paths << "\n";
    for (const auto& [name, entry] : fx.entries) {
        out << name << ".value = " << detail::fmt_double(entry.value) << "\n";
        out << name << ".stderr = " << detail::fmt_double(entry.std_error) << "\n";
    }
}

// One pass over fine-grid Brownian paths producing every oracle constant.
inline Fixtures run_oracle(std::uint64_t seed, std::uint64_t m, std::uint64_t paths,
                           unsigned workers = 1) {
    auto sampler = [m](Stream& stream, std::span<double> out) {
        const BrownianGrid b = sample_brownian(1.0, 1.0, static_cast<std::size_t>(m), stream);
        const PathStatistics st = b.view().statistics();
        const double sgn = (st.sup_value >= 0.0) ? 1.0 : -1.0;
        out[0] = st.argmax_t;                                    // Sigma
        out[1] = st.argmax_abs_t;                                // tau
        out[2] = std::min(st.argmax_t, st.argmax_abs_t);         // tau ^ Sigma
        out[3] = sgn * std::min(st.argmax_t, st.argmax_abs_t);   // signed cross term
        out[4] = st.max * st.max;
        out[5] = st.sup_norm * st.sup_norm;
    };
    const auto reports = estimate_many(sampler, 6, paths, {seed, 0}, workers);
    Fixtures fx;
    fx.seed = seed;
    fx.m = m;
    fx.paths = paths;
    const char* names[6] = {"e_sigma", "e_tau", "e_tau_min_sigma",
                            "e_signed_cross", "e_max_sq", "e_absmax_sq"};
    for (int i = 0; i < 6; ++i)
        fx.entries[names[i]] = FixtureEntry{reports[i].mean, reports[i].std_error};
    return fx;
}

// ---------------------------------------------------------------------------
// Result rows and writers
// ---------------------------------------------------------------------------

struct ResultRow {
    std::string experiment;
    std::uint64_t n = 0;
    std::string quantity;
    double estimate = 0.0;
    double std_error = 0.0;
    double limit = 0.0;
    double limit_std_error = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t samples = 0;
};

inline std::string to_csv(const std::vector<ResultRow>& rows) {
    std::string out = "experiment,n,quantity,estimate,stderr,limit,limit_stderr,seed,samples\n";
    for (const ResultRow& r : rows) {
        out += r.experiment;
        out += ',';
        out += std::to_string(r.n);
        out += ',';
        out += r.quantity;
        out += ',';
        out += detail::fmt_double(r.estimate);
        out += ',';
        out += detail::fmt_double(r.std_error);
        out += ',';
        out += detail::fmt_double(r.limit);
        out += ',';
        out += detail::fmt_double(r.limit_std_error);
        out += ',';
        out += std::to_string(r.seed);
        out += ',';
        out += std::to_string(r.samples);
        out += '\n';
    }
    return out;
}

inline std::string to_json(const std::vector<ResultRow>& rows) {
    std::string out = "[\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const ResultRow& r = rows[i];
        out += "  {\"experiment\": \"" + r.experiment + "\", \"n\": " + std::to_string(r.n) +
               ", \"quantity\": \"" + r.quantity + "\", \"estimate\": " +
               detail::fmt_double(r.estimate) + ", \"stderr\": " + detail::fmt_double(r.std_error) +
               ", \"limit\": " + detail::fmt_double(r.limit) + ", \"limit_stderr\": " +
               detail::fmt_double(r.limit_std_error) + ", \"seed\": " + std::to_string(r.seed) +
               ", \"samples\": " + std::to_string(r.samples) + "}";
        out += (i + 1 < rows.size()) ? ",\n" : "\n";
    }
    out += "]\n";
    return out;
}

// ---------------------------------------------------------------------------
// Built-in registries
// ---------------------------------------------------------------------------

inline ErrorStructure1D structure_by_name(const ExperimentConfig& cfg) {
    if (cfg.structure == "ou_gauss") return ou_gauss();
    if (cfg.structure == "weighted_uniform") return weighted_uniform(cfg.kappa);
    throw std::invalid_argument("unknown structure '" + cfg.structure +
                                "' (expected ou_gauss or weighted_uniform)");
}

namespace detail {

struct ParsedName {
    std::string base;
    std::vector<std::string> args;
};

inline ParsedName parse_name(const std::string& name) {
    const auto open = name.find('(');
    if (open == std::string::npos) return {trim(name), {}};
    if (name.back() != ')')
        throw std::invalid_argument("malformed functional name '" + name + "'");
    ParsedName p;
    p.base = trim(name.substr(0, open));
    p.args = split(name.substr(open + 1, name.size() - open - 2), ',');
    return p;
}

inline double arg_num(const ParsedName& p, std::size_t i, double fallback) {
    if (i >= p.args.size()) return fallback;
    return parse_double(p.base, p.args[i]);
}

}  // namespace detail

// Cylindrical built-ins: coordinate(t), sin1, cos1, sum2(s,t).
inline CylindricalFunctional cylindrical_by_name(const std::string& name) {
    const detail::ParsedName p = detail::parse_name(name);
    if (p.base == "coordinate") {
        const double t = detail::arg_num(p, 0, 1.0);
        return CylindricalFunctional{
            {t},
            [](std::span<const double> x) { return x[0]; },
            [](std::span<const double>) { return std::vector<double>{1.0}; },
        };
    }
    if (p.base == "sin1") {
        return CylindricalFunctional{
            {1.0},
            [](std::span<const double> x) { return std::sin(x[0]); },
            [](std::span<const double> x) { return std::vector<double>{std::cos(x[0])}; },
        };
    }
    if (p.base == "cos1") {
        return CylindricalFunctional{
            {1.0},
            [](std::span<const double> x) { return std::cos(x[0]); },
            [](std::span<const double> x) { return std::vector<double>{-std::sin(x[0])}; },
        };
    }
    if (p.base == "sum2") {
        const double s = detail::arg_num(p, 0, 0.25);
        const double t = detail::arg_num(p, 1, 0.75);
        return CylindricalFunctional{
            {s, t},
            [](std::span<const double> x) { return x[0] + x[1]; },
            [](std::span<const double>) { return std::vector<double>{1.0, 1.0}; },
        };
    }
    throw std::invalid_argument("unknown cylindrical functional '" + name + "'");
}

struct Prop2Map {
    std::string name;
    std::function<double(double, double)> f;
    std::function<std::pair<double, double>(double, double)> grad;
};

inline Prop2Map prop2_map_by_name(const std::string& name) {
    if (name == "first")
        return {"first", [](double a, double) { return a; },
                [](double, double) { return std::pair{1.0, 0.0}; }};
    if (name == "second")
        return {"second", [](double, double b) { return b; },
                [](double, double) { return std::pair{0.0, 1.0}; }};
    if (name == "sum")
        return {"sum", [](double a, double b) { return a + b; },
                [](double, double) { return std::pair{1.0, 1.0}; }};
    throw std::invalid_argument("unknown prop2 map '" + name + "' (expected first, second, sum)");
}

// Path functionals selectable by name: coordinate(t), cylindrical(<cyl>), max,
// supnorm, prop2(<map>).
inline PathFunctional path_functional_by_name(const std::string& name) {
    const detail::ParsedName p = detail::parse_name(name);
    if (p.base == "max") return max_functional();
    if (p.base == "supnorm") return supnorm_functional();
    if (p.base == "prop2") {
        const Prop2Map m = prop2_map_by_name(p.args.empty() ? "sum" : p.args[0]);
        return argmax_pair_functional(m.f, m.grad, "prop2_" + m.name);
    }
    if (p.base == "cylindrical") {
        const std::string inner = p.args.empty() ? "sin1" : p.args[0];
        return make_cylindrical(cylindrical_by_name(inner), 2.0, "cylindrical_" + inner);
    }
    if (p.base == "coordinate" || p.base == "sin1" || p.base == "cos1" || p.base == "sum2")
        return make_cylindrical(cylindrical_by_name(name), 2.0, p.base);
    throw std::invalid_argument("unknown functional '" + name + "'");
}

// Built-in scalar variables Y = g(U_1) for prop3 / thm3.
struct YBuiltin {
    std::string name;
    std::function<double(double)> g;
    std::function<double(double)> g_prime;
    std::optional<double> closed_mean;  // E[Y] when known for both structures
};

inline YBuiltin y_by_name(const std::string& name) {
    if (name == "one")
        return {"one", [](double) { return 1.0; }, [](double) { return 0.0; }, 1.0};
    if (name == "u1")
        return {"u1", [](double u) { return u; }, [](double) { return 1.0; }, 0.0};
    if (name == "sin_u1")
        return {"sin_u1", [](double u) { return std::sin(u); },
                [](double u) { return std::cos(u); }, 0.0};  // odd: centered under symmetric mu
    if (name == "bounded")
        return {"bounded", [](double u) { return 1.0 / (1.0 + u * u); },
                [](double u) {
                    const double d = 1.0 + u * u;
                    return -2.0 * u / (d * d);
                },
                std::nullopt};
    throw std::invalid_argument("unknown Y '" + name + "' (expected one, u1, sin_u1, bounded)");
}

// Built-in Z weights for thm3; 'gauss_u2' is exp(-U_2^2) normalized to mean 1
// under the selected structure.
struct ZBuiltin {
    std::string name;
    std::function<double(double)> z;  // applied to U_2
};

inline ZBuiltin z_by_name(const std::string& name, const ExperimentConfig& cfg) {
    if (name == "one") return {"one", [](double) { return 1.0; }};
    if (name == "gauss_u2") {
        double norm;
        if (cfg.structure == "ou_gauss") {
            norm = 1.0 / std::sqrt(3.0);  // E exp(-U^2), U ~ N(0,1)
        } else {
            const double r = std::sqrt(3.0);
            norm = std::sqrt(3.14159265358979323846) * std::erf(r) / (2.0 * r);
        }
        return {"gauss_u2", [norm](double u) { return std::exp(-u * u) / norm; }};
    }
    throw std::invalid_argument("unknown Z '" + name + "' (expected one, gauss_u2)");
}

// ---------------------------------------------------------------------------
// Experiment runners
// ---------------------------------------------------------------------------

namespace detail {

struct RunContext {
    const ExperimentConfig& cfg;
    ErrorStructure1D es;
    std::uint64_t next_stream = 0;

    explicit RunContext(const ExperimentConfig& c) : cfg(c), es(structure_by_name(c)) {}

    SeedSpec seed() { return SeedSpec{cfg.seed, next_stream++}; }

    ResultRow row(std::uint64_t n, std::string quantity, double estimate, double std_error,
                  double limit, double limit_std_error, std::uint64_t samples) const {
        return ResultRow{experiment_to_string(cfg.experiment),
                         n,
                         std::move(quantity),
                         estimate,
                         std_error,
                         limit,
                         limit_std_error,
                         cfg.seed,
                         samples};
    }
};

inline std::vector<std::size_t> n_list_or(const ExperimentConfig& cfg,
                                          std::vector<std::size_t> fallback) {
    return cfg.n_list.empty() ? std::move(fallback) : cfg.n_list;
}

inline double hypot2(double a, double b) { return std::sqrt(a * a + b * b); }

}  // namespace detail

// Convergence of the cylindrical Dirichlet form, plus the characteristic
// function decorrelation statistic |E[e^{i u . X} gamma(U_k)] - cf * c| for
// the middle coordinate k.
inline std::vector<ResultRow> run_prop1(const ExperimentConfig& cfg) {
    detail::RunContext ctx(cfg);
    const std::string fname = cfg.functional.empty() ? "sin1" : cfg.functional;
    const CylindricalFunctional cyl = cylindrical_by_name(fname);
    const PathFunctional F = make_cylindrical(cyl, 2.0, fname);

    std::vector<ResultRow> rows;
    for (const std::size_t n : detail::n_list_or(cfg, {100, 1000})) {
        const ErrorStructure1D& es = ctx.es;
        const std::size_t k_mid = std::max<std::size_t>(1, n / 2);

        auto walk_sampler = [&es, &F, &cyl, n, k_mid](Stream& stream, std::span<double> out) {
            const auto draws = sample_increments(es, n, stream);
            const auto [path, sharp] = build_path(draws, es);
            out[0] = gamma_of_functional(F, path);
            // characteristic-function statistic with u_j = 1
            double phase = 0.0;
            for (const double t : cyl.times) phase += eval(path, t);
            const double gk = path.gammas[k_mid - 1];
            out[1] = std::cos(phase) * gk;
            out[2] = std::sin(phase) * gk;
        };
        const auto walk = estimate_many(walk_sampler, 3, cfg.samples, ctx.seed(), cfg.workers);

        const double sigma = std::sqrt(ctx.es.sigma2);
        const double c = ctx.es.c;
        const std::size_t m = cfg.m;
        auto limit_sampler = [&cyl, sigma, c, m](Stream& stream) {
            return gamma0_cylindrical(cyl, sample_brownian(sigma, c, m, stream));
        };
        const EstimateReport limit = estimate(limit_sampler, cfg.samples, ctx.seed(), cfg.workers);

        rows.push_back(ctx.row(n, "gamma_cylindrical", walk[0].mean, walk[0].std_error,
                               limit.mean, limit.std_error, cfg.samples));

        // Gaussian characteristic function of (B(t_1), ..., B(t_p)) at u = 1
        double quad = 0.0;
        for (const double ti : cyl.times)
            for (const double tj : cyl.times) quad += std::min(ti, tj);
        const double cf = std::exp(-0.5 * ctx.es.sigma2 * quad);
        const double dist = detail::hypot2(walk[1].mean - cf * c, walk[2].mean);
        const double dist_se = detail::hypot2(walk[1].std_error, walk[2].std_error);
        rows.push_back(ctx.row(n, "chaos_decorrelation", dist, dist_se, 0.0, 0.0, cfg.samples));
    }
    return rows;
}

// E Gamma[F(X_n)] by the chain rule and by the closed-form copy-expectation of
// the sharp operator; the two must agree per sample to 1e-12. The limit column
// is the Monte Carlo mean of the corresponding Gamma_0 expression.
inline std::vector<ResultRow> run_thm1(const ExperimentConfig& cfg) {
    detail::RunContext ctx(cfg);
    const std::string fname = cfg.functional.empty() ? "max" : cfg.functional;
    const PathFunctional F = path_functional_by_name(fname);

    std::vector<ResultRow> rows;
    for (const std::size_t n : detail::n_list_or(cfg, {100, 1000})) {
        const ErrorStructure1D& es = ctx.es;
        auto walk_sampler = [&es, &F, n](Stream& stream, std::span<double> out) {
            const auto draws = sample_increments(es, n, stream);
            const auto [path, sharp] = build_path(draws, es);
            const double chain = gamma_of_functional(F, path);
            const double copy_sq = sharp_copy_expectation(F, path);
            if (std::abs(chain - copy_sq) >
                1e-12 * std::max({1.0, std::abs(chain), std::abs(copy_sq)}))
                throw std::runtime_error("thm1: chain rule and sharp closed form disagree");
            out[0] = chain;
            out[1] = copy_sq;
        };
        const auto walk = estimate_many(walk_sampler, 2, cfg.samples, ctx.seed(), cfg.workers);

        const double sigma = std::sqrt(ctx.es.sigma2);
        const double c = ctx.es.c;
        const std::size_t m = cfg.m;
        auto limit_sampler = [&F, sigma, c, m](Stream& stream) {
            return gamma0_lemma2(F, sample_brownian(sigma, c, m, stream));
        };
        const EstimateReport limit = estimate(limit_sampler, cfg.samples, ctx.seed(), cfg.workers);

        rows.push_back(ctx.row(n, "gamma_chain", walk[0].mean, walk[0].std_error, limit.mean,
                               limit.std_error, cfg.samples));
        rows.push_back(ctx.row(n, "gamma_sharp", walk[1].mean, walk[1].std_error, limit.mean,
                               limit.std_error, cfg.samples));
    }
    return rows;
}

// Quadratic-growth test functionals: E Phi(X_n) against the Brownian value,
// plus the uniform-integrability tail rows for Z_n^2 = sup_t |X_n(t)|^2.
inline std::vector<ResultRow> run_thm2(const ExperimentConfig& cfg, const Fixtures& fx) {
    detail::RunContext ctx(cfg);
    const double sigma2 = ctx.es.sigma2;

    std::vector<ResultRow> rows;
    for (const std::size_t n : detail::n_list_or(cfg, {100, 1000})) {
        const ErrorStructure1D& es = ctx.es;
        auto moment_sampler = [&es, n](Stream& stream, std::span<double> out) {
            const auto draws = sample_increments(es, n, stream);
            const auto [path, sharp] = build_path(draws, es);
            const PathStatistics st = path_statistics(path);
            out[0] = st.max * st.max;
            out[1] = st.endpoint * st.endpoint;
        };
        const auto moments = estimate_many(moment_sampler, 2, cfg.samples, ctx.seed(), cfg.workers);
        rows.push_back(ctx.row(n, "max_sq", moments[0].mean, moments[0].std_error, sigma2, 0.0,
                               cfg.samples));
        rows.push_back(ctx.row(n, "endpoint_sq", moments[1].mean, moments[1].std_error, sigma2,
                               0.0, cfg.samples));

        auto zsq_sampler = [&es, n](Stream& stream) {
            const auto draws = sample_increments(es, n, stream);
            const auto [path, sharp] = build_path(draws, es);
            const double z = path_statistics(path).sup_norm;
            return z * z;
        };
        const std::vector<double> zsq = sample_column(zsq_sampler, cfg.samples, ctx.seed(),
                                                      cfg.workers);
        MomentAccumulator zsq_acc;
        for (const double v : zsq) zsq_acc.add(v);
        const FixtureEntry& absmax = fx.at("e_absmax_sq");
        rows.push_back(ctx.row(n, "supnorm_sq", zsq_acc.mean(), zsq_acc.std_error(), absmax.value,
                               absmax.std_error, cfg.samples));

        for (const double mult : {8.0, 16.0, 32.0}) {
            const double alpha = mult * sigma2;
            const TailDiagnostic d = ui_diagnostic(zsq, alpha, std::sqrt(sigma2));
            rows.push_back(ctx.row(n, "tail_alpha_" + std::to_string(static_cast<int>(mult)),
                                   d.tail_mean, d.tail_std_error, d.eq4_bound, 0.0, cfg.samples));
        }
    }
    return rows;
}

// The argmax identities: E Gamma[max X_n] -> E[Sigma] = 1/2 and
// E Gamma[sup|X_n|] -> E[tau] (oracle fixture).
inline std::vector<ResultRow> run_application(const ExperimentConfig& cfg, const Fixtures& fx) {
    detail::RunContext ctx(cfg);
    const PathFunctional M = max_functional();
    const PathFunctional N = supnorm_functional();

    std::vector<ResultRow> rows;
    for (const std::size_t n : detail::n_list_or(cfg, {100, 1000})) {
        const ErrorStructure1D& es = ctx.es;
        auto sampler = [&es, &M, &N, n](Stream& stream, std::span<double> out) {
            const auto draws = sample_increments(es, n, stream);
            const auto [path, sharp] = build_path(draws, es);
            out[0] = gamma_of_functional(M, path);
            out[1] = gamma_of_functional(N, path);
        };
        const auto gammas = estimate_many(sampler, 2, cfg.samples, ctx.seed(), cfg.workers);
        rows.push_back(
            ctx.row(n, "gamma_max", gammas[0].mean, gammas[0].std_error, 0.5, 0.0, cfg.samples));
        const FixtureEntry& tau = fx.at("e_tau");
        rows.push_back(ctx.row(n, "gamma_supnorm", gammas[1].mean, gammas[1].std_error, tau.value,
                               tau.std_error, cfg.samples));
    }
    return rows;
}

// Gamma of F(max_k S_k / sqrt(n), max_k |S_k| / sqrt(n)) against the displayed
// three-term limit expression, plus the L^2 part and a diagnostic row showing
// the signed versus unsigned cross term on the Brownian side.
inline std::vector<ResultRow> run_prop2(const ExperimentConfig& cfg) {
    detail::RunContext ctx(cfg);
    const Prop2Map map = prop2_map_by_name(cfg.functional.empty() ? "sum" : cfg.functional);
    const PathFunctional F = argmax_pair_functional(map.f, map.grad, "prop2_" + map.name);

    std::vector<ResultRow> rows;
    const double sigma = std::sqrt(ctx.es.sigma2);
    const double c = ctx.es.c;

    for (const std::size_t n : detail::n_list_or(cfg, {100, 1000})) {
        const ErrorStructure1D& es = ctx.es;
        auto walk_sampler = [&es, &F, &map, n](Stream& stream, std::span<double> out) {
            const auto draws = sample_increments(es, n, stream);
            const auto [path, sharp] = build_path(draws, es);
            out[0] = gamma_of_functional(F, path);
            const PathStatistics st = path_statistics(path);
            const double value = map.f(st.max, st.sup_norm);
            out[1] = value * value;
        };
        const auto walk = estimate_many(walk_sampler, 2, cfg.samples, ctx.seed(), cfg.workers);

        const EstimateReport limit =
            prop2_limit(map.grad, cfg.samples, ctx.seed(), cfg.m, sigma, c, cfg.workers);
        rows.push_back(ctx.row(n, "gamma_prelimit", walk[0].mean, walk[0].std_error, limit.mean,
                               limit.std_error, cfg.samples));

        const std::size_t m = cfg.m;
        auto l2_sampler = [&map, sigma, c, m](Stream& stream) {
            const PathStatistics st =
                sample_brownian(sigma, c, m, stream).view().statistics();
            const double value = map.f(st.max, st.sup_norm);
            return value * value;
        };
        const EstimateReport l2_limit = estimate(l2_sampler, cfg.samples, ctx.seed(), cfg.workers);
        rows.push_back(ctx.row(n, "l2_value_sq", walk[1].mean, walk[1].std_error, l2_limit.mean,
                               l2_limit.std_error, cfg.samples));
    }

    // Brownian-side cross term: estimate = E[sign(B_tau) (tau ^ Sigma)] (the
    // gradient route), limit = E[tau ^ Sigma] (the displayed expression).
    const std::size_t m = cfg.m;
    auto cross_sampler = [sigma, c, m](Stream& stream, std::span<double> out) {
        const PathStatistics st = sample_brownian(sigma, c, m, stream).view().statistics();
        const double sgn = (st.sup_value >= 0.0) ? 1.0 : -1.0;
        const double cross = std::min(st.argmax_t, st.argmax_abs_t);
        out[0] = sgn * cross;
        out[1] = cross;
    };
    const auto cross = estimate_many(cross_sampler, 2, cfg.samples, ctx.seed(), cfg.workers);
    rows.push_back(ctx.row(0, "cross_term_signed", cross[0].mean, cross[0].std_error,
                           cross[1].mean, cross[1].std_error, cfg.samples));
    return rows;
}

// Asymptotic independence: E[Y phi(X_n)] -> E[Y] E[phi(B)].
inline std::vector<ResultRow> run_prop3(const ExperimentConfig& cfg) {
    detail::RunContext ctx(cfg);
    const YBuiltin Y = y_by_name(cfg.y_name.empty() ? "u1" : cfg.y_name);
    const CylindricalFunctional phi = cylindrical_by_name(cfg.psi_name.empty() ? "cos1" : cfg.psi_name);

    std::vector<ResultRow> rows;
    for (const std::size_t n : detail::n_list_or(cfg, {100, 1000})) {
        const ErrorStructure1D& es = ctx.es;
        auto lhs_sampler = [&es, &Y, &phi, n](Stream& stream) {
            const auto draws = sample_increments(es, n, stream);
            const auto [path, sharp] = build_path(draws, es);
            std::vector<double> at(phi.times.size());
            for (std::size_t i = 0; i < at.size(); ++i) at[i] = eval(path, phi.times[i]);
            return Y.g(draws[0].u) * phi.f(at);
        };
        const EstimateReport lhs = estimate(lhs_sampler, cfg.samples, ctx.seed(), cfg.workers);

        double ey, ey_se;
        if (Y.closed_mean.has_value()) {
            ey = *Y.closed_mean;
            ey_se = 0.0;
        } else {
            const ErrorStructure1D& es2 = ctx.es;
            const EstimateReport r = estimate(
                [&es2, &Y](Stream& stream) { return Y.g(es2.sample(stream)); }, cfg.samples,
                ctx.seed(), cfg.workers);
            ey = r.mean;
            ey_se = r.std_error;
        }
        const double sigma = std::sqrt(ctx.es.sigma2);
        const double c = ctx.es.c;
        const std::size_t m = cfg.m;
        auto phi_sampler = [&phi, sigma, c, m](Stream& stream) {
            const BrownianGrid b = sample_brownian(sigma, c, m, stream);
            const PathView x = b.view();
            std::vector<double> at(phi.times.size());
            for (std::size_t i = 0; i < at.size(); ++i) at[i] = x.eval(phi.times[i]);
            return phi.f(at);
        };
        const EstimateReport ephi = estimate(phi_sampler, cfg.samples, ctx.seed(), cfg.workers);

        const double limit = ey * ephi.mean;
        const double limit_se =
            detail::hypot2(ey * ephi.std_error, ephi.mean * ey_se);
        rows.push_back(ctx.row(n, "decorrelation_lhs", lhs.mean, lhs.std_error, limit, limit_se,
                               cfg.samples));
    }
    return rows;
}

// E[Z Gamma[Y psi(X_n)]] -> E[Z Gamma[Y]] E[(psi(B))^2] + E[Z Y^2] E[Gamma_0[psi(B)]].
inline std::vector<ResultRow> run_thm3(const ExperimentConfig& cfg) {
    detail::RunContext ctx(cfg);
    const YBuiltin Y = y_by_name(cfg.y_name.empty() ? "sin_u1" : cfg.y_name);
    const ZBuiltin Z = z_by_name(cfg.z_name.empty() ? "one" : cfg.z_name, cfg);
    const std::string psi_name = cfg.psi_name.empty() ? "cos1" : cfg.psi_name;
    const CylindricalFunctional psi = cylindrical_by_name(psi_name);
    const PathFunctional psi_f = make_cylindrical(psi, 2.0, psi_name);

    std::vector<ResultRow> rows;
    for (const std::size_t n : detail::n_list_or(cfg, {100, 1000})) {
        if (n < 2) throw std::invalid_argument("thm3: needs n >= 2 (Z reads U_2)");
        const ErrorStructure1D& es = ctx.es;
        auto lhs_sampler = [&es, &Y, &Z, &psi, &psi_f, n](Stream& stream) {
            const auto draws = sample_increments(es, n, stream);
            const auto [path, sharp] = build_path(draws, es);

            const double u1 = draws[0].u;
            const double y = Y.g(u1);
            const double gamma_y = Y.g_prime(u1) * Y.g_prime(u1) * path.gammas[0];

            std::vector<double> at(psi.times.size());
            for (std::size_t i = 0; i < at.size(); ++i) at[i] = eval(path, psi.times[i]);
            const double psi_value = psi.f(at);
            const std::vector<double> grad = psi.grad_f(at);

            const double gamma_psi = gamma_of_functional(psi_f, path);
            // Gamma[Y, psi(X_n)]: only the U_1 coordinate couples
            double a1 = 0.0;
            for (std::size_t i = 0; i < grad.size(); ++i)
                a1 += grad[i] * coordinate_weight(path.n, psi.times[i], 1);
            const double gamma_cross = Y.g_prime(u1) * path.gammas[0] * a1;

            const double gamma_product =
                y * y * gamma_psi + 2.0 * y * psi_value * gamma_cross + psi_value * psi_value * gamma_y;
            return Z.z(draws[1].u) * gamma_product;
        };
        const EstimateReport lhs = estimate(lhs_sampler, cfg.samples, ctx.seed(), cfg.workers);

        // rhs factors: mu-side by Monte Carlo over (U_1, U_2), Wiener side over grids
        const ErrorStructure1D& es2 = ctx.es;
        auto mu_sampler = [&es2, &Y, &Z](Stream& stream, std::span<double> out) {
            const double u1 = es2.sample(stream);
            const double u2 = es2.sample(stream);
            const double z = Z.z(u2);
            const double gy = Y.g_prime(u1) * Y.g_prime(u1) * gamma_coordinate(es2, u1);
            out[0] = z * gy;
            out[1] = z * Y.g(u1) * Y.g(u1);
        };
        const auto mu_side = estimate_many(mu_sampler, 2, cfg.samples, ctx.seed(), cfg.workers);

        const double sigma = std::sqrt(ctx.es.sigma2);
        const double c = ctx.es.c;
        const std::size_t m = cfg.m;
        auto wiener_sampler = [&psi, sigma, c, m](Stream& stream, std::span<double> out) {
            const BrownianGrid b = sample_brownian(sigma, c, m, stream);
            const PathView x = b.view();
            std::vector<double> at(psi.times.size());
            for (std::size_t i = 0; i < at.size(); ++i) at[i] = x.eval(psi.times[i]);
            const double v = psi.f(at);
            out[0] = v * v;
            out[1] = gamma0_cylindrical(psi, b);
        };
        const auto wiener_side = estimate_many(wiener_sampler, 2, cfg.samples, ctx.seed(), cfg.workers);

        const double a = mu_side[0].mean, b_ = wiener_side[0].mean;
        const double cc = mu_side[1].mean, d = wiener_side[1].mean;
        const double rhs = a * b_ + cc * d;
        const double rhs_se = std::sqrt(
            b_ * b_ * mu_side[0].std_error * mu_side[0].std_error +
            a * a * wiener_side[0].std_error * wiener_side[0].std_error +
            d * d * mu_side[1].std_error * mu_side[1].std_error +
            cc * cc * wiener_side[1].std_error * wiener_side[1].std_error);
        rows.push_back(
            ctx.row(n, "gamma_product_lhs", lhs.mean, lhs.std_error, rhs, rhs_se, cfg.samples));
    }
    return rows;
}

// Lemma-3 scaled-max rows plus the uniform-integrability tail rows at a fixed
// moderate walk size.
inline std::vector<ResultRow> run_diagnostics(const ExperimentConfig& cfg) {
    detail::RunContext ctx(cfg);
    std::vector<ResultRow> rows;

    const std::vector<std::size_t> ns = detail::n_list_or(cfg, {100, 1000, 10000, 100000});
    const std::uint64_t lemma3_samples = std::min<std::uint64_t>(cfg.samples, 500);
    const SeedSpec lemma3_seed = ctx.seed();
    ctx.next_stream += ns.size();  // lemma3_diagnostic advances stream ids internally
    const auto reports = lemma3_diagnostic(ctx.es, ns, lemma3_samples, lemma3_seed, cfg.workers);
    for (std::size_t i = 0; i < ns.size(); ++i)
        rows.push_back(ctx.row(ns[i], "lemma3_scaled_max", reports[i].mean, reports[i].std_error,
                               0.0, 0.0, lemma3_samples));

    const std::size_t n_tail = 2000;
    const std::uint64_t tail_samples = std::min<std::uint64_t>(cfg.samples, 20000);
    const ErrorStructure1D& es = ctx.es;
    auto zsq_sampler = [&es, n_tail](Stream& stream) {
        const auto draws = sample_increments(es, n_tail, stream);
        const auto [path, sharp] = build_path(draws, es);
        const double z = path_statistics(path).sup_norm;
        return z * z;
    };
    const std::vector<double> zsq = sample_column(zsq_sampler, tail_samples, ctx.seed(), cfg.workers);
    const double sigma2 = ctx.es.sigma2;
    for (const double mult : {8.0, 16.0, 32.0}) {
        const TailDiagnostic d = ui_diagnostic(zsq, mult * sigma2, std::sqrt(sigma2));
        rows.push_back(ctx.row(n_tail, "tail_alpha_" + std::to_string(static_cast<int>(mult)),
                               d.tail_mean, d.tail_std_error, d.eq4_bound, 0.0, tail_samples));
    }
    return rows;
}

}  // namespace donsker::experiments
