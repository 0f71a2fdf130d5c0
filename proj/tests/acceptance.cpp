// Acceptance suite: one pass/fail line per criterion, fixed sample sizes and
// tolerances. Exit status is the number of failed criteria.
//
//   acceptance [--criterion K] [--fixtures PATH] [--seed S] [--workers W]

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "donsker/experiments.hpp"
#include "donsker/selftest.hpp"
#include "test_support.hpp"

#ifndef DONSKER_DEFAULT_FIXTURES
#define DONSKER_DEFAULT_FIXTURES "tests/fixtures/brownian_oracle.txt"
#endif

using namespace donsker;
namespace ex = donsker::experiments;

namespace {

struct Options {
    int criterion = 0;  // 0 = all
    std::string fixtures_path = DONSKER_DEFAULT_FIXTURES;
    std::uint64_t seed = 20250808;
    unsigned workers = 1;
};

struct Outcome {
    bool pass = false;
    std::string detail;
};

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// Fixed random-atomic-derivative functional for the identity criteria.
PathFunctional measure_functional(DiscreteMeasure measure) {
    return PathFunctional{
        "random_atoms",
        [](const PathView&) { return 0.0; },
        [measure](const PathView&) { return measure; },
        std::numeric_limits<double>::infinity(),
    };
}

// criterion 1: sharp/Gamma identity on 1000 random paths, both structures,
// n in {10, 100, 1000}, to 1e-12 relative; under 10 s.
Outcome criterion_1(const Options& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    Stream s = derive_stream(opt.seed, 1, 0);
    const std::size_t ns[3] = {10, 100, 1000};
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const ErrorStructure1D es = (i % 2 == 0) ? ou_gauss() : weighted_uniform(0.5);
        const std::size_t n = ns[i % 3];
        const auto draws = sample_increments(es, n, s);
        const auto [path, sharp] = build_path(draws, es);
        std::vector<MeasureAtom> atoms;
        for (const auto& [t, w] : test::random_atoms(s)) atoms.push_back({t, w});
        const PathFunctional F = measure_functional(make_measure(std::move(atoms)));
        const double gamma = gamma_of_functional(F, path);
        const double copy_sq = sharp_copy_expectation(F, path);
        worst = std::max(worst, std::abs(gamma - copy_sq) /
                                    std::max({1.0, std::abs(gamma), std::abs(copy_sq)}));
    }
    const double dt = elapsed_s(t0);
    const bool ok = worst <= 1e-12 && dt < 10.0;
    return {ok, "max rel dev " + fmt(worst) + ", " + fmt(dt) + " s"};
}

// criterion 2: gamma_pair vs coordinate-partial chain rule on 1e4 random
// (n, s, t), to 1e-12; under 5 s.
Outcome criterion_2(const Options& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    Stream s = derive_stream(opt.seed, 2, 0);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const ErrorStructure1D es = (i % 2 == 0) ? ou_gauss() : weighted_uniform(0.5);
        const std::size_t n = 2 + s.next_u64() % 499;
        const auto draws = sample_increments(es, n, s);
        const auto [path, sharp] = build_path(draws, es);
        const double a = s.next_u01(), b = s.next_u01();
        const double lhs = gamma_pair(path, a, b);
        const double rhs = test::gamma_pair_oracle(path, a, b);
        worst = std::max(worst,
                         std::abs(lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)}));
    }
    const double dt = elapsed_s(t0);
    const bool ok = worst <= 1e-12 && dt < 5.0;
    return {ok, "max rel dev " + fmt(worst) + ", " + fmt(dt) + " s"};
}

EstimateReport gamma_estimate(const ErrorStructure1D& es, const PathFunctional& F,
                              std::size_t n, std::uint64_t samples, SeedSpec seed,
                              unsigned workers) {
    auto sampler = [&es, &F, n](Stream& stream) {
        const auto draws = sample_increments(es, n, stream);
        const auto [path, sharp] = build_path(draws, es);
        return gamma_of_functional(F, path);
    };
    return estimate(sampler, samples, seed, workers);
}

// criterion 3 (and its weighted_uniform variant for criterion 8):
// E Gamma[sin(X_n(1))] at n = 1000, 5e4 samples, within 3 stderr of (1+e^-2)/2.
Outcome criterion_3_body(const Options& opt, const ErrorStructure1D& es,
                         std::uint64_t stream_id) {
    const auto t0 = std::chrono::steady_clock::now();
    const PathFunctional F = make_cylindrical(ex::cylindrical_by_name("sin1"), 1.0, "sin1");
    const EstimateReport r =
        gamma_estimate(es, F, 1000, 50000, {opt.seed, stream_id}, opt.workers);
    const double target = (1.0 + std::exp(-2.0)) / 2.0;
    const double dt = elapsed_s(t0);
    const bool ok = std::abs(r.mean - target) <= 3.0 * r.std_error && dt < 60.0;
    return {ok, "mean " + fmt(r.mean) + " vs " + fmt(target) + " +- " + fmt(3.0 * r.std_error) +
                    ", " + fmt(dt) + " s"};
}

Outcome criterion_3(const Options& opt, const ex::Fixtures&) {
    return criterion_3_body(opt, ou_gauss(), 3);
}

// criterion 4: E Gamma[max] within +-0.03 of 1/2 and E Gamma[supnorm] within
// the combined 3-sigma CI of the oracle E[tau]; n = 2000, 2e4 samples.
Outcome criterion_4_body(const Options& opt, const ErrorStructure1D& es,
                         const ex::Fixtures& fx, std::uint64_t stream_id) {
    const auto t0 = std::chrono::steady_clock::now();
    const PathFunctional M = max_functional();
    const PathFunctional N = supnorm_functional();
    const std::size_t n = 2000;
    auto sampler = [&es, &M, &N, n](Stream& stream, std::span<double> out) {
        const auto draws = sample_increments(es, n, stream);
        const auto [path, sharp] = build_path(draws, es);
        out[0] = gamma_of_functional(M, path);
        out[1] = gamma_of_functional(N, path);
    };
    const auto r = estimate_many(sampler, 2, 20000, {opt.seed, stream_id}, opt.workers);
    const ex::FixtureEntry& tau = fx.at("e_tau");
    const double combined =
        std::sqrt(r[1].std_error * r[1].std_error + tau.std_error * tau.std_error);
    const bool ok_max = std::abs(r[0].mean - 0.5) <= 0.03;
    const bool ok_tau = std::abs(r[1].mean - tau.value) <= 3.0 * combined;
    const double dt = elapsed_s(t0);
    const bool ok = ok_max && ok_tau && dt < 300.0;
    return {ok, "E G[max] " + fmt(r[0].mean) + " (target 0.5 +- 0.03), E G[supnorm] " +
                    fmt(r[1].mean) + " vs " + fmt(tau.value) + " +- " + fmt(3.0 * combined) +
                    ", " + fmt(dt) + " s"};
}

Outcome criterion_4(const Options& opt, const ex::Fixtures& fx) {
    return criterion_4_body(opt, ou_gauss(), fx, 4);
}

// criterion 5: E[(max_k S_k / sqrt n)^2] within +-0.02 of 1 at n = 2000,
// 5e4 samples; tail_mean <= eq4_bound + 3 stderr for alpha in {8, 16, 32}.
Outcome criterion_5_body(const Options& opt, const ErrorStructure1D& es,
                         std::uint64_t stream_id) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = 2000;
    auto max_sq_sampler = [&es, n](Stream& stream) {
        const auto draws = sample_increments(es, n, stream);
        const auto [path, sharp] = build_path(draws, es);
        const double m = path_statistics(path).max;
        return m * m;
    };
    const EstimateReport max_sq =
        estimate(max_sq_sampler, 50000, {opt.seed, stream_id}, opt.workers);

    auto zsq_sampler = [&es, n](Stream& stream) {
        const auto draws = sample_increments(es, n, stream);
        const auto [path, sharp] = build_path(draws, es);
        const double z = path_statistics(path).sup_norm;
        return z * z;
    };
    const std::vector<double> zsq =
        sample_column(zsq_sampler, 50000, {opt.seed, stream_id + 1}, opt.workers);

    const bool ok_max = std::abs(max_sq.mean - 1.0) <= 0.02;
    bool ok_tail = true;
    std::string tail_detail;
    for (const double alpha : {8.0, 16.0, 32.0}) {
        const TailDiagnostic d = ui_diagnostic(zsq, alpha, 1.0);
        if (!(d.tail_mean <= d.eq4_bound + 3.0 * d.tail_std_error)) ok_tail = false;
        tail_detail += " a=" + fmt(alpha) + ": " + fmt(d.tail_mean) + "<=" + fmt(d.eq4_bound);
    }
    const double dt = elapsed_s(t0);
    return {ok_max && ok_tail, "E[max^2] " + fmt(max_sq.mean) + " (target 1 +- 0.02);" +
                                   tail_detail + ", " + fmt(dt) + " s"};
}

Outcome criterion_5(const Options& opt, const ex::Fixtures&) {
    return criterion_5_body(opt, ou_gauss(), 5);
}

// criterion 6: prop2 with F(a,b) = a + b; prelimit against the displayed
// three-term limit E[tau] + 2 E[tau ^ Sigma] + E[Sigma] from the oracle.
Outcome criterion_6(const Options& opt, const ex::Fixtures& fx) {
    const auto t0 = std::chrono::steady_clock::now();
    const ex::Prop2Map map = ex::prop2_map_by_name("sum");
    const PathFunctional F = argmax_pair_functional(map.f, map.grad, "prop2_sum");
    const EstimateReport prelimit =
        gamma_estimate(ou_gauss(), F, 2000, 20000, {opt.seed, 6}, opt.workers);

    const ex::FixtureEntry& tau = fx.at("e_tau");
    const ex::FixtureEntry& tms = fx.at("e_tau_min_sigma");
    const ex::FixtureEntry& sig = fx.at("e_sigma");
    const double target = tau.value + 2.0 * tms.value + sig.value;
    const double target_se = std::sqrt(tau.std_error * tau.std_error +
                                       4.0 * tms.std_error * tms.std_error +
                                       sig.std_error * sig.std_error);
    const double combined =
        std::sqrt(target_se * target_se + prelimit.std_error * prelimit.std_error);
    const double dt = elapsed_s(t0);
    const bool ok = std::abs(prelimit.mean - target) <= 3.0 * combined;
    return {ok, "prelimit " + fmt(prelimit.mean) + " vs " + fmt(target) + " +- " +
                    fmt(3.0 * combined) + ", " + fmt(dt) + " s"};
}

// criterion 7: E[U_1 cos(X_n(1))] -> 0 within 3 stderr, and the
// Z = 1, Y = sin(U_1), psi = cos(x(1)) case against (1 + e^-4)/2 at n = 1000.
Outcome criterion_7(const Options& opt, const ex::Fixtures&) {
    const auto t0 = std::chrono::steady_clock::now();
    const ErrorStructure1D es = ou_gauss();
    const std::size_t n = 1000;

    auto prop3_sampler = [&es, n](Stream& stream) {
        const auto draws = sample_increments(es, n, stream);
        const auto [path, sharp] = build_path(draws, es);
        return draws[0].u * std::cos(eval(path, 1.0));
    };
    const EstimateReport prop3 = estimate(prop3_sampler, 50000, {opt.seed, 7}, opt.workers);
    const bool ok_prop3 = std::abs(prop3.mean) <= 3.0 * prop3.std_error;

    const CylindricalFunctional psi = ex::cylindrical_by_name("cos1");
    const PathFunctional psi_f = make_cylindrical(psi, 1.0, "cos1");
    auto thm3_sampler = [&es, &psi, &psi_f, n](Stream& stream) {
        const auto draws = sample_increments(es, n, stream);
        const auto [path, sharp] = build_path(draws, es);
        const double u1 = draws[0].u;
        const double y = std::sin(u1);
        const double gamma_y = std::cos(u1) * std::cos(u1) * path.gammas[0];
        const double psi_value = std::cos(eval(path, 1.0));
        const double gamma_psi = gamma_of_functional(psi_f, path);
        const double a1 = -std::sin(eval(path, 1.0)) * coordinate_weight(n, 1.0, 1);
        const double gamma_cross = std::cos(u1) * path.gammas[0] * a1;
        return y * y * gamma_psi + 2.0 * y * psi_value * gamma_cross +
               psi_value * psi_value * gamma_y;
    };
    const EstimateReport thm3 = estimate(thm3_sampler, 50000, {opt.seed, 8}, opt.workers);
    const double rhs = (1.0 + std::exp(-4.0)) / 2.0;
    const bool ok_thm3 = std::abs(thm3.mean - rhs) <= 3.0 * thm3.std_error;

    const double dt = elapsed_s(t0);
    return {ok_prop3 && ok_thm3,
            "E[U1 cos X(1)] " + fmt(prop3.mean) + " +- " + fmt(3.0 * prop3.std_error) +
                "; thm3 lhs " + fmt(thm3.mean) + " vs " + fmt(rhs) + " +- " +
                fmt(3.0 * thm3.std_error) + ", " + fmt(dt) + " s"};
}

// criterion 8: criteria 3-5 under weighted_uniform with c = 1.
Outcome criterion_8(const Options& opt, const ex::Fixtures& fx) {
    const ErrorStructure1D es = weighted_uniform(0.5);
    const Outcome c3 = criterion_3_body(opt, es, 83);
    const Outcome c4 = criterion_4_body(opt, es, fx, 84);
    const Outcome c5 = criterion_5_body(opt, es, 85);
    const bool ok = c3.pass && c4.pass && c5.pass;
    return {ok, std::string("[3': ") + (c3.pass ? "pass" : "FAIL") + " " + c3.detail +
                    "] [4': " + (c4.pass ? "pass" : "FAIL") + " " + c4.detail + "] [5': " +
                    (c5.pass ? "pass" : "FAIL") + " " + c5.detail + "]"};
}

// criterion 9: byte-identical CSV across reruns and worker counts.
Outcome criterion_9(const Options& opt, const ex::Fixtures&) {
    ex::ExperimentConfig cfg;
    cfg.seed = opt.seed;
    cfg.n_list = {200};
    cfg.samples = 2000;
    cfg.m = 512;
    cfg.fixtures_path = opt.fixtures_path;

    cfg.experiment = ex::ExperimentKind::prop1;
    cfg.functional = "sin1";
    cfg.workers = 1;
    const std::string p1_a = ex::to_csv(ex::run_prop1(cfg));
    cfg.workers = 4;
    const std::string p1_b = ex::to_csv(ex::run_prop1(cfg));

    cfg.experiment = ex::ExperimentKind::application;
    const ex::Fixtures fx = ex::load_fixtures(opt.fixtures_path);
    cfg.workers = 1;
    const std::string ap_a = ex::to_csv(ex::run_application(cfg, fx));
    cfg.workers = 3;
    const std::string ap_b = ex::to_csv(ex::run_application(cfg, fx));
    cfg.workers = 1;
    const std::string ap_c = ex::to_csv(ex::run_application(cfg, fx));

    const bool ok = (p1_a == p1_b) && (ap_a == ap_b) && (ap_a == ap_c);
    return {ok, ok ? "prop1 and application CSV bytes stable across 1/3/4 workers"
                   : "CSV bytes changed under reruns or worker counts"};
}

// criterion 10: lemma-3 scaled max strictly decreasing over four decades and
// below 10 c / n for the bounded-gamma structures.
Outcome criterion_10(const Options& opt, const ex::Fixtures&) {
    const std::vector<std::size_t> ns{100, 1000, 10000, 100000};
    std::string detail;
    bool ok = true;
    std::uint64_t stream_id = 100;
    for (const ErrorStructure1D& es : {ou_gauss(), weighted_uniform(0.5)}) {
        const auto reports = lemma3_diagnostic(es, ns, 300, {opt.seed, stream_id}, opt.workers);
        stream_id += ns.size() + 1;
        detail += es.name + ":";
        for (std::size_t i = 0; i < ns.size(); ++i) {
            detail += " " + fmt(reports[i].mean);
            if (i > 0 && !(reports[i].mean < reports[i - 1].mean)) ok = false;
            if (!(reports[i].mean <= 10.0 * es.c / static_cast<double>(ns[i]))) ok = false;
        }
        detail += "; ";
    }
    return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
    Options opt;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        auto next = [&]() -> std::string {
            if (i + 1 >= argc) {
                std::fprintf(stderr, "missing value for %s\n", arg.c_str());
                std::exit(2);
            }
            return argv[++i];
        };
        if (arg == "--criterion")
            opt.criterion = std::atoi(next().c_str());
        else if (arg == "--fixtures")
            opt.fixtures_path = next();
        else if (arg == "--seed")
            opt.seed = std::strtoull(next().c_str(), nullptr, 10);
        else if (arg == "--workers")
            opt.workers = static_cast<unsigned>(std::atoi(next().c_str()));
        else {
            std::fprintf(stderr,
                         "usage: acceptance [--criterion K] [--fixtures PATH] [--seed S] "
                         "[--workers W]\n");
            return 2;
        }
    }

    ex::Fixtures fx;
    try {
        fx = ex::load_fixtures(opt.fixtures_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "acceptance: %s\n", e.what());
        return 2;
    }

    using Criterion = std::function<Outcome(const Options&, const ex::Fixtures&)>;
    const std::vector<std::pair<std::string, Criterion>> criteria = {
        {"sharp/gamma identity (1e-12, both structures)",
         [](const Options& o, const ex::Fixtures&) { return criterion_1(o); }},
        {"pairwise gamma vs chain rule (1e-12, 1e4 cases)",
         [](const Options& o, const ex::Fixtures&) { return criterion_2(o); }},
        {"cylindrical form limit, ou_gauss sin(x(1))", criterion_3},
        {"argmax identities: E[Sigma] and oracle E[tau]", criterion_4},
        {"quadratic growth: E[max^2] and eq4 tails", criterion_5},
        {"prop2 sum map vs displayed three-term limit", criterion_6},
        {"asymptotic independence and product form", criterion_7},
        {"structure independence (criteria 3-5, weighted_uniform)", criterion_8},
        {"determinism: byte-identical CSV across workers", criterion_9},
        {"lemma3 scaled max decreasing, bounded by 10c/n", criterion_10},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int index = static_cast<int>(i) + 1;
        if (opt.criterion != 0 && opt.criterion != index) continue;
        Outcome out;
        try {
            out = criteria[i].second(opt, fx);
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        std::printf("[%s] criterion %d: %s — %s\n", out.pass ? "PASS" : "FAIL", index,
                    criteria[i].first.c_str(), out.detail.c_str());
        std::fflush(stdout);
        if (!out.pass) ++failures;
    }
    return failures;
}
