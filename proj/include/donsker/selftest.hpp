#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "donsker/experiments.hpp"

namespace donsker::experiments {

// Exact invariants executed as a pass/fail battery. All checks are
// seed-independent properties; cfg.seed only picks the sample points.
// Returns the number of failed checks.
inline int run_selftest(const ExperimentConfig& cfg, std::ostream& log) {
    int failures = 0;
    auto check = [&](const std::string& name, const std::function<std::string()>& body) {
        std::string detail;
        try {
            detail = body();
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        if (detail.empty()) {
            log << "PASS " << name << "\n";
        } else {
            log << "FAIL " << name << ": " << detail << "\n";
            ++failures;
        }
    };

    check("walk.gamma_pair_vs_chain_rule", [&]() -> std::string {
        Stream s = derive_stream(cfg.seed, 101, 0);
        double worst = 0.0;
        for (int rep = 0; rep < 1000; ++rep) {
            const ErrorStructure1D es =
                (rep % 2 == 0) ? ou_gauss() : weighted_uniform(cfg.kappa);
            const std::size_t n = 2 + s.next_u64() % 200;
            const auto draws = sample_increments(es, n, s);
            const auto [path, sharp] = build_path(draws, es);
            const double a = s.next_u01(), b = s.next_u01();
            const double lhs = gamma_pair(path, a, b);
            // coordinate-partial route
            CompensatedSum acc;
            for (std::size_t k = 1; k <= n; ++k)
                acc.add(coordinate_weight(n, a, k) * coordinate_weight(n, b, k) *
                        path.gammas[k - 1]);
            const double rhs = acc.value();
            worst = std::max(worst,
                             std::abs(lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)}));
        }
        if (worst > 1e-12) return "max relative deviation " + detail::fmt_double(worst);
        return "";
    });

    check("functionals.sharp_identity", [&]() -> std::string {
        Stream s = derive_stream(cfg.seed, 102, 0);
        double worst = 0.0;
        for (int rep = 0; rep < 500; ++rep) {
            const ErrorStructure1D es =
                (rep % 2 == 0) ? ou_gauss() : weighted_uniform(cfg.kappa);
            const std::size_t n = 2 + s.next_u64() % 128;
            const auto draws = sample_increments(es, n, s);
            const auto [path, sharp] = build_path(draws, es);
            const std::size_t atom_count = 1 + s.next_u64() % 5;
            std::vector<MeasureAtom> atoms(atom_count);
            for (auto& a : atoms) a = {s.next_u01(), s.next_uniform(-2.0, 2.0)};
            const DiscreteMeasure measure = make_measure(std::move(atoms));
            const PathFunctional F{
                "random_atoms",
                [](const PathView&) { return 0.0; },
                [measure](const PathView&) { return measure; },
                std::numeric_limits<double>::infinity(),
            };
            const double gamma = gamma_of_functional(F, path);
            const double copy_sq = sharp_copy_expectation(F, path);
            worst = std::max(worst, std::abs(gamma - copy_sq) /
                                        std::max({1.0, std::abs(gamma), std::abs(copy_sq)}));
        }
        if (worst > 1e-12) return "max relative deviation " + detail::fmt_double(worst);
        return "";
    });

    check("wiener.gamma0_agreement", [&]() -> std::string {
        Stream s = derive_stream(cfg.seed, 103, 0);
        for (int rep = 0; rep < 100; ++rep) {
            const std::size_t p = 1 + s.next_u64() % 3;
            std::vector<double> times(p);
            for (auto& t : times) t = s.next_u01();
            std::sort(times.begin(), times.end());
            bool strict = true;
            for (std::size_t i = 1; i < p; ++i)
                if (times[i] <= times[i - 1]) strict = false;
            if (!strict) continue;
            std::vector<double> weights(p);
            for (auto& w : weights) w = s.next_uniform(-2.0, 2.0);
            CylindricalFunctional cyl{
                times,
                [weights](std::span<const double> x) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < weights.size(); ++i) acc += weights[i] * x[i];
                    return acc;
                },
                [weights](std::span<const double>) { return weights; },
            };
            const PathFunctional F = make_cylindrical(cyl, 100.0, "selftest_linear");
            const BrownianGrid b = sample_brownian(1.0, 1.0 + s.next_u01(), 64, s);
            const double via_atoms = gamma0_lemma2(F, b);
            const double via_grad = gamma0_cylindrical(cyl, b);
            if (std::abs(via_atoms - via_grad) >
                1e-12 * std::max({1.0, std::abs(via_atoms), std::abs(via_grad)}))
                return "atomic and gradient routes disagree: " + detail::fmt_double(via_atoms) +
                       " vs " + detail::fmt_double(via_grad);
        }
        return "";
    });

    check("montecarlo.worker_determinism", [&]() -> std::string {
        auto sampler = [](Stream& stream) {
            double acc = 0.0;
            for (int i = 0; i < 8; ++i) acc += stream.next_normal();
            return acc * acc;
        };
        const EstimateReport r1 = estimate(sampler, 4000, {cfg.seed, 104}, 1);
        const EstimateReport r4 = estimate(sampler, 4000, {cfg.seed, 104}, 4);
        if (r1.mean != r4.mean || r1.std_error != r4.std_error)
            return "estimate changed under worker count";
        return "";
    });

    check("experiments.csv_determinism", [&]() -> std::string {
        ExperimentConfig mini = cfg;
        mini.experiment = ExperimentKind::thm1;
        mini.functional = "max";
        mini.n_list = {50};
        mini.samples = 500;
        mini.m = 128;
        mini.workers = 1;
        const std::string a = to_csv(run_thm1(mini));
        mini.workers = 4;
        const std::string b = to_csv(run_thm1(mini));
        if (a != b) return "CSV bytes changed under worker count";
        const std::string c = to_csv(run_thm1(mini));
        if (b != c) return "CSV bytes changed between reruns";
        return "";
    });

    check("walk.argmax_tie_break", [&]() -> std::string {
        // two equal maxima: the first index must win
        std::vector<CoordinateDraw> draws = {{1.0, 0.0}, {-1.0, 0.0}, {1.0, 0.0}};
        const auto [path, sharp] = build_path(draws, ou_gauss());
        const PathStatistics st = path_statistics(path);
        if (st.argmax_t != 1.0 / 3.0) return "expected first maximizing node";
        return "";
    });

    check("experiments.fixtures_integrity", [&]() -> std::string {
        if (cfg.fixtures_path.empty()) return "no fixtures path configured";
        Fixtures fx;
        try {
            fx = load_fixtures(cfg.fixtures_path);
        } catch (const std::exception& e) {
            return e.what();
        }
        for (const std::string name : {"e_sigma", "e_tau", "e_tau_min_sigma", "e_signed_cross",
                                       "e_max_sq", "e_absmax_sq"}) {
            const auto it = fx.entries.find(name);
            if (it == fx.entries.end()) return "missing constant '" + name + "'";
            if (!(it->second.std_error > 0.0)) return "constant '" + name + "' has no stderr";
        }
        if (fx.m == 0 || fx.paths == 0) return "missing grid/path metadata";
        // registered values must sit on top of the exact symmetry constants
        const FixtureEntry& sigma = fx.at("e_sigma");
        if (std::abs(sigma.value - 0.5) > 5.0 * sigma.std_error)
            return "e_sigma is off the exact value 1/2";
        const FixtureEntry& max_sq = fx.at("e_max_sq");
        if (std::abs(max_sq.value - 1.0) > 5.0 * max_sq.std_error)
            return "e_max_sq is off the exact value 1";
        return "";
    });

    return failures;
}

}  // namespace donsker::experiments
