#include <catch2/catch.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "donsker/error_structure.hpp"
#include "donsker/montecarlo.hpp"
#include "donsker/rng.hpp"
#include "donsker/walk.hpp"
#include "test_support.hpp"

using namespace donsker;

TEST_CASE("estimate: constant sampler") {
    const EstimateReport r = estimate([](Stream&) { return 1.0; }, 100, {1, 0});
    REQUIRE(r.mean == 1.0);
    REQUIRE(r.std_error == 0.0);
    REQUIRE(r.ci_lo == 1.0);
    REQUIRE(r.ci_hi == 1.0);
    REQUIRE(r.count == 100);
}

TEST_CASE("estimate: standard normal mean within the 4-sigma CLT band") {
    const EstimateReport r =
        estimate([](Stream& s) { return s.next_normal(); }, 1000000, {2, 0});
    REQUIRE(std::abs(r.mean) < 4e-3);
    REQUIRE(r.std_error == Approx(1e-3).epsilon(0.05));
}

TEST_CASE("estimate is bit-identical across worker counts") {
    auto sampler = [](Stream& s) {
        double acc = 0.0;
        for (int i = 0; i < 16; ++i) acc += s.next_normal() * s.next_u01();
        return acc;
    };
    const EstimateReport r1 = estimate(sampler, 30000, {42, 7}, 1);
    const EstimateReport r8 = estimate(sampler, 30000, {42, 7}, 8);
    REQUIRE(r1.mean == r8.mean);
    REQUIRE(r1.std_error == r8.std_error);
    REQUIRE(r1.ci_lo == r8.ci_lo);
    REQUIRE(r1.ci_hi == r8.ci_hi);
}

TEST_CASE("estimate rejects count < 2 and non-finite samples") {
    REQUIRE_THROWS_AS(estimate([](Stream&) { return 1.0; }, 1, {1, 0}),
                      std::invalid_argument);
    std::uint64_t hits = 0;
    auto nan_at_7 = [&hits](Stream&) {
        return (hits++ == 7) ? std::nan("") : 0.5;
    };
    try {
        (void)estimate(nan_at_7, 100, {3, 5}, 1);
        FAIL("expected a fatal data error");
    } catch (const std::runtime_error& e) {
        REQUIRE(std::string(e.what()).find("index 7") != std::string::npos);
        REQUIRE(std::string(e.what()).find("stream 5") != std::string::npos);
    }
}

TEST_CASE("merging block partials reproduces the estimate exactly") {
    auto sampler = [](Stream& s) { return s.next_normal() * s.next_normal(); };
    const SeedSpec seed{9, 2};
    const std::uint64_t count = 5000;
    const std::vector<double> values = sample_column(sampler, count, seed);

    // Rebuild the fixed-block reduction by hand and fold in block order.
    std::vector<MomentAccumulator> blocks((count + 1023) / 1024);
    for (std::uint64_t i = 0; i < count; ++i) blocks[i / 1024].add(values[i]);
    MomentAccumulator merged;
    for (const auto& b : blocks) merged.merge(b);

    const EstimateReport r = estimate(sampler, count, seed, 4);
    REQUIRE(r.mean == merged.mean());
    REQUIRE(r.std_error == merged.std_error());
}

TEST_CASE("estimate_many shares one stream across components") {
    auto sampler = [](Stream& s, std::span<double> out) {
        const double x = s.next_normal();
        out[0] = x;
        out[1] = x * x;
    };
    const auto reports = estimate_many(sampler, 2, 40000, {11, 0});
    REQUIRE(std::abs(reports[0].mean) < 4.0 * reports[0].std_error);
    REQUIRE(std::abs(reports[1].mean - 1.0) < 4.0 * reports[1].std_error);
}

TEST_CASE("ui_diagnostic: quadrature bound matches the closed form") {
    const std::vector<double> empty_tail{1.0, 2.0, 3.0};
    for (const double sigma : {1.0, 2.0}) {
        for (const double mult : {8.0, 16.0, 32.0}) {
            const double alpha = mult * sigma * sigma;
            const TailDiagnostic d = ui_diagnostic(empty_tail, alpha, sigma);
            REQUIRE(d.eq4_bound ==
                    Approx(test::eq4_bound_closed_form(alpha, sigma)).epsilon(1e-9));
        }
    }
    // sigma = 1, alpha = 8: value fixed from the closed-form oracle
    const TailDiagnostic d8 = ui_diagnostic(empty_tail, 8.0, 1.0);
    REQUIRE(d8.eq4_bound == Approx(4.57925).margin(2e-4));
}

TEST_CASE("ui_diagnostic: tail behavior and argument validation") {
    const std::vector<double> small{1.0, 2.0, 7.9};
    const TailDiagnostic d = ui_diagnostic(small, 8.0, 1.0);
    REQUIRE(d.tail_mean == 0.0);  // all samples below alpha

    const std::vector<double> mixed{1.0, 10.0, 2.0, 20.0};
    const TailDiagnostic dm = ui_diagnostic(mixed, 8.0, 1.0);
    REQUIRE(dm.tail_mean == Approx((10.0 + 20.0) / 4.0));

    // bound decreases to 0 as alpha grows
    const double b8 = ui_diagnostic(small, 8.0, 1.0).eq4_bound;
    const double b16 = ui_diagnostic(small, 16.0, 1.0).eq4_bound;
    const double b32 = ui_diagnostic(small, 32.0, 1.0).eq4_bound;
    REQUIRE(b16 < b8);
    REQUIRE(b32 < b16);
    REQUIRE(ui_diagnostic(small, 1e6, 1.0).eq4_bound == 0.0);

    REQUIRE_THROWS_AS(ui_diagnostic(small, 7.9, 1.0), std::invalid_argument);
}

TEST_CASE("tail of the walk sup norm squared respects the eq4 bound") {
    const ErrorStructure1D es = ou_gauss();
    const std::size_t n = 500;
    auto zsq = sample_column(
        [&es, n](Stream& s) {
            const auto draws = sample_increments(es, n, s);
            const auto [path, sharp] = build_path(draws, es);
            const double z = path_statistics(path).sup_norm;
            return z * z;
        },
        4000, {77, 0});
    for (const double alpha : {8.0, 16.0, 32.0}) {
        const TailDiagnostic d = ui_diagnostic(zsq, alpha, 1.0);
        REQUIRE(d.tail_mean <= d.eq4_bound + 3.0 * d.tail_std_error);
    }
}

TEST_CASE("lemma3_diagnostic: constant gamma gives exactly 1/n") {
    const std::vector<std::size_t> ns{10, 100};
    const auto reports = lemma3_diagnostic(ou_gauss(), ns, 50, {5, 0});
    REQUIRE(reports[0].mean == Approx(0.1).epsilon(1e-15));
    REQUIRE(reports[0].std_error == 0.0);
    REQUIRE(reports[1].mean == Approx(0.01).epsilon(1e-15));
}

TEST_CASE("lemma3_diagnostic: bounded gamma is dominated by sup(gamma)/n") {
    const double kappa = 0.5;
    const std::vector<std::size_t> ns{10, 100, 1000};
    const auto reports = lemma3_diagnostic(weighted_uniform(kappa), ns, 200, {6, 0});
    for (std::size_t i = 0; i < ns.size(); ++i) {
        REQUIRE(reports[i].mean <= 3.0 * kappa / static_cast<double>(ns[i]) + 1e-15);
        REQUIRE(reports[i].mean > 0.0);
    }
}

TEST_CASE("lemma3_diagnostic: unbounded L1 gamma decreases to zero") {
    // gamma(x) = ln(sqrt(3)/|x|) on the uniform structure: unbounded near 0,
    // exponential tail, c = 1.
    ErrorStructure1D es = weighted_uniform(0.5);
    es.name = "log_edge";
    es.gamma = [](double x) {
        const double a = std::abs(x);
        return a == 0.0 ? 50.0 : std::max(0.0, std::log(std::sqrt(3.0) / a));
    };
    es.c = 1.0;
    const std::vector<std::size_t> ns{100, 1000, 10000};
    const auto reports = lemma3_diagnostic(es, ns, 400, {8, 0});
    REQUIRE(reports[0].mean > reports[1].mean);
    REQUIRE(reports[1].mean > reports[2].mean);
    REQUIRE(reports[2].mean < 0.01);

    REQUIRE_THROWS_AS(lemma3_diagnostic(es, std::vector<std::size_t>{100, 100}, 10, {8, 0}),
                      std::invalid_argument);
}
