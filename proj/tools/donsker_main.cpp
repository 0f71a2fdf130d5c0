// Experiment CLI: one subcommand per experiment plus the Brownian oracle that
// regenerates the fixtures file. Flag values override the config file.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "donsker/experiments.hpp"
#include "donsker/selftest.hpp"

#ifndef DONSKER_DEFAULT_FIXTURES
#define DONSKER_DEFAULT_FIXTURES "tests/fixtures/brownian_oracle.txt"
#endif

namespace dexp = donsker::experiments;

namespace {

struct CliOverrides {
    std::string config_path;
    std::string structure;
    double kappa = 0.0;
    std::string functional;
    std::string y_name;
    std::string z_name;
    std::string psi_name;
    std::string n_list;
    std::uint64_t samples = 0;
    std::uint64_t m = 0;
    std::uint64_t seed = 0;
    unsigned workers = 0;
    std::string out;
    std::string format;
    std::string fixtures;
    std::uint64_t oracle_paths = 0;
};

dexp::ExperimentConfig build_config(const CLI::App& app, const CliOverrides& ov,
                                   dexp::ExperimentKind kind) {
    dexp::ExperimentConfig cfg;
    if (!ov.config_path.empty()) cfg = dexp::load_config(ov.config_path);
    cfg.experiment = kind;

    auto set_if = [&app](const std::string& flag, auto apply) {
        if (app.count(flag) > 0) apply();
    };
    set_if("--structure", [&] { cfg.structure = ov.structure; });
    set_if("--kappa", [&] { cfg.kappa = ov.kappa; });
    set_if("--functional", [&] { cfg.functional = ov.functional; });
    set_if("--y", [&] { cfg.y_name = ov.y_name; });
    set_if("--z", [&] { cfg.z_name = ov.z_name; });
    set_if("--psi", [&] { cfg.psi_name = ov.psi_name; });
    set_if("--n", [&] { dexp::apply_config_entry(cfg, "n_list", ov.n_list); });
    set_if("--samples", [&] { cfg.samples = ov.samples; });
    set_if("--m", [&] { cfg.m = static_cast<std::size_t>(ov.m); });
    set_if("--seed", [&] { cfg.seed = ov.seed; });
    set_if("--workers", [&] { cfg.workers = ov.workers; });
    set_if("--out", [&] { cfg.out = ov.out; });
    set_if("--format", [&] { cfg.format = ov.format; });
    set_if("--fixtures", [&] { cfg.fixtures_path = ov.fixtures; });
    if (cfg.fixtures_path.empty()) cfg.fixtures_path = DONSKER_DEFAULT_FIXTURES;
    return cfg;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write output file '" + path + "'");
    out << text;
}

int emit_rows(const dexp::ExperimentConfig& cfg, const std::vector<dexp::ResultRow>& rows) {
    write_text(cfg.out, cfg.format == "json" ? dexp::to_json(rows) : dexp::to_csv(rows));
    return 0;
}

int run(const dexp::ExperimentConfig& cfg) {
    using dexp::ExperimentKind;
    switch (cfg.experiment) {
        case ExperimentKind::prop1:
            return emit_rows(cfg, dexp::run_prop1(cfg));
        case ExperimentKind::thm1:
            return emit_rows(cfg, dexp::run_thm1(cfg));
        case ExperimentKind::thm2:
            return emit_rows(cfg, dexp::run_thm2(cfg, dexp::load_fixtures(cfg.fixtures_path)));
        case ExperimentKind::application:
            return emit_rows(cfg, dexp::run_application(cfg, dexp::load_fixtures(cfg.fixtures_path)));
        case ExperimentKind::prop2:
            return emit_rows(cfg, dexp::run_prop2(cfg));
        case ExperimentKind::prop3:
            return emit_rows(cfg, dexp::run_prop3(cfg));
        case ExperimentKind::thm3:
            return emit_rows(cfg, dexp::run_thm3(cfg));
        case ExperimentKind::diagnostics:
            return emit_rows(cfg, dexp::run_diagnostics(cfg));
        case ExperimentKind::selftest: {
            const int failures = dexp::run_selftest(cfg, std::cout);
            if (failures > 0)
                std::cout << failures << " check(s) failed" << std::endl;
            return failures == 0 ? 0 : 1;
        }
    }
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Erroneous random walks, their Dirichlet forms, and the Ornstein-Uhlenbeck limit"};
    app.require_subcommand(1);
    app.fallthrough();

    CliOverrides ov;
    app.add_option("--config", ov.config_path, "flat key = value config file");
    app.add_option("--structure", ov.structure, "ou_gauss | weighted_uniform");
    app.add_option("--kappa", ov.kappa, "weighted_uniform gamma scale");
    app.add_option("--functional", ov.functional,
                   "max | supnorm | coordinate(t) | cylindrical(sin1) | sum2(s,t) | prop2(sum)");
    app.add_option("--y", ov.y_name, "prop3/thm3 variable: u1 | sin_u1 | bounded");
    app.add_option("--z", ov.z_name, "thm3 weight: one | gauss_u2");
    app.add_option("--psi", ov.psi_name, "prop3/thm3 cylindrical: cos1 | sin1 | ...");
    app.add_option("--n", ov.n_list, "walk sizes, comma separated");
    app.add_option("--samples", ov.samples, "Monte Carlo sample count");
    app.add_option("--m", ov.m, "Brownian grid resolution");
    app.add_option("--seed", ov.seed, "master seed");
    app.add_option("--workers", ov.workers, "worker threads (0 = hardware)");
    app.add_option("--out", ov.out, "output path (default stdout)");
    app.add_option("--format", ov.format, "csv | json");
    app.add_option("--fixtures", ov.fixtures, "Brownian oracle fixtures file");
    app.add_option("--paths", ov.oracle_paths, "oracle: number of Brownian paths");

    for (const auto& [name, kind] : dexp::experiment_names())
        app.add_subcommand(name, "run the " + name + " experiment");
    CLI::App* oracle =
        app.add_subcommand("oracle", "regenerate the Brownian oracle fixtures file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (oracle->parsed()) {
            const dexp::ExperimentConfig cfg =
                build_config(app, ov, dexp::ExperimentKind::selftest);
            const std::uint64_t m = app.count("--m") > 0 ? ov.m : 100000;
            const std::uint64_t paths = app.count("--paths") > 0 ? ov.oracle_paths : 100000;
            const dexp::Fixtures fx = dexp::run_oracle(cfg.seed, m, paths, cfg.workers);
            std::ostringstream text;
            dexp::write_fixtures(fx, text);
            write_text(cfg.out.empty() ? cfg.fixtures_path : cfg.out, text.str());
            std::cerr << "wrote fixtures (m = " << m << ", paths = " << paths << ", seed = "
                      << cfg.seed << ")\n";
            return 0;
        }
        for (const auto& [name, kind] : dexp::experiment_names()) {
            if (app.get_subcommand(name)->parsed())
                return run(build_config(app, ov, kind));
        }
        std::cerr << "no subcommand selected\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
