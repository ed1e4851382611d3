// Command-line runner for configured experiments.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "neinfer/error.hpp"
#include "neinfer/harness.hpp"

namespace {

struct Options {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<std::size_t> stride;
};

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config, "case configuration (JSON)")->required();
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--seed", o.seed, "override the case seed");
    cmd->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--stride", o.stride, "time decimation for loss evaluation")
        ->check(CLI::PositiveNumber);
}

neinfer::CaseConfig load(const Options& o) {
    auto c = neinfer::load_case_config(o.config);
    if (o.seed) c.seed = *o.seed;
    if (o.workers) c.workers = *o.workers;
    if (o.stride) c.stride = *o.stride;
    c.validate();
    return c;
}

void report(const neinfer::RunSummary& s) {
    if (s.nei_ran) {
        std::printf("subsets evaluated: %llu\n", (unsigned long long)s.subsets_evaluated);
        std::printf("prior coverage: %.4f\n", s.prior_coverage);
        std::printf("sigma (%s): %.6g\n", s.sigma_auto ? "auto" : "fixed", s.sigma);
        std::printf("posterior subsets: %zu, union: %zu, band coverage: %.4f\n",
                    s.posterior_subsets, s.union_members.size(), s.band_coverage);
        std::printf("NEI forward runs: %zu history + %zu prediction\n", s.nei_history_runs,
                    s.nei_prediction_runs);
    }
    if (s.esmda_ran) {
        std::printf("ESMDA: %zu assimilations, %zu forward runs, mean misfit %.6g -> %.6g\n",
                    s.esmda_assimilations, s.esmda_runs, s.esmda_trace.front().mean,
                    s.esmda_trace.back().mean);
    }
}

int generate_priors(const Options& o) {
    const auto c = load(o);
    const auto ens = neinfer::acquire_priors(c);
    const auto dir = std::filesystem::path(o.out) / "priors";
    std::filesystem::create_directories(dir);
    neinfer::write_realizations(dir, c.grid(), ens.realizations,
                                ens.truth ? &*ens.truth : nullptr);
    std::printf("wrote %zu realisations%s to %s\n", ens.realizations.size(),
                ens.truth ? " and truth" : "", dir.string().c_str());
    return 0;
}

int simulate(const Options& o) {
    const auto c = load(o);
    const auto model = c.forward_model();
    const auto ens = neinfer::acquire_priors(c);
    const std::size_t horizon = c.history_steps + c.prediction_steps;
    neinfer::RunCounter counter;
    const auto runs = neinfer::run_ensemble(*model, ens.realizations, horizon, c.workers, &counter);
    const auto dir = std::filesystem::path(o.out) / "responses";
    std::filesystem::create_directories(dir);
    const auto names = model->series_names();
    for (std::size_t r = 0; r < runs.size(); ++r) {
        char file[32];
        std::snprintf(file, sizeof file, "prior_%04zu.csv", r);
        neinfer::write_responses_csv(dir / file, runs[r].series, names, horizon);
    }
    if (ens.truth) {
        const auto truth = model->run(*ens.truth, horizon);
        neinfer::write_responses_csv(dir / "truth.csv", truth.series, names, horizon);
    }
    std::printf("simulated %zu realisations over %zu steps\n", counter.value(), horizon);
    return 0;
}

int run(const Options& o, const neinfer::RunStages& stages) {
    const auto c = load(o);
    const auto bundle = neinfer::run_case(c, stages);
    neinfer::export_bundle(bundle, o.out);
    report(bundle.summary);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nonlinear expectation inference for well-response history matching"};
    app.require_subcommand(1);
    Options o;
    auto* gen = app.add_subcommand("generate-priors", "generate or ingest the prior ensemble");
    auto* sim = app.add_subcommand("simulate", "forward-simulate the priors and the truth");
    auto* nei = app.add_subcommand("nei", "NEI inference over the history period");
    auto* esm = app.add_subcommand("esmda", "ESMDA baseline");
    auto* pre = app.add_subcommand("predict", "NEI inference plus prediction");
    auto* all = app.add_subcommand("run", "full pipeline");
    for (auto* cmd : {gen, sim, nei, esm, pre, all}) add_common(cmd, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 4;
    }

    try {
        if (gen->parsed()) return generate_priors(o);
        if (sim->parsed()) return simulate(o);
        if (nei->parsed()) return run(o, {true, false, false});
        if (esm->parsed()) return run(o, {false, false, true});
        if (pre->parsed()) return run(o, {true, true, false});
        return run(o, {true, true, true});
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return neinfer::exit_code_for(e);
    }
}
