#include "neinfer/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <json.hpp>

#include "neinfer/error.hpp"

namespace neinfer {

Observation make_synthetic_obs(const ForwardRun& truth_run, std::size_t n_steps,
                               std::span<const double> relative_std, std::uint64_t seed,
                               double band_width) {
    if (truth_run.n_steps < n_steps || n_steps == 0) {
        throw InvalidArgument("make_synthetic_obs: truth run shorter than the observed horizon");
    }
    const std::size_t ns = truth_run.series.size() / truth_run.n_steps;
    if (relative_std.size() != ns) throw InvalidArgument("make_synthetic_obs: one noise level per series");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<double> d(ns * n_steps), noise(ns * n_steps);
    for (std::size_t s = 0; s < ns; ++s) {
        if (!(relative_std[s] >= 0.0)) throw InvalidArgument("make_synthetic_obs: noise must be >= 0");
        for (std::size_t t = 0; t < n_steps; ++t) {
            const double v = truth_run.series[s * truth_run.n_steps + t];
            const double scale = relative_std[s] * std::abs(v);
            const double z = normal(rng);
            d[s * n_steps + t] = v + scale * z;
            noise[s * n_steps + t] = scale;
        }
    }
    return Observation::with_band(std::move(d), std::move(noise), band_width, n_steps);
}

Observation make_synthetic_obs(const RockRealization& truth, const ForwardModel& model,
                               std::size_t n_steps, std::span<const double> relative_std,
                               std::uint64_t seed, double band_width) {
    return make_synthetic_obs(model.run(truth, n_steps), n_steps, relative_std, seed, band_width);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return realization_seed(seed, std::size_t(tag));
}

Ensemble acquire_priors(const CaseConfig& config) {
    const Grid grid = config.grid();
    if (config.rock_source == CaseConfig::RockSource::Ingest) {
        Ensemble e = load_realizations(config.ingest_path, grid, config.porosity);
        if (!e.truth) {
            throw ConfigError("ingested ensemble '" + config.ingest_path.string() +
                              "' has no truth entry to generate observations from");
        }
        return e;
    }
    const std::size_t total = config.prior_count + (config.generate_truth ? 1 : 0);
    const auto fields =
        sample_gaussian_field(grid, config.variogram, config.seed, total, config.sampler);
    Ensemble e;
    for (std::size_t i = 0; i < config.prior_count; ++i) {
        e.realizations.push_back(h_to_perm(fields[i], config.porosity));
        char name[32];
        std::snprintf(name, sizeof name, "prior_%04zu", i);
        e.names.push_back(name);
    }
    if (config.generate_truth) e.truth = h_to_perm(fields.back(), config.porosity);
    e.provenance = "generated: " + to_string(config.variogram.model) + " variogram, seed " +
                   std::to_string(config.seed);
    return e;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename Fn>
auto in_stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const CoverageGateFailure&) {
        throw;
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what(), classify(e));
    }
}

}  // namespace

RunBundle run_case(const CaseConfig& config, const RunStages& stages) {
    const auto t_start = Clock::now();
    RunBundle b;
    RunSummary& s = b.summary;
    s.case_name = config.name;
    s.history_steps = config.history_steps;
    s.prediction_steps = config.prediction_steps;
    s.k_max = config.k_max;

    const auto model = in_stage("config", [&] {
        config.validate();
        return config.forward_model();
    });
    s.series = model->series_names();
    const std::size_t horizon = config.history_steps + config.prediction_steps;

    auto t0 = Clock::now();
    const Ensemble priors = in_stage("priors", [&] { return acquire_priors(config); });
    s.n_priors = priors.realizations.size();
    s.timings.priors = seconds_since(t0);

    in_stage("observe", [&] {
        b.truth_run = model->run(*priors.truth, horizon);
        s.truth_runs = 1;
        b.observation = make_synthetic_obs(b.truth_run, config.history_steps,
                                           config.series_noise(s.series),
                                           derive_seed(config.seed, kNoiseSeedTag), config.band_width);
    });

    if (stages.nei) {
        s.nei_ran = true;
        RunCounter history_runs;
        t0 = Clock::now();
        const auto runs = in_stage("simulate", [&] {
            return run_ensemble(*model, priors.realizations, config.history_steps, config.workers,
                                &history_runs);
        });
        b.prior_responses = ResponseEnsemble::from_runs(runs, s.series);
        s.nei_history_runs = history_runs.value();
        s.timings.forward_history = seconds_since(t0);

        t0 = Clock::now();
        in_stage("gate", [&] {
            b.prior_envelope = prior_envelope(b.prior_responses, config.k_max);
            s.prior_coverage = coverage_check(b.prior_envelope, b.observation);
            if (s.prior_coverage < config.gate_threshold) {
                char msg[160];
                std::snprintf(msg, sizeof msg,
                              "[gate] observation lies outside the prior envelope (coverage %.4f < "
                              "%.4f): introduce more prior realisations",
                              s.prior_coverage, config.gate_threshold);
                throw CoverageGateFailure(msg, s.prior_coverage);
            }
        });

        const SelectOptions select{config.stride, config.workers};
        s.sigma = in_stage("sigma", [&] {
            if (config.sigma) return *config.sigma;
            s.sigma_auto = true;
            SigmaSearchOptions opts;
            opts.grid_points = config.sigma_grid_points;
            opts.select = select;
            return auto_sigma(b.prior_responses, b.observation, config.k_max,
                              config.coverage_target, opts)
                .sigma;
        });

        in_stage("select", [&] {
            b.selection = select_posterior(b.prior_responses, b.observation, s.sigma, config.k_max, select);
            s.subsets_evaluated = b.selection->evaluated;
            s.posterior_subsets = b.selection->size();
            if (b.selection->empty()) {
                throw Error("no subset has loss below sigma = " + std::to_string(s.sigma));
            }
            b.posterior_envelope = posterior_envelope(b.prior_responses, *b.selection);
            s.band_coverage = band_coverage(*b.posterior_envelope, b.observation);
            s.union_members = posterior_union(*b.selection);
        });
        s.timings.expectations = seconds_since(t0);

        if (stages.predict) {
            t0 = Clock::now();
            RunCounter prediction_runs;
            std::vector<ModelState> states;
            for (const auto& r : runs) states.push_back(r.final_state);
            b.prediction = in_stage("predict", [&] {
                return predict(*b.selection, b.prior_responses, priors.realizations, states, *model,
                               config.prediction_steps, config.workers, &prediction_runs);
            });
            s.nei_prediction_runs = prediction_runs.value();
            s.timings.prediction = seconds_since(t0);
        }
    }

    if (stages.esmda && config.esmda) {
        t0 = Clock::now();
        EsmdaConfig ec = *config.esmda;
        ec.seed = derive_seed(config.seed, kEsmdaSeedTag);
        RunCounter esmda_runs;
        b.esmda = in_stage("esmda", [&] {
            return run_esmda(*model, priors.realizations, b.observation, ec, config.history_steps,
                             config.prediction_steps, config.workers, &esmda_runs);
        });
        s.esmda_ran = true;
        s.esmda_assimilations = ec.assimilations;
        s.esmda_runs = esmda_runs.value();
        s.esmda_trace = b.esmda->trace;
        s.timings.esmda = seconds_since(t0);
    }
    s.timings.total = seconds_since(t_start);
    return b;
}

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    return out;
}

}  // namespace

void write_responses_csv(const std::filesystem::path& path, std::span<const double> row,
                         const std::vector<std::string>& series, std::size_t n_steps) {
    auto out = open_out(path);
    out << "step";
    for (const auto& name : series) out << ',' << name;
    out << '\n';
    for (std::size_t t = 0; t < n_steps; ++t) {
        out << t;
        for (std::size_t k = 0; k < series.size(); ++k) out << ',' << num(row[k * n_steps + t]);
        out << '\n';
    }
}

void write_envelope_csv(const std::filesystem::path& path, const Envelope& envelope,
                        const std::vector<std::string>& series, std::size_t n_steps,
                        const Observation* obs, std::size_t obs_steps) {
    if (envelope.lower.size() != series.size() * n_steps) {
        throw InvalidArgument("write_envelope_csv: envelope width mismatch");
    }
    auto out = open_out(path);
    out << "well,step,lower,upper,d_obs,band_lower,band_upper\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        for (std::size_t t = 0; t < n_steps; ++t) {
            const std::size_t c = k * n_steps + t;
            out << series[k] << ',' << t << ',' << num(envelope.lower[c]) << ','
                << num(envelope.upper[c]);
            if (obs && t < obs_steps) {
                const std::size_t o = k * obs_steps + t;
                out << ',' << num(obs->d_obs[o]) << ',' << num(obs->band_lower[o]) << ','
                    << num(obs->band_upper[o]);
            } else {
                out << ",,,";
            }
            out << '\n';
        }
    }
}

void write_selection(const std::filesystem::path& path, const SubsetSelection& selection,
                     double coverage) {
    auto out = open_out(path);
    out << "# sigma=" << num(selection.sigma) << " k_max=" << selection.k_max
        << " coverage=" << num(coverage) << " subsets=" << selection.size()
        << " evaluated=" << selection.evaluated << '\n';
    for (const auto& e : selection.entries) {
        out << e.subset.size();
        for (auto m : e.subset.members()) out << ", " << m;
        out << ", " << num(e.loss) << '\n';
    }
}

void write_misfit_csv(const std::filesystem::path& path, const std::vector<MisfitStats>& trace) {
    auto out = open_out(path);
    out << "iteration,mean_misfit,min,max\n";
    for (const auto& m : trace) {
        out << m.iteration << ',' << num(m.mean) << ',' << num(m.min) << ',' << num(m.max) << '\n';
    }
}

std::string summary_json(const RunSummary& s) {
    nlohmann::ordered_json j;
    j["case"] = s.case_name;
    j["n_priors"] = s.n_priors;
    j["series"] = s.series;
    j["history_steps"] = s.history_steps;
    j["prediction_steps"] = s.prediction_steps;
    if (s.nei_ran) {
        nlohmann::ordered_json n;
        n["k_max"] = s.k_max;
        n["subsets_evaluated"] = s.subsets_evaluated;
        n["prior_coverage"] = s.prior_coverage;
        n["sigma_mode"] = s.sigma_auto ? "auto" : "fixed";
        n["sigma"] = s.sigma;
        n["band_coverage"] = s.band_coverage;
        n["posterior_subsets"] = s.posterior_subsets;
        n["union_size"] = s.union_members.size();
        n["union"] = s.union_members;
        n["forward_runs"] = {{"history", s.nei_history_runs},
                             {"prediction", s.nei_prediction_runs},
                             {"total", s.nei_history_runs + s.nei_prediction_runs}};
        j["nei"] = n;
    }
    if (s.esmda_ran) {
        nlohmann::ordered_json e;
        e["assimilations"] = s.esmda_assimilations;
        e["forward_runs"] = s.esmda_runs;
        e["prior_mean_misfit"] = s.esmda_trace.front().mean;
        e["posterior_mean_misfit"] = s.esmda_trace.back().mean;
        j["esmda"] = e;
    }
    j["truth_runs"] = s.truth_runs;
    return j.dump(2) + "\n";
}

void export_bundle(const RunBundle& b, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "responses", ec);
    if (ec) throw Error("cannot create '" + out_dir.string() + "': " + ec.message());
    const RunSummary& s = b.summary;
    const std::size_t h = s.history_steps;
    const std::size_t horizon = h + s.prediction_steps;

    write_responses_csv(out_dir / "responses" / "truth.csv", b.truth_run.series, s.series, horizon);
    for (std::size_t r = 0; r < b.prior_responses.rows(); ++r) {
        char name[32];
        std::snprintf(name, sizeof name, "prior_%04zu.csv", r);
        write_responses_csv(out_dir / "responses" / name, b.prior_responses.row(r), s.series, h);
    }
    if (s.nei_ran) {
        write_envelope_csv(out_dir / "prior_envelope.csv", b.prior_envelope, s.series, h,
                           &b.observation, h);
    }
    if (b.selection && b.posterior_envelope) {
        write_envelope_csv(out_dir / "posterior_envelope.csv", *b.posterior_envelope, s.series, h,
                           &b.observation, h);
        write_selection(out_dir / "selection.txt", *b.selection, s.band_coverage);
    }
    if (b.prediction) {
        write_envelope_csv(out_dir / "prediction_envelope.csv", b.prediction->envelope, s.series,
                           horizon, &b.observation, h);
    }
    if (b.esmda) {
        write_misfit_csv(out_dir / "esmda_misfit.csv", b.esmda->trace);
        const auto& pr = b.esmda->posterior_responses;
        Envelope env = prior_envelope(pr, 1);
        write_envelope_csv(out_dir / "esmda_envelope.csv", env, s.series, horizon, &b.observation, h);
    }
    open_out(out_dir / "summary.json") << summary_json(s);

    nlohmann::ordered_json t;
    t["priors_s"] = s.timings.priors;
    t["forward_simulation_s"] = s.timings.forward_history;
    t["expectation_evaluation_s"] = s.timings.expectations;
    t["prediction_s"] = s.timings.prediction;
    t["esmda_s"] = s.timings.esmda;
    t["total_s"] = s.timings.total;
    open_out(out_dir / "timing.json") << t.dump(2) << "\n";
}

int exit_code_for(const std::exception& e) noexcept {
    ErrorKind kind = classify(e);
    if (const auto* st = dynamic_cast<const StageError*>(&e)) kind = st->kind();
    switch (kind) {
        case ErrorKind::CoverageGate: return 2;
        case ErrorKind::Solver: return 3;
        case ErrorKind::Config: return 4;
        default: return 1;
    }
}

}  // namespace neinfer
