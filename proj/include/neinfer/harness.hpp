#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neinfer/config.hpp"
#include "neinfer/esmda.hpp"
#include "neinfer/inference.hpp"

namespace neinfer {

/// Simulates `truth` for n_steps and adds N(0, (rel_std * |value|)^2) noise
/// per column, rel_std taken per series. The band is band_width noise scales
/// either side of the noisy value.
Observation make_synthetic_obs(const RockRealization& truth, const ForwardModel& model,
                               std::size_t n_steps, std::span<const double> relative_std,
                               std::uint64_t seed, double band_width = 2.0);

/// Same, from an existing truth run (only its first n_steps are observed).
Observation make_synthetic_obs(const ForwardRun& truth_run, std::size_t n_steps,
                               std::span<const double> relative_std, std::uint64_t seed,
                               double band_width = 2.0);

/// Seed of an independent stream derived from the case seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

inline constexpr std::uint64_t kNoiseSeedTag = 0x6e6f697365ULL;
inline constexpr std::uint64_t kEsmdaSeedTag = 0x65736d6461ULL;

/// Prior ensemble of a case: generated (truth = realisation `prior_count`)
/// or ingested.
Ensemble acquire_priors(const CaseConfig& config);

struct RunStages {
    bool nei = true;
    bool predict = true;
    bool esmda = true;
};

struct Timings {
    double priors = 0.0;
    double forward_history = 0.0;
    double expectations = 0.0;  // gate, sigma search, selection, envelopes
    double prediction = 0.0;
    double esmda = 0.0;
    double total = 0.0;
};

struct RunSummary {
    std::string case_name;
    std::size_t n_priors = 0;
    std::vector<std::string> series;
    std::size_t history_steps = 0;
    std::size_t prediction_steps = 0;

    bool nei_ran = false;
    std::size_t k_max = 0;
    SubsetCount subsets_evaluated = 0;
    double prior_coverage = 0.0;
    bool sigma_auto = false;
    double sigma = 0.0;
    double band_coverage = 0.0;
    std::size_t posterior_subsets = 0;
    std::vector<std::uint32_t> union_members;

    std::size_t nei_history_runs = 0;
    std::size_t nei_prediction_runs = 0;
    std::size_t truth_runs = 0;

    bool esmda_ran = false;
    std::size_t esmda_assimilations = 0;
    std::size_t esmda_runs = 0;
    std::vector<MisfitStats> esmda_trace;

    Timings timings;
};

/// Everything a run produced, for export or inspection.
struct RunBundle {
    RunSummary summary;
    Observation observation;
    ForwardRun truth_run;
    ResponseEnsemble prior_responses;
    Envelope prior_envelope;
    std::optional<SubsetSelection> selection;
    std::optional<Envelope> posterior_envelope;
    std::optional<PredictionResult> prediction;
    std::optional<EsmdaResult> esmda;
};

/// Runs the configured pipeline. Failures are rethrown as StageError tagged
/// with the stage name and the original category; a failed coverage gate is
/// a CoverageGateFailure.
RunBundle run_case(const CaseConfig& config, const RunStages& stages = {});

/// Writes the bundle's CSVs, selection dump, summary.json and timing.json.
/// Output is byte-stable for identical inputs apart from timing.json.
void export_bundle(const RunBundle& bundle, const std::filesystem::path& out_dir);

std::string summary_json(const RunSummary& summary);

/// Envelope CSV: well,step,lower,upper,d_obs,band_lower,band_upper. Columns
/// beyond the observation leave the last three fields empty.
void write_envelope_csv(const std::filesystem::path& path, const Envelope& envelope,
                        const std::vector<std::string>& series, std::size_t n_steps,
                        const Observation* obs, std::size_t obs_steps);

/// Selection dump: '#' header with sigma, k_max, coverage; then one line per
/// subset "size, i1, ..., loss".
void write_selection(const std::filesystem::path& path, const SubsetSelection& selection,
                     double coverage);

/// One realisation's responses: step,<series...>, one row per step.
void write_responses_csv(const std::filesystem::path& path, std::span<const double> row,
                         const std::vector<std::string>& series, std::size_t n_steps);

void write_misfit_csv(const std::filesystem::path& path, const std::vector<MisfitStats>& trace);

/// Process exit code for an exception: 2 coverage gate, 3 solver failure,
/// 4 configuration error, 1 anything else.
int exit_code_for(const std::exception& e) noexcept;

}  // namespace neinfer
