#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "neinfer/forward_model.hpp"
#include "neinfer/subsets.hpp"

namespace neinfer {

/// Simulated responses, one row per realisation. Columns are series-major:
/// column s * n_steps + t holds series s (a well rate) at step t.
class ResponseEnsemble {
public:
    ResponseEnsemble() = default;
    ResponseEnsemble(std::size_t n_rows, std::size_t n_series, std::size_t n_steps,
                     std::vector<double> data, std::vector<std::string> series_names = {});

    /// Stacks the series of each run; all runs must share n_steps and width.
    static ResponseEnsemble from_runs(const std::vector<ForwardRun>& runs,
                                      std::vector<std::string> series_names);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return n_series_ * n_steps_; }
    std::size_t n_series() const noexcept { return n_series_; }
    std::size_t n_steps() const noexcept { return n_steps_; }
    const std::vector<std::string>& series_names() const noexcept { return names_; }

    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols(), cols()};
    }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
    const std::vector<double>& data() const noexcept { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t n_series_ = 0;
    std::size_t n_steps_ = 0;
    std::vector<double> data_;
    std::vector<std::string> names_;
};

/// Observed data with per-column noise scale and acceptance band
/// [d_obs - w * noise, d_obs + w * noise].
struct Observation {
    std::vector<double> d_obs;
    std::vector<double> noise_scale;
    std::vector<double> band_lower;
    std::vector<double> band_upper;
    /// Columns per series (steps); 0 treats the whole vector as one series.
    std::size_t n_steps = 0;

    static Observation with_band(std::vector<double> d_obs, std::vector<double> noise_scale,
                                 double band_width, std::size_t n_steps = 0);

    std::size_t size() const noexcept { return d_obs.size(); }
    void validate() const;
};

struct Envelope {
    std::vector<double> lower;
    std::vector<double> upper;
};

struct SelectedSubset {
    SubsetId subset;
    double loss = 0.0;
};

/// Subsets whose loss is strictly below sigma, sorted by loss (ties keep
/// enumeration order).
struct SubsetSelection {
    double sigma = 0.0;
    std::size_t k_max = 0;
    SubsetCount evaluated = 0;
    std::vector<SelectedSubset> entries;

    bool empty() const noexcept { return entries.empty(); }
    std::size_t size() const noexcept { return entries.size(); }
};

/// Unweighted mean of the member rows, summed in member order.
std::vector<double> subset_expectation(const ResponseEnsemble& responses, const SubsetId& subset);

/// Upper/lower expectation over all subsets of size <= k_max. Subset means lie
/// in the convex hull of their members, so this is the per-column row
/// max/min and k_max does not change it.
Envelope prior_envelope(const ResponseEnsemble& responses, std::size_t k_max);

/// Fraction of columns where d_obs lies in [lower, upper] and the band
/// intersects the envelope.
double coverage_check(const Envelope& envelope, const Observation& obs);

/// Fraction of columns whose whole band [band_lower, band_upper] lies inside
/// the envelope.
double band_coverage(const Envelope& envelope, const Observation& obs);

/// Noise-scaled RMSE over a set of observation columns.
///
/// Column scale is the noise scale when positive, otherwise the RMS of d_obs
/// over the series the column belongs to (floored at 1e-12). With stride > 1
/// only steps t with t % stride == 0 contribute.
class LossFunction {
public:
    explicit LossFunction(const Observation& obs, std::size_t stride = 1);

    const std::vector<std::size_t>& columns() const noexcept { return columns_; }
    const std::vector<double>& targets() const noexcept { return targets_; }
    const std::vector<double>& scales() const noexcept { return scales_; }

    /// Loss of a full-width expectation vector.
    double operator()(std::span<const double> expectation) const;

private:
    std::vector<std::size_t> columns_;
    std::vector<double> targets_;
    std::vector<double> scales_;
};

/// L = sqrt(mean_c ((E_c - d_c) / s_c)^2) over every column.
double loss(std::span<const double> expectation, const Observation& obs);

struct SelectOptions {
    std::size_t stride = 1;   // time decimation for loss evaluation
    std::size_t workers = 1;
};

/// Streams every subset of size <= k_max, keeping those with loss < sigma.
/// Expectations are never materialised for the whole stream. An empty
/// result means no subset met the threshold.
SubsetSelection select_posterior(const ResponseEnsemble& responses, const Observation& obs,
                                 double sigma, std::size_t k_max, const SelectOptions& options = {});

/// Envelope of the selected subsets' expectations. Throws on an empty
/// selection.
Envelope posterior_envelope(const ResponseEnsemble& responses, const SubsetSelection& selection);

/// Sorted distinct members across all selected subsets.
std::vector<std::uint32_t> posterior_union(const SubsetSelection& selection);

struct SigmaSearchOptions {
    std::size_t grid_points = 64;
    SelectOptions select{};
    /// Refuse the search above this many subsets (losses are held in memory).
    SubsetCount max_subsets = 200'000'000;
};

struct AutoSigmaResult {
    double sigma = 0.0;
    double coverage = 0.0;        // band coverage of the posterior envelope
    std::size_t selected = 0;     // subsets with loss < sigma
    double min_loss = 0.0;
    double max_loss = 0.0;
    std::vector<double> grid;
};

/// Smallest sigma on a geometric grid spanning the observed loss range whose
/// selection is non-empty and whose posterior envelope contains the
/// observation band on at least `coverage_target` of the columns. Throws
/// SigmaSearchFailure with the best coverage found otherwise.
AutoSigmaResult auto_sigma(const ResponseEnsemble& responses, const Observation& obs,
                           std::size_t k_max, double coverage_target,
                           const SigmaSearchOptions& options = {});

struct PredictionResult {
    std::vector<std::uint32_t> members;  // union of posterior subsets
    std::size_t history_steps = 0;
    std::size_t extension_steps = 0;
    /// Full-horizon responses of the union members, rows in `members` order.
    ResponseEnsemble responses;
    /// Full-horizon expectation per selected subset, in selection order.
    std::vector<std::vector<double>> expectations;
    Envelope envelope;
};

/// Simulates only the union members for `extension_steps` further steps,
/// restarting from their end-of-history states, and recomputes each selected
/// subset's expectation and the envelope over history + extension.
PredictionResult predict(const SubsetSelection& selection, const ResponseEnsemble& history,
                         const std::vector<RockRealization>& priors,
                         const std::vector<ModelState>& history_states,
                         const ForwardModel& model, std::size_t extension_steps,
                         std::size_t workers = 1, RunCounter* counter = nullptr);

}  // namespace neinfer
