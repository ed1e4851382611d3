#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neinfer/grid.hpp"

namespace neinfer {

enum class VariogramModel { Spherical, Exponential, Gaussian };

/// Stationary covariance for the log-permeability variable h = log2(10 k).
/// Ranges are practical ranges per axis (the exponential and Gaussian
/// models reach 95% of the sill at lag = range).
struct VariogramSpec {
    VariogramModel model = VariogramModel::Spherical;
    std::array<double, 3> range{1.0, 1.0, 1.0};  // m
    double sill = 1.0;
    double mean_h = 8.965784284662087;  // log2(500): median k = 50 mD

    void validate() const;

    /// Covariance at the given lag vector (m).
    double covariance(double lx, double ly, double lz) const;

    /// Spherical, 30% of the domain extent per axis, unit sill, median 50 mD.
    static VariogramSpec defaults_for(const Grid& grid);
};

VariogramModel parse_variogram_model(const std::string& name);
std::string to_string(VariogramModel model);

enum class SamplerMethod {
    Auto,       // dense up to kDenseCellLimit cells, circulant embedding above
    Dense,      // Cholesky of the full covariance matrix
    Circulant,  // FFT-based circulant embedding
};

inline constexpr std::size_t kDenseCellLimit = 4000;

/// Seed of the independent stream used by realisation `index`
/// (splitmix64 of seed + index).
std::uint64_t realization_seed(std::uint64_t seed, std::size_t index);

/// Unconditional Gaussian h-fields with covariance `spec`. Realisation i is
/// drawn from stream realization_seed(seed, first_index + i), so fields are
/// reproducible one by one. Throws GenerationFailure if the covariance is not
/// positive definite after a small nugget is added.
std::vector<std::vector<double>> sample_gaussian_field(const Grid& grid, const VariogramSpec& spec,
                                                       std::uint64_t seed, std::size_t count,
                                                       SamplerMethod method = SamplerMethod::Auto,
                                                       std::size_t first_index = 0);

/// k = 2^h / 10 mD.
inline double perm_md_from_h(double h) { return std::exp2(h) / 10.0; }
/// h = log2(10 k), k in mD.
inline double h_from_perm_md(double k) { return std::log2(10.0 * k); }

RockRealization h_to_perm(std::span<const double> h, double porosity);
std::vector<double> perm_to_h(const RockRealization& rock);

/// A set of prior realisations, optionally with a held-out ground truth.
struct Ensemble {
    std::vector<RockRealization> realizations;
    std::vector<std::string> names;
    std::optional<RockRealization> truth;
    std::string provenance;
};

/// Loads an ensemble from a manifest file, or from a directory (using its
/// manifest.txt when present, otherwise every *.txt / *.dat / *.field file
/// in name order).
///
/// Manifest: one member filename per line, relative to the manifest;
/// `truth: <file>` marks the ground truth, which is excluded from the priors;
/// `#` starts a comment. Field files named `perm`/`permeability`/`permx`
/// hold mD, files named `h` hold log2(10 k).
Ensemble load_realizations(const std::filesystem::path& path, const Grid& grid, double porosity);

/// Writes one field file per realisation plus manifest.txt into `dir`.
void write_realizations(const std::filesystem::path& dir, const Grid& grid,
                        const std::vector<RockRealization>& realizations,
                        const RockRealization* truth = nullptr);

}  // namespace neinfer
