#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "neinfer/esmda.hpp"
#include "neinfer/forward_model.hpp"
#include "neinfer/grid.hpp"
#include "neinfer/priors.hpp"

namespace neinfer {

/// Declarative description of one experiment. All quantities are stored in
/// SI units; the JSON form uses field units (MPa, mD, m^3/s/MPa) and 1-based
/// cell indices.
struct CaseConfig {
    enum class RockSource { Generate, Ingest };
    enum class FluidKind { Single, TwoPhase };

    struct WellSpec {
        std::string name;
        bool injector = false;
        std::vector<CellIndex> cells;  // 0-based
        double pi = 0.0;               // m^3/s/Pa for the whole well, split over cells
        double bhp = 0.0;              // Pa
        double rate = 0.0;             // m^3/s, injectors
        std::optional<double> geometric_index;  // two-phase override, m^3 per perforation
    };

    std::string name = "case";
    std::array<std::size_t, 3> dims{1, 1, 1};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};

    RockSource rock_source = RockSource::Generate;
    double porosity = 0.1;
    std::size_t prior_count = 0;
    bool generate_truth = true;
    VariogramSpec variogram{};
    SamplerMethod sampler = SamplerMethod::Auto;
    std::filesystem::path ingest_path;

    FluidKind fluid_kind = FluidKind::Single;
    SinglePhaseFluid single{};
    TwoPhaseFluid two{};
    double initial_sw = 0.0;
    std::vector<RateQuantity> observed{RateQuantity::Oil, RateQuantity::Water};
    PeacemanSpec peaceman{};
    bool implicit_wells = false;
    double initial_pressure = 0.0;  // Pa

    std::vector<WellSpec> wells;

    double dt = 0.0;
    std::size_t history_steps = 0;
    std::size_t prediction_steps = 0;

    double relative_noise = 0.01;
    std::map<std::string, double> well_noise;  // per-well relative std overrides
    double band_width = 2.0;

    std::size_t k_max = 1;
    std::optional<double> sigma;  // empty: automatic search
    double coverage_target = 0.95;
    double gate_threshold = 0.95;
    std::size_t stride = 1;
    std::size_t sigma_grid_points = 64;

    std::optional<EsmdaConfig> esmda;

    std::uint64_t seed = 0;
    std::size_t workers = 1;

    /// Throws ConfigError when fields are inconsistent.
    void validate() const;

    Grid grid() const;
    std::unique_ptr<ForwardModel> forward_model() const;
    /// Relative noise std for each observed series of `model`.
    std::vector<double> series_noise(const std::vector<std::string>& series_names) const;
};

/// Parses a JSON document. Keys starting with '_' are ignored (annotations);
/// any other unknown key is an error.
CaseConfig parse_case_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
CaseConfig load_case_config(const std::filesystem::path& path);

}  // namespace neinfer
