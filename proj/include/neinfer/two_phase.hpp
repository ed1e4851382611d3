#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neinfer/grid.hpp"
#include "neinfer/linsolve.hpp"
#include "neinfer/wells.hpp"

namespace neinfer {

/// Water/oil properties. Capillary pressure and gravity are neglected.
struct TwoPhaseFluid {
    double mu_w = 1e-3;  // Pa s
    double mu_o = 1e-3;  // Pa s
    double c_w = 0.0;    // 1/Pa
    double c_o = 0.0;    // 1/Pa
    double c_r = 0.0;    // 1/Pa
    double s_iw = 0.0;   // irreducible water saturation
    double beta = 2.0;   // Brooks-Corey pore-size exponent

    void validate() const;

    /// Total compressibility c_r + S_o c_o + S_w c_w.
    double total_compressibility(double sw) const noexcept {
        return c_r + (1.0 - sw) * c_o + sw * c_w;
    }
};

struct RelPerm {
    double water = 0.0;
    double oil = 0.0;
};

/// Brooks-Corey curves with zero residual oil. Throws InvalidArgument when
/// sw lies outside [s_iw, 1].
RelPerm rel_perm(double sw, double s_iw, double beta);

struct Mobility {
    double water = 0.0;  // k_rw / mu_w
    double oil = 0.0;    // k_ro / mu_o
    double total() const noexcept { return water + oil; }
};

Mobility cell_mobility(double sw, const TwoPhaseFluid& fluid);

struct TwoPhaseState {
    std::vector<double> pressure;  // Pa
    std::vector<double> sw;
};

/// Phase mobilities at a face, taken from the cell with the higher pressure.
/// Equal pressures select the lower-indexed cell.
Mobility upwind_mobility(const Face& face, std::span<const double> pressure,
                         std::span<const double> sw, const TwoPhaseFluid& fluid);

/// Peaceman-style geometric well index 2 pi k dz / ln(r_eq / r_w), m^3.
/// Multiplied by a mobility it gives the productivity in m^3 s^-1 Pa^-1.
double peaceman_geometric_index(double k_m2, double dz, double r_eq, double r_w);

struct PeacemanSpec {
    double r_eq = 13.29;  // m, equivalent radius
    double r_w = 0.1;     // m, wellbore radius
};

/// Producers flow each phase at WI * lambda_alpha(cell) * (p - bhp).
/// Injectors inject water at `rate`, split equally over perforations.
struct TwoPhaseWell {
    std::string name;
    std::vector<CellIndex> perforations;
    WellMode mode = WellMode::BhpProducer;
    double bhp = 0.0;   // Pa
    double rate = 0.0;  // m^3/s
    /// Geometric index per perforation; Peaceman from the cell otherwise.
    std::optional<double> geometric_index;
};

struct TwoPhaseOptions {
    bool implicit_wells = false;
    SolveOptions solver{};
    /// Largest per-step saturation change before a CFL warning is recorded.
    double cfl_warning_threshold = 0.5;
};

struct TwoPhaseProblem {
    Grid grid;
    TwoPhaseFluid fluid;
    std::vector<TwoPhaseWell> wells;
    PeacemanSpec peaceman{};
    TwoPhaseOptions options{};
};

/// Volumetric rates applied at one perforation during a step. Positive is
/// production, negative injection.
struct PerforationRate {
    double water = 0.0;
    double oil = 0.0;
};

struct PressureStepResult {
    std::vector<double> pressure;
    std::vector<PerforationRate> perforation_rates;
};

struct SaturationUpdate {
    std::vector<double> sw;
    std::size_t clamp_events = 0;
    double clamped_volume = 0.0;  // pore volume moved by clamping, m^3
    double max_change = 0.0;
};

/// Two-phase model assembled for one rock realisation. `problem` must
/// outlive the model.
class TwoPhaseModel {
public:
    TwoPhaseModel(const TwoPhaseProblem& problem, const RockRealization& rock);

    const TwoPhaseProblem& problem() const noexcept { return *problem_; }
    const Grid& grid() const noexcept { return problem_->grid; }
    const TwoPhaseFluid& fluid() const noexcept { return problem_->fluid; }

    /// Geometric harmonic transmissibility per face, m^3 (mobility excluded).
    const std::vector<double>& transmissibilities() const noexcept { return trans_; }
    /// V_i phi_i, m^3.
    const std::vector<double>& pore_volume() const noexcept { return pore_volume_; }

    std::size_t num_perforations() const noexcept { return perf_cell_.size(); }
    std::size_t perforation_cell(std::size_t p) const { return perf_cell_[p]; }
    std::size_t perforation_well(std::size_t p) const { return perf_well_[p]; }
    double perforation_index(std::size_t p) const { return perf_index_[p]; }

    /// Rates at every perforation for a given pressure and saturation.
    std::vector<PerforationRate> perforation_rates(std::span<const double> pressure,
                                                   std::span<const double> sw) const;

private:
    const TwoPhaseProblem* problem_;
    std::vector<double> trans_;
    std::vector<double> pore_volume_;
    std::vector<std::size_t> perf_cell_;
    std::vector<std::size_t> perf_well_;
    std::vector<double> perf_index_;
};

/// Implicit pressure with mobilities, compressibility and (explicit) well
/// rates frozen at step n.
PressureStepResult pressure_step(const TwoPhaseState& state, const TwoPhaseModel& model,
                                 double dt);

/// Explicit water balance using the pressure and well rates from
/// pressure_step. Saturations are clamped to [s_iw, 1].
SaturationUpdate saturation_update(const TwoPhaseState& state, const PressureStepResult& step,
                                   const TwoPhaseModel& model, double dt);

struct TwoPhaseResult {
    ResponseSeries total;  // water + oil, positive = production
    ResponseSeries water;
    TwoPhaseState final_state;
    std::size_t clamp_events = 0;
    double clamped_volume = 0.0;
    double injected_volume = 0.0;
    std::vector<std::size_t> cfl_warnings;  // steps whose max |dS| exceeded the threshold
};

TwoPhaseResult simulate_two(const TwoPhaseModel& model, const TimeGrid& time,
                            const TwoPhaseState& initial);

TwoPhaseResult simulate_two(const TwoPhaseProblem& problem, const RockRealization& rock,
                            const TimeGrid& time, const TwoPhaseState& initial);

}  // namespace neinfer
