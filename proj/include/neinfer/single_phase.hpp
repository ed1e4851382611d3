#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "neinfer/grid.hpp"
#include "neinfer/linsolve.hpp"
#include "neinfer/wells.hpp"

namespace neinfer {

struct SinglePhaseFluid {
    double viscosity = 0.0;        // Pa s
    double compressibility = 0.0;  // total, 1/Pa

    void validate() const;
};

struct SinglePhaseOptions {
    /// Couple bottom-hole-pressure wells at the new pressure instead of the
    /// old one. Off by default.
    bool implicit_wells = false;
    SolveOptions solver{};
};

/// Everything except the rock: geometry, fluid, wells, numerics.
struct SinglePhaseProblem {
    Grid grid;
    SinglePhaseFluid fluid;
    std::vector<Well> wells;
    SinglePhaseOptions options{};
};

/// Result of one implicit step: new pressure plus the per-well rates that
/// were applied as sources during the step.
struct SinglePhaseStep {
    std::vector<double> pressure;
    std::vector<double> well_rates;  // m^3/s per well, positive = production
};

/// Slightly compressible single-phase model assembled for one rock
/// realisation. Transmissibilities are computed once on construction.
///
/// Per cell i the discrete balance is
///   V_i phi_i c_t (p_i^{n+1} - p_i^n) / dt
///       = sum_j T_ij (p_j^{n+1} - p_i^{n+1}) - Q_i
/// where Q_i is the volumetric production from wells in cell i, evaluated at
/// p^n (or p^{n+1} with implicit wells).
class SinglePhaseModel {
public:
    SinglePhaseModel(const SinglePhaseProblem& problem, const RockRealization& rock);

    const SinglePhaseProblem& problem() const noexcept { return *problem_; }
    const Grid& grid() const noexcept { return problem_->grid; }
    const std::vector<double>& transmissibilities() const noexcept { return trans_; }

    /// V_i phi_i c_t, m^3/Pa.
    const std::vector<double>& storage() const noexcept { return storage_; }

    /// Per-well production for a pressure field.
    std::vector<double> well_rates(std::span<const double> pressure) const;

    /// Net production per cell (sum over perforations), m^3/s.
    std::vector<double> cell_production(std::span<const double> pressure) const;

    /// Reusable stepper for a fixed dt; owns the assembled matrix and solver.
    class Stepper {
    public:
        Stepper(const SinglePhaseModel& model, double dt);
        ~Stepper();
        Stepper(Stepper&&) noexcept;
        Stepper& operator=(Stepper&&) = delete;

        SinglePhaseStep advance(std::span<const double> p_n) const;

    private:
        const SinglePhaseModel* model_;
        double dt_;
        SparseMatrix matrix_;
        std::unique_ptr<SpdSolver> solver_;
    };

    Stepper stepper(double dt) const { return Stepper(*this, dt); }

private:
    const SinglePhaseProblem* problem_;
    std::vector<double> trans_;
    std::vector<double> storage_;
    // Flattened perforation list: cell index and owning well.
    std::vector<std::size_t> perf_cell_;
    std::vector<std::size_t> perf_well_;
};

/// One implicit step from p_n. Linear-solver failures propagate.
SinglePhaseStep step(std::span<const double> p_n, const SinglePhaseModel& model, double dt);

struct SinglePhaseResult {
    ResponseSeries rates;
    std::vector<double> final_pressure;
};

/// Marches `time.n_steps` steps. The rate recorded at step n is the one
/// applied during that step (start-of-step pressure with explicit wells).
SinglePhaseResult simulate(const SinglePhaseModel& model, const TimeGrid& time,
                           std::span<const double> initial_pressure);

SinglePhaseResult simulate(const SinglePhaseProblem& problem, const RockRealization& rock,
                           const TimeGrid& time, std::span<const double> initial_pressure);

}  // namespace neinfer
