#include "neinfer/single_phase.hpp"

#include <cmath>
#include <string>

#include "neinfer/error.hpp"

namespace neinfer {

void SinglePhaseFluid::validate() const {
    if (!(viscosity > 0.0)) throw InvalidArgument("single-phase fluid: viscosity must be > 0");
    if (!(compressibility > 0.0)) {
        throw InvalidArgument("single-phase fluid: compressibility must be > 0");
    }
}

SinglePhaseModel::SinglePhaseModel(const SinglePhaseProblem& problem, const RockRealization& rock)
    : problem_(&problem) {
    const Grid& grid = problem.grid;
    problem.fluid.validate();
    rock.validate(grid.num_cells());
    for (const Well& w : problem.wells) w.validate(grid);

    trans_ = face_transmissibilities(grid, rock, problem.fluid.viscosity);
    storage_.resize(grid.num_cells());
    for (std::size_t c = 0; c < storage_.size(); ++c) {
        storage_[c] = grid.cell_volume() * rock.porosity[c] * problem.fluid.compressibility;
    }
    for (std::size_t w = 0; w < problem.wells.size(); ++w) {
        for (const CellIndex& c : problem.wells[w].perforations) {
            perf_cell_.push_back(grid.index(c));
            perf_well_.push_back(w);
        }
    }
}

std::vector<double> SinglePhaseModel::well_rates(std::span<const double> pressure) const {
    const auto& wells = problem_->wells;
    std::vector<double> rates(wells.size(), 0.0);
    for (std::size_t p = 0; p < perf_cell_.size(); ++p) {
        const Well& w = wells[perf_well_[p]];
        if (w.mode == WellMode::BhpProducer) {
            rates[perf_well_[p]] += well_rate(pressure[perf_cell_[p]], w);
        } else {
            rates[perf_well_[p]] -= w.rate / double(w.perforations.size());
        }
    }
    return rates;
}

std::vector<double> SinglePhaseModel::cell_production(std::span<const double> pressure) const {
    const auto& wells = problem_->wells;
    std::vector<double> q(storage_.size(), 0.0);
    for (std::size_t p = 0; p < perf_cell_.size(); ++p) {
        const Well& w = wells[perf_well_[p]];
        const std::size_t c = perf_cell_[p];
        if (w.mode == WellMode::BhpProducer) q[c] += well_rate(pressure[c], w);
        else q[c] -= w.rate / double(w.perforations.size());
    }
    return q;
}

SinglePhaseModel::Stepper::Stepper(const SinglePhaseModel& model, double dt)
    : model_(&model), dt_(dt) {
    if (!(dt > 0.0)) throw InvalidArgument("single-phase step: dt must be > 0");
    const Grid& grid = model.grid();
    const std::size_t n = grid.num_cells();

    std::vector<double> diag(n);
    for (std::size_t c = 0; c < n; ++c) diag[c] = model.storage_[c] / dt;
    if (model.problem_->options.implicit_wells) {
        for (std::size_t p = 0; p < model.perf_cell_.size(); ++p) {
            const Well& w = model.problem_->wells[model.perf_well_[p]];
            if (w.mode == WellMode::BhpProducer) diag[model.perf_cell_[p]] += w.pi;
        }
    }

    std::vector<Triplet> trips;
    trips.reserve(n + 2 * grid.faces().size());
    const auto& faces = grid.faces();
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const double t = model.trans_[f];
        diag[faces[f].cell_i] += t;
        diag[faces[f].cell_j] += t;
        trips.push_back({faces[f].cell_i, faces[f].cell_j, -t});
        trips.push_back({faces[f].cell_j, faces[f].cell_i, -t});
    }
    for (std::size_t c = 0; c < n; ++c) trips.push_back({c, c, diag[c]});

    SparseSystem system(n, trips, std::vector<double>(n, 0.0));
    if (!system.diagonally_dominant()) {
        throw Error("single-phase step: assembled pressure matrix is not diagonally dominant");
    }
    matrix_ = system.matrix();
    solver_ = std::make_unique<SpdSolver>(matrix_, model.problem_->options.solver);
}

SinglePhaseModel::Stepper::~Stepper() = default;

SinglePhaseModel::Stepper::Stepper(Stepper&& other) noexcept
    : model_(other.model_), dt_(other.dt_), matrix_(std::move(other.matrix_)),
      solver_(std::move(other.solver_)) {
    // The solver keeps a pointer to the matrix; rebuild it against ours.
    if (solver_) solver_ = std::make_unique<SpdSolver>(matrix_, model_->problem_->options.solver);
}

SinglePhaseStep SinglePhaseModel::Stepper::advance(std::span<const double> p_n) const {
    const SinglePhaseModel& m = *model_;
    const Grid& grid = m.grid();
    const std::size_t n = grid.num_cells();
    if (p_n.size() != n) throw InvalidArgument("single-phase step: pressure length mismatch");

    // Solve for the increment dp = p^{n+1} - p^n:
    //   (S/dt + L [+ PI]) dp = -L p^n - Q(p^n)
    std::vector<double> rhs(n, 0.0);
    const auto& faces = grid.faces();
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const double flux = m.trans_[f] * (p_n[faces[f].cell_j] - p_n[faces[f].cell_i]);
        rhs[faces[f].cell_i] += flux;
        rhs[faces[f].cell_j] -= flux;
    }
    const std::vector<double> q_old = m.cell_production(p_n);
    for (std::size_t c = 0; c < n; ++c) rhs[c] -= q_old[c];

    const std::vector<double> dp = solver_->solve(rhs);

    SinglePhaseStep out;
    out.pressure.resize(n);
    for (std::size_t c = 0; c < n; ++c) out.pressure[c] = p_n[c] + dp[c];
    out.well_rates = m.problem_->options.implicit_wells ? m.well_rates(out.pressure)
                                                        : m.well_rates(p_n);
    return out;
}

SinglePhaseStep step(std::span<const double> p_n, const SinglePhaseModel& model, double dt) {
    return model.stepper(dt).advance(p_n);
}

SinglePhaseResult simulate(const SinglePhaseModel& model, const TimeGrid& time,
                           std::span<const double> initial_pressure) {
    time.validate();
    const std::size_t n_wells = model.problem().wells.size();
    if (initial_pressure.size() != model.grid().num_cells()) {
        throw InvalidArgument("simulate: initial pressure length mismatch");
    }
    SinglePhaseResult result{ResponseSeries(time.n_steps, n_wells),
                             std::vector<double>(initial_pressure.begin(), initial_pressure.end())};
    const auto stepper = model.stepper(time.dt);
    for (std::size_t s = 0; s < time.n_steps; ++s) {
        SinglePhaseStep next;
        try {
            next = stepper.advance(result.final_pressure);
        } catch (const SolverFailure& e) {
            throw SolverFailure("simulate: step " + std::to_string(s) + ": " + e.what(),
                                e.residual(), e.iterations());
        }
        for (std::size_t w = 0; w < n_wells; ++w) result.rates.at(s, w) = next.well_rates[w];
        result.final_pressure = std::move(next.pressure);
    }
    return result;
}

SinglePhaseResult simulate(const SinglePhaseProblem& problem, const RockRealization& rock,
                           const TimeGrid& time, std::span<const double> initial_pressure) {
    return simulate(SinglePhaseModel(problem, rock), time, initial_pressure);
}

}  // namespace neinfer
