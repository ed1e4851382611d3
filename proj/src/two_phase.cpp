#include "neinfer/two_phase.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "neinfer/error.hpp"
#include "neinfer/units.hpp"

namespace neinfer {

void TwoPhaseFluid::validate() const {
    if (!(mu_w > 0.0) || !(mu_o > 0.0)) throw InvalidArgument("two-phase fluid: viscosities must be > 0");
    if (c_w < 0.0 || c_o < 0.0 || c_r < 0.0) {
        throw InvalidArgument("two-phase fluid: compressibilities must be >= 0");
    }
    if (!(s_iw >= 0.0 && s_iw < 1.0)) throw InvalidArgument("two-phase fluid: s_iw must lie in [0,1)");
    if (!(beta > 0.0)) throw InvalidArgument("two-phase fluid: beta must be > 0");
}

RelPerm rel_perm(double sw, double s_iw, double beta) {
    if (!(sw >= s_iw && sw <= 1.0)) {
        throw InvalidArgument("rel_perm: sw = " + std::to_string(sw) + " outside [" +
                              std::to_string(s_iw) + ", 1]");
    }
    const double se = (sw - s_iw) / (1.0 - s_iw);
    const double so = (1.0 - sw) / (1.0 - s_iw);
    const double krw = std::pow(se, (2.0 + 3.0 * beta) / beta);
    const double kro = so * so * (1.0 - std::pow(se, (2.0 + beta) / beta));
    return {std::clamp(krw, 0.0, 1.0), std::clamp(kro, 0.0, 1.0)};
}

Mobility cell_mobility(double sw, const TwoPhaseFluid& fluid) {
    const RelPerm kr = rel_perm(sw, fluid.s_iw, fluid.beta);
    return {kr.water / fluid.mu_w, kr.oil / fluid.mu_o};
}

Mobility upwind_mobility(const Face& face, std::span<const double> pressure,
                         std::span<const double> sw, const TwoPhaseFluid& fluid) {
    const std::size_t lo = std::min(face.cell_i, face.cell_j);
    const std::size_t hi = std::max(face.cell_i, face.cell_j);
    const std::size_t up = pressure[hi] > pressure[lo] ? hi : lo;
    return cell_mobility(sw[up], fluid);
}

double peaceman_geometric_index(double k_m2, double dz, double r_eq, double r_w) {
    if (!(r_eq > r_w) || !(r_w > 0.0)) {
        throw InvalidArgument("peaceman index: need r_eq > r_w > 0");
    }
    return 2.0 * std::numbers::pi * k_m2 * dz / std::log(r_eq / r_w);
}

TwoPhaseModel::TwoPhaseModel(const TwoPhaseProblem& problem, const RockRealization& rock)
    : problem_(&problem) {
    const Grid& grid = problem.grid;
    problem.fluid.validate();
    rock.validate(grid.num_cells());

    trans_ = face_transmissibilities(grid, rock, 1.0);
    pore_volume_.resize(grid.num_cells());
    for (std::size_t c = 0; c < pore_volume_.size(); ++c) {
        pore_volume_[c] = grid.cell_volume() * rock.porosity[c];
    }
    for (std::size_t w = 0; w < problem.wells.size(); ++w) {
        const TwoPhaseWell& well = problem.wells[w];
        if (well.perforations.empty()) throw InvalidArgument("well '" + well.name + "': no perforations");
        if (well.mode == WellMode::RateInjector && !(well.rate > 0.0)) {
            throw InvalidArgument("well '" + well.name + "': injection rate must be > 0");
        }
        for (const CellIndex& c : well.perforations) {
            const std::size_t cell = grid.index(c);
            perf_cell_.push_back(cell);
            perf_well_.push_back(w);
            double wi = 0.0;
            if (well.geometric_index) {
                wi = *well.geometric_index;
            } else {
                wi = peaceman_geometric_index(units::md_to_m2(rock.perm_md[cell]), grid.dz(),
                                              problem.peaceman.r_eq, problem.peaceman.r_w);
            }
            if (well.mode == WellMode::BhpProducer && !(wi > 0.0)) {
                throw InvalidArgument("well '" + well.name + "': geometric index must be > 0");
            }
            perf_index_.push_back(wi);
        }
    }
}

std::vector<PerforationRate> TwoPhaseModel::perforation_rates(std::span<const double> pressure,
                                                              std::span<const double> sw) const {
    std::vector<PerforationRate> rates(perf_cell_.size());
    for (std::size_t p = 0; p < perf_cell_.size(); ++p) {
        const TwoPhaseWell& w = problem_->wells[perf_well_[p]];
        const std::size_t c = perf_cell_[p];
        if (w.mode == WellMode::BhpProducer) {
            const Mobility m = cell_mobility(sw[c], problem_->fluid);
            const double dp = pressure[c] - w.bhp;
            rates[p] = {perf_index_[p] * m.water * dp, perf_index_[p] * m.oil * dp};
        } else {
            rates[p] = {-w.rate / double(w.perforations.size()), 0.0};
        }
    }
    return rates;
}

PressureStepResult pressure_step(const TwoPhaseState& state, const TwoPhaseModel& model,
                                 double dt) {
    if (!(dt > 0.0)) throw InvalidArgument("pressure_step: dt must be > 0");
    const Grid& grid = model.grid();
    const TwoPhaseFluid& fluid = model.fluid();
    const TwoPhaseProblem& problem = model.problem();
    const std::size_t n = grid.num_cells();
    const auto& p = state.pressure;
    const auto& sw = state.sw;
    if (p.size() != n || sw.size() != n) throw InvalidArgument("pressure_step: state size mismatch");

    std::vector<double> diag(n), rhs(n, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
        diag[c] = model.pore_volume()[c] * fluid.total_compressibility(sw[c]) / dt;
    }

    std::vector<Triplet> trips;
    trips.reserve(n + 2 * grid.faces().size());
    const auto& faces = grid.faces();
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const Face& face = faces[f];
        const double t = upwind_mobility(face, p, sw, fluid).total() * model.transmissibilities()[f];
        diag[face.cell_i] += t;
        diag[face.cell_j] += t;
        trips.push_back({face.cell_i, face.cell_j, -t});
        trips.push_back({face.cell_j, face.cell_i, -t});
        const double flux = t * (p[face.cell_j] - p[face.cell_i]);
        rhs[face.cell_i] += flux;
        rhs[face.cell_j] -= flux;
    }

    const std::vector<PerforationRate> old_rates = model.perforation_rates(p, sw);
    for (std::size_t k = 0; k < model.num_perforations(); ++k) {
        const std::size_t c = model.perforation_cell(k);
        rhs[c] -= old_rates[k].water + old_rates[k].oil;
        const TwoPhaseWell& w = problem.wells[model.perforation_well(k)];
        if (problem.options.implicit_wells && w.mode == WellMode::BhpProducer) {
            diag[c] += model.perforation_index(k) * cell_mobility(sw[c], fluid).total();
        }
    }
    for (std::size_t c = 0; c < n; ++c) trips.push_back({c, c, diag[c]});

    SparseSystem system(n, trips, std::move(rhs));
    if (!system.diagonally_dominant()) {
        throw Error("pressure_step: assembled pressure matrix is not diagonally dominant");
    }
    const std::vector<double> dp = solve_spd(system, problem.options.solver);

    PressureStepResult out;
    out.pressure.resize(n);
    for (std::size_t c = 0; c < n; ++c) out.pressure[c] = p[c] + dp[c];
    out.perforation_rates =
        problem.options.implicit_wells ? model.perforation_rates(out.pressure, sw) : old_rates;
    return out;
}

SaturationUpdate saturation_update(const TwoPhaseState& state, const PressureStepResult& step,
                                   const TwoPhaseModel& model, double dt) {
    const Grid& grid = model.grid();
    const TwoPhaseFluid& fluid = model.fluid();
    const std::size_t n = grid.num_cells();
    const auto& p_old = state.pressure;
    const auto& p_new = step.pressure;
    const auto& sw = state.sw;

    // Net water inflow per cell (m^3/s): face fluxes plus well sources.
    std::vector<double> inflow(n, 0.0);
    const auto& faces = grid.faces();
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const Face& face = faces[f];
        const double lw = upwind_mobility(face, p_old, sw, fluid).water;
        const double flux = lw * model.transmissibilities()[f] * (p_new[face.cell_j] - p_new[face.cell_i]);
        inflow[face.cell_i] += flux;
        inflow[face.cell_j] -= flux;
    }
    for (std::size_t k = 0; k < model.num_perforations(); ++k) {
        inflow[model.perforation_cell(k)] -= step.perforation_rates[k].water;
    }

    SaturationUpdate out;
    out.sw.resize(n);
    for (std::size_t c = 0; c < n; ++c) {
        const double pv = model.pore_volume()[c];
        const double raw = sw[c] + dt * inflow[c] / pv - sw[c] * fluid.c_w * (p_new[c] - p_old[c]);
        const double clamped = std::clamp(raw, fluid.s_iw, 1.0);
        if (clamped != raw) {
            ++out.clamp_events;
            out.clamped_volume += std::abs(raw - clamped) * pv;
        }
        out.max_change = std::max(out.max_change, std::abs(clamped - sw[c]));
        out.sw[c] = clamped;
    }
    return out;
}

TwoPhaseResult simulate_two(const TwoPhaseModel& model, const TimeGrid& time,
                            const TwoPhaseState& initial) {
    time.validate();
    const TwoPhaseProblem& problem = model.problem();
    const std::size_t n_wells = problem.wells.size();
    const std::size_t n = model.grid().num_cells();
    if (initial.pressure.size() != n || initial.sw.size() != n) {
        throw InvalidArgument("simulate_two: initial state size mismatch");
    }
    for (double s : initial.sw) {
        if (!(s >= problem.fluid.s_iw && s <= 1.0)) {
            throw InvalidArgument("simulate_two: initial saturation outside [s_iw, 1]");
        }
    }

    TwoPhaseResult result;
    result.total = ResponseSeries(time.n_steps, n_wells);
    result.water = ResponseSeries(time.n_steps, n_wells);
    result.final_state = initial;

    for (std::size_t s = 0; s < time.n_steps; ++s) {
        PressureStepResult ps;
        try {
            ps = pressure_step(result.final_state, model, time.dt);
        } catch (const SolverFailure& e) {
            throw SolverFailure("simulate_two: step " + std::to_string(s) + ": " + e.what(),
                                e.residual(), e.iterations());
        }
        SaturationUpdate su = saturation_update(result.final_state, ps, model, time.dt);

        for (std::size_t k = 0; k < model.num_perforations(); ++k) {
            const std::size_t w = model.perforation_well(k);
            const PerforationRate& r = ps.perforation_rates[k];
            result.total.at(s, w) += r.water + r.oil;
            result.water.at(s, w) += r.water;
            if (r.water < 0.0) result.injected_volume -= r.water * time.dt;
        }
        result.clamp_events += su.clamp_events;
        result.clamped_volume += su.clamped_volume;
        if (su.max_change > problem.options.cfl_warning_threshold) result.cfl_warnings.push_back(s);

        result.final_state.pressure = std::move(ps.pressure);
        result.final_state.sw = std::move(su.sw);
    }
    return result;
}

TwoPhaseResult simulate_two(const TwoPhaseProblem& problem, const RockRealization& rock,
                            const TimeGrid& time, const TwoPhaseState& initial) {
    return simulate_two(TwoPhaseModel(problem, rock), time, initial);
}

}  // namespace neinfer
