#include "neinfer/forward_model.hpp"

#include <string>

#include "neinfer/error.hpp"
#include "neinfer/parallel.hpp"

namespace neinfer {

SinglePhaseForward::SinglePhaseForward(SinglePhaseProblem problem, double dt,
                                       double initial_pressure)
    : problem_(std::move(problem)), dt_(dt), initial_pressure_(initial_pressure) {
    TimeGrid{dt, 1}.validate();
    problem_.fluid.validate();
    for (const Well& w : problem_.wells) w.validate(problem_.grid);
}

std::vector<std::string> SinglePhaseForward::series_names() const {
    std::vector<std::string> names;
    for (const Well& w : problem_.wells) names.push_back(w.name);
    return names;
}

ModelState SinglePhaseForward::initial_state() const {
    return {std::vector<double>(problem_.grid.num_cells(), initial_pressure_), {}};
}

ForwardRun SinglePhaseForward::run(const RockRealization& rock, const ModelState& start,
                                   std::size_t n_steps) const {
    ForwardRun out;
    out.n_steps = n_steps;
    if (n_steps == 0) {
        out.final_state = start;
        return out;
    }
    const SinglePhaseModel model(problem_, rock);
    SinglePhaseResult r = simulate(model, TimeGrid{dt_, n_steps}, start.pressure);
    const std::size_t n_wells = problem_.wells.size();
    out.series.resize(n_wells * n_steps);
    for (std::size_t w = 0; w < n_wells; ++w) {
        for (std::size_t t = 0; t < n_steps; ++t) out.series[w * n_steps + t] = r.rates.at(t, w);
    }
    out.final_state.pressure = std::move(r.final_pressure);
    return out;
}

namespace {

const char* quantity_name(RateQuantity q) {
    switch (q) {
        case RateQuantity::Total: return "total";
        case RateQuantity::Water: return "water";
        case RateQuantity::Oil: return "oil";
    }
    return "?";
}

}  // namespace

TwoPhaseForward::TwoPhaseForward(TwoPhaseProblem problem, double dt, double initial_pressure,
                                 double initial_sw, std::vector<RateQuantity> quantities)
    : problem_(std::move(problem)), dt_(dt), initial_pressure_(initial_pressure),
      initial_sw_(initial_sw), quantities_(std::move(quantities)) {
    TimeGrid{dt, 1}.validate();
    problem_.fluid.validate();
    if (quantities_.empty()) throw InvalidArgument("two-phase forward: no observed quantities");
    for (std::size_t w = 0; w < problem_.wells.size(); ++w) {
        if (problem_.wells[w].mode == WellMode::BhpProducer) producers_.push_back(w);
    }
}

std::vector<std::string> TwoPhaseForward::series_names() const {
    std::vector<std::string> names;
    for (std::size_t w : producers_) {
        for (RateQuantity q : quantities_) {
            names.push_back(problem_.wells[w].name + ":" + quantity_name(q));
        }
    }
    return names;
}

ModelState TwoPhaseForward::initial_state() const {
    const std::size_t n = problem_.grid.num_cells();
    return {std::vector<double>(n, initial_pressure_), std::vector<double>(n, initial_sw_)};
}

ForwardRun TwoPhaseForward::run(const RockRealization& rock, const ModelState& start,
                                std::size_t n_steps) const {
    ForwardRun out;
    out.n_steps = n_steps;
    if (n_steps == 0) {
        out.final_state = start;
        return out;
    }
    const TwoPhaseModel model(problem_, rock);
    TwoPhaseResult r = simulate_two(model, TimeGrid{dt_, n_steps}, {start.pressure, start.sw});
    out.series.reserve(producers_.size() * quantities_.size() * n_steps);
    for (std::size_t w : producers_) {
        for (RateQuantity q : quantities_) {
            for (std::size_t t = 0; t < n_steps; ++t) {
                const double total = r.total.at(t, w);
                const double water = r.water.at(t, w);
                out.series.push_back(q == RateQuantity::Total   ? total
                                     : q == RateQuantity::Water ? water
                                                                : total - water);
            }
        }
    }
    out.final_state.pressure = std::move(r.final_state.pressure);
    out.final_state.sw = std::move(r.final_state.sw);
    return out;
}

std::vector<ForwardRun> run_ensemble(const ForwardModel& model,
                                     const std::vector<RockRealization>& rocks,
                                     const std::vector<ModelState>& starts, std::size_t n_steps,
                                     std::size_t workers, RunCounter* counter) {
    if (starts.size() != rocks.size()) throw InvalidArgument("run_ensemble: starts/rocks size mismatch");
    std::vector<ForwardRun> runs(rocks.size());
    parallel_for(rocks.size(), workers, [&](std::size_t i) {
        try {
            runs[i] = model.run(rocks[i], starts[i], n_steps);
            if (counter) counter->add();
        } catch (const SolverFailure& e) {
            throw SolverFailure("realisation " + std::to_string(i) + ": " + e.what(), e.residual(),
                                e.iterations());
        } catch (const Error& e) {
            throw Error("realisation " + std::to_string(i) + ": " + e.what());
        }
    });
    return runs;
}

std::vector<ForwardRun> run_ensemble(const ForwardModel& model,
                                     const std::vector<RockRealization>& rocks,
                                     std::size_t n_steps, std::size_t workers,
                                     RunCounter* counter) {
    return run_ensemble(model, rocks, std::vector<ModelState>(rocks.size(), model.initial_state()),
                        n_steps, workers, counter);
}

}  // namespace neinfer
