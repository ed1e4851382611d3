#pragma once

#include <atomic>
#include <cstddef>
#include <string>
#include <vector>

#include "neinfer/grid.hpp"
#include "neinfer/single_phase.hpp"
#include "neinfer/two_phase.hpp"

namespace neinfer {

/// Restartable simulator state. `sw` is empty for single-phase models.
struct ModelState {
    std::vector<double> pressure;
    std::vector<double> sw;
};

/// Observed responses of one run, series-major: value(series s, step t) is
/// stored at s * n_steps + t.
struct ForwardRun {
    std::size_t n_steps = 0;
    std::vector<double> series;
    ModelState final_state;
};

/// Maps a rock realisation to simulated well responses. Implementations are
/// immutable and may be shared across threads.
class ForwardModel {
public:
    virtual ~ForwardModel() = default;

    virtual std::vector<std::string> series_names() const = 0;
    virtual ModelState initial_state() const = 0;
    virtual double dt() const = 0;

    /// Simulates `n_steps` steps starting from `start`.
    virtual ForwardRun run(const RockRealization& rock, const ModelState& start,
                           std::size_t n_steps) const = 0;

    ForwardRun run(const RockRealization& rock, std::size_t n_steps) const {
        return run(rock, initial_state(), n_steps);
    }
};

/// Single-phase forward model; one series per well (total rate).
class SinglePhaseForward final : public ForwardModel {
public:
    SinglePhaseForward(SinglePhaseProblem problem, double dt, double initial_pressure);

    std::vector<std::string> series_names() const override;
    ModelState initial_state() const override;
    double dt() const override { return dt_; }
    ForwardRun run(const RockRealization& rock, const ModelState& start,
                   std::size_t n_steps) const override;

    const SinglePhaseProblem& problem() const noexcept { return problem_; }

private:
    SinglePhaseProblem problem_;
    double dt_;
    double initial_pressure_;
};

enum class RateQuantity { Total, Water, Oil };

/// Two-phase forward model. Observed series are producer rates, one series
/// per (producer, quantity) pair, named "<well>:<quantity>". Injectors are
/// not observed.
class TwoPhaseForward final : public ForwardModel {
public:
    TwoPhaseForward(TwoPhaseProblem problem, double dt, double initial_pressure, double initial_sw,
                    std::vector<RateQuantity> quantities);

    std::vector<std::string> series_names() const override;
    ModelState initial_state() const override;
    double dt() const override { return dt_; }
    ForwardRun run(const RockRealization& rock, const ModelState& start,
                   std::size_t n_steps) const override;

    const TwoPhaseProblem& problem() const noexcept { return problem_; }

private:
    TwoPhaseProblem problem_;
    double dt_;
    double initial_pressure_;
    double initial_sw_;
    std::vector<RateQuantity> quantities_;
    std::vector<std::size_t> producers_;
};

/// Counts forward runs across threads.
class RunCounter {
public:
    void add(std::size_t n = 1) noexcept { count_.fetch_add(n, std::memory_order_relaxed); }
    std::size_t value() const noexcept { return count_.load(std::memory_order_relaxed); }

private:
    std::atomic<std::size_t> count_{0};
};

/// Runs `model` on each realisation in parallel. Results are indexed like
/// `rocks`. A failure is rethrown tagged with the realisation index.
std::vector<ForwardRun> run_ensemble(const ForwardModel& model,
                                     const std::vector<RockRealization>& rocks,
                                     std::size_t n_steps, std::size_t workers,
                                     RunCounter* counter = nullptr);

/// Restarted variant: member i starts from starts[i].
std::vector<ForwardRun> run_ensemble(const ForwardModel& model,
                                     const std::vector<RockRealization>& rocks,
                                     const std::vector<ModelState>& starts, std::size_t n_steps,
                                     std::size_t workers, RunCounter* counter = nullptr);

}  // namespace neinfer
