#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "neinfer/grid.hpp"

namespace neinfer {

enum class WellMode { BhpProducer, RateInjector };

/// A well completed in one or more cells.
///
/// Bottom-hole-pressure producers flow each perforation at
/// `pi * (p_cell - bhp)`; rate injectors split `rate` equally over their
/// perforations. Positive rates are production.
struct Well {
    std::string name;
    std::vector<CellIndex> perforations;
    WellMode mode = WellMode::BhpProducer;
    double pi = 0.0;    // m^3 s^-1 Pa^-1 per perforation (single phase)
    double bhp = 0.0;   // Pa
    double rate = 0.0;  // m^3 s^-1, injectors only

    void validate(const Grid& grid) const;
};

/// Production rate PI * (p_cell - p_wf) for a bottom-hole-pressure well.
/// Negative when the cell pressure is below the bottom-hole pressure.
double well_rate(double p_cell, const Well& well);

struct TimeGrid {
    double dt = 0.0;  // s
    std::size_t n_steps = 0;

    void validate() const;
};

/// Per-step well rates, m^3/s, positive = production. Stored [step][well].
struct ResponseSeries {
    std::size_t n_steps = 0;
    std::size_t n_wells = 0;
    std::vector<double> rates;

    ResponseSeries() = default;
    ResponseSeries(std::size_t steps, std::size_t wells)
        : n_steps(steps), n_wells(wells), rates(steps * wells, 0.0) {}

    double& at(std::size_t step, std::size_t well) { return rates[step * n_wells + well]; }
    double at(std::size_t step, std::size_t well) const { return rates[step * n_wells + well]; }
};

}  // namespace neinfer
