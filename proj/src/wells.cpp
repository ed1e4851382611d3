#include "neinfer/wells.hpp"

#include <cmath>

#include "neinfer/error.hpp"

namespace neinfer {

void Well::validate(const Grid& grid) const {
    if (perforations.empty()) throw InvalidArgument("well '" + name + "': no perforations");
    for (const CellIndex& c : perforations) {
        if (!grid.contains(c)) throw InvalidArgument("well '" + name + "': perforation outside grid");
    }
    if (mode == WellMode::BhpProducer && !(pi > 0.0)) {
        throw InvalidArgument("well '" + name + "': production index must be > 0");
    }
    if (mode == WellMode::RateInjector && !(rate > 0.0)) {
        throw InvalidArgument("well '" + name + "': injection rate must be > 0");
    }
}

double well_rate(double p_cell, const Well& well) {
    if (well.mode != WellMode::BhpProducer) {
        throw InvalidArgument("well_rate: '" + well.name + "' is rate-controlled");
    }
    return well.pi * (p_cell - well.bhp);
}

void TimeGrid::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("time grid: dt must be > 0");
    if (n_steps < 1) throw InvalidArgument("time grid: n_steps must be >= 1");
}

}  // namespace neinfer
