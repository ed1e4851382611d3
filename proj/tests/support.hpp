#pragma once

#include <cstddef>
#include <cmath>
#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "neinfer/grid.hpp"
#include "neinfer/units.hpp"

namespace testing_support {

inline neinfer::RockRealization uniform_rock(std::size_t n, double perm_md, double porosity) {
    return {std::vector<double>(n, perm_md), std::vector<double>(n, porosity)};
}

/// Log-uniform permeability in [lo, hi] mD.
inline neinfer::RockRealization random_rock(std::size_t n, std::uint64_t seed, double lo = 5.0,
                                            double hi = 2000.0, double porosity = 0.1) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    neinfer::RockRealization r;
    for (std::size_t i = 0; i < n; ++i) r.perm_md.push_back(std::exp(u(rng)));
    r.porosity.assign(n, porosity);
    return r;
}

inline double rel_diff(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace testing_support
