#pragma once

// Conversions between the field units used in configuration files and the
// strict SI used internally.

namespace neinfer::units {

inline constexpr double kMilliDarcy = 9.869233e-16;  // m^2
inline constexpr double kMegaPascal = 1.0e6;          // Pa
inline constexpr double kPsiInverse = 1.0 / 6894.757293168;  // 1/psi in 1/Pa

constexpr double md_to_m2(double k_md) { return k_md * kMilliDarcy; }
constexpr double m2_to_md(double k_m2) { return k_m2 / kMilliDarcy; }
constexpr double mpa_to_pa(double p) { return p * kMegaPascal; }
constexpr double pa_to_mpa(double p) { return p / kMegaPascal; }

}  // namespace neinfer::units
