#pragma once

#include <cmath>
#include <numbers>

namespace bbmlab {

// Critical inverse temperature of the model.
inline constexpr double beta_critical = std::numbers::sqrt2;

// Centering term for the maximum: m_t = sqrt(2) t - 3/(2 sqrt(2)) log t.
inline double centering_m(double t) {
    return std::numbers::sqrt2 * t - 1.5 / std::numbers::sqrt2 * std::log(t);
}

// Limiting averaged free energy.
inline double free_energy_limit(double beta) {
    const double r = beta / beta_critical;
    return beta <= beta_critical ? 1.0 + r * r : 2.0 * r;
}

// Standard normal CDF.
inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

} // namespace bbmlab
