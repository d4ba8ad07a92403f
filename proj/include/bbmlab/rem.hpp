#pragma once

#include <cstdint>

#include "bbmlab/atoms.hpp"
#include "bbmlab/rng.hpp"

namespace bbmlab {

// Bare PPP(e^{-sqrt(2) x} dx) sample: the limiting REM energies.
struct RemConfiguration {
    WeightedAtomConfiguration atoms;
};

RemConfiguration sample_rem_configuration(double truncation_lower, RngStream& rng);

// Q^REM(beta, beta') = sum e^{(beta+beta') eta} / (sum e^{beta eta} sum
// e^{beta' eta}), evaluated in log space. Bitwise identical to overlap_Q
// on the same atoms with degenerate decorations.
double overlap_Q_rem(const RemConfiguration& config, double beta, double beta_prime);

struct MeanOverlapRem {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_samples = 0;
    // Doubling |truncation_lower| moved the mean by less than one combined
    // standard error.
    bool truncation_stable = false;
    double mean_doubled_truncation = 0.0;
};

// Monte Carlo E[Q^REM] over independent PPP samples, with a
// truncation-sensitivity re-run at doubled depth.
MeanOverlapRem mean_overlap_rem(double beta, double beta_prime, std::size_t n_samples,
                                double truncation_lower, RngStream& rng);

// Exact law of the binary branching population size at the horizon,
// realized through the jump chain of the birth process.
std::uint64_t sample_population_count(double horizon, RngStream& rng);

struct RemFromBbmCount {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t replicas = 0;
};

// Finite-t REM: |N_t| from the branching count chain, positions i.i.d.
// N(0, t); the same-index Gibbs product mass sum_i p_i p'_i is computed
// exactly on each sample.
RemFromBbmCount rem_from_bbm_count(double horizon, double beta, double beta_prime,
                                   std::size_t replicas, RngStream& rng);

} // namespace bbmlab
