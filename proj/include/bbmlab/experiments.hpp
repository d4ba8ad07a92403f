#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bbmlab/bbm.hpp"
#include "bbmlab/fkpp.hpp"
#include "bbmlab/limit_process.hpp"
#include "bbmlab/observables.hpp"
#include "bbmlab/rem.hpp"
#include "bbmlab/rng.hpp"

namespace bbmlab {

// ---------------------------------------------------------------- free energy

struct FreeEnergySweepParams {
    std::vector<double> betas;
    std::vector<double> horizons{8.0, 10.0, 12.0};
    std::size_t replicas = 100;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

struct FreeEnergyCell {
    double t = 0.0;
    double beta = 0.0;
    double mean = 0.0;
    double std_error = 0.0;
    double corrected_mean = 0.0;
    double corrected_std_error = 0.0;
    double analytic = 0.0; // limiting free energy
};

// One replica set per horizon; every beta reuses the same trees.
std::vector<FreeEnergyCell> run_free_energy_sweep(const FreeEnergySweepParams& params);

std::string free_energy_csv(const std::vector<FreeEnergyCell>& cells);

// ---------------------------------------------------------------- BBM overlap

struct OverlapBbmParams {
    double horizon = 12.0;
    double beta = 2.0 * 1.4142135623730951;
    double beta_prime = 2.0 * 1.4142135623730951;
    double a = 0.5;
    std::size_t replicas = 400;
    std::size_t n_pairs = 400;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::optional<double> pruning_cutoff;
};

struct OverlapBbmRun {
    OverlapEstimate estimate;
    std::vector<ReplicaOverlapResult> rows;
};

OverlapBbmRun run_overlap_bbm(const OverlapBbmParams& params);

std::string overlap_bbm_csv(const OverlapBbmParams& params, const OverlapBbmRun& run);

// ------------------------------------------------------------- tail statistics

struct TailRunParams {
    double horizon = 12.0;
    std::size_t replicas = 10000;
    std::vector<double> max_levels{2, 3, 4, 5, 6};
    std::vector<double> level_set_levels{2, 3, 4, 5, 6, 7, 8};
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::optional<double> pruning_cutoff = 20.0;
};

struct TailRunResult {
    TailReport max_tail;
    std::vector<double> level_A;
    std::vector<double> mean_restricted_count; // E[N^A; max <= A]
    double level_slope = 0.0;                  // (A+1)^2-corrected
    double level_slope_raw = 0.0;
};

TailRunResult run_tail_statistics(const TailRunParams& params);

// --------------------------------------------------------- FKPP vs simulation

struct FkppConsistencyParams {
    double horizon = 8.0;
    std::size_t replicas = 10000;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

struct FkppConsistencyResult {
    double sup_distance = 0.0; // KS distance of simulated minima vs G_t
    std::size_t replicas = 0;
};

FkppConsistencyResult run_fkpp_consistency(const FkppTable& table,
                                           const FkppConsistencyParams& params);

// ------------------------------------------------------------- backward paths

struct BackwardPathStudyParams {
    BackwardPathOptions path;
    std::size_t n_paths = 400;
    double window_lo = 100.0;
    double exponent_lo = 0.4;
    double exponent_hi = 0.6;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

struct BackwardPathStudyResult {
    double violation_fraction = 0.0;
    std::size_t n_paths = 0;
    double mean_proposals_per_acceptance = 0.0;
};

BackwardPathStudyResult run_backward_path_study(const FkppTable& table,
                                                const BackwardPathStudyParams& params);

// ----------------------------------------------------------------- decorations

struct DecorationStudyParams {
    DecorationOptions decoration;
    BackwardPathOptions path;
    std::size_t n_samples = 10000;
    std::size_t path_reservoir = 512;
    double beta = 2.0 * 1.4142135623730951;
    std::vector<double> lambdas{1.0, 10.0, 100.0};
    double r_small_threshold = 0.05;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::size_t retries_per_sample = 8;
};

struct DecorationStudyResult {
    std::vector<double> r_values;
    double p_r_below_threshold = 0.0;
    std::vector<double> phi_over_lambda; // phi(lambda)/lambda per lambda
    std::size_t failed_samples = 0;
};

DecorationStudyResult run_decoration_study(const FkppTable& table,
                                           const DecorationStudyParams& params);

// Pool of i.i.d.-by-construction decorations; failed draws retry on a
// derived stream.
std::vector<DecorationSample> make_decoration_pool(const FkppTable& table,
                                                   const DecorationOptions& dec,
                                                   const BackwardPathOptions& path,
                                                   std::size_t reservoir_size,
                                                   std::size_t pool_size, unsigned threads,
                                                   RngStream rng, std::size_t retries = 8);

// ----------------------------------------------------------- limit overlap / Q

struct OverlapLimitParams {
    double beta = 2.0 * 1.4142135623730951;
    double beta_prime = 2.0 * 1.4142135623730951;
    std::size_t n_configs = 4000;
    double truncation_lower = -5.0;
    std::size_t decoration_pool = 2048;
    std::size_t path_reservoir = 384;
    DecorationOptions decoration;
    BackwardPathOptions path;
    bool degenerate_decorations = false;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

struct OverlapLimitRun {
    std::vector<double> q_samples;
    double mean = 0.0;
    double std_error = 0.0;
};

OverlapLimitRun run_overlap_limit(const FkppTable& table, const OverlapLimitParams& params);

// -------------------------------------------------------------- REM comparison

struct CompareRemParams {
    double beta = 1.5 * 1.4142135623730951;
    double beta_prime = 3.0 * 1.4142135623730951;
    std::size_t n_pairs = 10000;
    double truncation_lower = -7.0;
    std::size_t decoration_pool = 2048;
    std::size_t path_reservoir = 384;
    DecorationOptions decoration;
    BackwardPathOptions path;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

struct CompareRemRun {
    double mean_bbm_limit = 0.0;
    double mean_rem = 0.0;
    double difference = 0.0;
    double se_difference = 0.0;
    double one_sided_p = 1.0; // P(difference >= 0 | data), normal theory
    std::size_t n_pairs = 0;
};

// Paired construction: each configuration shares its xi atoms between the
// decorated functional and the bare REM functional, so the truncation and
// PPP noise cancel in the difference.
CompareRemRun run_compare_rem(const FkppTable& table, const CompareRemParams& params);

std::string compare_rem_json(const CompareRemParams& params, const CompareRemRun& run);

} // namespace bbmlab
