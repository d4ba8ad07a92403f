#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bbmlab/atoms.hpp"
#include "bbmlab/bbm.hpp"
#include "bbmlab/rng.hpp"

namespace bbmlab {

struct GibbsSpec {
    double beta = 1.0;
    bool centered = true; // weight by exp(beta * centered position)
};

// log Z = log sum_u exp(beta x_u). Centered and uncentered versions differ
// by exactly beta * m_t. Throws std::domain_error on an empty snapshot.
double log_partition(const PopulationSnapshot& snap, const GibbsSpec& spec);

// Cached categorical sampler for one Gibbs measure on a fixed snapshot.
// Weights are normalized against the max in log space; draws cost
// O(log n). Distribution identical to gumbel_max_sample on the same
// log-weights.
class GibbsSampler {
public:
    GibbsSampler(const PopulationSnapshot& snap, double beta, bool centered = true);
    std::size_t draw(RngStream& rng) const;

private:
    std::vector<double> cumulative_;
};

// One draw from G_beta and one independent draw from G_beta', both on the
// same snapshot. Returns indices into snap.particles.
std::pair<std::size_t, std::size_t> gibbs_sample_pair(const PopulationSnapshot& snap,
                                                      double beta, double beta_prime,
                                                      RngStream& rng);

struct FreeEnergyEstimate {
    double mean = 0.0;      // (1/t) E[log Z]
    double std_error = 0.0;
    // (1/t) E[log Z] - beta m_t / t + sqrt(2) beta: removes the leading
    // finite-size term for beta > beta_c.
    double corrected_mean = 0.0;
    double corrected_std_error = 0.0;
    std::size_t replicas = 0;
};

FreeEnergyEstimate free_energy_estimate(double horizon, double beta, std::size_t replicas,
                                        RngStream& rng);

inline constexpr std::size_t kOverlapHistogramBins = 50;

struct OverlapEstimate {
    double threshold_a = 0.5;
    std::uint64_t n_pairs = 0;
    double mean = 0.0; // estimate of E[G_beta (x) G_beta'(q >= a)]
    double std_error = 0.0; // between-replica component (dominant)
    double within_std_error = 0.0;
    std::size_t n_replicas = 0;
    std::array<std::uint64_t, kOverlapHistogramBins> histogram{};
};

// Everything one replica contributes to the overlap experiment.
struct ReplicaOverlapResult {
    double p_ge_a = 0.0;
    std::uint64_t n_pairs = 0;
    std::array<std::uint64_t, kOverlapHistogramBins> histogram{};
    double log_z_beta = 0.0;       // centered
    double log_z_beta_prime = 0.0; // centered
    double z_derivative = 0.0;
    double max_centered = 0.0;
};

ReplicaOverlapResult replica_overlap(const ParticleTree& tree, const PopulationSnapshot& snap,
                                     double beta, double beta_prime, double a,
                                     std::size_t n_pairs, RngStream rng);

struct ReplicaSample {
    ParticleTree tree;
    PopulationSnapshot snap;
};

using SnapshotStream = std::function<ReplicaSample(std::size_t)>;

// Two-temperature overlap distribution across replica snapshots: pairs are
// drawn from G_beta (x) G_beta' on each snapshot (one environment, both
// temperatures), merged deterministically in replica order.
OverlapEstimate overlap_distribution(const SnapshotStream& stream, std::size_t n_replicas,
                                     double beta, double beta_prime, double a,
                                     std::size_t n_pairs_per_replica, RngStream& rng);

OverlapEstimate merge_overlap_results(std::span<const ReplicaOverlapResult> results, double a);

// rho_{beta,t} = sum_u e^{beta centered_u} delta_{gamma_u}: atoms carry
// (gamma location, log mass).
struct RhoMeasure {
    std::vector<WeightedAtom> atoms;
    double beta = 0.0;
};

RhoMeasure rho_measure(const PopulationSnapshot& snap, double beta);

// log of the total rho mass; equals log_partition(centered).
double rho_log_total_mass(const RhoMeasure& rho);
// log mass restricted to particles with centered position <= -level
// (-inf when the restriction is empty).
double rho_log_mass_centered_below(const RhoMeasure& rho, double level);

// Single-linkage grouping of particles by gamma distance <= delta.
// Returns a partition of particle indices; gamma gaps between neighbors
// within a group never exceed delta.
std::vector<std::vector<std::size_t>> cluster_decompose(const PopulationSnapshot& snap,
                                                        double delta);

// sum_u (sqrt(2) t - x_u) e^{-sqrt(2)(sqrt(2) t - x_u)} on uncentered
// standard-frame positions.
double derivative_martingale(const PopulationSnapshot& snap);

// Number of particles with centered position >= -level.
std::uint64_t level_set_count(const PopulationSnapshot& snap, double level);

struct TailReport {
    std::vector<double> levels;
    std::vector<double> tail_prob;
    std::vector<std::uint64_t> exceed_counts;
    // Slope of log P corrected for the (A+1)^2 polynomial factor of the
    // Bramson bound, i.e. kappa in P ~ c (A+1)^2 e^{kappa A}. Negative.
    double decay_rate = 0.0;
    double raw_slope = 0.0;
    double median_max = 0.0;
    std::size_t n_replicas = 0;
};

// Tail statistics of the centered maximum over replicas. Needs >= 1000
// replicas.
TailReport max_statistics(std::span<const double> max_centered, std::span<const double> levels);

enum class IbpTestFunction { linear, softmax };

struct IbpReport {
    std::vector<double> z_scores;
    double max_abs_z = 0.0;
    std::size_t n_samples = 0;
};

// Monte Carlo check of E[X_i F(X)] = sum_j Cov(X_i, X_j) E[d_j F(X)] for a
// centered Gaussian vector. Covariance is row-major d x d, d <= 10; must
// be symmetric PSD.
IbpReport gaussian_ibp_check(std::span<const double> covariance, std::size_t dim,
                             IbpTestFunction f, std::size_t n_samples, RngStream& rng);

// Stable CSV schema for per-replica overlap rows.
std::string observables_csv_header();
std::string observables_csv_row(std::uint64_t seed_stream, double t, double beta,
                                double beta_prime, double a, const ReplicaOverlapResult& r);

} // namespace bbmlab
