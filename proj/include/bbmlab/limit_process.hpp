#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bbmlab/atoms.hpp"
#include "bbmlab/bbm.hpp"
#include "bbmlab/fkpp.hpp"
#include "bbmlab/rng.hpp"

namespace bbmlab {

// Discretized sample of the backward path Y: a Brownian motion run to its
// infimum level -sqrt(2) b, glued to a rising Bessel(3) branch, reweighted
// by the exponential functional of G. Stored in the Y frame
// (Y = -sqrt(2) Gamma).
struct BackwardPath {
    std::vector<double> grid; // increasing, starts at 0
    std::vector<double> y;    // Y on the grid; y[0] = 0
    double infimum_level_b = 0.0; // min Y = -sqrt(2) b
    double hitting_time = 0.0;    // grid time where the infimum is reached
    bool weight_accepted = false; // passed the exp(-2 int G) rejection
    // Importance weight e^{b} correcting the Exp(1) proposal for b
    // (self-normalized downstream).
    double log_importance_weight = 0.0;
    // Logged estimate of the exponent mass 2 int_{horizon}^inf G dv that
    // the finite-horizon acceptance test ignored.
    double neglected_tail_bound = 0.0;
    std::size_t proposals_used = 0;

    // Piecewise-linear interpolation; clamps beyond the grid ends.
    double value_at(double t) const;
};

struct BackwardPathOptions {
    double horizon = 50.0;
    double fine_step = 0.01;
    double fine_until = 10.0;
    double geom_ratio = 1.05;
    double max_step = 2.0;
    std::size_t max_rejections = 10000;
};

std::vector<double> make_path_grid(const BackwardPathOptions& opts);

// Rejection sampler for (dens1): proposes b ~ Exp(1), simulates the glued
// path on the grid, accepts with probability exp(-2 int_0^horizon
// G_v(-Y(v)) dv) (trapezoid). Proposals that never reach level b within
// the horizon have not realized their infimum and count as rejections
// (their true acceptance weight is astronomically small anyway).
// Throws SamplerBudgetExhausted after max_rejections.
BackwardPath sample_backward_path(const FkppTable& fkpp, const BackwardPathOptions& opts,
                                  RngStream& rng);

// Accepted paths carry importance weights; drawing from a reservoir
// proportionally to the weights yields approximately unweighted paths for
// downstream decoration sampling.
class BackwardPathReservoir {
public:
    BackwardPathReservoir(const FkppTable& fkpp, const BackwardPathOptions& opts,
                          std::size_t capacity, RngStream rng);
    const BackwardPath& draw(RngStream& rng) const;
    std::size_t size() const { return paths_.size(); }
    const std::vector<BackwardPath>& paths() const { return paths_; }

private:
    std::vector<BackwardPath> paths_;
    std::vector<double> cumulative_weight_;
};

enum class DecorationProvenance { abbs_construction, empirical_extraction };

// One decoration: C-frame atoms (leader at 0, the rest negative), sorted
// nonincreasing. For the abbs construction each atom remembers which
// pi-time produced it, which gives the cluster-wise breakdown of R_beta.
struct DecorationSample {
    WeightedAtomConfiguration atoms;
    DecorationProvenance provenance = DecorationProvenance::abbs_construction;
    double t_max = 0.0;
    double window_depth = 0.0;
    std::vector<std::uint32_t> group; // per-atom pi-time index; 0 = the delta_0 atom
    std::vector<double> group_time;   // pi-time per group (group 0 unused)
    std::vector<double> group_y;      // Y(pi-time) per group
    bool failed = false;              // a conditioning budget ran out
    double failed_time = 0.0;
};

struct DecorationOptions {
    double t_max = 8.0;
    double window_depth = 12.0;
    std::size_t conditioning_budget = 10000;
    // Pruning margin added to window_depth for the cluster simulations.
    double pruning_margin = 4.0;
};

// ABBS construction: Poisson times on [0, t_max] by thinning rate 2 with
// retention 1 - G_t(-Y(t)); at each retained time an independent cluster
// BBM from Y(t), rejection-conditioned on min + Y(t) > 0; atoms mapped to
// the C frame by x -> -x/sqrt(2). Budget exhaustion marks the sample
// failed instead of throwing (consumer decides whether to retry).
DecorationSample sample_decoration_abbs(const BackwardPath& path, const DecorationOptions& opts,
                                        const FkppTable& fkpp, RngStream& rng);

// Empirical decoration: recenter at the argmax, restrict to the argmax's
// gamma-cluster (single linkage at delta) and to atoms within
// window_depth.
DecorationSample extract_decoration_empirical(const PopulationSnapshot& snap,
                                              double window_depth, double delta);

// Supplies decorations to configuration assembly: a degenerate {0}
// decoration, a fixed pool sampled with replacement, or a fresh sampler.
class DecorationSource {
public:
    static DecorationSource degenerate();
    static DecorationSource pool(std::vector<DecorationSample> samples);
    static DecorationSource sampler(std::function<DecorationSample(RngStream&)> fn);

    DecorationSample draw(RngStream& rng) const;
    bool is_sampler() const { return kind_ == Kind::sampler; }

private:
    enum class Kind { degenerate, pool, sampler };
    Kind kind_ = Kind::degenerate;
    std::vector<DecorationSample> pool_;
    std::function<DecorationSample(RngStream&)> fn_;
};

struct DecoratedCluster {
    double xi = 0.0;
    DecorationSample decoration;
};

struct DecoratedConfiguration {
    std::vector<DecoratedCluster> clusters;
    enum class Source { limit_sampler, bbm_extraction } source = Source::limit_sampler;
};

// xi atoms from PPP(e^{-sqrt(2) x} dx) above truncation_lower, each with
// an attached decoration. When the cluster count exceeds
// n_decorations_budget and the source is a fresh sampler, only budget-many
// distinct decorations are generated and attached by uniform draws (the
// pool approximation; Q depends only weakly on far-down clusters).
DecoratedConfiguration assemble_decorated_configuration(std::size_t n_decorations_budget,
                                                        double truncation_lower,
                                                        const DecorationSource& source,
                                                        RngStream& rng);

// Q(beta, beta') of the decorated configuration, evaluated in log space
// with a final stable ratio. Throws std::domain_error when empty.
double overlap_Q(const DecoratedConfiguration& config, double beta, double beta_prime);

// Shared kernel: Q from per-cluster log weights at the two temperatures.
double overlap_q_kernel(std::span<const double> log_w_beta,
                        std::span<const double> log_w_beta_prime);

struct DecorationFunctional {
    double r_beta = 0.0; // sum_{j>=1} e^{beta Delta_j}
    // abbs provenance: per pi-time terms e^{-(beta/sqrt2) Y(t)} C_t, which
    // sum to r_beta.
    std::vector<double> cluster_terms;
    std::vector<double> cluster_times;
};

DecorationFunctional decoration_functional_R(const DecorationSample& decoration, double beta);

struct CouplingReport {
    std::vector<double> times;        // retained pi-times, increasing
    std::vector<std::uint8_t> differed;
    std::vector<double> c_terms; // e^{-(beta/sqrt2) Y(t)} C_t
    std::vector<double> d_terms; // e^{-(beta/sqrt2) Y(t)} D_t
    bool any_differ = false;
    double last_differ_time = -std::numeric_limits<double>::infinity();
    double r_beta = 0.0; // conditioned sum
    double s_beta = 0.0; // unconditioned sum
    double tail_fraction_d = 0.0; // share of s_beta from times > t_max/2
    bool failed = false;
};

// Coupled construction: at each pi-time the first replicate is D_t and the
// first replicate passing the conditioning is C_t; they coincide unless
// the first replicate violates min + Y > 0.
CouplingReport coupling_diagnostic(const BackwardPath& path, const DecorationOptions& opts,
                                   const FkppTable& fkpp, double beta, RngStream& rng);

// JSONL interchange.
std::string decoration_to_jsonl(const DecorationSample& sample, std::uint64_t seed);
std::string configuration_to_jsonl(const DecoratedConfiguration& config, std::uint64_t seed);

} // namespace bbmlab
