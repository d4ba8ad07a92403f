#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "bbmlab/atoms.hpp"
#include "bbmlab/rng.hpp"

namespace bbmlab {

// log(sum_i exp(v_i)), stabilized by shifting with the maximum so that
// result(v + c) == result(v) + c holds to float precision.
// Throws std::domain_error on empty input.
double log_sum_exp(std::span<const double> values);

// Sample of a Poisson point process with intensity e^{-sqrt(2) x} dx on
// [lower, infinity). Atoms are generated largest-first through the
// arrival-time construction and returned sorted nonincreasing with zero
// log-weights. The neglected mass below `lower` is
// e^{-sqrt(2) |lower|} / sqrt(2) in expectation relative to nothing --
// callers pick `lower` so that e^{sqrt(2) lower}-scale weights are
// negligible for their beta.
WeightedAtomConfiguration sample_ppp_exponential(double lower, RngStream& rng);

// Grid sample of a three-dimensional Bessel process started from 0,
// realized as |B_t| for a standard 3d Brownian motion stepped exactly on
// the grid. Returns (time, value) pairs including t = 0.
// Throws std::domain_error unless 0 < step <= horizon.
std::vector<std::pair<double, double>> sample_bessel3_path(double horizon, double step,
                                                           RngStream& rng);

// Index i with probability exp(w_i) / sum_j exp(w_j), drawn by perturbing
// each log-weight with Gumbel noise and taking the argmax; no linear-space
// normalization ever happens. Throws std::domain_error on empty input.
std::size_t gumbel_max_sample(std::span<const double> log_weights, RngStream& rng);

// E[e^{lambda G} 1_{G <= x}] for standard normal G; equals
// e^{lambda^2/2} Phi(x - lambda). Satisfies the bound e^{lambda x - x^2/2}
// whenever lambda > x > 0.
double gaussian_truncated_exp_moment(double lambda, double x);

// Trapezoid approximation of the log-Laplace exponent
//   phi(lambda) = int E[1 - e^{-lambda f(t) A_t}] intensity(t) dt
// of sum_{t in PPP(intensity)} f(t) A_t. The inner expectation over A_t is
// a Monte Carlo mean of `mc_samples` draws from `a_sampler` (pass 1 when
// A_t is deterministic). Grid must be strictly increasing; lambda >= 0.
double log_laplace_poisson_functional(const std::function<double(double)>& f,
                                      const std::function<double(double)>& intensity,
                                      const std::function<double(double, RngStream&)>& a_sampler,
                                      double lambda, std::span<const double> grid,
                                      int mc_samples, RngStream& rng);

} // namespace bbmlab
