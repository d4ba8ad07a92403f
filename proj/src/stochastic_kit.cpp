#include "bbmlab/stochastic_kit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "bbmlab/constants.hpp"

namespace bbmlab {

double log_sum_exp(std::span<const double> values) {
    if (values.empty())
        throw std::domain_error("log_sum_exp: empty input");
    const double m = *std::max_element(values.begin(), values.end());
    if (!std::isfinite(m))
        return m; // all -inf stays -inf; +inf dominates
    double acc = 0.0;
    for (double v : values)
        acc += std::exp(v - m);
    return m + std::log(acc);
}

WeightedAtomConfiguration sample_ppp_exponential(double lower, RngStream& rng) {
    if (!std::isfinite(lower))
        throw std::domain_error("sample_ppp_exponential: lower must be finite");
    // Mass of the intensity above level x is L(x) = e^{-sqrt(2) x}/sqrt(2).
    // Mapping atoms through L turns them into the arrival times of a
    // unit-rate Poisson process on [0, L(lower)], so cumulative Exp(1)
    // draws produce the atoms directly in decreasing order.
    const double sqrt2 = std::numbers::sqrt2;
    const double total_mass = std::exp(-sqrt2 * lower) / sqrt2;
    WeightedAtomConfiguration out;
    out.atoms.reserve(static_cast<std::size_t>(total_mass) + 8);
    double s = rng.exponential();
    while (s < total_mass) {
        out.atoms.push_back({-std::log(sqrt2 * s) / sqrt2, 0.0});
        s += rng.exponential();
    }
    out.sorted_nonincreasing = true;
    return out;
}

std::vector<std::pair<double, double>> sample_bessel3_path(double horizon, double step,
                                                           RngStream& rng) {
    if (!(step > 0.0) || !(horizon > 0.0) || step > horizon)
        throw std::domain_error("sample_bessel3_path: need 0 < step <= horizon");
    std::vector<std::pair<double, double>> path;
    const std::size_t n = static_cast<std::size_t>(std::ceil(horizon / step - 1e-12));
    path.reserve(n + 1);
    double bx = 0.0, by = 0.0, bz = 0.0;
    double t = 0.0;
    path.emplace_back(0.0, 0.0);
    for (std::size_t i = 1; i <= n; ++i) {
        const double next_t = std::min(static_cast<double>(i) * step, horizon);
        const double sd = std::sqrt(next_t - t);
        bx += sd * rng.normal();
        by += sd * rng.normal();
        bz += sd * rng.normal();
        t = next_t;
        path.emplace_back(t, std::sqrt(bx * bx + by * by + bz * bz));
    }
    return path;
}

std::size_t gumbel_max_sample(std::span<const double> log_weights, RngStream& rng) {
    if (log_weights.empty())
        throw std::domain_error("gumbel_max_sample: empty input");
    std::size_t best = 0;
    double best_key = log_weights[0] + rng.gumbel();
    for (std::size_t i = 1; i < log_weights.size(); ++i) {
        const double key = log_weights[i] + rng.gumbel();
        if (key > best_key) {
            best_key = key;
            best = i;
        }
    }
    return best;
}

double gaussian_truncated_exp_moment(double lambda, double x) {
    return std::exp(0.5 * lambda * lambda) * normal_cdf(x - lambda);
}

double log_laplace_poisson_functional(const std::function<double(double)>& f,
                                      const std::function<double(double)>& intensity,
                                      const std::function<double(double, RngStream&)>& a_sampler,
                                      double lambda, std::span<const double> grid,
                                      int mc_samples, RngStream& rng) {
    if (lambda < 0.0)
        throw std::domain_error("log_laplace_poisson_functional: lambda must be >= 0");
    if (grid.size() < 2)
        throw std::domain_error("log_laplace_poisson_functional: need at least two grid points");
    if (mc_samples < 1)
        throw std::domain_error("log_laplace_poisson_functional: mc_samples must be >= 1");
    if (lambda == 0.0)
        return 0.0;

    std::vector<double> integrand(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (i > 0 && !(grid[i] > grid[i - 1]))
            throw std::domain_error("log_laplace_poisson_functional: grid must be increasing");
        const double t = grid[i];
        const double ft = f(t);
        double mean = 0.0;
        for (int k = 0; k < mc_samples; ++k)
            mean += -std::expm1(-lambda * ft * a_sampler(t, rng));
        mean /= mc_samples;
        const double mu = intensity(t);
        if (mu < 0.0)
            throw std::domain_error("log_laplace_poisson_functional: negative intensity");
        integrand[i] = mean * mu;
    }
    double phi = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i)
        phi += 0.5 * (integrand[i] + integrand[i - 1]) * (grid[i] - grid[i - 1]);
    return phi;
}

} // namespace bbmlab
