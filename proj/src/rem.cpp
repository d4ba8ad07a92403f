#include "bbmlab/rem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bbmlab/limit_process.hpp"
#include "bbmlab/stochastic_kit.hpp"

namespace bbmlab {

RemConfiguration sample_rem_configuration(double truncation_lower, RngStream& rng) {
    RemConfiguration config;
    config.atoms = sample_ppp_exponential(truncation_lower, rng);
    return config;
}

double overlap_Q_rem(const RemConfiguration& config, double beta, double beta_prime) {
    if (config.atoms.empty())
        throw std::domain_error("overlap_Q_rem: empty configuration");
    std::vector<double> wb(config.atoms.size()), wbp(config.atoms.size());
    for (std::size_t i = 0; i < config.atoms.size(); ++i) {
        wb[i] = beta * config.atoms.atoms[i].location;
        wbp[i] = beta_prime * config.atoms.atoms[i].location;
    }
    return overlap_q_kernel(wb, wbp);
}

namespace {

std::pair<double, double> mc_mean(double beta, double beta_prime, std::size_t n, double lower,
                                  RngStream& rng, std::uint64_t lane) {
    double mean = 0.0, m2 = 0.0;
    std::size_t used = 0;
    for (std::size_t k = 0; k < n; ++k) {
        RngStream stream = rng.split(lane + k);
        const RemConfiguration config = sample_rem_configuration(lower, stream);
        if (config.atoms.empty())
            continue; // possible only for high truncation levels
        const double q = overlap_Q_rem(config, beta, beta_prime);
        ++used;
        const double d = q - mean;
        mean += d / static_cast<double>(used);
        m2 += d * (q - mean);
    }
    if (used < 2)
        throw std::domain_error("mean_overlap_rem: too few nonempty configurations");
    const double var = m2 / static_cast<double>(used - 1);
    return {mean, std::sqrt(var / static_cast<double>(used))};
}

} // namespace

MeanOverlapRem mean_overlap_rem(double beta, double beta_prime, std::size_t n_samples,
                                double truncation_lower, RngStream& rng) {
    if (n_samples < 100)
        throw std::domain_error("mean_overlap_rem: need at least 100 samples");
    MeanOverlapRem out;
    out.n_samples = n_samples;
    const auto [mean, se] = mc_mean(beta, beta_prime, n_samples, truncation_lower, rng, 0);
    out.mean = mean;
    out.std_error = se;
    const auto [mean2, se2] =
        mc_mean(beta, beta_prime, n_samples, 2.0 * truncation_lower, rng, 1ull << 32);
    out.mean_doubled_truncation = mean2;
    out.truncation_stable = std::abs(mean2 - mean) < std::sqrt(se * se + se2 * se2);
    return out;
}

std::uint64_t sample_population_count(double horizon, RngStream& rng) {
    // Jump chain of the binary birth process: from k particles the next
    // split arrives at rate k.
    std::uint64_t k = 1;
    double t = rng.exponential(1.0);
    while (t <= horizon) {
        ++k;
        t += rng.exponential(static_cast<double>(k));
    }
    return k;
}

RemFromBbmCount rem_from_bbm_count(double horizon, double beta, double beta_prime,
                                   std::size_t replicas, RngStream& rng) {
    if (horizon > 12.0)
        throw std::domain_error("rem_from_bbm_count: horizon capped at 12");
    if (replicas < 2)
        throw std::domain_error("rem_from_bbm_count: need at least two replicas");
    const double sd = std::sqrt(horizon);
    double mean = 0.0, m2 = 0.0;
    std::vector<double> x;
    for (std::size_t r = 0; r < replicas; ++r) {
        RngStream stream = rng.split(r);
        const std::uint64_t n = sample_population_count(horizon, stream);
        x.resize(n);
        double max_x = -std::numeric_limits<double>::infinity();
        for (auto& v : x) {
            v = sd * stream.normal();
            max_x = std::max(max_x, v);
        }
        // Diagonal mass sum_i p_i p'_i with both softmaxes anchored at the
        // common argmax.
        double zb = 0.0, zbp = 0.0, joint = 0.0;
        for (double v : x) {
            const double eb = std::exp(beta * (v - max_x));
            const double ebp = std::exp(beta_prime * (v - max_x));
            zb += eb;
            zbp += ebp;
            joint += eb * ebp;
        }
        const double q = joint / (zb * zbp);
        const double d = q - mean;
        mean += d / static_cast<double>(r + 1);
        m2 += d * (q - mean);
    }
    RemFromBbmCount out;
    out.replicas = replicas;
    out.mean = mean;
    out.std_error = std::sqrt(m2 / static_cast<double>(replicas - 1) /
                              static_cast<double>(replicas));
    return out;
}

} // namespace bbmlab
