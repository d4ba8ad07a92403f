#include "bbmlab/observables.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "bbmlab/constants.hpp"
#include "bbmlab/stochastic_kit.hpp"

namespace bbmlab {

double log_partition(const PopulationSnapshot& snap, const GibbsSpec& spec) {
    if (snap.particles.empty())
        throw std::domain_error("log_partition: empty snapshot");
    std::vector<double> terms;
    terms.reserve(snap.particles.size());
    for (const auto& p : snap.particles)
        terms.push_back(spec.beta * (spec.centered ? p.centered : p.position));
    return log_sum_exp(terms);
}

GibbsSampler::GibbsSampler(const PopulationSnapshot& snap, double beta, bool centered) {
    if (snap.particles.empty())
        throw std::domain_error("GibbsSampler: empty snapshot");
    double max_w = -std::numeric_limits<double>::infinity();
    for (const auto& p : snap.particles)
        max_w = std::max(max_w, beta * (centered ? p.centered : p.position));
    cumulative_.reserve(snap.particles.size());
    double acc = 0.0;
    for (const auto& p : snap.particles) {
        acc += std::exp(beta * (centered ? p.centered : p.position) - max_w);
        cumulative_.push_back(acc);
    }
}

std::size_t GibbsSampler::draw(RngStream& rng) const {
    const double u = rng.uniform01() * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()),
                                 cumulative_.size() - 1);
}

std::pair<std::size_t, std::size_t> gibbs_sample_pair(const PopulationSnapshot& snap,
                                                      double beta, double beta_prime,
                                                      RngStream& rng) {
    GibbsSampler first(snap, beta);
    GibbsSampler second(snap, beta_prime);
    const std::size_t u = first.draw(rng);
    const std::size_t v = second.draw(rng);
    return {u, v};
}

FreeEnergyEstimate free_energy_estimate(double horizon, double beta, std::size_t replicas,
                                        RngStream& rng) {
    if (replicas < 2)
        throw std::domain_error("free_energy_estimate: need at least two replicas");
    std::vector<double> raw(replicas), corrected(replicas);
    const double mt = centering_m(horizon);
    for (std::size_t r = 0; r < replicas; ++r) {
        RngStream stream = rng.split(r);
        const ParticleTree tree = simulate(horizon, Normalization::standard, std::nullopt, stream);
        const PopulationSnapshot snap = snapshot(tree);
        const double log_z = log_partition(snap, {beta, /*centered=*/false});
        raw[r] = log_z / horizon;
        corrected[r] = (log_z - beta * mt) / horizon + std::numbers::sqrt2 * beta;
    }
    auto mean_se = [](const std::vector<double>& xs) {
        const double n = static_cast<double>(xs.size());
        const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
        double ss = 0.0;
        for (double x : xs)
            ss += (x - mean) * (x - mean);
        return std::pair<double, double>{mean, std::sqrt(ss / (n - 1.0) / n)};
    };
    FreeEnergyEstimate out;
    std::tie(out.mean, out.std_error) = mean_se(raw);
    std::tie(out.corrected_mean, out.corrected_std_error) = mean_se(corrected);
    out.replicas = replicas;
    return out;
}

ReplicaOverlapResult replica_overlap(const ParticleTree& tree, const PopulationSnapshot& snap,
                                     double beta, double beta_prime, double a,
                                     std::size_t n_pairs, RngStream rng) {
    if (n_pairs == 0)
        throw std::domain_error("replica_overlap: n_pairs must be positive");
    ReplicaOverlapResult res;
    res.n_pairs = n_pairs;
    GibbsSampler sampler_beta(snap, beta);
    GibbsSampler sampler_beta_prime(snap, beta_prime);
    std::uint64_t ge_a = 0;
    for (std::size_t k = 0; k < n_pairs; ++k) {
        const std::size_t u = sampler_beta.draw(rng);
        const std::size_t v = sampler_beta_prime.draw(rng);
        const double q = overlap(tree, snap.particles[u].node, snap.particles[v].node);
        if (q >= a)
            ++ge_a;
        const auto bin = std::min<std::size_t>(
            static_cast<std::size_t>(q * kOverlapHistogramBins), kOverlapHistogramBins - 1);
        ++res.histogram[bin];
    }
    res.p_ge_a = static_cast<double>(ge_a) / static_cast<double>(n_pairs);
    res.log_z_beta = log_partition(snap, {beta, true});
    res.log_z_beta_prime = log_partition(snap, {beta_prime, true});
    res.z_derivative = derivative_martingale(snap);
    double max_c = -std::numeric_limits<double>::infinity();
    for (const auto& p : snap.particles)
        max_c = std::max(max_c, p.centered);
    res.max_centered = max_c;
    return res;
}

OverlapEstimate merge_overlap_results(std::span<const ReplicaOverlapResult> results, double a) {
    if (results.empty())
        throw std::domain_error("merge_overlap_results: no replicas");
    OverlapEstimate est;
    est.threshold_a = a;
    est.n_replicas = results.size();
    double sum_p = 0.0, sum_within_var = 0.0;
    for (const auto& r : results) {
        sum_p += r.p_ge_a;
        est.n_pairs += r.n_pairs;
        sum_within_var += r.p_ge_a * (1.0 - r.p_ge_a) / static_cast<double>(r.n_pairs);
        for (std::size_t b = 0; b < kOverlapHistogramBins; ++b)
            est.histogram[b] += r.histogram[b];
    }
    const double n = static_cast<double>(results.size());
    est.mean = sum_p / n;
    double ss = 0.0;
    for (const auto& r : results)
        ss += (r.p_ge_a - est.mean) * (r.p_ge_a - est.mean);
    est.std_error = results.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    est.within_std_error = std::sqrt(sum_within_var) / n;
    return est;
}

OverlapEstimate overlap_distribution(const SnapshotStream& stream, std::size_t n_replicas,
                                     double beta, double beta_prime, double a,
                                     std::size_t n_pairs_per_replica, RngStream& rng) {
    if (!(a > 0.0 && a < 1.0))
        throw std::domain_error("overlap_distribution: a must lie in (0,1)");
    if (n_pairs_per_replica == 0)
        throw std::domain_error("overlap_distribution: n_pairs must be positive");
    std::vector<ReplicaOverlapResult> results;
    results.reserve(n_replicas);
    for (std::size_t r = 0; r < n_replicas; ++r) {
        const ReplicaSample sample = stream(r);
        results.push_back(replica_overlap(sample.tree, sample.snap, beta, beta_prime, a,
                                          n_pairs_per_replica, rng.split(r)));
    }
    return merge_overlap_results(results, a);
}

RhoMeasure rho_measure(const PopulationSnapshot& snap, double beta) {
    RhoMeasure rho;
    rho.beta = beta;
    rho.atoms.reserve(snap.particles.size());
    for (const auto& p : snap.particles)
        rho.atoms.push_back({p.gamma, beta * p.centered});
    return rho;
}

double rho_log_total_mass(const RhoMeasure& rho) {
    std::vector<double> w;
    w.reserve(rho.atoms.size());
    for (const auto& a : rho.atoms)
        w.push_back(a.log_weight);
    return log_sum_exp(w);
}

double rho_log_mass_centered_below(const RhoMeasure& rho, double level) {
    std::vector<double> w;
    for (const auto& a : rho.atoms)
        if (a.log_weight <= -rho.beta * level)
            w.push_back(a.log_weight);
    if (w.empty())
        return -std::numeric_limits<double>::infinity();
    return log_sum_exp(w);
}

std::vector<std::vector<std::size_t>> cluster_decompose(const PopulationSnapshot& snap,
                                                        double delta) {
    if (!(delta > 0.0))
        throw std::domain_error("cluster_decompose: delta must be positive");
    std::vector<std::size_t> order(snap.particles.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return snap.particles[a].gamma < snap.particles[b].gamma;
    });
    std::vector<std::vector<std::size_t>> clusters;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const bool new_cluster =
            k == 0 || snap.particles[order[k]].gamma - snap.particles[order[k - 1]].gamma > delta;
        if (new_cluster)
            clusters.emplace_back();
        clusters.back().push_back(order[k]);
    }
    return clusters;
}

double derivative_martingale(const PopulationSnapshot& snap) {
    if (snap.frame != Normalization::standard)
        throw std::domain_error("derivative_martingale: needs the standard frame");
    const double s2t = std::numbers::sqrt2 * snap.horizon;
    double sum = 0.0;
    for (const auto& p : snap.particles) {
        const double gap = s2t - p.position;
        sum += gap * std::exp(-std::numbers::sqrt2 * gap);
    }
    return sum;
}

std::uint64_t level_set_count(const PopulationSnapshot& snap, double level) {
    std::uint64_t n = 0;
    for (const auto& p : snap.particles)
        n += p.centered >= -level ? 1 : 0;
    return n;
}

namespace {

// Least-squares slope of y on x.
double regression_slope(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

} // namespace

TailReport max_statistics(std::span<const double> max_centered, std::span<const double> levels) {
    if (max_centered.size() < 1000)
        throw std::domain_error("max_statistics: need at least 1000 replicas");
    TailReport report;
    report.n_replicas = max_centered.size();
    report.levels.assign(levels.begin(), levels.end());
    const double n = static_cast<double>(max_centered.size());
    std::vector<double> xs, ys_corrected, ys_raw;
    for (double a : levels) {
        std::uint64_t count = 0;
        for (double m : max_centered)
            count += m > a ? 1 : 0;
        report.exceed_counts.push_back(count);
        const double p = static_cast<double>(count) / n;
        report.tail_prob.push_back(p);
        if (count > 0) {
            xs.push_back(a);
            ys_raw.push_back(std::log(p));
            // Bramson's bound carries an (A+1)^2 prefactor; remove it so the
            // fitted slope estimates the pure exponential rate.
            ys_corrected.push_back(std::log(p) - 2.0 * std::log(a + 1.0));
        }
    }
    if (xs.size() >= 2) {
        report.decay_rate = regression_slope(xs, ys_corrected);
        report.raw_slope = regression_slope(xs, ys_raw);
    }
    std::vector<double> sorted(max_centered.begin(), max_centered.end());
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    report.median_max = sorted[sorted.size() / 2];
    return report;
}

namespace {

// PSD Cholesky with a zero-pivot tolerance; throws on indefiniteness.
std::vector<double> psd_cholesky(std::span<const double> cov, std::size_t d) {
    std::vector<double> L(d * d, 0.0);
    double scale = 0.0;
    for (std::size_t i = 0; i < d; ++i)
        scale = std::max(scale, std::abs(cov[i * d + i]));
    const double tol = 1e-10 * std::max(scale, 1.0);
    for (std::size_t j = 0; j < d; ++j) {
        double diag = cov[j * d + j];
        for (std::size_t k = 0; k < j; ++k)
            diag -= L[j * d + k] * L[j * d + k];
        if (diag < -tol)
            throw std::domain_error("gaussian_ibp_check: covariance not PSD");
        L[j * d + j] = diag > tol ? std::sqrt(diag) : 0.0;
        for (std::size_t i = j + 1; i < d; ++i) {
            double v = cov[i * d + j];
            for (std::size_t k = 0; k < j; ++k)
                v -= L[i * d + k] * L[j * d + k];
            if (L[j * d + j] > 0.0)
                L[i * d + j] = v / L[j * d + j];
            else if (std::abs(v) > tol)
                throw std::domain_error("gaussian_ibp_check: covariance not PSD");
        }
    }
    return L;
}

} // namespace

IbpReport gaussian_ibp_check(std::span<const double> covariance, std::size_t dim,
                             IbpTestFunction f, std::size_t n_samples, RngStream& rng) {
    if (dim == 0 || dim > 10 || covariance.size() != dim * dim)
        throw std::domain_error("gaussian_ibp_check: dimension must be in [1,10]");
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (std::abs(covariance[i * dim + j] - covariance[j * dim + i]) > 1e-12)
                throw std::domain_error("gaussian_ibp_check: covariance not symmetric");
    const std::vector<double> L = psd_cholesky(covariance, dim);

    std::vector<double> x(dim), g(dim), grad(dim), p(dim);
    // Per-coordinate accumulators of D_i = X_i F(X) - sum_j cov_ij d_j F(X).
    std::vector<double> mean(dim, 0.0), m2(dim, 0.0);
    for (std::size_t s = 0; s < n_samples; ++s) {
        for (std::size_t i = 0; i < dim; ++i)
            g[i] = rng.normal();
        for (std::size_t i = 0; i < dim; ++i) {
            double v = 0.0;
            for (std::size_t k = 0; k <= i; ++k)
                v += L[i * dim + k] * g[k];
            x[i] = v;
        }
        double F = 0.0;
        if (f == IbpTestFunction::linear) {
            for (std::size_t i = 0; i < dim; ++i) {
                F += x[i];
                grad[i] = 1.0;
            }
        } else {
            // Softmax-weighted coordinate, the Gibbs-average test function.
            double mx = *std::max_element(x.begin(), x.end());
            double z = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                p[i] = std::exp(x[i] - mx);
                z += p[i];
            }
            for (std::size_t i = 0; i < dim; ++i) {
                p[i] /= z;
                F += x[i] * p[i];
            }
            for (std::size_t i = 0; i < dim; ++i)
                grad[i] = p[i] * (1.0 + x[i] - F);
        }
        for (std::size_t i = 0; i < dim; ++i) {
            double rhs = 0.0;
            for (std::size_t j = 0; j < dim; ++j)
                rhs += covariance[i * dim + j] * grad[j];
            const double d = x[i] * F - rhs;
            const double delta = d - mean[i];
            mean[i] += delta / static_cast<double>(s + 1);
            m2[i] += delta * (d - mean[i]);
        }
    }
    IbpReport report;
    report.n_samples = n_samples;
    for (std::size_t i = 0; i < dim; ++i) {
        const double var = m2[i] / static_cast<double>(n_samples - 1);
        const double se = std::sqrt(var / static_cast<double>(n_samples));
        const double z = se > 0.0 ? mean[i] / se : 0.0;
        report.z_scores.push_back(z);
        report.max_abs_z = std::max(report.max_abs_z, std::abs(z));
    }
    return report;
}

std::string observables_csv_header() {
    return "seed,t,beta,beta_prime,a,q_mean,n_pairs,logZ_beta,logZ_betaprime,"
           "Z_derivative,max_centered";
}

std::string observables_csv_row(std::uint64_t seed_stream, double t, double beta,
                                double beta_prime, double a, const ReplicaOverlapResult& r) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%llu,%.17g,%.17g,%.17g,%.17g",
                  static_cast<unsigned long long>(seed_stream), t, beta, beta_prime, a, r.p_ge_a,
                  static_cast<unsigned long long>(r.n_pairs), r.log_z_beta, r.log_z_beta_prime,
                  r.z_derivative, r.max_centered);
    return buf;
}

} // namespace bbmlab
