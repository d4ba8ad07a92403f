#include "bbmlab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "bbmlab/constants.hpp"
#include "bbmlab/errors.hpp"
#include "bbmlab/parallel.hpp"
#include "bbmlab/stochastic_kit.hpp"

namespace bbmlab {

namespace {

std::pair<double, double> mean_and_se(std::span<const double> xs) {
    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs)
        mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : xs)
        ss += (x - mean) * (x - mean);
    return {mean, xs.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0};
}

double slope_of(std::span<const double> x, std::span<const double> y) {
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

void append_num(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

} // namespace

// ---------------------------------------------------------------- free energy

std::vector<FreeEnergyCell> run_free_energy_sweep(const FreeEnergySweepParams& params) {
    if (params.betas.empty())
        throw ConfigError("free-energy: empty beta grid");
    if (params.replicas < 2)
        throw ConfigError("free-energy: need at least two replicas");
    std::vector<FreeEnergyCell> cells;
    const RngStream master(params.seed, 0);
    for (double t : params.horizons) {
        const double mt = centering_m(t);
        // log Z per (replica, beta); one tree serves every beta.
        std::vector<std::vector<double>> log_z(params.replicas,
                                               std::vector<double>(params.betas.size()));
        parallel_for(params.replicas, params.threads, [&](std::size_t r) {
            RngStream rng = master.split(static_cast<std::uint64_t>(t * 1000) * 1000003 + r);
            const ParticleTree tree = simulate(t, Normalization::standard, std::nullopt, rng);
            const PopulationSnapshot snap = snapshot(tree);
            std::vector<double> terms(snap.particles.size());
            for (std::size_t bi = 0; bi < params.betas.size(); ++bi) {
                for (std::size_t i = 0; i < snap.particles.size(); ++i)
                    terms[i] = params.betas[bi] * snap.particles[i].position;
                log_z[r][bi] = log_sum_exp(terms);
            }
        });
        for (std::size_t bi = 0; bi < params.betas.size(); ++bi) {
            const double beta = params.betas[bi];
            std::vector<double> raw(params.replicas), corrected(params.replicas);
            for (std::size_t r = 0; r < params.replicas; ++r) {
                raw[r] = log_z[r][bi] / t;
                corrected[r] = (log_z[r][bi] - beta * mt) / t + std::numbers::sqrt2 * beta;
            }
            FreeEnergyCell cell;
            cell.t = t;
            cell.beta = beta;
            std::tie(cell.mean, cell.std_error) = mean_and_se(raw);
            std::tie(cell.corrected_mean, cell.corrected_std_error) = mean_and_se(corrected);
            cell.analytic = free_energy_limit(beta);
            cells.push_back(cell);
        }
    }
    return cells;
}

std::string free_energy_csv(const std::vector<FreeEnergyCell>& cells) {
    std::string out = "t,beta,f_mean,f_std_error,f_corrected,f_corrected_std_error,f_analytic\n";
    for (const auto& c : cells) {
        append_num(out, c.t);
        out += ',';
        append_num(out, c.beta);
        out += ',';
        append_num(out, c.mean);
        out += ',';
        append_num(out, c.std_error);
        out += ',';
        append_num(out, c.corrected_mean);
        out += ',';
        append_num(out, c.corrected_std_error);
        out += ',';
        append_num(out, c.analytic);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------- BBM overlap

OverlapBbmRun run_overlap_bbm(const OverlapBbmParams& params) {
    if (!(params.a > 0.0 && params.a < 1.0))
        throw ConfigError("overlap-bbm: a must lie in (0,1)");
    OverlapBbmRun run;
    run.rows.resize(params.replicas);
    const RngStream master(params.seed, 0);
    std::optional<PruningSpec> prune;
    if (params.pruning_cutoff)
        prune = PruningSpec{*params.pruning_cutoff};
    parallel_for(params.replicas, params.threads, [&](std::size_t r) {
        RngStream rng = master.split(r);
        const ParticleTree tree = simulate(params.horizon, Normalization::standard, prune, rng);
        const PopulationSnapshot snap = snapshot(tree);
        run.rows[r] = replica_overlap(tree, snap, params.beta, params.beta_prime, params.a,
                                      params.n_pairs, rng);
    });
    run.estimate = merge_overlap_results(run.rows, params.a);
    return run;
}

std::string overlap_bbm_csv(const OverlapBbmParams& params, const OverlapBbmRun& run) {
    std::string out = observables_csv_header() + "\n";
    for (std::size_t r = 0; r < run.rows.size(); ++r) {
        out += observables_csv_row(r, params.horizon, params.beta, params.beta_prime, params.a,
                                   run.rows[r]);
        out += '\n';
    }
    return out;
}

// ------------------------------------------------------------- tail statistics

TailRunResult run_tail_statistics(const TailRunParams& params) {
    std::vector<double> maxima(params.replicas);
    std::vector<std::vector<double>> restricted(params.replicas);
    const RngStream master(params.seed, 0);
    std::optional<PruningSpec> prune;
    if (params.pruning_cutoff)
        prune = PruningSpec{*params.pruning_cutoff};
    parallel_for(params.replicas, params.threads, [&](std::size_t r) {
        RngStream rng = master.split(r);
        const ParticleTree tree = simulate(params.horizon, Normalization::standard, prune, rng);
        const PopulationSnapshot snap = snapshot(tree);
        double max_c = -std::numeric_limits<double>::infinity();
        for (const auto& p : snap.particles)
            max_c = std::max(max_c, p.centered);
        maxima[r] = max_c;
        restricted[r].resize(params.level_set_levels.size());
        for (std::size_t k = 0; k < params.level_set_levels.size(); ++k) {
            const double A = params.level_set_levels[k];
            restricted[r][k] =
                max_c <= A ? static_cast<double>(level_set_count(snap, A)) : 0.0;
        }
    });

    TailRunResult result;
    result.max_tail = max_statistics(maxima, params.max_levels);
    result.level_A = params.level_set_levels;
    std::vector<double> xs, ys, ys_raw;
    for (std::size_t k = 0; k < params.level_set_levels.size(); ++k) {
        double mean = 0.0;
        for (std::size_t r = 0; r < params.replicas; ++r)
            mean += restricted[r][k];
        mean /= static_cast<double>(params.replicas);
        result.mean_restricted_count.push_back(mean);
        if (mean > 0.0) {
            const double A = params.level_set_levels[k];
            xs.push_back(A);
            ys_raw.push_back(std::log(mean));
            ys.push_back(std::log(mean) - 2.0 * std::log(A + 1.0));
        }
    }
    if (xs.size() >= 2) {
        result.level_slope = slope_of(xs, ys);
        result.level_slope_raw = slope_of(xs, ys_raw);
    }
    return result;
}

// --------------------------------------------------------- FKPP vs simulation

FkppConsistencyResult run_fkpp_consistency(const FkppTable& table,
                                           const FkppConsistencyParams& params) {
    std::vector<double> minima(params.replicas);
    const RngStream master(params.seed, 0);
    parallel_for(params.replicas, params.threads, [&](std::size_t r) {
        RngStream rng = master.split(r);
        const ParticleTree tree =
            simulate(params.horizon, Normalization::standard, std::nullopt, rng);
        double max_std = -std::numeric_limits<double>::infinity();
        for (std::int32_t i = 0; i < static_cast<std::int32_t>(tree.nodes().size()); ++i)
            if (tree.alive_at_horizon(i))
                max_std = std::max(max_std, tree.nodes()[i].position_at_end);
        minima[r] = std::numbers::sqrt2 * (std::numbers::sqrt2 * params.horizon - max_std);
    });
    std::sort(minima.begin(), minima.end());
    double sup = 0.0;
    const double n = static_cast<double>(minima.size());
    for (std::size_t i = 0; i < minima.size(); ++i) {
        const double g = fkpp_query(table, params.horizon, minima[i]);
        sup = std::max(sup, std::abs(static_cast<double>(i + 1) / n - g));
        sup = std::max(sup, std::abs(static_cast<double>(i) / n - g));
    }
    FkppConsistencyResult result;
    result.sup_distance = sup;
    result.replicas = params.replicas;
    return result;
}

// ------------------------------------------------------------- backward paths

BackwardPathStudyResult run_backward_path_study(const FkppTable& table,
                                                const BackwardPathStudyParams& params) {
    std::vector<std::uint8_t> violates(params.n_paths, 0);
    std::vector<double> proposals(params.n_paths, 0.0);
    const RngStream master(params.seed, 0);
    parallel_for(params.n_paths, params.threads, [&](std::size_t k) {
        RngStream rng = master.split(k);
        const BackwardPath path = sample_backward_path(table, params.path, rng);
        proposals[k] = static_cast<double>(path.proposals_used);
        for (std::size_t i = 0; i < path.grid.size(); ++i) {
            const double t = path.grid[i];
            if (t < params.window_lo)
                continue;
            const double y = path.y[i];
            if (!(y > std::pow(t, params.exponent_lo) && y < std::pow(t, params.exponent_hi))) {
                violates[k] = 1;
                break;
            }
        }
    });
    BackwardPathStudyResult result;
    result.n_paths = params.n_paths;
    result.violation_fraction =
        static_cast<double>(std::accumulate(violates.begin(), violates.end(), 0u)) /
        static_cast<double>(params.n_paths);
    result.mean_proposals_per_acceptance =
        std::accumulate(proposals.begin(), proposals.end(), 0.0) /
        static_cast<double>(params.n_paths);
    return result;
}

// ----------------------------------------------------------------- decorations

std::vector<DecorationSample> make_decoration_pool(const FkppTable& table,
                                                   const DecorationOptions& dec,
                                                   const BackwardPathOptions& path,
                                                   std::size_t reservoir_size,
                                                   std::size_t pool_size, unsigned threads,
                                                   RngStream rng, std::size_t retries) {
    const BackwardPathReservoir reservoir(table, path, reservoir_size, rng.split(0x9E5));
    std::vector<DecorationSample> pool(pool_size);
    parallel_for(pool_size, threads, [&](std::size_t k) {
        RngStream base = rng.split(0xDEC0000ull + k);
        for (std::size_t attempt = 0;; ++attempt) {
            RngStream sample_rng = base.split(attempt);
            const BackwardPath& p = reservoir.draw(sample_rng);
            DecorationSample s = sample_decoration_abbs(p, dec, table, sample_rng);
            if (!s.failed || attempt + 1 >= retries) {
                pool[k] = std::move(s);
                return;
            }
        }
    });
    return pool;
}

DecorationStudyResult run_decoration_study(const FkppTable& table,
                                           const DecorationStudyParams& params) {
    const RngStream master(params.seed, 0);
    const BackwardPathReservoir reservoir(table, params.path, params.path_reservoir,
                                          master.split(0x9E5));
    DecorationStudyResult result;
    result.r_values.resize(params.n_samples);
    std::vector<std::uint8_t> failed(params.n_samples, 0);
    parallel_for(params.n_samples, params.threads, [&](std::size_t k) {
        RngStream base = master.split(0xDEC0000ull + k);
        DecorationSample sample;
        for (std::size_t attempt = 0;; ++attempt) {
            RngStream rng = base.split(attempt);
            const BackwardPath& p = reservoir.draw(rng);
            sample = sample_decoration_abbs(p, params.decoration, table, rng);
            if (!sample.failed || attempt + 1 >= params.retries_per_sample)
                break;
        }
        failed[k] = sample.failed ? 1 : 0;
        result.r_values[k] = decoration_functional_R(sample, params.beta).r_beta;
    });
    result.failed_samples = std::accumulate(failed.begin(), failed.end(), std::size_t{0});

    std::uint64_t below = 0;
    for (double r : result.r_values)
        below += r < params.r_small_threshold ? 1 : 0;
    result.p_r_below_threshold =
        static_cast<double>(below) / static_cast<double>(params.n_samples);

    for (double lambda : params.lambdas) {
        double mean = 0.0;
        for (double r : result.r_values)
            mean += std::exp(-lambda * r);
        mean /= static_cast<double>(params.n_samples);
        result.phi_over_lambda.push_back(-std::log(mean) / lambda);
    }
    return result;
}

// ----------------------------------------------------------- limit overlap / Q

namespace {

// Per-entry log decoration masses at the two temperatures; the only part
// of a pool entry Q ever looks at.
struct PooledWeights {
    std::vector<double> log_w_beta;
    std::vector<double> log_w_beta_prime;
};

double log_decoration_mass(const DecorationSample& d, double beta) {
    double sum = 0.0;
    for (const auto& a : d.atoms.atoms)
        sum += std::exp(beta * a.location);
    return std::log(sum);
}

PooledWeights pooled_weights(const std::vector<DecorationSample>& pool, double beta,
                             double beta_prime) {
    PooledWeights w;
    w.log_w_beta.reserve(pool.size());
    w.log_w_beta_prime.reserve(pool.size());
    for (const auto& d : pool) {
        w.log_w_beta.push_back(log_decoration_mass(d, beta));
        w.log_w_beta_prime.push_back(log_decoration_mass(d, beta_prime));
    }
    return w;
}

} // namespace

OverlapLimitRun run_overlap_limit(const FkppTable& table, const OverlapLimitParams& params) {
    const RngStream master(params.seed, 0);
    PooledWeights pw;
    if (!params.degenerate_decorations) {
        const std::vector<DecorationSample> pool =
            make_decoration_pool(table, params.decoration, params.path, params.path_reservoir,
                                 params.decoration_pool, params.threads, master.split(0xF00));
        pw = pooled_weights(pool, params.beta, params.beta_prime);
    }

    OverlapLimitRun run;
    run.q_samples.resize(params.n_configs);
    parallel_for(params.n_configs, params.threads, [&](std::size_t c) {
        RngStream rng = master.split(0xC0F000ull + c);
        const WeightedAtomConfiguration xi = sample_ppp_exponential(params.truncation_lower, rng);
        if (xi.empty()) {
            run.q_samples[c] = std::numeric_limits<double>::quiet_NaN();
            return;
        }
        std::vector<double> wb(xi.size()), wbp(xi.size());
        for (std::size_t i = 0; i < xi.size(); ++i) {
            const double x = xi.atoms[i].location;
            if (params.degenerate_decorations) {
                wb[i] = params.beta * x;
                wbp[i] = params.beta_prime * x;
            } else {
                const std::size_t d = std::min<std::size_t>(
                    static_cast<std::size_t>(rng.uniform01() *
                                             static_cast<double>(pw.log_w_beta.size())),
                    pw.log_w_beta.size() - 1);
                wb[i] = params.beta * x + pw.log_w_beta[d];
                wbp[i] = params.beta_prime * x + pw.log_w_beta_prime[d];
            }
        }
        run.q_samples[c] = overlap_q_kernel(wb, wbp);
    });
    // Empty configurations (possible only for high truncation) are dropped.
    std::vector<double> clean;
    clean.reserve(run.q_samples.size());
    for (double q : run.q_samples)
        if (!std::isnan(q))
            clean.push_back(q);
    run.q_samples = clean;
    std::tie(run.mean, run.std_error) = mean_and_se(run.q_samples);
    return run;
}

// -------------------------------------------------------------- REM comparison

CompareRemRun run_compare_rem(const FkppTable& table, const CompareRemParams& params) {
    const RngStream master(params.seed, 0);
    const std::vector<DecorationSample> pool =
        make_decoration_pool(table, params.decoration, params.path, params.path_reservoir,
                             params.decoration_pool, params.threads, master.split(0xF00));
    const PooledWeights pw = pooled_weights(pool, params.beta, params.beta_prime);

    std::vector<double> diff(params.n_pairs, 0.0), q_dec(params.n_pairs, 0.0),
        q_rem(params.n_pairs, 0.0);
    std::vector<std::uint8_t> keep(params.n_pairs, 0);
    parallel_for(params.n_pairs, params.threads, [&](std::size_t c) {
        RngStream rng = master.split(0xC0F000ull + c);
        const WeightedAtomConfiguration xi = sample_ppp_exponential(params.truncation_lower, rng);
        if (xi.empty())
            return;
        std::vector<double> wb(xi.size()), wbp(xi.size()), rb(xi.size()), rbp(xi.size());
        for (std::size_t i = 0; i < xi.size(); ++i) {
            const double x = xi.atoms[i].location;
            rb[i] = params.beta * x;
            rbp[i] = params.beta_prime * x;
            const std::size_t d = std::min<std::size_t>(
                static_cast<std::size_t>(rng.uniform01() *
                                         static_cast<double>(pw.log_w_beta.size())),
                pw.log_w_beta.size() - 1);
            wb[i] = rb[i] + pw.log_w_beta[d];
            wbp[i] = rbp[i] + pw.log_w_beta_prime[d];
        }
        q_dec[c] = overlap_q_kernel(wb, wbp);
        q_rem[c] = overlap_q_kernel(rb, rbp);
        diff[c] = q_dec[c] - q_rem[c];
        keep[c] = 1;
    });

    std::vector<double> d2, qd2, qr2;
    for (std::size_t c = 0; c < params.n_pairs; ++c) {
        if (!keep[c])
            continue;
        d2.push_back(diff[c]);
        qd2.push_back(q_dec[c]);
        qr2.push_back(q_rem[c]);
    }
    CompareRemRun run;
    run.n_pairs = d2.size();
    double se_d = 0.0;
    std::tie(run.difference, se_d) = mean_and_se(d2);
    run.se_difference = se_d;
    run.mean_bbm_limit = mean_and_se(qd2).first;
    run.mean_rem = mean_and_se(qr2).first;
    run.one_sided_p = se_d > 0.0 ? normal_cdf(run.difference / se_d) : 1.0;
    return run;
}

std::string compare_rem_json(const CompareRemParams& params, const CompareRemRun& run) {
    nlohmann::json j;
    j["beta"] = params.beta;
    j["beta_prime"] = params.beta_prime;
    j["n_pairs"] = run.n_pairs;
    j["mean_bbm_limit"] = run.mean_bbm_limit;
    j["mean_rem"] = run.mean_rem;
    j["difference"] = run.difference;
    j["se_difference"] = run.se_difference;
    j["one_sided_p"] = run.one_sided_p;
    return j.dump(2);
}

} // namespace bbmlab
