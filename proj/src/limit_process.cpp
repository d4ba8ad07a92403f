#include "bbmlab/limit_process.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "bbmlab/constants.hpp"
#include "bbmlab/errors.hpp"
#include "bbmlab/observables.hpp"
#include "bbmlab/stochastic_kit.hpp"

namespace bbmlab {

namespace {
constexpr double kSigma = std::numbers::sqrt2;
}

double BackwardPath::value_at(double t) const {
    if (grid.empty())
        throw std::domain_error("BackwardPath::value_at: empty path");
    if (t <= grid.front())
        return y.front();
    if (t >= grid.back())
        return y.back();
    const auto it = std::upper_bound(grid.begin(), grid.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - grid.begin()) - 1;
    const double w = (t - grid[i]) / (grid[i + 1] - grid[i]);
    return (1.0 - w) * y[i] + w * y[i + 1];
}

std::vector<double> make_path_grid(const BackwardPathOptions& opts) {
    if (!(opts.horizon > 0.0) || !(opts.fine_step > 0.0))
        throw std::domain_error("make_path_grid: horizon and fine_step must be positive");
    std::vector<double> grid{0.0};
    double t = 0.0;
    double step = opts.fine_step;
    while (t < opts.horizon) {
        if (t >= opts.fine_until)
            step = std::min(step * opts.geom_ratio, opts.max_step);
        t = std::min(t + step, opts.horizon);
        grid.push_back(t);
    }
    return grid;
}

namespace {

// Crude two-point geometric extrapolation of the ignored exponent tail
// 2 int_h^inf g dv; a logged diagnostic only.
double tail_bound_estimate(const std::vector<double>& grid, const std::vector<double>& g) {
    double last = 0.0, prev = 0.0, t_last = 0.0, t_prev = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g[i] > 0.0) {
            prev = last;
            t_prev = t_last;
            last = g[i];
            t_last = grid[i];
        }
    }
    if (last <= 0.0)
        return 0.0;
    if (prev > last && t_last > t_prev) {
        const double rate = (std::log(prev) - std::log(last)) / (t_last - t_prev);
        return 2.0 * last / rate;
    }
    return 2.0 * last * grid.back(); // non-decaying integrand: report something large
}

} // namespace

BackwardPath sample_backward_path(const FkppTable& fkpp, const BackwardPathOptions& opts,
                                  RngStream& rng) {
    const std::vector<double> grid = make_path_grid(opts);
    if (fkpp.t_grid.empty() || fkpp.t_grid.back() < opts.horizon * (1.0 - 1e-9))
        throw std::domain_error("sample_backward_path: fkpp table does not cover the horizon");

    std::vector<double> gamma(grid.size());
    std::vector<double> integrand(grid.size());
    for (std::size_t attempt = 1; attempt <= opts.max_rejections; ++attempt) {
        const double b = rng.exponential();

        // Brownian motion until the first grid point at or above b, then
        // b minus a Bessel(3) branch grown from 0.
        double hit_time = -1.0;
        double bm = 0.0;
        double rx = 0.0, ry = 0.0, rz = 0.0;
        gamma[0] = 0.0;
        for (std::size_t i = 1; i < grid.size(); ++i) {
            const double dt = grid[i] - grid[i - 1];
            const double sd = std::sqrt(dt);
            if (hit_time < 0.0) {
                bm += sd * rng.normal();
                if (bm >= b) {
                    bm = b;
                    hit_time = grid[i];
                    gamma[i] = b;
                } else {
                    gamma[i] = bm;
                }
            } else {
                rx += sd * rng.normal();
                ry += sd * rng.normal();
                rz += sd * rng.normal();
                gamma[i] = b - std::sqrt(rx * rx + ry * ry + rz * rz);
            }
        }
        if (hit_time < 0.0)
            continue; // infimum not realized within the horizon

        // Acceptance weight exp(-2 int G_v(sigma Gamma_v) dv); sigma Gamma
        // = -Y, so the integrand matches the pi-intensity argument.
        for (std::size_t i = 0; i < grid.size(); ++i)
            integrand[i] = fkpp_query(fkpp, grid[i], kSigma * gamma[i]);
        double total = 0.0;
        for (std::size_t i = 1; i < grid.size(); ++i)
            total += 0.5 * (integrand[i] + integrand[i - 1]) * (grid[i] - grid[i - 1]);
        if (rng.uniform01() >= std::exp(-2.0 * total))
            continue;

        BackwardPath path;
        path.grid = grid;
        path.y.resize(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i)
            path.y[i] = -kSigma * gamma[i];
        path.infimum_level_b = b;
        path.hitting_time = hit_time;
        path.weight_accepted = true;
        path.log_importance_weight = b;
        path.neglected_tail_bound = tail_bound_estimate(grid, integrand);
        path.proposals_used = attempt;
        return path;
    }
    throw SamplerBudgetExhausted("sample_backward_path: no acceptance within budget",
                                 1.0 / static_cast<double>(opts.max_rejections));
}

BackwardPathReservoir::BackwardPathReservoir(const FkppTable& fkpp,
                                             const BackwardPathOptions& opts,
                                             std::size_t capacity, RngStream rng) {
    if (capacity == 0)
        throw std::domain_error("BackwardPathReservoir: capacity must be positive");
    paths_.reserve(capacity);
    cumulative_weight_.reserve(capacity);
    double acc = 0.0;
    for (std::size_t k = 0; k < capacity; ++k) {
        RngStream stream = rng.split(k);
        paths_.push_back(sample_backward_path(fkpp, opts, stream));
        acc += std::exp(paths_.back().log_importance_weight);
        cumulative_weight_.push_back(acc);
    }
}

const BackwardPath& BackwardPathReservoir::draw(RngStream& rng) const {
    const double u = rng.uniform01() * cumulative_weight_.back();
    const auto it = std::upper_bound(cumulative_weight_.begin(), cumulative_weight_.end(), u);
    const std::size_t i = std::min<std::size_t>(
        static_cast<std::size_t>(it - cumulative_weight_.begin()), paths_.size() - 1);
    return paths_[i];
}

namespace {

struct AtomWithGroup {
    double delta;
    std::uint32_t group;
};

void finalize_decoration(DecorationSample& s, std::vector<AtomWithGroup>& collected) {
    std::sort(collected.begin(), collected.end(),
              [](const AtomWithGroup& a, const AtomWithGroup& b) { return a.delta > b.delta; });
    s.atoms.atoms.clear();
    s.group.clear();
    s.atoms.atoms.reserve(collected.size());
    s.group.reserve(collected.size());
    for (const auto& a : collected) {
        s.atoms.atoms.push_back({a.delta, 0.0});
        s.group.push_back(a.group);
    }
    s.atoms.sorted_nonincreasing = true;
}

} // namespace

DecorationSample sample_decoration_abbs(const BackwardPath& path, const DecorationOptions& opts,
                                        const FkppTable& fkpp, RngStream& rng) {
    if (path.grid.empty() || path.grid.back() < opts.t_max * (1.0 - 1e-9))
        throw std::domain_error("sample_decoration_abbs: path horizon below t_max");

    DecorationSample s;
    s.provenance = DecorationProvenance::abbs_construction;
    s.t_max = opts.t_max;
    s.window_depth = opts.window_depth;
    s.group_time.push_back(0.0); // group 0 is the delta_0 atom
    s.group_y.push_back(0.0);

    std::vector<AtomWithGroup> collected{{0.0, 0}};

    // Arrival stream is consumed sequentially so that enlarging t_max only
    // appends arrivals; each arrival's cluster randomness is derived from
    // its index.
    RngStream arrivals = rng.split(0xA11);
    const PruningSpec prune{opts.window_depth + opts.pruning_margin};
    double t = 0.0;
    std::uint32_t arrival_index = 0;
    while (true) {
        t += arrivals.exponential(2.0);
        if (t > opts.t_max)
            break;
        ++arrival_index;
        const double y_t = path.value_at(t);
        const double retention = 1.0 - fkpp_query(fkpp, t, -y_t);
        if (arrivals.uniform01() >= retention)
            continue;

        // Conditioned cluster at this time: min + Y(t) > 0.
        RngStream cluster_rng = rng.split(0xC0000000ull + arrival_index);
        bool accepted = false;
        for (std::size_t j = 0; j < opts.conditioning_budget; ++j) {
            RngStream tree_rng = cluster_rng.split(j);
            const ParticleTree tree =
                simulate(t, Normalization::standard, prune, tree_rng);
            const PopulationSnapshot snap = snapshot(tree);
            double max_std = -std::numeric_limits<double>::infinity();
            for (const auto& p : snap.particles)
                max_std = std::max(max_std, p.position);
            const double min_abbs = kSigma * (kSigma * t - max_std);
            if (min_abbs + y_t <= 0.0)
                continue;
            const std::uint32_t g = static_cast<std::uint32_t>(s.group_time.size());
            s.group_time.push_back(t);
            s.group_y.push_back(y_t);
            for (const auto& p : snap.particles) {
                const double x_abbs = kSigma * (kSigma * t - p.position);
                const double delta = -(y_t + x_abbs) / kSigma;
                if (delta >= -opts.window_depth)
                    collected.push_back({delta, g});
            }
            accepted = true;
            break;
        }
        if (!accepted) {
            s.failed = true;
            s.failed_time = t;
        }
    }
    finalize_decoration(s, collected);
    return s;
}

DecorationSample extract_decoration_empirical(const PopulationSnapshot& snap,
                                              double window_depth, double delta) {
    if (snap.particles.empty())
        throw std::domain_error("extract_decoration_empirical: empty snapshot");
    DecorationSample s;
    s.provenance = DecorationProvenance::empirical_extraction;
    s.t_max = snap.horizon;
    s.window_depth = window_depth;

    std::size_t argmax = 0;
    for (std::size_t i = 1; i < snap.particles.size(); ++i)
        if (snap.particles[i].centered > snap.particles[argmax].centered)
            argmax = i;

    const auto clusters = cluster_decompose(snap, delta);
    const std::vector<std::size_t>* own = nullptr;
    for (const auto& c : clusters)
        if (std::find(c.begin(), c.end(), argmax) != c.end()) {
            own = &c;
            break;
        }

    std::vector<AtomWithGroup> collected;
    const double x_max = snap.particles[argmax].centered;
    for (std::size_t i : *own) {
        const double d = snap.particles[i].centered - x_max;
        if (d >= -window_depth)
            collected.push_back({d, 0});
    }
    finalize_decoration(s, collected);
    return s;
}

DecorationSource DecorationSource::degenerate() {
    DecorationSource src;
    src.kind_ = Kind::degenerate;
    return src;
}

DecorationSource DecorationSource::pool(std::vector<DecorationSample> samples) {
    if (samples.empty())
        throw std::domain_error("DecorationSource::pool: empty pool");
    DecorationSource src;
    src.kind_ = Kind::pool;
    src.pool_ = std::move(samples);
    return src;
}

DecorationSource DecorationSource::sampler(std::function<DecorationSample(RngStream&)> fn) {
    DecorationSource src;
    src.kind_ = Kind::sampler;
    src.fn_ = std::move(fn);
    return src;
}

DecorationSample DecorationSource::draw(RngStream& rng) const {
    switch (kind_) {
    case Kind::degenerate: {
        DecorationSample s;
        s.atoms.atoms.push_back({0.0, 0.0});
        s.atoms.sorted_nonincreasing = true;
        s.group.push_back(0);
        s.group_time.push_back(0.0);
        s.group_y.push_back(0.0);
        return s;
    }
    case Kind::pool: {
        const std::size_t i = std::min<std::size_t>(
            static_cast<std::size_t>(rng.uniform01() * static_cast<double>(pool_.size())),
            pool_.size() - 1);
        return pool_[i];
    }
    case Kind::sampler:
        return fn_(rng);
    }
    throw std::logic_error("DecorationSource::draw: bad kind");
}

DecoratedConfiguration assemble_decorated_configuration(std::size_t n_decorations_budget,
                                                        double truncation_lower,
                                                        const DecorationSource& source,
                                                        RngStream& rng) {
    if (!std::isfinite(truncation_lower))
        throw std::domain_error("assemble_decorated_configuration: truncation must be finite");
    if (n_decorations_budget == 0)
        throw std::domain_error("assemble_decorated_configuration: budget must be positive");
    const WeightedAtomConfiguration xi = sample_ppp_exponential(truncation_lower, rng);

    DecoratedConfiguration config;
    config.source = DecoratedConfiguration::Source::limit_sampler;
    config.clusters.reserve(xi.size());

    if (!source.is_sampler() || xi.size() <= n_decorations_budget) {
        for (const auto& atom : xi.atoms) {
            DecoratedCluster c;
            c.xi = atom.location;
            c.decoration = source.draw(rng);
            if (c.decoration.failed)
                throw SamplerBudgetExhausted(
                    "assemble_decorated_configuration: decoration failed at cluster " +
                        std::to_string(config.clusters.size()),
                    0.0);
            config.clusters.push_back(std::move(c));
        }
        return config;
    }

    // More clusters than the decoration budget: materialize budget-many
    // fresh decorations and attach them by uniform draws.
    std::vector<DecorationSample> pool;
    pool.reserve(n_decorations_budget);
    for (std::size_t k = 0; k < n_decorations_budget; ++k) {
        pool.push_back(source.draw(rng));
        if (pool.back().failed)
            throw SamplerBudgetExhausted(
                "assemble_decorated_configuration: decoration failed at pool entry " +
                    std::to_string(k),
                0.0);
    }
    for (const auto& atom : xi.atoms) {
        const std::size_t i = std::min<std::size_t>(
            static_cast<std::size_t>(rng.uniform01() * static_cast<double>(pool.size())),
            pool.size() - 1);
        DecoratedCluster c;
        c.xi = atom.location;
        c.decoration = pool[i];
        config.clusters.push_back(std::move(c));
    }
    return config;
}

double overlap_q_kernel(std::span<const double> log_w_beta,
                        std::span<const double> log_w_beta_prime) {
    if (log_w_beta.empty() || log_w_beta.size() != log_w_beta_prime.size())
        throw std::domain_error("overlap_q_kernel: empty or mismatched inputs");
    std::vector<double> joint(log_w_beta.size());
    for (std::size_t i = 0; i < joint.size(); ++i)
        joint[i] = log_w_beta[i] + log_w_beta_prime[i];
    const double log_num = log_sum_exp(joint);
    const double log_den = log_sum_exp(log_w_beta) + log_sum_exp(log_w_beta_prime);
    return std::exp(log_num - log_den);
}

namespace {

// log sum_j e^{beta Delta_j} over all atoms of one decoration. Atoms are
// <= 0 so the linear sum is safely bounded by the atom count.
double log_cluster_weight(const DecorationSample& d, double beta) {
    double sum = 0.0;
    for (const auto& a : d.atoms.atoms)
        sum += std::exp(beta * a.location);
    return std::log(sum);
}

} // namespace

double overlap_Q(const DecoratedConfiguration& config, double beta, double beta_prime) {
    if (config.clusters.empty())
        throw std::domain_error("overlap_Q: empty configuration");
    std::vector<double> wb(config.clusters.size()), wbp(config.clusters.size());
    for (std::size_t i = 0; i < config.clusters.size(); ++i) {
        const auto& c = config.clusters[i];
        wb[i] = beta * c.xi + log_cluster_weight(c.decoration, beta);
        wbp[i] = beta_prime * c.xi + log_cluster_weight(c.decoration, beta_prime);
    }
    return overlap_q_kernel(wb, wbp);
}

DecorationFunctional decoration_functional_R(const DecorationSample& decoration, double beta) {
    DecorationFunctional out;
    std::vector<double> per_group(decoration.group_time.empty() ? 1 : decoration.group_time.size(),
                                  0.0);
    for (std::size_t i = 0; i < decoration.atoms.size(); ++i) {
        const double loc = decoration.atoms.atoms[i].location;
        if (loc >= 0.0)
            continue; // the leader at 0 is excluded from R
        const double term = std::exp(beta * loc);
        out.r_beta += term;
        if (i < decoration.group.size() && decoration.group[i] < per_group.size())
            per_group[decoration.group[i]] += term;
    }
    if (decoration.provenance == DecorationProvenance::abbs_construction) {
        for (std::size_t g = 1; g < per_group.size(); ++g) {
            out.cluster_terms.push_back(per_group[g]);
            out.cluster_times.push_back(decoration.group_time[g]);
        }
    }
    return out;
}

CouplingReport coupling_diagnostic(const BackwardPath& path, const DecorationOptions& opts,
                                   const FkppTable& fkpp, double beta, RngStream& rng) {
    if (path.grid.empty() || path.grid.back() < opts.t_max * (1.0 - 1e-9))
        throw std::domain_error("coupling_diagnostic: path horizon below t_max");
    CouplingReport report;
    RngStream arrivals = rng.split(0xA11);
    const PruningSpec prune{opts.window_depth + opts.pruning_margin};
    const double rate = beta / kSigma;
    double t = 0.0;
    std::uint32_t arrival_index = 0;
    double tail_d = 0.0;
    while (true) {
        t += arrivals.exponential(2.0);
        if (t > opts.t_max)
            break;
        ++arrival_index;
        const double y_t = path.value_at(t);
        const double retention = 1.0 - fkpp_query(fkpp, t, -y_t);
        if (arrivals.uniform01() >= retention)
            continue;

        RngStream cluster_rng = rng.split(0xC0000000ull + arrival_index);
        double c_sum = -1.0, d_sum = -1.0;
        bool first_passed = false;
        bool conditioned_found = false;
        for (std::size_t j = 0; j < opts.conditioning_budget; ++j) {
            RngStream tree_rng = cluster_rng.split(j);
            const ParticleTree tree = simulate(t, Normalization::standard, prune, tree_rng);
            const PopulationSnapshot snap = snapshot(tree);
            double max_std = -std::numeric_limits<double>::infinity();
            double sum = 0.0;
            for (const auto& p : snap.particles) {
                max_std = std::max(max_std, p.position);
                const double x_abbs = kSigma * (kSigma * t - p.position);
                sum += std::exp(-rate * x_abbs);
            }
            const double min_abbs = kSigma * (kSigma * t - max_std);
            const bool passes = min_abbs + y_t > 0.0;
            if (j == 0) {
                d_sum = sum;
                first_passed = passes;
            }
            if (passes) {
                c_sum = sum;
                conditioned_found = true;
                break;
            }
        }
        if (!conditioned_found) {
            report.failed = true;
            continue;
        }
        const double factor = std::exp(-rate * y_t);
        report.times.push_back(t);
        report.differed.push_back(first_passed ? 0 : 1);
        report.c_terms.push_back(factor * c_sum);
        report.d_terms.push_back(factor * d_sum);
        report.r_beta += factor * c_sum;
        report.s_beta += factor * d_sum;
        if (t > opts.t_max / 2.0)
            tail_d += factor * d_sum;
        if (!first_passed) {
            report.any_differ = true;
            report.last_differ_time = std::max(report.last_differ_time, t);
        }
    }
    report.tail_fraction_d = report.s_beta > 0.0 ? tail_d / report.s_beta : 0.0;
    return report;
}

std::string decoration_to_jsonl(const DecorationSample& sample, std::uint64_t seed) {
    nlohmann::json j;
    j["provenance"] = sample.provenance == DecorationProvenance::abbs_construction
                          ? "abbs_construction"
                          : "empirical_extraction";
    j["seed"] = seed;
    j["T_max"] = sample.t_max;
    std::vector<double> atoms;
    atoms.reserve(sample.atoms.size());
    for (const auto& a : sample.atoms.atoms)
        atoms.push_back(a.location);
    j["atoms"] = atoms;
    return j.dump();
}

std::string configuration_to_jsonl(const DecoratedConfiguration& config, std::uint64_t seed) {
    nlohmann::json j;
    j["seed"] = seed;
    j["source"] = config.source == DecoratedConfiguration::Source::limit_sampler
                      ? "limit_sampler"
                      : "bbm_extraction";
    nlohmann::json clusters = nlohmann::json::array();
    for (const auto& c : config.clusters) {
        std::vector<double> atoms;
        atoms.reserve(c.decoration.atoms.size());
        for (const auto& a : c.decoration.atoms.atoms)
            atoms.push_back(a.location);
        clusters.push_back({{"xi", c.xi}, {"atoms", atoms}});
    }
    j["clusters"] = clusters;
    return j.dump();
}

} // namespace bbmlab
