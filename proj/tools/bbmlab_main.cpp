// Command-line front end: experiment orchestration, manifests, CSV/JSON
// emission. Every run writes a manifest next to its outputs and audits the
// output directory against it.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bbmlab/config.hpp"
#include "bbmlab/constants.hpp"
#include "bbmlab/errors.hpp"
#include "bbmlab/experiments.hpp"
#include "bbmlab/manifest.hpp"
#include "bbmlab/parallel.hpp"

namespace {

using namespace bbmlab;

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::uint64_t replicas = 0;
    unsigned threads = 0;
    bool seed_set = false, replicas_set = false, threads_set = false, out_set = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "sectioned key-value config file");
    cmd->add_option("--out-dir", flags.out_dir, "output root (default $BBMLAB_OUT_DIR or ./runs)")
        ->each([&](const std::string&) { flags.out_set = true; });
    cmd->add_option("--seed", flags.seed, "base seed")->each([&](const std::string&) {
        flags.seed_set = true;
    });
    cmd->add_option("--replicas", flags.replicas, "replica count")
        ->each([&](const std::string&) { flags.replicas_set = true; });
    cmd->add_option("--threads", flags.threads, "worker threads")
        ->each([&](const std::string&) { flags.threads_set = true; });
}

Config load_config(const CommonFlags& flags) {
    Config config;
    if (!flags.config_path.empty())
        config = Config::parse_file(flags.config_path);
    if (flags.seed_set)
        config.set("run.seed", std::to_string(flags.seed));
    if (flags.replicas_set)
        config.set("run.replicas", std::to_string(flags.replicas));
    if (flags.threads_set)
        config.set("run.threads", std::to_string(flags.threads));
    if (flags.out_set)
        config.set("run.out_dir", flags.out_dir);
    return config;
}

void validate_keys(const Config& config, const std::set<std::string>& allowed) {
    for (const auto& [key, value] : config.values())
        if (!allowed.count(key))
            throw ConfigError("unknown config key: " + key);
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (...) {
            throw ConfigError(what + ": bad number '" + item + "'");
        }
    }
    return out;
}

std::string out_root(const Config& config) {
    const std::string from_config = config.get_str("run.out_dir", "");
    if (!from_config.empty())
        return from_config;
    if (const char* env = std::getenv("BBMLAB_OUT_DIR"))
        return env;
    return "runs";
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << content;
}

// Shared epilogue: manifest + orphan audit.
void finish_run(const std::string& command, const Config& config, const std::string& dir,
                const std::vector<std::string>& outputs, std::uint64_t seed, double wall_s) {
    RunManifest manifest;
    manifest.command = command;
    manifest.parameters = config;
    manifest.seeds = {seed};
    manifest.artifact_version = kArtifactVersion;
    manifest.wall_time_s = wall_s;
    manifest.outputs = outputs;
    manifest.write(dir);
    const auto orphans = audit_orphan_outputs(dir, manifest);
    if (!orphans.empty()) {
        std::string msg = "post-run audit: orphan outputs:";
        for (const auto& o : orphans)
            msg += " " + o;
        throw ConfigError(msg);
    }
}

std::string run_dir(const Config& config, const std::string& command) {
    const std::string dir =
        out_root(config) + "/" + command + "-" + config.digest().substr(0, 8);
    std::filesystem::create_directories(dir);
    return dir;
}

// Fills defaults into the config so the manifest echoes every parameter
// and the run directory digest covers them all.
void echo(Config& config, const std::string& key, const std::string& value) {
    if (!config.has(key))
        config.set(key, value);
}

void echo_num(Config& config, const std::string& key, double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    echo(config, key, buf);
}

const std::set<std::string> kRunKeys = {"run.seed", "run.replicas", "run.threads",
                                        "run.out_dir"};

std::set<std::string> with_run_keys(std::set<std::string> keys) {
    keys.insert(kRunKeys.begin(), kRunKeys.end());
    return keys;
}

FkppSolveOptions fkpp_options_from(const Config& config, const std::string& section,
                                   double default_tmax) {
    FkppSolveOptions opts;
    opts.t_max = config.get_double(section + ".fkpp_t_max", default_tmax);
    opts.dx = config.get_double(section + ".fkpp_dx", 0.05);
    opts.dt = config.get_double(section + ".fkpp_dt", 0.0);
    opts.comoving = config.get_bool(section + ".fkpp_comoving", opts.t_max > 60.0);
    return opts;
}

std::string fkpp_cache_dir(const Config& config) { return out_root(config) + "/fkpp_cache"; }

int cmd_free_energy(const CommonFlags& flags) {
    Config config = load_config(flags);
    validate_keys(config, with_run_keys({"free_energy.betas", "free_energy.betas_over_betac",
                                         "free_energy.horizons"}));
    FreeEnergySweepParams params;
    if (config.has("free_energy.betas"))
        params.betas = parse_list(config.get_str("free_energy.betas", ""), "free_energy.betas");
    else {
        for (double r : parse_list(config.get_str("free_energy.betas_over_betac", "0.5,1,2"),
                                   "free_energy.betas_over_betac"))
            params.betas.push_back(r * beta_critical);
    }
    params.horizons = parse_list(config.get_str("free_energy.horizons", "8,10,12"),
                                 "free_energy.horizons");
    params.replicas = config.get_u64("run.replicas", 100);
    params.seed = config.get_u64("run.seed", 1);
    params.threads = static_cast<unsigned>(config.get_u64("run.threads", 1));
    if (params.betas.empty())
        throw ConfigError("free-energy: empty beta grid");

    echo(config, "run.seed", std::to_string(params.seed));
    echo(config, "run.replicas", std::to_string(params.replicas));
    echo(config, "run.threads", std::to_string(params.threads));

    const auto start = std::chrono::steady_clock::now();
    const auto cells = run_free_energy_sweep(params);
    const double wall = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - start).count();

    const std::string dir = run_dir(config, "free-energy");
    write_file(std::filesystem::path(dir) / "free_energy.csv", free_energy_csv(cells));
    nlohmann::json summary = nlohmann::json::array();
    for (const auto& c : cells)
        summary.push_back({{"t", c.t},
                           {"beta", c.beta},
                           {"f_mean", c.mean},
                           {"f_std_error", c.std_error},
                           {"f_corrected", c.corrected_mean},
                           {"f_corrected_std_error", c.corrected_std_error},
                           {"f_analytic", c.analytic}});
    write_file(std::filesystem::path(dir) / "summary.json", summary.dump(2) + "\n");
    finish_run("free-energy", config, dir, {"free_energy.csv", "summary.json"}, params.seed,
               wall);
    std::cout << dir << "\n";
    return 0;
}

int cmd_overlap_bbm(const CommonFlags& flags) {
    Config config = load_config(flags);
    validate_keys(config,
                  with_run_keys({"overlap.t", "overlap.beta", "overlap.beta_prime", "overlap.a",
                                 "overlap.n_pairs", "overlap.pruning_cutoff"}));
    OverlapBbmParams params;
    params.horizon = config.get_double("overlap.t", 12.0);
    params.beta = config.get_double("overlap.beta", 2.0 * beta_critical);
    params.beta_prime = config.get_double("overlap.beta_prime", 2.0 * beta_critical);
    params.a = config.get_double("overlap.a", 0.5);
    params.n_pairs = config.get_u64("overlap.n_pairs", 400);
    params.replicas = config.get_u64("run.replicas", 400);
    params.seed = config.get_u64("run.seed", 1);
    params.threads = static_cast<unsigned>(config.get_u64("run.threads", 1));
    if (config.has("overlap.pruning_cutoff"))
        params.pruning_cutoff = config.get_double("overlap.pruning_cutoff", 20.0);

    echo(config, "run.seed", std::to_string(params.seed));
    echo(config, "run.replicas", std::to_string(params.replicas));
    echo(config, "run.threads", std::to_string(params.threads));
    echo_num(config, "overlap.t", params.horizon);
    echo_num(config, "overlap.beta", params.beta);
    echo_num(config, "overlap.beta_prime", params.beta_prime);
    echo_num(config, "overlap.a", params.a);
    echo(config, "overlap.n_pairs", std::to_string(params.n_pairs));

    const auto start = std::chrono::steady_clock::now();
    const OverlapBbmRun run = run_overlap_bbm(params);
    const double wall = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - start).count();

    const std::string dir = run_dir(config, "overlap-bbm");
    write_file(std::filesystem::path(dir) / "overlap_bbm.csv", overlap_bbm_csv(params, run));
    nlohmann::json summary;
    summary["mean"] = run.estimate.mean;
    summary["std_error"] = run.estimate.std_error;
    summary["within_std_error"] = run.estimate.within_std_error;
    summary["n_replicas"] = run.estimate.n_replicas;
    summary["n_pairs"] = run.estimate.n_pairs;
    summary["histogram"] = run.estimate.histogram;
    write_file(std::filesystem::path(dir) / "summary.json", summary.dump(2) + "\n");
    finish_run("overlap-bbm", config, dir, {"overlap_bbm.csv", "summary.json"}, params.seed,
               wall);
    std::cout << dir << "\n";
    return 0;
}

int cmd_overlap_limit(const CommonFlags& flags) {
    Config config = load_config(flags);
    validate_keys(config, with_run_keys({"limit.beta", "limit.beta_prime", "limit.n_configs",
                                         "limit.truncation_lower", "limit.pool",
                                         "limit.reservoir", "limit.t_max", "limit.window_depth",
                                         "limit.degenerate", "limit.path_horizon",
                                         "limit.fkpp_t_max", "limit.fkpp_dx", "limit.fkpp_dt",
                                         "limit.fkpp_comoving"}));
    OverlapLimitParams params;
    params.beta = config.get_double("limit.beta", 2.0 * beta_critical);
    params.beta_prime = config.get_double("limit.beta_prime", 2.0 * beta_critical);
    params.n_configs = config.get_u64("limit.n_configs", 4000);
    params.truncation_lower = config.get_double("limit.truncation_lower", -5.0);
    params.decoration_pool = config.get_u64("limit.pool", 2048);
    params.path_reservoir = config.get_u64("limit.reservoir", 384);
    params.decoration.t_max = config.get_double("limit.t_max", 8.0);
    params.decoration.window_depth = config.get_double("limit.window_depth", 12.0);
    params.path.horizon = config.get_double("limit.path_horizon", 50.0);
    params.degenerate_decorations = config.get_bool("limit.degenerate", false);
    params.seed = config.get_u64("run.seed", 1);
    params.threads = static_cast<unsigned>(config.get_u64("run.threads", 1));

    echo(config, "run.seed", std::to_string(params.seed));
    echo(config, "run.threads", std::to_string(params.threads));
    echo_num(config, "limit.beta", params.beta);
    echo_num(config, "limit.beta_prime", params.beta_prime);
    echo(config, "limit.n_configs", std::to_string(params.n_configs));
    echo_num(config, "limit.truncation_lower", params.truncation_lower);

    const FkppSolveOptions fkpp_opts =
        fkpp_options_from(config, "limit", std::max(params.path.horizon, params.decoration.t_max));
    const FkppTable table = fkpp_load_or_solve(fkpp_cache_dir(config), fkpp_opts);

    const auto start = std::chrono::steady_clock::now();
    const OverlapLimitRun run = run_overlap_limit(table, params);
    const double wall = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - start).count();

    const std::string dir = run_dir(config, "overlap-limit");
    std::string csv = "config,q\n";
    for (std::size_t i = 0; i < run.q_samples.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, run.q_samples[i]);
        csv += buf;
    }
    write_file(std::filesystem::path(dir) / "q_samples.csv", csv);
    nlohmann::json summary;
    summary["mean"] = run.mean;
    summary["std_error"] = run.std_error;
    summary["n_configs"] = run.q_samples.size();
    write_file(std::filesystem::path(dir) / "summary.json", summary.dump(2) + "\n");
    finish_run("overlap-limit", config, dir, {"q_samples.csv", "summary.json"}, params.seed,
               wall);
    std::cout << dir << "\n";
    return 0;
}

int cmd_compare_rem(const CommonFlags& flags) {
    Config config = load_config(flags);
    validate_keys(config,
                  with_run_keys({"compare.beta", "compare.beta_prime", "compare.n_pairs",
                                 "compare.truncation_lower", "compare.pool", "compare.reservoir",
                                 "compare.t_max", "compare.window_depth", "compare.path_horizon",
                                 "compare.fkpp_t_max", "compare.fkpp_dx", "compare.fkpp_dt",
                                 "compare.fkpp_comoving"}));
    CompareRemParams params;
    params.beta = config.get_double("compare.beta", 1.5 * beta_critical);
    params.beta_prime = config.get_double("compare.beta_prime", 3.0 * beta_critical);
    params.n_pairs = config.get_u64("compare.n_pairs", 10000);
    params.truncation_lower = config.get_double("compare.truncation_lower", -7.0);
    params.decoration_pool = config.get_u64("compare.pool", 2048);
    params.path_reservoir = config.get_u64("compare.reservoir", 384);
    params.decoration.t_max = config.get_double("compare.t_max", 8.0);
    params.decoration.window_depth = config.get_double("compare.window_depth", 12.0);
    params.path.horizon = config.get_double("compare.path_horizon", 50.0);
    params.seed = config.get_u64("run.seed", 1);
    params.threads = static_cast<unsigned>(config.get_u64("run.threads", 1));

    echo(config, "run.seed", std::to_string(params.seed));
    echo(config, "run.threads", std::to_string(params.threads));
    echo_num(config, "compare.beta", params.beta);
    echo_num(config, "compare.beta_prime", params.beta_prime);
    echo(config, "compare.n_pairs", std::to_string(params.n_pairs));

    const FkppSolveOptions fkpp_opts = fkpp_options_from(
        config, "compare", std::max(params.path.horizon, params.decoration.t_max));
    const FkppTable table = fkpp_load_or_solve(fkpp_cache_dir(config), fkpp_opts);

    const auto start = std::chrono::steady_clock::now();
    const CompareRemRun run = run_compare_rem(table, params);
    const double wall = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - start).count();

    const std::string dir = run_dir(config, "compare-rem");
    write_file(std::filesystem::path(dir) / "verdict.json", compare_rem_json(params, run) + "\n");
    finish_run("compare-rem", config, dir, {"verdict.json"}, params.seed, wall);
    std::cout << dir << "\n";
    return 0;
}

int cmd_fkpp(const CommonFlags& flags) {
    Config config = load_config(flags);
    validate_keys(config, with_run_keys({"fkpp.t_max", "fkpp.dx", "fkpp.dt", "fkpp.comoving",
                                         "fkpp.x_lo", "fkpp.x_hi", "fkpp.y_lo", "fkpp.y_hi"}));
    FkppSolveOptions opts;
    opts.t_max = config.get_double("fkpp.t_max", 8.0);
    opts.dx = config.get_double("fkpp.dx", 0.05);
    opts.dt = config.get_double("fkpp.dt", 0.0);
    opts.comoving = config.get_bool("fkpp.comoving", false);
    opts.x_lo = config.get_double("fkpp.x_lo", -30.0);
    opts.x_hi = config.get_double("fkpp.x_hi", 0.0);
    opts.y_lo = config.get_double("fkpp.y_lo", -25.0);
    opts.y_hi = config.get_double("fkpp.y_hi", 0.0);
    const std::uint64_t seed = config.get_u64("run.seed", 1);

    echo_num(config, "fkpp.t_max", opts.t_max);
    echo_num(config, "fkpp.dx", opts.dx);

    const auto start = std::chrono::steady_clock::now();
    const FkppTable table = fkpp_solve(opts);
    const double wall = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - start).count();

    const std::string dir = run_dir(config, "fkpp");
    {
        std::ofstream bin(std::filesystem::path(dir) / "fkpp_table.bin", std::ios::binary);
        fkpp_write(table, bin);
    }
    nlohmann::json sidecar;
    sidecar["t_max"] = opts.t_max;
    sidecar["dx"] = opts.dx;
    sidecar["dt"] = opts.dt;
    sidecar["comoving"] = opts.comoving;
    sidecar["digest"] = fkpp_options_digest(opts);
    write_file(std::filesystem::path(dir) / "fkpp_table.json", sidecar.dump(2) + "\n");
    std::string csv = "t,x_front,m_t,difference\n";
    for (const auto& p : fkpp_front_track(table)) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", p.t, p.x_front, p.m_t,
                      p.x_front - p.m_t);
        csv += buf;
    }
    write_file(std::filesystem::path(dir) / "front_tracking.csv", csv);
    finish_run("fkpp", config, dir, {"fkpp_table.bin", "fkpp_table.json", "front_tracking.csv"},
               seed, wall);
    std::cout << dir << "\n";
    return 0;
}

int cmd_decoration(const CommonFlags& flags) {
    Config config = load_config(flags);
    validate_keys(config,
                  with_run_keys({"decoration.n_samples", "decoration.t_max",
                                 "decoration.window_depth", "decoration.beta",
                                 "decoration.reservoir", "decoration.path_horizon",
                                 "decoration.fkpp_t_max", "decoration.fkpp_dx",
                                 "decoration.fkpp_dt", "decoration.fkpp_comoving"}));
    DecorationStudyParams params;
    params.n_samples = config.get_u64("decoration.n_samples", 2000);
    params.decoration.t_max = config.get_double("decoration.t_max", 8.0);
    params.decoration.window_depth = config.get_double("decoration.window_depth", 12.0);
    params.beta = config.get_double("decoration.beta", 2.0 * beta_critical);
    params.path_reservoir = config.get_u64("decoration.reservoir", 384);
    params.path.horizon = config.get_double("decoration.path_horizon", 50.0);
    params.seed = config.get_u64("run.seed", 1);
    params.threads = static_cast<unsigned>(config.get_u64("run.threads", 1));

    echo(config, "run.seed", std::to_string(params.seed));
    echo(config, "decoration.n_samples", std::to_string(params.n_samples));
    echo_num(config, "decoration.t_max", params.decoration.t_max);

    const FkppSolveOptions fkpp_opts = fkpp_options_from(
        config, "decoration", std::max(params.path.horizon, params.decoration.t_max));
    const FkppTable table = fkpp_load_or_solve(fkpp_cache_dir(config), fkpp_opts);

    const auto start = std::chrono::steady_clock::now();

    const RngStream master(params.seed, 0);
    const BackwardPathReservoir reservoir(table, params.path, params.path_reservoir,
                                          master.split(0x9E5));
    std::vector<DecorationSample> samples(params.n_samples);
    parallel_for(params.n_samples, params.threads, [&](std::size_t k) {
        RngStream base = master.split(0xDEC0000ull + k);
        for (std::size_t attempt = 0;; ++attempt) {
            RngStream rng = base.split(attempt);
            const BackwardPath& p = reservoir.draw(rng);
            DecorationSample s = sample_decoration_abbs(p, params.decoration, table, rng);
            if (!s.failed || attempt + 1 >= params.retries_per_sample) {
                samples[k] = std::move(s);
                return;
            }
        }
    });

    std::string jsonl, csv = "sample,n_atoms,r_beta,failed\n";
    std::vector<double> r_values(params.n_samples);
    for (std::size_t k = 0; k < params.n_samples; ++k) {
        jsonl += decoration_to_jsonl(samples[k], k);
        jsonl += '\n';
        r_values[k] = decoration_functional_R(samples[k], params.beta).r_beta;
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%zu,%zu,%.17g,%d\n", k, samples[k].atoms.size(),
                      r_values[k], samples[k].failed ? 1 : 0);
        csv += buf;
    }
    const double wall = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - start).count();

    const std::string dir = run_dir(config, "decoration");
    write_file(std::filesystem::path(dir) / "decorations.jsonl", jsonl);
    write_file(std::filesystem::path(dir) / "diagnostics.csv", csv);
    nlohmann::json summary;
    summary["n_samples"] = params.n_samples;
    summary["beta"] = params.beta;
    double below = 0.0;
    for (double r : r_values)
        below += r < 0.05 ? 1.0 : 0.0;
    summary["p_r_below_0_05"] = below / static_cast<double>(params.n_samples);
    write_file(std::filesystem::path(dir) / "summary.json", summary.dump(2) + "\n");
    finish_run("decoration", config, dir, {"decorations.jsonl", "diagnostics.csv", "summary.json"},
               params.seed, wall);
    std::cout << dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo laboratory for branching Brownian motion overlap statistics"};
    app.require_subcommand(1);

    CommonFlags flags[6];
    auto* free_energy = app.add_subcommand("free-energy", "free energy sweep over (beta, t)");
    add_common(free_energy, flags[0]);
    auto* overlap_bbm = app.add_subcommand("overlap-bbm", "two-temperature Gibbs overlap on BBM");
    add_common(overlap_bbm, flags[1]);
    auto* overlap_limit =
        app.add_subcommand("overlap-limit", "Q samples from the limiting decorated process");
    add_common(overlap_limit, flags[2]);
    auto* compare_rem = app.add_subcommand("compare-rem", "paired BBM-limit vs REM mean overlap");
    add_common(compare_rem, flags[3]);
    auto* fkpp = app.add_subcommand("fkpp", "solve and tabulate the FKPP front");
    add_common(fkpp, flags[4]);
    auto* decoration = app.add_subcommand("decoration", "sample decoration point processes");
    add_common(decoration, flags[5]);

    try {
        app.parse(argc, argv);
        if (free_energy->parsed())
            return cmd_free_energy(flags[0]);
        if (overlap_bbm->parsed())
            return cmd_overlap_bbm(flags[1]);
        if (overlap_limit->parsed())
            return cmd_overlap_limit(flags[2]);
        if (compare_rem->parsed())
            return cmd_compare_rem(flags[3]);
        if (fkpp->parsed())
            return cmd_fkpp(flags[4]);
        if (decoration->parsed())
            return cmd_decoration(flags[5]);
        return 2;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ResourceRefusal& e) {
        std::cerr << "resource refusal: " << e.what() << "\n";
        return 3;
    } catch (const SamplerBudgetExhausted& e) {
        std::cerr << "sampler budget exhausted: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
