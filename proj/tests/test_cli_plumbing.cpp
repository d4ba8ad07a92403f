#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "bbmlab/config.hpp"
#include "bbmlab/constants.hpp"
#include "bbmlab/errors.hpp"
#include "bbmlab/experiments.hpp"
#include "bbmlab/manifest.hpp"

using namespace bbmlab;

TEST_SUITE_BEGIN("experiment_cli");

TEST_CASE("config parsing") {
    const Config config = Config::parse_string("# comment\n"
                                               "[run]\n"
                                               "seed = 7\n"
                                               "threads = 2 ; trailing comment\n"
                                               "\n"
                                               "[overlap]\n"
                                               "beta = 2.5\n"
                                               "label = cold phase\n");
    CHECK(config.get_u64("run.seed", 0) == 7);
    CHECK(config.get_u64("run.threads", 0) == 2);
    CHECK(config.get_double("overlap.beta", 0.0) == 2.5);
    CHECK(config.get_str("overlap.label", "") == "cold phase");
    CHECK(config.get_double("overlap.missing", -1.0) == -1.0);
    CHECK(config.has("overlap.beta"));
    CHECK(!config.has("overlap.gamma"));

    CHECK_THROWS_AS(Config::parse_string("key_without_value\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse_string("[broken\nk = v\n"), ConfigError);
    CHECK_THROWS_AS(config.get_double("overlap.label", 0.0), ConfigError);
    CHECK_THROWS_AS(Config::parse_file("/nonexistent/path.ini"), ConfigError);
}

TEST_CASE("config digest is stable under key reordering") {
    const Config a = Config::parse_string("[s]\nx = 1\ny = 2\n[t]\nz = 3\n");
    const Config b = Config::parse_string("[t]\nz = 3\n[s]\ny = 2\nx = 1\n");
    CHECK(a.digest() == b.digest());
    Config c = a;
    c.set("s.x", "4");
    CHECK(c.digest() != a.digest());
}

TEST_CASE("manifest round trip and orphan audit") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "bbmlab_manifest_test";
    fs::remove_all(dir);
    fs::create_directories(dir);

    RunManifest manifest;
    manifest.command = "overlap-bbm";
    manifest.parameters = Config::parse_string("[run]\nseed = 3\n");
    manifest.seeds = {3};
    manifest.artifact_version = kArtifactVersion;
    manifest.wall_time_s = 1.5;
    manifest.outputs = {"data.csv"};
    {
        std::ofstream out(dir / "data.csv");
        out << "a,b\n";
    }
    manifest.write(dir.string());

    const auto parsed = nlohmann::json::parse(std::ifstream(dir / "manifest.json"));
    CHECK(parsed["command"] == "overlap-bbm");
    CHECK(parsed["config_digest"] == manifest.config_digest());
    CHECK(parsed["parameters"]["run.seed"] == "3");
    CHECK(parsed["outputs"][0] == "data.csv");

    CHECK(audit_orphan_outputs(dir.string(), manifest).empty());
    {
        std::ofstream out(dir / "stray.txt");
        out << "oops";
    }
    const auto orphans = audit_orphan_outputs(dir.string(), manifest);
    REQUIRE(orphans.size() == 1);
    CHECK(orphans[0] == "stray.txt");
    fs::remove_all(dir);
}

TEST_CASE("free energy sweep is byte-deterministic") {
    FreeEnergySweepParams params;
    params.betas = {0.5 * beta_critical, beta_critical};
    params.horizons = {6.0};
    params.replicas = 20;
    params.seed = 11;
    params.threads = 1;
    const auto a = run_free_energy_sweep(params);
    const auto b = run_free_energy_sweep(params);
    CHECK(free_energy_csv(a) == free_energy_csv(b));

    // Thread count must not change merged results.
    params.threads = 3;
    const auto c = run_free_energy_sweep(params);
    CHECK(free_energy_csv(a) == free_energy_csv(c));

    FreeEnergySweepParams empty = params;
    empty.betas = {};
    CHECK_THROWS_AS(run_free_energy_sweep(empty), ConfigError);
}

TEST_CASE("overlap run is deterministic across thread counts") {
    OverlapBbmParams params;
    params.horizon = 6.0;
    params.replicas = 12;
    params.n_pairs = 50;
    params.seed = 5;
    params.threads = 1;
    const auto a = run_overlap_bbm(params);
    params.threads = 4;
    const auto b = run_overlap_bbm(params);
    CHECK(overlap_bbm_csv(params, a) == overlap_bbm_csv(params, b));
    CHECK(a.estimate.mean == b.estimate.mean);
}

TEST_SUITE_END();
