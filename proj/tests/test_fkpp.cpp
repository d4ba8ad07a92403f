#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "bbmlab/bbm.hpp"
#include "bbmlab/constants.hpp"
#include "bbmlab/fkpp.hpp"
#include "bbmlab/rng.hpp"

using namespace bbmlab;

TEST_SUITE_BEGIN("fkpp_front");

TEST_CASE("stability refusal and basic solve") {
    FkppSolveOptions bad;
    bad.t_max = 1.0;
    bad.dx = 0.1;
    bad.dt = 0.1; // far beyond dx^2/(2D)
    CHECK_THROWS_AS(fkpp_solve(bad), std::domain_error);

    FkppSolveOptions opts;
    opts.t_max = 2.0;
    const FkppTable table = fkpp_solve(opts);
    REQUIRE(!table.t_grid.empty());
    CHECK(table.t_grid.back() == doctest::Approx(2.0));

    // Distribution-function shape: 0 on the far left, 1 on the far right,
    // monotone in between at every stored slice.
    const std::size_t ny = table.y_grid.size();
    for (std::size_t i = 0; i < table.t_grid.size(); ++i) {
        CHECK(table.at(i, 0) <= 1e-6);
        CHECK(table.at(i, ny - 1) >= 1.0 - 1e-6);
        for (std::size_t j = 1; j < ny; ++j)
            CHECK(table.at(i, j) >= table.at(i, j - 1) - 1e-12);
    }
}

TEST_CASE("query clamps and interpolates") {
    FkppSolveOptions opts;
    opts.t_max = 2.0;
    const FkppTable table = fkpp_solve(opts);
    CHECK(fkpp_query(table, 1.0, -1e6) == 0.0);
    CHECK(fkpp_query(table, 1.0, +1e6) == 1.0);
    CHECK_THROWS_AS(fkpp_query(table, 3.0, 0.0), std::domain_error);
    // Below the first slice the earliest slice answers.
    CHECK(fkpp_query(table, 0.0, 5.0) == doctest::Approx(fkpp_query(table, table.t_grid[0], 5.0)));
    // Monotone in y through the interpolator.
    double prev = 0.0;
    for (double y = -10.0; y <= 10.0; y += 0.01) {
        const double g = fkpp_query(table, 1.7, y);
        CHECK(g >= prev - 1e-12);
        prev = g;
    }
}

TEST_CASE("fixed-frame and min-frame integrations agree") {
    FkppSolveOptions fixed;
    fixed.t_max = 6.0;
    const FkppTable a = fkpp_solve(fixed);

    FkppSolveOptions moving = fixed;
    moving.comoving = true;
    const FkppTable b = fkpp_solve(moving);

    double sup = 0.0;
    for (double t : {0.5, 1.0, 2.0, 4.0, 6.0})
        for (double y = -12.0; y <= 12.0; y += 0.25)
            sup = std::max(sup, std::abs(fkpp_query(a, t, y) - fkpp_query(b, t, y)));
    CHECK(sup < 2e-3);
}

TEST_CASE("self convergence under grid refinement") {
    FkppSolveOptions coarse;
    coarse.t_max = 8.0;
    const FkppTable a = fkpp_solve(coarse);

    FkppSolveOptions fine = coarse;
    fine.dx = coarse.dx / 2.0;
    const FkppTable b = fkpp_solve(fine);

    double sup = 0.0;
    for (double t : {4.0, 8.0})
        for (double y = -10.0; y <= 14.0; y += 0.2)
            sup = std::max(sup, std::abs(fkpp_query(a, t, y) - fkpp_query(b, t, y)));
    CHECK(sup < 1e-3);
}

TEST_CASE("tabulated G matches simulated minima at t = 8") {
    FkppSolveOptions opts;
    opts.t_max = 8.0;
    const FkppTable table = fkpp_solve(opts);

    RngStream rng(400, 0);
    std::vector<double> minima(1000);
    for (int r = 0; r < 1000; ++r) {
        RngStream stream = rng.split(r);
        const ParticleTree tree = simulate(8.0, Normalization::standard, std::nullopt, stream);
        const PopulationSnapshot abbs = to_abbs_frame(snapshot(tree));
        double mn = 1e300;
        for (const auto& p : abbs.particles)
            mn = std::min(mn, p.position);
        minima[r] = mn;
    }
    std::sort(minima.begin(), minima.end());
    // Median crossing: G at the empirical median should be near 0.5.
    const double median = minima[minima.size() / 2];
    CHECK(std::abs(fkpp_query(table, 8.0, median) - 0.5) < 0.05);
}

TEST_CASE("front tracks m_t") {
    FkppSolveOptions opts;
    opts.t_max = 40.0;
    opts.comoving = true;
    const FkppTable table = fkpp_solve(opts);
    const auto front = fkpp_front_track(table);
    REQUIRE(front.size() > 10);

    // Bounded difference over [10, 40] and a small drift at the end.
    double lo = 1e300, hi = -1e300;
    for (const auto& p : front) {
        if (p.t < 10.0)
            continue;
        lo = std::min(lo, p.x_front - p.m_t);
        hi = std::max(hi, p.x_front - p.m_t);
    }
    CHECK(hi - lo < 1.0);

    const auto& last = front.back();
    const FrontPoint* prev = nullptr;
    for (const auto& p : front)
        if (p.t <= last.t - 4.0)
            prev = &p;
    REQUIRE(prev != nullptr);
    const double drift = ((last.x_front - last.m_t) - (prev->x_front - prev->m_t)) /
                         (last.t - prev->t);
    CHECK(std::abs(drift) < 0.05);
}

TEST_CASE("binary round trip and cache") {
    FkppSolveOptions opts;
    opts.t_max = 1.0;
    const FkppTable table = fkpp_solve(opts);

    std::stringstream buf;
    fkpp_write(table, buf);
    const FkppTable back = fkpp_read(buf);
    CHECK(back.t_grid == table.t_grid);
    CHECK(back.y_grid == table.y_grid);
    CHECK(back.values == table.values);
    CHECK(back.frame == table.frame);

    const std::string dir =
        (std::filesystem::temp_directory_path() / "bbmlab_fkpp_cache_test").string();
    std::filesystem::remove_all(dir);
    const FkppTable first = fkpp_load_or_solve(dir, opts);
    CHECK(std::filesystem::exists(std::filesystem::path(dir) /
                                  ("fkpp_" + fkpp_options_digest(opts) + ".bin")));
    const FkppTable second = fkpp_load_or_solve(dir, opts);
    CHECK(second.values == first.values);
    std::filesystem::remove_all(dir);
}

TEST_SUITE_END();
