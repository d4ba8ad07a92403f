#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace bbmlab {

// Tabulated distribution function G_t(y) of the min-frame extremal value
// X(t), on an increasing (t, y) grid. Values are nondecreasing in y and
// clamp to {0,1} outside the y range.
struct FkppTable {
    std::vector<double> t_grid;
    std::vector<double> y_grid;
    std::vector<double> values; // row-major: values[i * ny + j] = G_{t_i}(y_j)
    std::uint32_t frame = 1;    // 1 = abbs (min-oriented); the only frame

    double at(std::size_t i, std::size_t j) const { return values[i * y_grid.size() + j]; }
};

struct FkppSolveOptions {
    double t_max = 8.0;
    double dx = 0.05; // spatial step of the integration grid
    double dt = 0.0;  // 0 selects dx^2 / (4 D), half the stability bound
    // Fixed-frame window; x_hi <= x_lo selects [-30, sqrt(2) t_max + 30].
    double x_lo = -30.0;
    double x_hi = 0.0;
    // Integrate the min-frame equation directly on a fixed y window
    // (front drifts only logarithmically there), for large t_max.
    bool comoving = false;
    // Output y window; y_hi <= y_lo selects [-25, 1.5 log t_max + 25].
    double y_lo = -25.0;
    double y_hi = 0.0;
    // Storage cadence of t slices: fine, then mid, then geometric.
    double store_fine_until = 1.0;
    double store_fine_dt = 0.01;
    double store_mid_until = 10.0;
    double store_mid_dt = 0.05;
    double store_geom_ratio = 1.05;
};

// Integrates the FKPP equation v_t = 1/2 v_xx + v - v^2 with step initial
// data v(0,x) = 1_{x<0} (v is the tail probability of the max) and
// tabulates G_t(y) = v(t, sqrt(2) t - y / sqrt(2)). The comoving option
// integrates the equivalent min-frame form G_t = G_yy - 2 G_y + G - G^2
// on a fixed window instead. Explicit scheme: throws std::domain_error
// when dt exceeds the stability bound dx^2 / (2 D).
FkppTable fkpp_solve(const FkppSolveOptions& opts);

// Bilinear interpolation; clamps to {0,1} outside the y range, uses the
// earliest slice for t below the grid, throws std::domain_error past
// t_max.
double fkpp_query(const FkppTable& table, double t, double y);

struct FrontPoint {
    double t = 0.0;
    double x_front = 0.0; // max-frame position where the tail crosses 1/2
    double m_t = 0.0;
};

// Front location per stored slice (skips slices where the front is not
// bracketed by the window).
std::vector<FrontPoint> fkpp_front_track(const FkppTable& table);

// Binary format: magic "FKPP", version u32, frame u32, nt u64, ny u64,
// t grid f64[nt], y grid f64[ny], values f64[nt*ny].
void fkpp_write(const FkppTable& table, std::ostream& out);
FkppTable fkpp_read(std::istream& in);

// Cache keyed by the solver parameters: loads <dir>/fkpp_<digest>.bin when
// present, otherwise solves, writes the table plus a JSON parameter
// sidecar, and returns it.
FkppTable fkpp_load_or_solve(const std::string& cache_dir, const FkppSolveOptions& opts);

// Digest of the parameter block (also the cache key).
std::string fkpp_options_digest(const FkppSolveOptions& opts);

} // namespace bbmlab
