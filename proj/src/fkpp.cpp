#include "bbmlab/fkpp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

#include "bbmlab/config.hpp"
#include "bbmlab/constants.hpp"

namespace bbmlab {

namespace {

std::vector<double> storage_times(const FkppSolveOptions& o) {
    std::vector<double> ts;
    double t = 0.0;
    double step = o.store_fine_dt;
    while (t < o.t_max - 1e-12) {
        if (t >= o.store_mid_until)
            step = std::max(step * o.store_geom_ratio, o.store_mid_dt);
        else if (t >= o.store_fine_until)
            step = o.store_mid_dt;
        t += step;
        ts.push_back(std::min(t, o.t_max));
    }
    if (ts.empty() || ts.back() < o.t_max)
        ts.push_back(o.t_max);
    return ts;
}

std::vector<double> linspace(double lo, double hi, double step) {
    std::vector<double> g;
    const auto n = static_cast<std::size_t>(std::round((hi - lo) / step));
    g.reserve(n + 1);
    for (std::size_t i = 0; i <= n; ++i)
        g.push_back(lo + static_cast<double>(i) * step);
    return g;
}

} // namespace

FkppTable fkpp_solve(const FkppSolveOptions& opts) {
    FkppSolveOptions o = opts;
    if (!(o.t_max > 0.0) || !(o.dx > 0.0))
        throw std::domain_error("fkpp_solve: t_max and dx must be positive");
    if (o.x_hi <= o.x_lo)
        o.x_hi = std::numbers::sqrt2 * o.t_max + 30.0;
    if (o.y_hi <= o.y_lo)
        o.y_hi = 1.5 * std::log(std::max(o.t_max, 2.0)) + 25.0;

    const double diffusivity = o.comoving ? 1.0 : 0.5;
    const double stability = o.dx * o.dx / (2.0 * diffusivity);
    if (o.dt <= 0.0)
        o.dt = 0.5 * stability;
    if (o.dt > stability * (1.0 + 1e-12)) {
        char msg[160];
        std::snprintf(msg, sizeof(msg),
                      "fkpp_solve: dt=%g violates the explicit stability bound "
                      "dt <= dx^2/(2 D) = %g",
                      o.dt, stability);
        throw std::domain_error(msg);
    }

    FkppTable table;
    table.y_grid = linspace(o.y_lo, o.y_hi, o.dx);
    const std::size_t ny = table.y_grid.size();

    // Integration grid: x (max frame) or y (min frame).
    const double lo = o.comoving ? o.y_lo : o.x_lo;
    const double hi = o.comoving ? o.y_hi : o.x_hi;
    std::vector<double> grid = linspace(lo, hi, o.dx);
    const std::size_t n = grid.size();
    std::vector<double> u(n), next(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (o.comoving)
            u[i] = grid[i] >= 0.0 ? 1.0 : 0.0; // G_0 = 1_{y >= 0}
        else
            u[i] = grid[i] < 0.0 ? 1.0 : 0.0; // v(0,x) = 1_{x < 0}
    }

    const std::vector<double> stores = storage_times(o);
    table.t_grid.reserve(stores.size());
    table.values.reserve(stores.size() * ny);

    auto store_slice = [&](double t) {
        table.t_grid.push_back(t);
        if (o.comoving) {
            // The integration grid is the output grid.
            table.values.insert(table.values.end(), u.begin(), u.end());
            return;
        }
        // G_t(y) = v(t, sqrt(2) t - y / sqrt(2)), linearly interpolated;
        // v saturates to 1 left of the window and 0 right of it.
        for (std::size_t j = 0; j < ny; ++j) {
            const double x = std::numbers::sqrt2 * t - table.y_grid[j] / std::numbers::sqrt2;
            double g;
            if (x <= grid.front())
                g = 1.0;
            else if (x >= grid.back())
                g = 0.0;
            else {
                const double pos = (x - grid.front()) / o.dx;
                const auto k = std::min(static_cast<std::size_t>(pos), n - 2);
                const double w = pos - static_cast<double>(k);
                g = (1.0 - w) * u[k] + w * u[k + 1];
            }
            table.values.push_back(g);
        }
    };

    const double r_diff = diffusivity * o.dt / (o.dx * o.dx);
    const double r_adv = o.comoving ? -2.0 * o.dt / (2.0 * o.dx) : 0.0;
    double t = 0.0;
    std::size_t next_store = 0;
    while (next_store < stores.size()) {
        const double dt_step = std::min(o.dt, stores[next_store] - t + 1e-15);
        const double a = r_diff * (dt_step / o.dt);
        const double c = r_adv * (dt_step / o.dt);
        next.front() = u.front();
        next.back() = u.back();
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double ui = u[i];
            next[i] = ui + a * (u[i + 1] - 2.0 * ui + u[i - 1]) + c * (u[i + 1] - u[i - 1]) +
                      dt_step * ui * (1.0 - ui);
        }
        u.swap(next);
        t += dt_step;
        if (t >= stores[next_store] - 1e-12) {
            store_slice(stores[next_store]);
            ++next_store;
        }
    }
    return table;
}

double fkpp_query(const FkppTable& table, double t, double y) {
    if (table.t_grid.empty() || table.y_grid.empty())
        throw std::domain_error("fkpp_query: empty table");
    if (t > table.t_grid.back() * (1.0 + 1e-9) + 1e-12)
        throw std::domain_error("fkpp_query: t beyond the tabulated horizon");
    if (y <= table.y_grid.front())
        return 0.0;
    if (y >= table.y_grid.back())
        return 1.0;

    const auto& tg = table.t_grid;
    const std::size_t ny = table.y_grid.size();
    // y bracket
    const auto jt = std::upper_bound(table.y_grid.begin(), table.y_grid.end(), y);
    const std::size_t j = static_cast<std::size_t>(jt - table.y_grid.begin()) - 1;
    const double wy = (y - table.y_grid[j]) / (table.y_grid[j + 1] - table.y_grid[j]);

    auto row_value = [&](std::size_t i) {
        return (1.0 - wy) * table.values[i * ny + j] + wy * table.values[i * ny + j + 1];
    };

    if (t <= tg.front())
        return row_value(0); // earliest-slice approximation for small t
    if (t >= tg.back())
        return row_value(tg.size() - 1);
    const auto it = std::upper_bound(tg.begin(), tg.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - tg.begin()) - 1;
    const double wt = (t - tg[i]) / (tg[i + 1] - tg[i]);
    return (1.0 - wt) * row_value(i) + wt * row_value(i + 1);
}

std::vector<FrontPoint> fkpp_front_track(const FkppTable& table) {
    std::vector<FrontPoint> front;
    const std::size_t ny = table.y_grid.size();
    for (std::size_t i = 0; i < table.t_grid.size(); ++i) {
        const double t = table.t_grid[i];
        if (t <= 0.0)
            continue;
        const double* row = table.values.data() + i * ny;
        // First index where G >= 1/2.
        std::size_t j = 0;
        while (j < ny && row[j] < 0.5)
            ++j;
        if (j == 0 || j >= ny)
            continue;
        const double w = (0.5 - row[j - 1]) / (row[j] - row[j - 1]);
        const double y_half = table.y_grid[j - 1] + w * (table.y_grid[j] - table.y_grid[j - 1]);
        FrontPoint p;
        p.t = t;
        p.x_front = std::numbers::sqrt2 * t - y_half / std::numbers::sqrt2;
        p.m_t = centering_m(t);
        front.push_back(p);
    }
    return front;
}

namespace {

template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

} // namespace

void fkpp_write(const FkppTable& table, std::ostream& out) {
    out.write("FKPP", 4);
    put<std::uint32_t>(out, 1u);
    put<std::uint32_t>(out, table.frame);
    put<std::uint64_t>(out, table.t_grid.size());
    put<std::uint64_t>(out, table.y_grid.size());
    auto put_all = [&](const std::vector<double>& v) {
        out.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(v.size() * sizeof(double)));
    };
    put_all(table.t_grid);
    put_all(table.y_grid);
    put_all(table.values);
}

FkppTable fkpp_read(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "FKPP", 4) != 0)
        throw std::runtime_error("fkpp_read: bad magic");
    const auto version = get<std::uint32_t>(in);
    if (version != 1u)
        throw std::runtime_error("fkpp_read: unsupported version");
    FkppTable table;
    table.frame = get<std::uint32_t>(in);
    const auto nt = get<std::uint64_t>(in);
    const auto ny = get<std::uint64_t>(in);
    auto get_all = [&](std::vector<double>& v, std::uint64_t count) {
        v.resize(count);
        in.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(count * sizeof(double)));
    };
    get_all(table.t_grid, nt);
    get_all(table.y_grid, ny);
    get_all(table.values, nt * ny);
    if (!in)
        throw std::runtime_error("fkpp_read: truncated file");
    return table;
}

namespace {

nlohmann::json options_json(const FkppSolveOptions& o) {
    return {{"t_max", o.t_max},
            {"dx", o.dx},
            {"dt", o.dt},
            {"x_lo", o.x_lo},
            {"x_hi", o.x_hi},
            {"comoving", o.comoving},
            {"y_lo", o.y_lo},
            {"y_hi", o.y_hi},
            {"store_fine_until", o.store_fine_until},
            {"store_fine_dt", o.store_fine_dt},
            {"store_mid_until", o.store_mid_until},
            {"store_mid_dt", o.store_mid_dt},
            {"store_geom_ratio", o.store_geom_ratio}};
}

} // namespace

std::string fkpp_options_digest(const FkppSolveOptions& opts) {
    return fnv1a_hex(options_json(opts).dump());
}

FkppTable fkpp_load_or_solve(const std::string& cache_dir, const FkppSolveOptions& opts) {
    namespace fs = std::filesystem;
    const fs::path dir(cache_dir);
    const fs::path bin = dir / ("fkpp_" + fkpp_options_digest(opts) + ".bin");
    if (fs::exists(bin)) {
        std::ifstream in(bin, std::ios::binary);
        return fkpp_read(in);
    }
    FkppTable table = fkpp_solve(opts);
    fs::create_directories(dir);
    {
        std::ofstream out(bin, std::ios::binary);
        fkpp_write(table, out);
    }
    {
        std::ofstream sidecar(bin.string() + ".json");
        sidecar << options_json(opts).dump(2) << "\n";
    }
    return table;
}

} // namespace bbmlab
