#include "crowd/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "crowd/errors.hpp"
#include "crowd/pathplan.hpp"

namespace crowd {

double ExitLedger::total() const { return std::accumulate(per_exit.begin(), per_exit.end(), 0.0); }

double total_mass(const DensityField& rho, double h) {
    return std::accumulate(rho.values().begin(), rho.values().end(), 0.0) * h * h;
}

VelocityField project_velocity(const VelocityField& v, const CellGrid& g) {
    VelocityField out = v;
    for (std::size_t k = 0; k < g.cell_count(); ++k) {
        if (!g.walkable(k)) {
            out[k] = {};
            continue;
        }
        clamp_to_walls(out[k], g.wall_faces[k]);
    }
    return out;
}

double cfl_dt(const VelocityField& v, double h, double cfl, double dt_max) {
    if (!(cfl > 0.0 && cfl < 1.0)) throw InputError("cfl_dt: cfl must lie in (0, 1)");
    double vmax = 0.0;
    for (const auto& x : v.values()) vmax = std::max(vmax, std::abs(x.x) + std::abs(x.y));
    if (!std::isfinite(vmax)) throw NumericalError("cfl_dt: non-finite velocity");
    if (vmax == 0.0) return dt_max;
    return std::min(dt_max, cfl * h / vmax);
}

DensityField step_density(const DensityField& rho, const VelocityField& v, double dt, const CellGrid& g,
                          ExitLedger& ledger) {
    const int nx = g.nx;
    const int ny = g.ny;
    const double c = dt / g.h;
    std::vector<double> delta(rho.size(), 0.0);

    // x-faces between (i, j) and (i + 1, j)
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i + 1 < nx; ++i) {
            const std::size_t a = g.kind.index(i, j);
            const std::size_t b = a + 1;
            if (!g.walkable(a) || !g.walkable(b)) continue;
            const double u = 0.5 * (v[a].x + v[b].x);
            const double f = c * (u > 0.0 ? rho[a] * u : rho[b] * u);
            delta[a] -= f;
            delta[b] += f;
        }
    // y-faces between (i, j) and (i, j + 1)
    for (int j = 0; j + 1 < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const std::size_t a = g.kind.index(i, j);
            const std::size_t b = a + static_cast<std::size_t>(nx);
            if (!g.walkable(a) || !g.walkable(b)) continue;
            const double u = 0.5 * (v[a].y + v[b].y);
            const double f = c * (u > 0.0 ? rho[a] * u : rho[b] * u);
            delta[a] -= f;
            delta[b] += f;
        }
    // exit faces on the outer boundary
    const double area = g.h * g.h;
    for (std::size_t e = 0; e < g.exit_cells.size(); ++e)
        for (std::size_t k : g.exit_cells[e]) {
            const std::uint8_t faces = g.exit_faces[k];
            double un = 0.0;
            if (faces & face::right) un = v[k].x;
            else if (faces & face::left) un = -v[k].x;
            else if (faces & face::top) un = v[k].y;
            else if (faces & face::bottom) un = -v[k].y;
            if (un <= 0.0) continue;
            const double f = c * rho[k] * un;
            delta[k] -= f;
            ledger.per_exit[e] += f * area;
        }

    DensityField out = rho;
    const double tiny = 1e-13;
    for (std::size_t k = 0; k < out.size(); ++k) {
        if (!g.walkable(k)) continue;
        double r = rho[k] + delta[k];
        if (r < 0.0) {
            if (r < -tiny * std::max(1.0, rho[k])) {
                std::ostringstream msg;
                msg << "transport: negative density " << r << " at cell (" << k % nx << ", " << k / nx
                    << "); time step violates the CFL bound";
                throw NumericalError(msg.str());
            }
            r = 0.0;
        }
        out[k] = r;
    }
    return out;
}

double inject_inflow(DensityField& rho, const CellGrid& g, std::span<const EntranceSegment> entrances, double t,
                     double dt, double rho_cap, std::vector<double>* queue) {
    const double area = g.h * g.h;
    double injected = 0.0;
    for (std::size_t e = 0; e < entrances.size() && e < g.entrance_cells.size(); ++e) {
        const auto& seg = entrances[e];
        const auto& cells = g.entrance_cells[e];
        double mass = t < seg.duration && seg.rate > 0.0 ? seg.rate * std::min(dt, seg.duration - t) : 0.0;
        if (queue) mass += (*queue)[e];
        if (mass <= 0.0 || cells.empty()) continue;
        const double share = mass / (static_cast<double>(cells.size()) * area);
        double held = 0.0;
        for (std::size_t k : cells) {
            const double add = std::clamp(rho_cap - rho[k], 0.0, share);
            rho[k] += add;
            injected += add * area;
            held += (share - add) * area;
        }
        if (queue) (*queue)[e] = held;
    }
    return injected;
}

}  // namespace crowd
