#pragma once

#include <span>
#include <vector>

#include "crowd/fields.hpp"
#include "crowd/scenario.hpp"

namespace crowd {

/// Mass that left the domain, per exit (dimensionless mass = density * area).
struct ExitLedger {
    std::vector<double> per_exit;

    explicit ExitLedger(std::size_t exits = 0) : per_exit(exits, 0.0) {}
    double total() const;
};

struct TransportOptions {
    double cfl = 0.45;
    double dt_max = 0.0;    // 0 means half a cell spacing
    double rho_cap = 4.0;   // entrance cells are not filled beyond this
};

double total_mass(const DensityField& rho, double h);

/// Impermeability: at walkable cells, outward components across wall or
/// obstacle faces are removed; exit faces are exempt. Obstacle cells get 0.
VelocityField project_velocity(const VelocityField& v, const CellGrid& g);

/// cfl * h / max(|v_x| + |v_y|), capped at dt_max.
double cfl_dt(const VelocityField& v, double h, double cfl, double dt_max);

/// First-order conservative upwind update with face velocities averaged from
/// the two adjacent cells. Outflow through exit faces is credited to `ledger`.
/// Throws NumericalError naming the cell if a density turns negative.
DensityField step_density(const DensityField& rho, const VelocityField& v, double dt, const CellGrid& g,
                          ExitLedger& ledger);

/// Adds rate * dt of mass per active entrance, spread evenly over its cells
/// and capped at rho_cap per cell. Returns the mass actually injected. With a
/// `queue` (one entry per entrance) the mass held back by the cap waits outside
/// and is offered again on later calls, also after the inflow has ended;
/// without one it is dropped.
double inject_inflow(DensityField& rho, const CellGrid& g, std::span<const EntranceSegment> entrances, double t,
                     double dt, double rho_cap = 4.0, std::vector<double>* queue = nullptr);

}  // namespace crowd
