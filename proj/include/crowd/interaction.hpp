#pragma once

#include <optional>
#include <vector>

#include "crowd/fields.hpp"
#include "crowd/scenario.hpp"

namespace crowd {

struct InteractionParams {
    double alpha = 2.0 * 3.14159265358979323846;  // visual angle, radians
    double R = 1.0;                               // sensory radius
    double F = 0.0;                               // repulsion strength
    double r_min = 0.0;                           // kernel cutoff; 0 means "one cell"
};

/// Parameters of a dimensionless scenario, with the cutoff set to one cell.
InteractionParams interaction_params(const Scenario& s, const CellGrid& g);
void validate(const InteractionParams& p);

/// Walkable cells y with |y - x| <= R, restricted to the sector of half-angle
/// alpha/2 around `dir` when a direction is given. The cell x itself is not
/// part of the mask.
std::vector<std::size_t> sensory_mask(int i, int j, std::optional<Vec2> dir, const InteractionParams& p,
                                      const CellGrid& g);

/// Nonlocal repulsion v_i[rho](x) = sum over the sensory region of
/// -F r / max(|r|^2, r_min^2) rho(y) h^2, with r = y - x. The sector at x is
/// oriented by vb(x); where vb(x) vanishes the full disc is used.
VelocityField interaction_velocity(const DensityField& rho, const VelocityField& vb, const InteractionParams& p,
                                   const CellGrid& g);

}  // namespace crowd
