#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "crowd/fields.hpp"
#include "crowd/interaction.hpp"
#include "crowd/scenario.hpp"

namespace crowd {

/// Sentinel for unreachable and obstacle cells.
inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

/// m unit vectors equally spaced on the unit circle, direction k at angle 2 pi k / m.
class ControlSet {
public:
    explicit ControlSet(int m = 32);
    int size() const { return static_cast<int>(dirs_.size()); }
    Vec2 operator[](int k) const { return dirs_[static_cast<std::size_t>(k)]; }
    const std::vector<Vec2>& directions() const { return dirs_; }

private:
    std::vector<Vec2> dirs_;
};

struct HjbOptions {
    double tol = 1e-6;  // sup-norm update that ends the sweeps
    int max_passes = 500;
    int controls = 32;
    double speed_floor = 1e-6;
};

struct ValueField {
    Grid2<double> phi;
    int passes = 0;
    bool converged = false;
    std::size_t unreachable = 0;  // walkable cells left at kUnreachable
};

/// |grad phi| = 1 with phi = 0 on exit cells, by semi-Lagrangian fast sweeping.
ValueField solve_eikonal(const CellGrid& g, const HjbOptions& opt = {});

/// |grad phi| - w . grad phi = 1 with a frozen drift w. Reduces bit-for-bit to
/// solve_eikonal when w vanishes.
ValueField solve_drift_hjb(const CellGrid& g, const VelocityField& drift, const HjbOptions& opt = {});

/// Backward-in-time value of the time-space minimum-time problem.
struct TimeSpaceValue {
    double dt = 0.0;
    /// Per slice k (time k dt): ControlSet index minimizing the one-step value,
    /// -1 where no descent direction exists, -2 on exit cells.
    std::vector<Grid2<std::int8_t>> control;
    /// phi per slice; only filled when requested.
    std::vector<Grid2<double>> phi;
    /// More than half of the reachable cells at t = 0 only reach the target
    /// through the terminal condition.
    bool horizon_warning = false;
};

/// Time-space solve against a precomputed drift per slice. Slice k covers
/// [k dt, (k + 1) dt]; `terminal` is the value after the last slice. If
/// `terminal_drift` is given, `terminal` must be the stationary value for that
/// drift; trailing slices with the same drift then reuse it unchanged.
TimeSpaceValue solve_timespace_hjb(const CellGrid& g, std::span<const VelocityField> drift, double dt,
                                   const Grid2<double>& terminal, const VelocityField* terminal_drift = nullptr,
                                   bool keep_values = false, const HjbOptions& opt = {});

/// Time-space solve against a density trajectory sampled every dt on
/// [0, T_max] (held constant after its last sample). The sensory regions are
/// oriented by `vb_orient`; the terminal value at T_max is the eikonal one.
TimeSpaceValue solve_timespace_hjb(const CellGrid& g, std::span<const DensityField> rho_traj, double dt,
                                   const VelocityField& vb_orient, const InteractionParams& p, double T_max,
                                   bool keep_values = false, const HjbOptions& opt = {});

/// Optimal feedback v_b* = the control minimizing the one-step value at each
/// cell, |v_b*| in {0, 1}. Exit cells point through their exit face.
VelocityField feedback_velocity(const Grid2<double>& phi, const CellGrid& g,
                                const VelocityField* drift = nullptr, const HjbOptions& opt = {});

/// Converts per-cell control indices (see TimeSpaceValue::control) to velocities.
VelocityField controls_to_velocity(const Grid2<std::int8_t>& control, const CellGrid& g, int controls = 32);

/// Largest finite value of a value field (0 if none).
double max_finite(const Grid2<double>& phi);

/// Impermeability clamp at a walkable cell: drops outward components across
/// wall faces. Returns true if anything changed.
bool clamp_to_walls(Vec2& v, std::uint8_t wall_faces);

}  // namespace crowd
