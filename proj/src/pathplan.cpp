#include "crowd/pathplan.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "crowd/errors.hpp"

namespace crowd {

namespace {

constexpr double kWeightEps = 1e-12;
constexpr std::int8_t kNoControl = -1;
constexpr std::int8_t kExitControl = -2;

/// One candidate of the semi-Lagrangian minimization: its cost and the
/// three-point interpolation stencil at the foot of the characteristic.
struct Candidate {
    std::uint32_t v[3] = {0, 0, 0};
    double w[3] = {0.0, 0.0, 0.0};
    int n = 0;
    double cost = 0.0;

    double value(const std::vector<double>& phi) const {
        double s = cost;
        for (int q = 0; q < n; ++q) s += w[q] * phi[v[q]];
        return s;
    }
};

bool walkable_at(const CellGrid& g, int i, int j) { return g.kind.in_bounds(i, j) && g.walkable(i, j); }

// Linear interpolation on the triangulated lattice of cell centers; (u, v) are
// lattice coordinates (cell (i, j) sits at (i, j)). Each lattice square is cut
// along its anti-diagonal. Fails if a vertex with nonzero weight is outside
// the walking area.
bool interpolation_stencil(const CellGrid& g, double u, double v, Candidate& c) {
    const double fi = std::floor(u);
    const double fj = std::floor(v);
    const int i0 = static_cast<int>(fi);
    const int j0 = static_cast<int>(fj);
    const double fu = u - fi;
    const double fv = v - fj;
    int vi[3];
    int vj[3];
    double w[3];
    if (fu + fv <= 1.0) {
        vi[0] = i0, vj[0] = j0, w[0] = 1.0 - fu - fv;
        vi[1] = i0 + 1, vj[1] = j0, w[1] = fu;
        vi[2] = i0, vj[2] = j0 + 1, w[2] = fv;
    } else {
        vi[0] = i0 + 1, vj[0] = j0 + 1, w[0] = fu + fv - 1.0;
        vi[1] = i0, vj[1] = j0 + 1, w[1] = 1.0 - fu;
        vi[2] = i0 + 1, vj[2] = j0, w[2] = 1.0 - fv;
    }
    c.n = 0;
    for (int q = 0; q < 3; ++q) {
        if (w[q] <= kWeightEps) continue;
        if (!walkable_at(g, vi[q], vj[q])) return false;
        c.v[c.n] = static_cast<std::uint32_t>(g.kind.index(vi[q], vj[q]));
        c.w[c.n] = w[q];
        ++c.n;
    }
    return c.n > 0;
}

// Straight path from the cell center to a foot more than one cell away must
// not cross holes or leave the domain.
bool path_clear(const CellGrid& g, int i, int j, Vec2 disp_cells) {
    const double len = disp_cells.norm();
    const int n = static_cast<int>(std::ceil(len / 0.5));
    for (int s = 1; s <= n; ++s) {
        const double t = static_cast<double>(s) / n;
        const int a = static_cast<int>(std::floor(i + t * disp_cells.x + 0.5));
        const int b = static_cast<int>(std::floor(j + t * disp_cells.y + 0.5));
        if (!walkable_at(g, a, b)) return false;
    }
    return true;
}

// Builds the candidate for control `a` at walkable cell (i, j) with drift w.
// dt == 0: stationary scheme, the foot lies one cell spacing away along the
// (clamped) velocity and the cost is the travel time. dt > 0: time-space
// scheme with a fixed time step.
bool build_candidate(const CellGrid& g, int i, int j, Vec2 a, Vec2 w, double dt, double speed_floor,
                     Candidate& c) {
    const bool still = w.x == 0.0 && w.y == 0.0;
    Vec2 v = still ? a : a + w;
    const bool clamped = clamp_to_walls(v, g.wall_faces(i, j));
    Vec2 disp;  // in cell units
    if (dt > 0.0) {
        disp = v * (dt / g.h);
        c.cost = dt;
    } else if (still && !clamped) {
        disp = a;
        c.cost = g.h;
    } else {
        const double speed = v.norm();
        if (speed < speed_floor) return false;
        disp = v * (1.0 / speed);
        c.cost = g.h / speed;
    }
    if (disp.norm() > 1.0 + 1e-9 && !path_clear(g, i, j, disp)) return false;
    return interpolation_stencil(g, i + disp.x, j + disp.y, c);
}

Vec2 exit_direction(std::uint8_t faces) {
    if (faces & face::right) return {1.0, 0.0};
    if (faces & face::left) return {-1.0, 0.0};
    if (faces & face::top) return {0.0, 1.0};
    if (faces & face::bottom) return {0.0, -1.0};
    return {};
}

Grid2<double> initial_values(const CellGrid& g) {
    Grid2<double> phi(g.nx, g.ny, kUnreachable);
    for (std::size_t k = 0; k < g.cell_count(); ++k)
        if (g.is_exit(k)) phi[k] = 0.0;
    return phi;
}

ValueField sweep_solve(const CellGrid& g, const VelocityField* drift, const HjbOptions& opt) {
    bool any_exit = false;
    for (const auto& cells : g.exit_cells) any_exit = any_exit || !cells.empty();
    if (!any_exit) throw NumericalError("pathplan: no exit cell in the grid");

    const ControlSet controls(opt.controls);
    const std::size_t ncell = g.cell_count();
    std::vector<Candidate> cands;
    std::vector<std::uint32_t> first(ncell + 1, 0);
    cands.reserve(ncell * static_cast<std::size_t>(controls.size()) / 2);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const std::size_t k = g.kind.index(i, j);
            first[k] = static_cast<std::uint32_t>(cands.size());
            if (!g.walkable(k) || g.is_exit(k)) continue;
            const Vec2 w = drift ? (*drift)[k] : Vec2{};
            for (int d = 0; d < controls.size(); ++d) {
                Candidate c;
                if (build_candidate(g, i, j, controls[d], w, 0.0, opt.speed_floor, c)) cands.push_back(c);
            }
        }
    first[ncell] = static_cast<std::uint32_t>(cands.size());

    ValueField out;
    out.phi = initial_values(g);
    auto& phi = out.phi.values();
    const int nx = g.nx;
    const int ny = g.ny;
    for (int pass = 0; pass < opt.max_passes; ++pass) {
        const bool i_up = pass % 4 == 0 || pass % 4 == 3;
        const bool j_up = pass % 4 < 2;
        double change = 0.0;
        for (int jj = 0; jj < ny; ++jj) {
            const int j = j_up ? jj : ny - 1 - jj;
            for (int ii = 0; ii < nx; ++ii) {
                const int i = i_up ? ii : nx - 1 - ii;
                const std::size_t k = static_cast<std::size_t>(j) * nx + i;
                double best = phi[k];
                for (std::uint32_t q = first[k]; q < first[k + 1]; ++q) best = std::min(best, cands[q].value(phi));
                if (best < phi[k]) {
                    change = std::max(change, phi[k] - best);
                    phi[k] = best;
                }
            }
        }
        out.passes = pass + 1;
        if (change < opt.tol) {
            out.converged = true;
            break;
        }
    }
    for (std::size_t k = 0; k < ncell; ++k)
        if (g.walkable(k) && phi[k] == kUnreachable) ++out.unreachable;
    return out;
}

Grid2<std::int8_t> feedback_controls(const Grid2<double>& phi, const CellGrid& g, const VelocityField* drift,
                                     const HjbOptions& opt) {
    const ControlSet controls(opt.controls);
    Grid2<std::int8_t> out(g.nx, g.ny, kNoControl);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const std::size_t k = g.kind.index(i, j);
            if (!g.walkable(k) || phi[k] == kUnreachable) continue;
            if (g.is_exit(k)) {
                out[k] = kExitControl;
                continue;
            }
            const Vec2 w = drift ? (*drift)[k] : Vec2{};
            double best = kUnreachable;
            for (int d = 0; d < controls.size(); ++d) {
                Candidate c;
                if (!build_candidate(g, i, j, controls[d], w, 0.0, opt.speed_floor, c)) continue;
                const double val = c.value(phi.values());
                if (val < best) {
                    best = val;
                    out[k] = static_cast<std::int8_t>(d);
                }
            }
        }
    return out;
}

TimeSpaceValue backward_pass(const CellGrid& g, std::span<const VelocityField> drift, double dt,
                             const Grid2<double>& terminal, const VelocityField* terminal_drift, bool keep_values,
                             const HjbOptions& opt) {
    if (!(dt > 0.0)) throw InputError("solve_timespace_hjb: dt must be > 0");
    if (drift.empty()) throw InputError("solve_timespace_hjb: at least one slice is required");
    if (terminal.nx() != g.nx || terminal.ny() != g.ny) throw InputError("solve_timespace_hjb: terminal has the wrong shape");
    for (const auto& w : drift)
        if (w.nx() != g.nx || w.ny() != g.ny) throw InputError("solve_timespace_hjb: drift has the wrong shape");
    const ControlSet controls(opt.controls);
    const std::size_t K = drift.size();
    TimeSpaceValue out;
    out.dt = dt;
    out.control.assign(K, Grid2<std::int8_t>(g.nx, g.ny, kNoControl));
    if (keep_values) out.phi.assign(K, Grid2<double>());

    // While the drift equals the one the stationary terminal value was solved
    // for, the problem is autonomous and every slice equals the terminal.
    std::size_t tail = K;
    if (terminal_drift)
        while (tail > 0 && drift[tail - 1] == *terminal_drift) --tail;
    if (tail < K) {
        const auto ctrl = feedback_controls(terminal, g, terminal_drift, opt);
        for (std::size_t k = tail; k < K; ++k) {
            out.control[k] = ctrl;
            if (keep_values) out.phi[k] = terminal;
        }
    }

    Grid2<double> next = terminal;
    Grid2<double> cur(g.nx, g.ny, kUnreachable);
    for (std::size_t kk = tail; kk-- > 0;) {
        const auto& w = drift[kk];
        auto& ctrl = out.control[kk];
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const std::size_t k = g.kind.index(i, j);
                if (!g.walkable(k)) {
                    cur[k] = kUnreachable;
                    continue;
                }
                if (g.is_exit(k)) {
                    cur[k] = 0.0;
                    ctrl[k] = kExitControl;
                    continue;
                }
                double best = kUnreachable;
                std::int8_t arg = kNoControl;
                for (int d = 0; d < controls.size(); ++d) {
                    Candidate c;
                    if (!build_candidate(g, i, j, controls[d], w[k], dt, opt.speed_floor, c)) continue;
                    const double val = c.value(next.values());
                    if (val < best) {
                        best = val;
                        arg = static_cast<std::int8_t>(d);
                    }
                }
                cur[k] = best;
                ctrl[k] = arg;
            }
        if (keep_values) out.phi[kk] = cur;
        std::swap(next, cur);
    }

    // `next` now holds the value at t = 0.
    const double horizon = static_cast<double>(K) * dt;
    std::size_t reachable = 0;
    std::size_t through_terminal = 0;
    for (std::size_t k = 0; k < g.cell_count(); ++k) {
        if (!g.walkable(k) || g.is_exit(k) || next[k] == kUnreachable) continue;
        ++reachable;
        if (next[k] > horizon * (1.0 + 1e-12)) ++through_terminal;
    }
    out.horizon_warning = reachable > 0 && 2 * through_terminal > reachable;
    return out;
}

}  // namespace

ControlSet::ControlSet(int m) {
    if (m < 4 || m > 127) throw InputError("ControlSet: between 4 and 127 directions are supported");
    dirs_.reserve(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
        const double ang = 2.0 * std::numbers::pi * k / m;
        Vec2 a{std::cos(ang), std::sin(ang)};
        // Exact axis directions keep feet on lattice lines.
        if (std::abs(a.x) < 1e-15) a.x = 0.0;
        if (std::abs(a.y) < 1e-15) a.y = 0.0;
        dirs_.push_back(a);
    }
}

bool clamp_to_walls(Vec2& v, std::uint8_t walls) {
    bool changed = false;
    if ((walls & face::right) && v.x > 0.0) v.x = 0.0, changed = true;
    if ((walls & face::left) && v.x < 0.0) v.x = 0.0, changed = true;
    if ((walls & face::top) && v.y > 0.0) v.y = 0.0, changed = true;
    if ((walls & face::bottom) && v.y < 0.0) v.y = 0.0, changed = true;
    return changed;
}

ValueField solve_eikonal(const CellGrid& g, const HjbOptions& opt) { return sweep_solve(g, nullptr, opt); }

ValueField solve_drift_hjb(const CellGrid& g, const VelocityField& drift, const HjbOptions& opt) {
    if (drift.nx() != g.nx || drift.ny() != g.ny) throw InputError("solve_drift_hjb: drift has the wrong shape");
    for (std::size_t k = 0; k < drift.size(); ++k)
        if (!std::isfinite(drift[k].x) || !std::isfinite(drift[k].y))
            throw NumericalError("solve_drift_hjb: non-finite drift at cell " + std::to_string(k));
    return sweep_solve(g, &drift, opt);
}

TimeSpaceValue solve_timespace_hjb(const CellGrid& g, std::span<const VelocityField> drift, double dt,
                                   const Grid2<double>& terminal, const VelocityField* terminal_drift,
                                   bool keep_values, const HjbOptions& opt) {
    return backward_pass(g, drift, dt, terminal, terminal_drift, keep_values, opt);
}

TimeSpaceValue solve_timespace_hjb(const CellGrid& g, std::span<const DensityField> rho_traj, double dt,
                                   const VelocityField& vb_orient, const InteractionParams& p, double T_max,
                                   bool keep_values, const HjbOptions& opt) {
    if (rho_traj.empty()) throw InputError("solve_timespace_hjb: empty density trajectory");
    if (!(T_max > 0.0) || !(dt > 0.0)) throw InputError("solve_timespace_hjb: T_max and dt must be > 0");
    const auto slices = static_cast<std::size_t>(std::max(1.0, std::ceil(T_max / dt - 1e-9)));
    std::vector<VelocityField> drift;
    drift.reserve(slices);
    for (std::size_t k = 0; k < slices; ++k) {
        const auto& rho = rho_traj[std::min(k, rho_traj.size() - 1)];
        if (k > 0 && k >= rho_traj.size()) {
            drift.push_back(drift.back());
            continue;
        }
        drift.push_back(interaction_velocity(rho, vb_orient, p, g));
    }
    const auto terminal = solve_eikonal(g, opt).phi;
    const VelocityField still(g.nx, g.ny);
    return backward_pass(g, drift, dt, terminal, &still, keep_values, opt);
}

VelocityField feedback_velocity(const Grid2<double>& phi, const CellGrid& g, const VelocityField* drift,
                                const HjbOptions& opt) {
    return controls_to_velocity(feedback_controls(phi, g, drift, opt), g, opt.controls);
}

VelocityField controls_to_velocity(const Grid2<std::int8_t>& control, const CellGrid& g, int controls) {
    const ControlSet set(controls);
    VelocityField v(g.nx, g.ny);
    for (std::size_t k = 0; k < g.cell_count(); ++k) {
        const auto c = control[k];
        if (c >= 0) v[k] = set[c];
        else if (c == kExitControl) v[k] = exit_direction(g.exit_faces[k]);
    }
    return v;
}

double max_finite(const Grid2<double>& phi) {
    double m = 0.0;
    for (double x : phi.values())
        if (x != kUnreachable) m = std::max(m, x);
    return m;
}

}  // namespace crowd
