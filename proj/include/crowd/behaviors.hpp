#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "crowd/fields.hpp"
#include "crowd/pathplan.hpp"
#include "crowd/scenario.hpp"
#include "crowd/transport.hpp"

namespace crowd {

enum class BehaviorKind { Basic, Rational, Theta, HighlyRational };

const char* to_string(BehaviorKind k);
BehaviorKind parse_behavior(const std::string& name);

struct BehaviorSpec {
    BehaviorKind kind = BehaviorKind::Basic;
    double theta = 0.0;    // look-ahead window, dimensionless time
    int replan_every = 1;  // transport steps between plans (rational, theta)
    int fp_max_iter = 50;
    double fp_tol = 1e-3;  // L1 change of the density trajectory, relative to total mass
    double fp_damping = 0.5;
    double T_max = 0.0;    // time-space horizon; 0 means 3 x the largest eikonal value

    /// Ledger defaults for a behavior (replan every step for rational, every 5 for theta).
    static BehaviorSpec defaults(BehaviorKind kind);
};

void validate(const BehaviorSpec& b);

struct SimulationOptions {
    TransportOptions transport;
    HjbOptions hjb;
    double eps_evac = 0.01;        // evacuated once mass <= eps_evac * total mass
    double used_exit_frac = 0.01;  // exit counts as used above this share of the total mass
    double t_abort = 0.0;          // dimensionless; 0 means 5 x T_max
    double slice_dt = 0.0;         // time-space slice length; 0 means one cell spacing
};

/// Evacuation metrics in physical units (s, ped/m^2, ped).
struct Metrics {
    double t_evac = 0.0;
    double rho_max = 0.0;
    std::vector<double> P_e;
    int used_exits = 0;
    std::vector<std::pair<double, double>> mass_history;  // (t, N_P(t))
    bool aborted = false;
    // coupled behaviors only
    bool fp_converged = true;
    int fp_iterations = 0;
    double fp_residual = 0.0;
    std::vector<double> fp_residuals;  // per iteration (highly rational)
    bool horizon_warning = false;
    std::size_t unreachable_cells = 0;
    std::size_t steps = 0;
};

/// Raw dimensionless record of one forward run.
struct RunHistory {
    std::vector<double> t;
    std::vector<double> mass;  // mass in the domain at t[k]
    double rho_max = 0.0;
    std::vector<double> exit_mass;
    double initial_mass = 0.0;
    double injected_mass = 0.0;
    double inflow_end = 0.0;
    double t_abort = 0.0;
    bool aborted = false;
};

/// t_evac is the first recorded time after the inflow has ended at which the
/// remaining mass is at most eps_evac times the total (initial + injected) mass.
Metrics compute_metrics(const RunHistory& h, double eps_evac, double used_exit_frac,
                        const CharacteristicScales& scales);

struct Snapshot {
    std::size_t step = 0;
    double t = 0.0;             // dimensionless
    const DensityField* rho = nullptr;  // dimensionless
};
using SnapshotSink = std::function<void(const Snapshot&)>;

/// Runs one behavior on a scenario (physical or dimensionless) with an
/// optional controlled obstacle in dimensionless units. `snapshot_every` > 0
/// forwards every n-th state (and the initial one) to `sink`.
Metrics simulate(const Scenario& s, const BehaviorSpec& spec, const std::optional<ObstacleParam>& lambda = std::nullopt,
                 const SimulationOptions& opt = {}, const SnapshotSink& sink = {}, std::size_t snapshot_every = 0);

}  // namespace crowd
