#include "crowd/behaviors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "crowd/errors.hpp"
#include "crowd/interaction.hpp"

namespace crowd {

const char* to_string(BehaviorKind k) {
    switch (k) {
        case BehaviorKind::Basic: return "basic";
        case BehaviorKind::Rational: return "rational";
        case BehaviorKind::Theta: return "theta";
        case BehaviorKind::HighlyRational: return "hr";
    }
    return "?";
}

BehaviorKind parse_behavior(const std::string& name) {
    if (name == "basic") return BehaviorKind::Basic;
    if (name == "rational") return BehaviorKind::Rational;
    if (name == "theta") return BehaviorKind::Theta;
    if (name == "hr" || name == "highly-rational") return BehaviorKind::HighlyRational;
    throw InputError("unknown behavior '" + name + "' (expected basic, rational, theta or hr)");
}

BehaviorSpec BehaviorSpec::defaults(BehaviorKind kind) {
    BehaviorSpec b;
    b.kind = kind;
    b.replan_every = kind == BehaviorKind::Theta ? 5 : 1;
    return b;
}

void validate(const BehaviorSpec& b) {
    if (!(b.theta >= 0.0) || !std::isfinite(b.theta)) throw InputError("behavior: theta must be >= 0");
    if (b.replan_every < 1) throw InputError("behavior: replan_every must be >= 1");
    if (b.fp_max_iter < 1) throw InputError("behavior: fp_max_iter must be >= 1");
    if (!(b.fp_tol > 0.0)) throw InputError("behavior: fp_tol must be > 0");
    if (!(b.fp_damping > 0.0 && b.fp_damping <= 1.0)) throw InputError("behavior: fp_damping must lie in (0, 1]");
    if (!(b.T_max >= 0.0)) throw InputError("behavior: T_max must be >= 0");
}

Metrics compute_metrics(const RunHistory& h, double eps_evac, double used_exit_frac,
                        const CharacteristicScales& sc) {
    Metrics m;
    const double t_unit = sc.L / sc.V;
    const double mass_unit = sc.varrho * sc.L * sc.L;
    const double reference = h.initial_mass + h.injected_mass;

    m.aborted = true;
    m.t_evac = h.t_abort * t_unit;
    for (std::size_t k = 0; k < h.t.size(); ++k) {
        if (h.t[k] + 1e-12 < h.inflow_end) continue;
        if (h.mass[k] <= eps_evac * reference) {
            m.t_evac = h.t[k] * t_unit;
            m.aborted = false;
            break;
        }
    }
    m.rho_max = h.rho_max * sc.varrho;
    m.P_e.reserve(h.exit_mass.size());
    for (double p : h.exit_mass) {
        m.P_e.push_back(p * mass_unit);
        if (reference > 0.0 && p >= used_exit_frac * reference) ++m.used_exits;
    }
    m.mass_history.reserve(h.t.size());
    for (std::size_t k = 0; k < h.t.size(); ++k) m.mass_history.emplace_back(h.t[k] * t_unit, h.mass[k] * mass_unit);
    m.steps = h.t.empty() ? 0 : h.t.size() - 1;
    return m;
}

namespace {

constexpr double kTimeEps = 1e-12;

/// Everything a run needs that does not change while it runs.
struct Context {
    Scenario s;  // dimensionless
    CellGrid g;
    InteractionParams ip;
    SimulationOptions opt;
    DensityField rho0;
    ValueField eikonal;
    VelocityField vb_basic;
    double T_max = 0.0;
    double t_abort = 0.0;
    double inflow_end = 0.0;
    double slice_dt = 0.0;
    double dt_max = 0.0;
};

VelocityField add(const VelocityField& a, const VelocityField& b) {
    VelocityField out = a;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += b[k];
    return out;
}

/// Continuity equation driven by a behavioral field chosen by the caller.
class Forward {
public:
    /// `queue` is the mass still waiting at each entrance (none by default).
    Forward(const Context& c, DensityField rho, double t0, std::vector<double> queue = {})
        : c_(c), rho_(std::move(rho)), t_(t0), queue_(std::move(queue)) {
        queue_.resize(c.s.entrances.size(), 0.0);
        hist_.exit_mass.assign(c.g.exit_cells.size(), 0.0);
        ledger_ = ExitLedger(c.g.exit_cells.size());
        hist_.initial_mass = total_mass(rho_, c.g.h);
        hist_.inflow_end = c.inflow_end;
        hist_.t_abort = c.t_abort;
        hist_.t.push_back(t_);
        hist_.mass.push_back(hist_.initial_mass);
        hist_.rho_max = *std::max_element(rho_.values().begin(), rho_.values().end());
    }

    const DensityField& rho() const { return rho_; }
    double t() const { return t_; }
    std::size_t steps() const { return hist_.t.size() - 1; }
    const std::vector<double>& queue() const { return queue_; }
    bool queue_empty() const {
        return std::all_of(queue_.begin(), queue_.end(), [](double q) { return q <= 0.0; });
    }

    bool evacuated() const {
        return t_ + kTimeEps >= hist_.inflow_end && queue_empty() &&
               hist_.mass.back() <= c_.opt.eps_evac * (hist_.initial_mass + hist_.injected_mass);
    }
    bool done() const { return evacuated() || t_ >= c_.t_abort; }

    void step(const VelocityField& vb, double dt_cap = std::numeric_limits<double>::infinity()) {
        const auto vi = interaction_velocity(rho_, vb, c_.ip, c_.g);
        const auto v = project_velocity(add(vb, vi), c_.g);
        const double dt = std::min(cfl_dt(v, c_.g.h, c_.opt.transport.cfl, c_.dt_max), dt_cap);
        rho_ = step_density(rho_, v, dt, c_.g, ledger_);
        hist_.injected_mass += inject_inflow(rho_, c_.g, c_.s.entrances, t_, dt, c_.opt.transport.rho_cap, &queue_);
        t_ += dt;
        if (!queue_empty()) hist_.inflow_end = std::max(hist_.inflow_end, t_);
        hist_.t.push_back(t_);
        hist_.mass.push_back(total_mass(rho_, c_.g.h));
        hist_.rho_max = std::max(hist_.rho_max, *std::max_element(rho_.values().begin(), rho_.values().end()));
    }

    RunHistory history() const {
        RunHistory h = hist_;
        h.exit_mass = ledger_.per_exit;
        h.aborted = !evacuated();
        return h;
    }

private:
    const Context& c_;
    DensityField rho_;
    double t_;
    std::vector<double> queue_;
    ExitLedger ledger_;
    RunHistory hist_;
};

class SnapshotEmitter {
public:
    SnapshotEmitter(const SnapshotSink& sink, std::size_t every) : sink_(sink), every_(sink ? every : 0) {}
    bool active() const { return every_ > 0; }
    void operator()(const Forward& f) const {
        if (every_ > 0 && f.steps() % every_ == 0) sink_(Snapshot{f.steps(), f.t(), &f.rho()});
    }

private:
    const SnapshotSink& sink_;
    std::size_t every_;
};

Context make_context(const Scenario& scn, const BehaviorSpec& spec, const std::optional<ObstacleParam>& lambda,
                     const SimulationOptions& opt) {
    Context c;
    c.s = scn.dimensionless ? scn : nondimensionalize(scn);
    validate(c.s);
    if (lambda && !admissible(*lambda, c.s)) throw InputError("obstacle: placement is not admissible");
    c.g = classify_cells(c.s, lambda);
    c.ip = interaction_params(c.s, c.g);
    c.opt = opt;
    c.rho0 = initial_density(c.s, c.g);
    c.eikonal = solve_eikonal(c.g, opt.hjb);

    std::size_t interior = 0;
    for (std::size_t k = 0; k < c.g.cell_count(); ++k)
        if (c.g.walkable(k) && !c.g.is_exit(k)) ++interior;
    if (interior > 0 && c.eikonal.unreachable >= interior)
        throw NumericalError("pathplan: no walkable cell can reach an exit");

    c.vb_basic = feedback_velocity(c.eikonal.phi, c.g, nullptr, opt.hjb);
    const double far = max_finite(c.eikonal.phi);
    c.T_max = spec.T_max > 0.0 ? spec.T_max : 3.0 * std::max(far, c.g.h);
    for (const auto& e : c.s.entrances) c.inflow_end = std::max(c.inflow_end, e.duration);
    c.t_abort = opt.t_abort > 0.0 ? opt.t_abort : std::max(5.0 * c.T_max, c.inflow_end + c.T_max);
    c.slice_dt = opt.slice_dt > 0.0 ? opt.slice_dt : c.g.h;
    c.dt_max = opt.transport.dt_max > 0.0 ? opt.transport.dt_max : 0.5 * c.g.h;
    return c;
}

// ---------------------------------------------------------------------------
// basic and rational

Metrics run_basic(const Context& c, const SnapshotEmitter& emit) {
    Forward f(c, c.rho0, 0.0);
    emit(f);
    while (!f.done()) {
        f.step(c.vb_basic);
        emit(f);
    }
    return compute_metrics(f.history(), c.opt.eps_evac, c.opt.used_exit_frac, c.s.scales);
}

/// Plan against the density frozen at the current time.
VelocityField rational_plan(const Context& c, const DensityField& rho, const VelocityField& orient) {
    const auto drift = interaction_velocity(rho, orient, c.ip, c.g);
    const auto phi = solve_drift_hjb(c.g, drift, c.opt.hjb);
    return feedback_velocity(phi.phi, c.g, &drift, c.opt.hjb);
}

// ---------------------------------------------------------------------------
// time-space plans

/// Density trajectory sampled at t0 + k dt, k = 0..K, plus the forward run
/// that produced it.
struct Rollout {
    std::vector<DensityField> traj;
    RunHistory history;
};

/// Runs the continuity equation from (rho, t0) with the behavioral field of
/// slice floor((t - t0) / dt) (the last one beyond the end), until t0 + K dt
/// or, with `until_done`, until the run is complete. Transport steps are not
/// aligned with the slices; samples are interpolated linearly in time.
Rollout rollout(const Context& c, const DensityField& rho, const std::vector<double>& queue, double t0, double dt,
                std::size_t K, const std::vector<VelocityField>& plan, bool until_done,
                const SnapshotEmitter* emit = nullptr) {
    Forward f(c, rho, t0, queue);
    Rollout r;
    r.traj.reserve(K + 1);
    r.traj.push_back(rho);
    if (emit) (*emit)(f);
    auto sample_time = [&] { return t0 + static_cast<double>(r.traj.size()) * dt; };
    while (until_done ? !f.done() : r.traj.size() <= K) {
        const auto slice = static_cast<std::size_t>(std::max(0.0, std::floor((f.t() - t0) / dt)));
        const auto& vb = plan[std::min({slice, K - 1, plan.size() - 1})];
        const DensityField before = f.rho();
        const double t_before = f.t();
        f.step(vb);
        if (emit) (*emit)(f);
        while (r.traj.size() <= K && sample_time() <= f.t()) {
            const double w = (sample_time() - t_before) / (f.t() - t_before);
            DensityField mix = f.rho();
            for (std::size_t q = 0; q < mix.size(); ++q) mix[q] = before[q] + w * (mix[q] - before[q]);
            r.traj.push_back(std::move(mix));
        }
    }
    while (r.traj.size() <= K) r.traj.push_back(f.rho());
    r.history = f.history();
    return r;
}

double trajectory_distance(const std::vector<DensityField>& a, const std::vector<DensityField>& b, double h) {
    double worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        double s = 0.0;
        for (std::size_t q = 0; q < a[k].size(); ++q) s += std::abs(a[k][q] - b[k][q]);
        worst = std::max(worst, s * h * h);
    }
    return worst;
}

void relax(std::vector<DensityField>& traj, const std::vector<DensityField>& target, double omega) {
    for (std::size_t k = 0; k < traj.size(); ++k)
        for (std::size_t q = 0; q < traj[k].size(); ++q) traj[k][q] += omega * (target[k][q] - traj[k][q]);
}

std::vector<VelocityField> plan_from(const TimeSpaceValue& ts, const CellGrid& g, int controls) {
    std::vector<VelocityField> plan;
    plan.reserve(ts.control.size());
    for (const auto& ctrl : ts.control) plan.push_back(controls_to_velocity(ctrl, g, controls));
    return plan;
}

struct FixedPointState {
    std::vector<VelocityField> plan;
    Rollout rollout;
    double residual = std::numeric_limits<double>::infinity();
    std::vector<double> history;
    int iterations = 0;
    bool converged = false;
    bool horizon_warning = false;
};

/// Damped fixed point between the backward time-space solve and the forward
/// transport on [t0, t0 + K dt]. `terminal_for` supplies the value after the
/// last slice for a given predicted final density and orientation.
template <class Terminal>
FixedPointState fixed_point(const Context& c, const BehaviorSpec& spec, const DensityField& rho_start,
                            const std::vector<double>& queue, double t0,
                            double dt, std::size_t K, std::vector<DensityField> traj,
                            std::vector<VelocityField> orient, double mass_ref, bool until_done,
                            Terminal&& terminal_for) {
    FixedPointState best;
    const double scale = mass_ref > 0.0 ? mass_ref : 1.0;
    for (int it = 1; it <= spec.fp_max_iter; ++it) {
        std::vector<VelocityField> drift;
        drift.reserve(K);
        for (std::size_t k = 0; k < K; ++k) drift.push_back(interaction_velocity(traj[k], orient[k], c.ip, c.g));
        VelocityField terminal_drift;
        const auto terminal = terminal_for(traj[K], orient[K], terminal_drift);
        const auto ts = solve_timespace_hjb(c.g, drift, dt, terminal, &terminal_drift, false, c.opt.hjb);
        auto plan = plan_from(ts, c.g, c.opt.hjb.controls);
        auto run = rollout(c, rho_start, queue, t0, dt, K, plan, until_done);

        const double residual = spec.fp_damping * trajectory_distance(run.traj, traj, c.g.h) / scale;
        best.history.push_back(residual);
        if (residual <= best.residual) {
            best.plan = plan;
            best.rollout = run;
            best.residual = residual;
            best.horizon_warning = ts.horizon_warning;
        }
        best.iterations = it;
        if (residual < spec.fp_tol) {
            best.converged = true;
            break;
        }
        relax(traj, run.traj, spec.fp_damping);
        orient = std::move(plan);
        orient.push_back(orient.back());
    }
    return best;
}

Metrics run_highly_rational(const Context& c, const BehaviorSpec& spec, const SnapshotEmitter& emit) {
    const double dt = c.slice_dt;
    const auto K = static_cast<std::size_t>(std::max(1.0, std::ceil(c.T_max / dt - 1e-9)));

    // The basic run is the initial guess.
    const std::vector<VelocityField> basic_plan{c.vb_basic};
    auto start = rollout(c, c.rho0, {}, 0.0, dt, K, basic_plan, true);
    const double mass_ref = start.history.initial_mass + start.history.injected_mass;
    std::vector<VelocityField> orient(K + 1, c.vb_basic);

    const VelocityField still(c.g.nx, c.g.ny);
    auto fp = fixed_point(c, spec, c.rho0, {}, 0.0, dt, K, std::move(start.traj), std::move(orient), mass_ref, true,
                          [&](const DensityField&, const VelocityField&, VelocityField& w) {
                              w = still;
                              return c.eikonal.phi;
                          });

    RunHistory hist = fp.rollout.history;
    if (emit.active()) hist = rollout(c, c.rho0, {}, 0.0, dt, K, fp.plan, true, &emit).history;
    Metrics m = compute_metrics(hist, c.opt.eps_evac, c.opt.used_exit_frac, c.s.scales);
    m.fp_converged = fp.converged;
    m.fp_iterations = fp.iterations;
    m.fp_residual = fp.residual;
    m.fp_residuals = fp.history;
    m.horizon_warning = fp.horizon_warning;
    return m;
}

/// Plan of a theta-rational crowd at time tau: predicted trajectory on
/// [tau, tau + theta], density frozen after the window.
VelocityField theta_plan(const Context& c, const BehaviorSpec& spec, const DensityField& rho,
                         const std::vector<double>& queue, double tau,
                         const VelocityField& orient, FixedPointState& stats) {
    const auto K = static_cast<std::size_t>(std::max(1.0, std::ceil(spec.theta / c.slice_dt - 1e-9)));
    const double dt = spec.theta / static_cast<double>(K);
    std::vector<DensityField> traj(K + 1, rho);
    std::vector<VelocityField> orient_k(K + 1, orient);
    const double mass_ref = total_mass(rho, c.g.h);
    stats = fixed_point(c, spec, rho, queue, tau, dt, K, std::move(traj), std::move(orient_k), mass_ref, false,
                        [&](const DensityField& last, const VelocityField& o, VelocityField& w) {
                            w = interaction_velocity(last, o, c.ip, c.g);
                            return solve_drift_hjb(c.g, w, c.opt.hjb).phi;
                        });
    return stats.plan.front();
}

Metrics run_replanning(const Context& c, const BehaviorSpec& spec, const SnapshotEmitter& emit) {
    Forward f(c, c.rho0, 0.0);
    emit(f);
    VelocityField vb = c.vb_basic;
    bool all_converged = true;
    int worst_iterations = 0;
    double worst_residual = 0.0;
    bool horizon = false;
    while (!f.done()) {
        if (f.steps() % static_cast<std::size_t>(spec.replan_every) == 0) {
            if (spec.kind == BehaviorKind::Rational || spec.theta == 0.0) {
                vb = rational_plan(c, f.rho(), vb);
            } else {
                FixedPointState stats;
                vb = theta_plan(c, spec, f.rho(), f.queue(), f.t(), vb, stats);
                all_converged = all_converged && stats.converged;
                worst_iterations = std::max(worst_iterations, stats.iterations);
                worst_residual = std::max(worst_residual, stats.residual);
                horizon = horizon || stats.horizon_warning;
            }
        }
        f.step(vb);
        emit(f);
    }
    Metrics m = compute_metrics(f.history(), c.opt.eps_evac, c.opt.used_exit_frac, c.s.scales);
    m.fp_converged = all_converged;
    m.fp_iterations = worst_iterations;
    m.fp_residual = worst_residual;
    m.horizon_warning = horizon;
    return m;
}

}  // namespace

Metrics simulate(const Scenario& s, const BehaviorSpec& spec, const std::optional<ObstacleParam>& lambda,
                 const SimulationOptions& opt, const SnapshotSink& sink, std::size_t snapshot_every) {
    validate(spec);
    if (!(opt.eps_evac > 0.0 && opt.eps_evac < 1.0)) throw InputError("simulation: eps_evac must lie in (0, 1)");
    const Context c = make_context(s, spec, lambda, opt);
    const SnapshotEmitter emit(sink, snapshot_every);
    Metrics m;
    switch (spec.kind) {
        case BehaviorKind::Basic: m = run_basic(c, emit); break;
        case BehaviorKind::Rational:
        case BehaviorKind::Theta: m = run_replanning(c, spec, emit); break;
        case BehaviorKind::HighlyRational: m = run_highly_rational(c, spec, emit); break;
    }
    m.unreachable_cells = c.eikonal.unreachable;
    return m;
}

}  // namespace crowd
