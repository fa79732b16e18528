#include "crowd/crowd.h"

#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowd/behaviors.hpp"
#include "crowd/errors.hpp"
#include "crowd/optimize.hpp"
#include "crowd/scenario.hpp"

struct crowd_scenario {
    crowd::Scenario physical;
    crowd::Scenario scaled;
    std::string source;
};

struct crowd_metrics {
    crowd::Metrics m;
};

struct crowd_search {
    crowd::SearchResult r;  // physical units
};

namespace {

thread_local std::string last_error;

crowd_status fail(crowd_status code, const std::string& msg) {
    last_error = msg;
    return code;
}

template <class F>
crowd_status guarded(F&& body) {
    try {
        body();
        last_error.clear();
        return CROWD_OK;
    } catch (const crowd::InputError& e) {
        return fail(CROWD_ERR_INPUT, e.what());
    } catch (const crowd::InfeasibleError& e) {
        return fail(CROWD_ERR_INFEASIBLE, e.what());
    } catch (const crowd::NumericalError& e) {
        return fail(CROWD_ERR_NUMERIC, e.what());
    } catch (const std::bad_alloc&) {
        return fail(CROWD_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(CROWD_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(CROWD_ERR_INTERNAL, "unknown failure");
    }
}

void require(const void* p, const char* what) {
    if (!p) throw crowd::InputError(std::string(what) + " must not be null");
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

crowd_scenario* make_scenario(crowd::Scenario s, std::string source) {
    crowd::validate(s);
    auto out = std::make_unique<crowd_scenario>();
    out->scaled = crowd::nondimensionalize(s);
    out->physical = std::move(s);
    out->source = std::move(source);
    return out.release();
}

crowd::BehaviorSpec to_spec(const crowd_behavior& b, const crowd::CharacteristicScales& sc) {
    if (b.kind < CROWD_BASIC || b.kind > CROWD_HIGHLY_RATIONAL) throw crowd::InputError("unknown behavior kind");
    crowd::BehaviorSpec spec;
    spec.kind = static_cast<crowd::BehaviorKind>(b.kind);
    const double t_unit = sc.L / sc.V;
    spec.theta = b.theta / t_unit;
    spec.replan_every = b.replan_every;
    spec.fp_max_iter = b.fp_max_iter;
    spec.fp_tol = b.fp_tol;
    spec.fp_damping = b.fp_damping;
    spec.T_max = b.T_max / t_unit;
    crowd::validate(spec);
    return spec;
}

crowd::ObstacleParam scaled(const crowd_obstacle& o, double L) { return {o.x / L, o.y / L, o.w / L, o.h / L}; }

crowd::ObstacleParam physical(const crowd::ObstacleParam& o, double L) { return {o.x * L, o.y * L, o.w * L, o.h * L}; }

crowd::SearchResult to_physical(crowd::SearchResult r, double L) {
    r.lambda_star = physical(r.lambda_star, L);
    for (auto& e : r.evaluations) e.lambda = physical(e.lambda, L);
    for (auto& e : r.delta_map) {
        e.x *= L;
        e.y *= L;
    }
    for (auto& s : r.log) s.lambda = physical(s.lambda, L);
    return r;
}

crowd::SimulationCost make_model(const crowd_scenario* s, const crowd_behavior* natural, const crowd_metrics* target,
                                 int cost) {
    require(s, "scenario");
    require(natural, "behavior");
    require(target, "target metrics");
    if (cost < CROWD_DELTA1 || cost > CROWD_DELTA3) throw crowd::InputError("unknown cost kind");
    const crowd::CostSpec spec{static_cast<crowd::CostKind>(cost - 1), target->m};
    return crowd::SimulationCost(s->scaled, to_spec(*natural, s->physical.scales), spec);
}

void write_file(const char* path, const char* header, const std::string& body) {
    require(path, "path");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw crowd::InputError(std::string("cannot open '") + path + "' for writing");
    if (header) f << header;
    f << body;
    if (!f) throw crowd::InputError(std::string("write to '") + path + "' failed");
}

}  // namespace

extern "C" {

const char* crowd_version(void) { return "1.0.0"; }

const char* crowd_last_error(void) { return last_error.c_str(); }

const char* crowd_defaults_json(void) {
    static const std::string text = [] {
        const crowd::SimulationOptions sim;
        const crowd::CompassSpec compass;
        nlohmann::ordered_json j;
        j["cfl"] = sim.transport.cfl;
        j["dt_max"] = "h/2";
        j["inflow_rho_cap"] = sim.transport.rho_cap;
        j["hjb_tol"] = sim.hjb.tol;
        j["hjb_max_passes"] = sim.hjb.max_passes;
        j["hjb_controls"] = sim.hjb.controls;
        j["kernel_cutoff"] = "h";
        j["eps_evac"] = sim.eps_evac;
        j["used_exit_frac"] = sim.used_exit_frac;
        j["t_abort"] = "max(5 T_max, inflow_end + T_max)";
        j["T_max"] = "3 max eikonal";
        j["slice_dt"] = "h";
        j["compass_max_steps"] = compass.max_steps;
        j["compass_stall_limit"] = compass.stall_limit;
        j["anneal_T0"] = "0.1 cost(lambda0)";
        j["anneal_cooling"] = compass.anneal.cooling;
        j["perturb_p"] = "1..5";
        return j.dump();
    }();
    return text.c_str();
}

crowd_status crowd_scenario_load(const char* path, crowd_scenario** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        std::ifstream f(path, std::ios::binary);
        if (!f) throw crowd::InputError(std::string("cannot read scenario file '") + path + "'");
        std::ostringstream text;
        text << f.rdbuf();
        *out = make_scenario(crowd::parse_scenario(text.str()), text.str());
    });
}

crowd_status crowd_scenario_parse(const char* json_text, crowd_scenario** out) {
    return guarded([&] {
        require(json_text, "json_text");
        require(out, "out");
        *out = make_scenario(crowd::parse_scenario(json_text), json_text);
    });
}

void crowd_scenario_free(crowd_scenario* s) { delete s; }

crowd_status crowd_scenario_info_get(const crowd_scenario* s, crowd_scenario_info* out) {
    return guarded([&] {
        require(s, "scenario");
        require(out, "out");
        const auto& p = s->physical;
        *out = {p.width, p.height, p.nx, p.ny, p.cell_size(), p.exits.size(), p.entrances.size(), p.F, p.R,
                p.alpha_deg};
    });
}

uint64_t crowd_scenario_hash(const crowd_scenario* s) { return s ? fnv1a(s->source) : 0; }

crowd_status crowd_scenario_exit_id(const crowd_scenario* s, size_t index, const char** out) {
    return guarded([&] {
        require(s, "scenario");
        require(out, "out");
        if (index >= s->physical.exits.size()) throw crowd::InputError("exit index out of range");
        *out = s->physical.exits[index].id.c_str();
    });
}

crowd_status crowd_scenario_with_F(const crowd_scenario* s, double F, crowd_scenario** out) {
    return guarded([&] {
        require(s, "scenario");
        require(out, "out");
        crowd::Scenario copy = s->physical;
        copy.F = F;
        *out = make_scenario(std::move(copy), s->source);
    });
}

crowd_status crowd_admissible(const crowd_scenario* s, const crowd_obstacle* lambda, int* out) {
    return guarded([&] {
        require(s, "scenario");
        require(lambda, "lambda");
        require(out, "out");
        *out = crowd::admissible(scaled(*lambda, s->physical.scales.L), s->scaled) ? 1 : 0;
    });
}

crowd_status crowd_behavior_parse(const char* name, int* kind) {
    return guarded([&] {
        require(name, "name");
        require(kind, "kind");
        *kind = static_cast<int>(crowd::parse_behavior(name));
    });
}

const char* crowd_behavior_name(int kind) {
    if (kind < CROWD_BASIC || kind > CROWD_HIGHLY_RATIONAL) return "unknown";
    return crowd::to_string(static_cast<crowd::BehaviorKind>(kind));
}

crowd_status crowd_behavior_defaults(int kind, crowd_behavior* out) {
    return guarded([&] {
        require(out, "out");
        if (kind < CROWD_BASIC || kind > CROWD_HIGHLY_RATIONAL) throw crowd::InputError("unknown behavior kind");
        const auto d = crowd::BehaviorSpec::defaults(static_cast<crowd::BehaviorKind>(kind));
        // theta and T_max of the defaults are zero, so no unit conversion is needed
        *out = {kind, d.theta, d.replan_every, d.fp_max_iter, d.fp_tol, d.fp_damping, d.T_max};
    });
}

crowd_status crowd_simulate(const crowd_scenario* s, const crowd_behavior* b, const crowd_obstacle* lambda,
                            crowd_snapshot_fn fn, void* user, size_t snapshot_every, crowd_metrics** out) {
    return guarded([&] {
        require(s, "scenario");
        require(b, "behavior");
        require(out, "out");
        const auto& sc = s->physical.scales;
        std::optional<crowd::ObstacleParam> lam;
        if (lambda) {
            lam = scaled(*lambda, sc.L);
            if (!crowd::admissible(*lam, s->scaled)) throw crowd::InputError("controlled obstacle is not admissible");
        }
        crowd::SnapshotSink sink;
        std::vector<double> buf;
        if (fn && snapshot_every > 0) {
            sink = [&](const crowd::Snapshot& snap) {
                const auto& v = snap.rho->values();
                buf.resize(v.size());
                for (std::size_t k = 0; k < v.size(); ++k) buf[k] = v[k] * sc.varrho;
                fn(user, snap.step, snap.t * sc.L / sc.V, snap.rho->nx(), snap.rho->ny(), s->physical.cell_size(),
                   buf.data());
            };
        }
        auto m = std::make_unique<crowd_metrics>();
        m->m = crowd::simulate(s->scaled, to_spec(*b, sc), lam, {}, sink, sink ? snapshot_every : 0);
        *out = m.release();
    });
}

void crowd_metrics_free(crowd_metrics* m) { delete m; }

crowd_status crowd_metrics_summary_get(const crowd_metrics* m, crowd_metrics_summary* out) {
    return guarded([&] {
        require(m, "metrics");
        require(out, "out");
        const auto& x = m->m;
        *out = {x.t_evac,          x.rho_max,      x.used_exits,           x.P_e.size(),
                x.aborted ? 1 : 0, x.fp_converged, x.fp_iterations,        x.fp_residual,
                x.horizon_warning, x.unreachable_cells, x.steps};
    });
}

crowd_status crowd_metrics_exit_mass(const crowd_metrics* m, size_t exit, double* out) {
    return guarded([&] {
        require(m, "metrics");
        require(out, "out");
        if (exit >= m->m.P_e.size()) throw crowd::InputError("exit index out of range");
        *out = m->m.P_e[exit];
    });
}

size_t crowd_metrics_history_size(const crowd_metrics* m) { return m ? m->m.mass_history.size() : 0; }

crowd_status crowd_metrics_history_at(const crowd_metrics* m, size_t k, double* t, double* mass) {
    return guarded([&] {
        require(m, "metrics");
        if (k >= m->m.mass_history.size()) throw crowd::InputError("history index out of range");
        if (t) *t = m->m.mass_history[k].first;
        if (mass) *mass = m->m.mass_history[k].second;
    });
}

crowd_status crowd_cost_parse(const char* name, int* kind) {
    return guarded([&] {
        require(name, "name");
        require(kind, "kind");
        *kind = static_cast<int>(crowd::parse_cost(name)) + 1;
    });
}

const char* crowd_cost_name(int kind) {
    if (kind < CROWD_DELTA1 || kind > CROWD_DELTA3) return "unknown";
    return crowd::to_string(static_cast<crowd::CostKind>(kind - 1));
}

crowd_status crowd_cost(int kind, const crowd_metrics* target, const crowd_metrics* controlled, double* out) {
    return guarded([&] {
        require(target, "target");
        require(controlled, "controlled");
        require(out, "out");
        if (kind < CROWD_DELTA1 || kind > CROWD_DELTA3) throw crowd::InputError("unknown cost kind");
        *out = crowd::evaluate_cost({static_cast<crowd::CostKind>(kind - 1), target->m}, controlled->m);
    });
}

crowd_status crowd_compass_defaults(crowd_compass_params* out) {
    return guarded([&] {
        require(out, "out");
        const crowd::CompassSpec d;
        *out = {d.max_steps, d.stall_limit, d.anneal.enabled ? 1 : 0, d.anneal.T0, d.anneal.cooling, d.anneal.seed};
    });
}

crowd_status crowd_optimize_exhaustive(const crowd_scenario* s, const crowd_behavior* natural,
                                       const crowd_metrics* target, int cost, double w, double h, int stride,
                                       int jobs, crowd_search** out) {
    return guarded([&] {
        require(out, "out");
        const auto model = make_model(s, natural, target, cost);
        const double L = s->physical.scales.L;
        crowd::ExhaustiveSpec spec;
        spec.nx = s->scaled.nx;
        spec.ny = s->scaled.ny;
        spec.h = s->scaled.cell_size();
        spec.w = w / L;
        spec.h_side = h / L;
        spec.stride = stride;
        spec.jobs = jobs;
        auto r = std::make_unique<crowd_search>();
        r->r = to_physical(crowd::exhaustive_search(model, spec), L);
        *out = r.release();
    });
}

crowd_status crowd_optimize_compass(const crowd_scenario* s, const crowd_behavior* natural,
                                    const crowd_metrics* target, int cost, const crowd_obstacle* lambda0,
                                    const crowd_compass_params* params, crowd_search** out) {
    return guarded([&] {
        require(out, "out");
        require(lambda0, "lambda0");
        require(params, "params");
        const auto model = make_model(s, natural, target, cost);
        const double L = s->physical.scales.L;
        crowd::CompassSpec spec;
        spec.h = s->scaled.cell_size();
        spec.max_steps = params->max_steps;
        spec.stall_limit = params->stall_limit;
        spec.anneal = {params->anneal != 0, params->T0, params->cooling, params->seed};
        auto r = std::make_unique<crowd_search>();
        r->r = to_physical(crowd::compass_search(model, scaled(*lambda0, L), spec), L);
        *out = r.release();
    });
}

void crowd_search_free(crowd_search* r) { delete r; }

crowd_status crowd_search_best(const crowd_search* r, crowd_obstacle* lambda, double* delta_star,
                               double* delta_uncontrolled, size_t* simulations) {
    return guarded([&] {
        require(r, "search");
        const auto& x = r->r;
        if (lambda) *lambda = {x.lambda_star.x, x.lambda_star.y, x.lambda_star.w, x.lambda_star.h};
        if (delta_star) *delta_star = x.delta_star;
        if (delta_uncontrolled) *delta_uncontrolled = x.delta_uncontrolled;
        if (simulations) *simulations = x.simulations;
    });
}

crowd_status crowd_search_write_delta_map(const crowd_search* r, const char* path, const char* header) {
    return guarded([&] {
        require(r, "search");
        std::ostringstream body;
        body.precision(17);
        crowd::write_delta_map_csv(body, r->r);
        write_file(path, header, body.str());
    });
}

crowd_status crowd_search_write_evaluations(const crowd_search* r, const char* path, const char* header) {
    return guarded([&] {
        require(r, "search");
        std::ostringstream body;
        body.precision(17);
        crowd::write_evaluations_csv(body, r->r);
        write_file(path, header, body.str());
    });
}

}  // extern "C"
