// Command-line front end. Talks to the simulator only through the C API.
#include <CLI11.hpp>
#include <json.hpp>

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "crowd/crowd.h"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

/// Carries a C API status up to main, which turns it into the exit code.
struct Failure {
    int code;
    std::string message;
};

void check(crowd_status st, const std::string& what) {
    if (st != CROWD_OK) throw Failure{static_cast<int>(st), what + ": " + crowd_last_error()};
}

struct ScenarioPtr {
    crowd_scenario* p = nullptr;
    ~ScenarioPtr() { crowd_scenario_free(p); }
};
struct MetricsPtr {
    crowd_metrics* p = nullptr;
    MetricsPtr() = default;
    MetricsPtr(MetricsPtr&& o) noexcept : p(o.p) { o.p = nullptr; }
    ~MetricsPtr() { crowd_metrics_free(p); }
};
struct SearchPtr {
    crowd_search* p = nullptr;
    ~SearchPtr() { crowd_search_free(p); }
};

struct Config {
    std::string command;
    std::string scenario;
    std::string behavior = "basic";
    std::string target = "rational";
    double theta = -1.0;
    double target_theta = -1.0;
    int replan_every = 0;
    int fp_max_iter = 0;
    double F = -1.0;
    bool F_set = false;
    std::string cost = "d1";
    double obstacle_w = 0.0;
    double obstacle_h = 0.0;
    std::string lambda0;
    std::string obstacle;
    std::uint64_t seed = 1;
    int jobs = 1;
    int stride = 1;
    std::string out = ".";
    std::size_t snapshot_every = 0;
    int max_steps = -1;
    int stall_limit = -1;
    bool no_anneal = false;
    double T0 = -1.0;
    double cooling = -1.0;
};

crowd_obstacle parse_obstacle(const std::string& text, const char* flag) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) v.clear();
        } catch (const std::exception&) {
            v.clear();
            break;
        }
    }
    if (v.size() != 4) throw Failure{CROWD_ERR_INPUT, std::string(flag) + " expects \"x,y,w,h\", got '" + text + "'"};
    return {v[0], v[1], v[2], v[3]};
}

crowd_behavior behavior_of(const std::string& name, double theta, const Config& cfg) {
    int kind = 0;
    check(crowd_behavior_parse(name.c_str(), &kind), "behavior");
    crowd_behavior b{};
    check(crowd_behavior_defaults(kind, &b), "behavior");
    if (theta >= 0.0) b.theta = theta;
    if (cfg.replan_every > 0) b.replan_every = cfg.replan_every;
    if (cfg.fp_max_iter > 0) b.fp_max_iter = cfg.fp_max_iter;
    return b;
}

ordered_json behavior_json(const crowd_behavior& b) {
    ordered_json j;
    j["kind"] = crowd_behavior_name(b.kind);
    j["theta"] = b.theta;
    j["replan_every"] = b.replan_every;
    j["fp_max_iter"] = b.fp_max_iter;
    j["fp_tol"] = b.fp_tol;
    j["fp_damping"] = b.fp_damping;
    j["T_max"] = b.T_max;
    return j;
}

std::string hash_hex(const crowd_scenario* s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, crowd_scenario_hash(s));
    return buf;
}

/// Provenance shared by every output file of one invocation.
struct Provenance {
    std::string hash;
    std::uint64_t seed = 0;
    ordered_json params;

    std::string line() const {
        return std::string("# crowdsim ") + crowd_version() + " scenario=fnv1a:" + hash + " seed=" +
               std::to_string(seed) + " params=" + params.dump() + "\n";
    }
    ordered_json as_json() const {
        ordered_json j;
        j["version"] = crowd_version();
        j["scenario_hash"] = "fnv1a:" + hash;
        j["seed"] = seed;
        j["params"] = params;
        return j;
    }
};

std::ofstream open_out(const fs::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Failure{CROWD_ERR_INPUT, "cannot write '" + path.string() + "'"};
    f.precision(10);
    return f;
}

void prepare_out(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw Failure{CROWD_ERR_INPUT, "cannot create output directory '" + dir + "'"};
}

crowd_metrics_summary summary_of(const crowd_metrics* m) {
    crowd_metrics_summary s{};
    check(crowd_metrics_summary_get(m, &s), "metrics");
    return s;
}

std::vector<std::string> exit_ids(const crowd_scenario* s) {
    crowd_scenario_info info{};
    check(crowd_scenario_info_get(s, &info), "scenario");
    std::vector<std::string> ids;
    for (std::size_t e = 0; e < info.exits; ++e) {
        const char* id = nullptr;
        check(crowd_scenario_exit_id(s, e, &id), "scenario");
        ids.emplace_back(id);
    }
    return ids;
}

void metrics_header(std::ostream& os, const std::vector<std::string>& ids, bool with_role) {
    if (with_role) os << "role,";
    os << "behavior,t_evac,rho_max,used_exits,aborted,fp_converged,fp_iterations,horizon_warning";
    for (const auto& id : ids) os << ",P_" << id;
    os << '\n';
}

void metrics_row(std::ostream& os, const char* role, const crowd_behavior& b, const crowd_metrics* m) {
    const auto s = summary_of(m);
    if (role) os << role << ',';
    os << crowd_behavior_name(b.kind) << ',' << s.t_evac << ',' << s.rho_max << ',' << s.used_exits << ','
       << s.aborted << ',' << s.fp_converged << ',' << s.fp_iterations << ',' << s.horizon_warning;
    for (std::size_t e = 0; e < s.exits; ++e) {
        double p = 0.0;
        check(crowd_metrics_exit_mass(m, e, &p), "metrics");
        os << ',' << p;
    }
    os << '\n';
}

void print_summary(const char* label, const crowd_behavior& b, const crowd_metrics* m) {
    const auto s = summary_of(m);
    std::printf("%s %s: t_evac=%.4g s rho_max=%.4g ped/m^2 used_exits=%d%s\n", label, crowd_behavior_name(b.kind),
                s.t_evac, s.rho_max, s.used_exits, s.aborted ? " (aborted)" : "");
    if (b.kind == CROWD_HIGHLY_RATIONAL && !s.fp_converged)
        std::fprintf(stderr, "warning: fixed point not converged after %d iterations (residual %.3g)\n",
                     s.fp_iterations, s.fp_residual);
    if (s.horizon_warning) std::fprintf(stderr, "warning: planning horizon shorter than most travel times\n");
}

struct SnapshotWriter {
    fs::path dir;
    std::string provenance;
    std::string error;

    static void callback(void* user, size_t step, double t, int nx, int ny, double cell, const double* rho) {
        auto* self = static_cast<SnapshotWriter*>(user);
        if (!self->error.empty()) return;
        char name[32];
        std::snprintf(name, sizeof name, "rho_%06zu.grid", step);
        std::ofstream f(self->dir / name, std::ios::binary);
        char buf[64];
        std::snprintf(buf, sizeof buf, "%d %d %.10g %.10g\n", nx, ny, cell, t);
        f << buf;
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                std::snprintf(buf, sizeof buf, i ? " %.10g" : "%.10g", rho[static_cast<std::size_t>(j) * nx + i]);
                f << buf;
            }
            f << '\n';
        }
        f << self->provenance;
        if (!f) self->error = (self->dir / name).string();
    }
};

MetricsPtr run(const crowd_scenario* s, const crowd_behavior& b, const crowd_obstacle* lambda,
               SnapshotWriter* snaps = nullptr, std::size_t every = 0) {
    MetricsPtr m;
    check(crowd_simulate(s, &b, lambda, snaps ? &SnapshotWriter::callback : nullptr, snaps, snaps ? every : 0, &m.p),
          std::string("simulate ") + crowd_behavior_name(b.kind));
    if (snaps && !snaps->error.empty()) throw Failure{CROWD_ERR_INPUT, "cannot write snapshot '" + snaps->error + "'"};
    return m;
}

void load(const Config& cfg, ScenarioPtr& s) {
    check(crowd_scenario_load(cfg.scenario.c_str(), &s.p), "scenario");
    if (cfg.F_set) {
        crowd_scenario* swapped = nullptr;
        check(crowd_scenario_with_F(s.p, cfg.F, &swapped), "scenario");
        crowd_scenario_free(s.p);
        s.p = swapped;
    }
}

ordered_json base_params(const Config& cfg, const crowd_scenario* s) {
    crowd_scenario_info info{};
    check(crowd_scenario_info_get(s, &info), "scenario");
    ordered_json p;
    p["command"] = cfg.command;
    p["scenario"] = cfg.scenario;
    p["F"] = info.F;
    p["R"] = info.R;
    p["alpha_deg"] = info.alpha_deg;
    p["grid"] = {info.nx, info.ny};
    p["defaults"] = ordered_json::parse(crowd_defaults_json());
    return p;
}

int cmd_simulate(const Config& cfg) {
    ScenarioPtr s;
    load(cfg, s);
    prepare_out(cfg.out);
    const auto b = behavior_of(cfg.behavior, cfg.theta, cfg);
    std::optional<crowd_obstacle> lambda;
    if (!cfg.obstacle.empty()) lambda = parse_obstacle(cfg.obstacle, "--obstacle");

    Provenance prov{hash_hex(s.p), cfg.seed, base_params(cfg, s.p)};
    prov.params["behavior"] = behavior_json(b);
    prov.params["snapshot_every"] = cfg.snapshot_every;
    if (lambda) prov.params["obstacle"] = {lambda->x, lambda->y, lambda->w, lambda->h};

    SnapshotWriter snaps{cfg.out, prov.line(), {}};
    const auto m = run(s.p, b, lambda ? &*lambda : nullptr, cfg.snapshot_every ? &snaps : nullptr, cfg.snapshot_every);

    auto f = open_out(fs::path(cfg.out) / "metrics.csv");
    f << prov.line();
    metrics_header(f, exit_ids(s.p), false);
    metrics_row(f, nullptr, b, m.p);

    auto h = open_out(fs::path(cfg.out) / "mass_history.csv");
    h.precision(17);
    h << prov.line() << "t,mass\n";
    for (std::size_t k = 0; k < crowd_metrics_history_size(m.p); ++k) {
        double t = 0.0, mass = 0.0;
        check(crowd_metrics_history_at(m.p, k, &t, &mass), "metrics");
        h << t << ',' << mass << '\n';
    }
    print_summary("", b, m.p);
    return 0;
}

int cmd_compare(const Config& cfg) {
    ScenarioPtr s;
    load(cfg, s);
    prepare_out(cfg.out);
    const auto nb = behavior_of(cfg.behavior, cfg.theta, cfg);
    const auto tb = behavior_of(cfg.target, cfg.target_theta, cfg);
    Provenance prov{hash_hex(s.p), cfg.seed, base_params(cfg, s.p)};
    prov.params["natural"] = behavior_json(nb);
    prov.params["target"] = behavior_json(tb);

    const auto natural = run(s.p, nb, nullptr);
    const auto target = run(s.p, tb, nullptr);

    auto f = open_out(fs::path(cfg.out) / "metrics.csv");
    f << prov.line();
    metrics_header(f, exit_ids(s.p), true);
    metrics_row(f, "natural", nb, natural.p);
    metrics_row(f, "target", tb, target.p);

    auto d = open_out(fs::path(cfg.out) / "deltas.csv");
    d << prov.line() << "d1,d2,d3\n";
    for (int k = CROWD_DELTA1; k <= CROWD_DELTA3; ++k) {
        double v = 0.0;
        check(crowd_cost(k, target.p, natural.p, &v), "cost");
        d << v << (k == CROWD_DELTA3 ? '\n' : ',');
        std::printf("%s=%.6g%s", crowd_cost_name(k), v, k == CROWD_DELTA3 ? "\n" : " ");
    }
    print_summary("natural", nb, natural.p);
    print_summary("target ", tb, target.p);
    return 0;
}

void write_best(const Config& cfg, const Provenance& prov, const crowd_search* r, int cost, const char* method) {
    crowd_obstacle best{};
    double delta_star = 0.0, uncontrolled = 0.0;
    std::size_t sims = 0;
    check(crowd_search_best(r, &best, &delta_star, &uncontrolled, &sims), "search");
    ordered_json j = prov.as_json();
    j["method"] = method;
    j["cost"] = crowd_cost_name(cost);
    j["lambda_star"] = {{"x", best.x}, {"y", best.y}, {"w", best.w}, {"h", best.h}};
    j["delta_star"] = delta_star;
    j["delta_uncontrolled"] = uncontrolled;
    j["simulations"] = sims;
    auto f = open_out(fs::path(cfg.out) / "best.json");
    f << j.dump(2) << '\n';
    std::printf("lambda*=(%.6g, %.6g, %.6g, %.6g) delta*=%.6g uncontrolled=%.6g simulations=%zu\n", best.x, best.y,
                best.w, best.h, delta_star, uncontrolled, sims);
}

int cmd_optimize(const Config& cfg) {
    const bool exhaustive = cfg.command == "optimize-exhaustive";
    ScenarioPtr s;
    load(cfg, s);
    prepare_out(cfg.out);
    const auto nb = behavior_of(cfg.behavior, cfg.theta, cfg);
    const auto tb = behavior_of(cfg.target, cfg.target_theta, cfg);
    int cost = 0;
    check(crowd_cost_parse(cfg.cost.c_str(), &cost), "cost");

    Provenance prov{hash_hex(s.p), cfg.seed, base_params(cfg, s.p)};
    prov.params["natural"] = behavior_json(nb);
    prov.params["target"] = behavior_json(tb);
    prov.params["cost"] = crowd_cost_name(cost);

    const auto target = run(s.p, tb, nullptr);
    SearchPtr r;
    if (exhaustive) {
        if (!(cfg.obstacle_w > 0.0 && cfg.obstacle_h > 0.0))
            throw Failure{CROWD_ERR_INPUT, "--obstacle-w and --obstacle-h must be positive"};
        prov.params["obstacle_w"] = cfg.obstacle_w;
        prov.params["obstacle_h"] = cfg.obstacle_h;
        prov.params["stride"] = cfg.stride;
        prov.params["jobs"] = cfg.jobs;
        check(crowd_optimize_exhaustive(s.p, &nb, target.p, cost, cfg.obstacle_w, cfg.obstacle_h, cfg.stride,
                                        cfg.jobs, &r.p),
              "optimize-exhaustive");
        const std::string header = prov.line();
        check(crowd_search_write_delta_map(r.p, (fs::path(cfg.out) / "delta_map.csv").c_str(), header.c_str()),
              "delta_map.csv");
    } else {
        if (cfg.lambda0.empty()) throw Failure{CROWD_ERR_INPUT, "--lambda0 is required"};
        const crowd_obstacle l0 = parse_obstacle(cfg.lambda0, "--lambda0");
        crowd_compass_params cp{};
        check(crowd_compass_defaults(&cp), "compass");
        cp.seed = cfg.seed;
        if (cfg.max_steps >= 0) cp.max_steps = cfg.max_steps;
        if (cfg.stall_limit > 0) cp.stall_limit = cfg.stall_limit;
        if (cfg.no_anneal) cp.anneal = 0;
        if (cfg.T0 >= 0.0) cp.T0 = cfg.T0;
        if (cfg.cooling > 0.0) cp.cooling = cfg.cooling;
        prov.params["lambda0"] = {l0.x, l0.y, l0.w, l0.h};
        prov.params["max_steps"] = cp.max_steps;
        prov.params["stall_limit"] = cp.stall_limit;
        prov.params["anneal"] = cp.anneal != 0;
        if (cp.T0 >= 0.0) prov.params["anneal_T0"] = cp.T0;
        prov.params["anneal_cooling"] = cp.cooling;
        check(crowd_optimize_compass(s.p, &nb, target.p, cost, &l0, &cp, &r.p), "optimize-compass");
        const std::string header = prov.line();
        check(crowd_search_write_evaluations(r.p, (fs::path(cfg.out) / "evaluations.csv").c_str(), header.c_str()),
              "evaluations.csv");
    }
    write_best(cfg, prov, r.p, cost, exhaustive ? "exhaustive" : "compass");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    Config cfg;
    CLI::App app{"Macroscopic crowd simulator with tunable rationality and an environment optimizer"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(crowd_version()));

    auto common = [&](CLI::App* sub) {
        sub->add_option("--scenario", cfg.scenario, "Scenario JSON file")->required();
        sub->add_option("--out", cfg.out, "Output directory")->capture_default_str();
        sub->add_option("--seed", cfg.seed, "Seed recorded in provenance (and driving compass search)")
            ->capture_default_str();
        sub->add_option("--F", cfg.F, "Override the interaction strength (m^2/s)")->check(CLI::NonNegativeNumber);
        sub->add_option("--theta", cfg.theta, "Look-ahead window of a theta-rational behavior (s)")
            ->check(CLI::NonNegativeNumber);
        sub->add_option("--replan-every", cfg.replan_every, "Transport steps between plans")->check(CLI::PositiveNumber);
        sub->add_option("--fp-max-iter", cfg.fp_max_iter, "Fixed-point iteration cap (highly rational)")
            ->check(CLI::PositiveNumber);
    };
    auto behaviors = CLI::IsMember({"basic", "rational", "theta", "hr", "highly-rational"});

    auto* sim = app.add_subcommand("simulate", "Run one behavior and write metrics and snapshots");
    common(sim);
    sim->add_option("--behavior", cfg.behavior, "basic|rational|theta|hr")->check(behaviors)->capture_default_str();
    sim->add_option("--snapshot-every", cfg.snapshot_every, "Write rho_NNNNNN.grid every N steps")
        ->check(CLI::PositiveNumber);
    sim->add_option("--obstacle", cfg.obstacle, "Controlled obstacle \"x,y,w,h\" (m)");

    auto* cmp = app.add_subcommand("compare", "Run a natural and a target behavior and report the costs");
    common(cmp);
    cmp->add_option("--behavior", cfg.behavior, "Natural behavior")->check(behaviors)->capture_default_str();
    cmp->add_option("--target", cfg.target, "Target behavior")->check(behaviors)->capture_default_str();
    cmp->add_option("--target-theta", cfg.target_theta, "Look-ahead window of the target (s)")
        ->check(CLI::NonNegativeNumber);

    auto optimize_common = [&](CLI::App* sub) {
        common(sub);
        sub->add_option("--behavior", cfg.behavior, "Natural behavior")->check(behaviors)->capture_default_str();
        sub->add_option("--target", cfg.target, "Target behavior")->check(behaviors)->capture_default_str();
        sub->add_option("--target-theta", cfg.target_theta, "Look-ahead window of the target (s)")
            ->check(CLI::NonNegativeNumber);
        sub->add_option("--cost", cfg.cost, "d1|d2|d3")
            ->check(CLI::IsMember({"d1", "d2", "d3"}))
            ->capture_default_str();
    };
    auto* ex = app.add_subcommand("optimize-exhaustive", "Evaluate the cost at every obstacle barycenter");
    optimize_common(ex);
    ex->add_option("--obstacle-w", cfg.obstacle_w, "Obstacle width (m)")->required();
    ex->add_option("--obstacle-h", cfg.obstacle_h, "Obstacle height (m)")->required();
    ex->add_option("--stride", cfg.stride, "Visit every n-th grid node")->check(CLI::PositiveNumber)->capture_default_str();
    ex->add_option("--jobs", cfg.jobs, "Parallel simulations")->check(CLI::PositiveNumber)->capture_default_str();

    auto* cs = app.add_subcommand("optimize-compass", "Compass search with simulated annealing");
    optimize_common(cs);
    cs->add_option("--lambda0", cfg.lambda0, "Starting obstacle \"x,y,w,h\" (m)")->required();
    cs->add_option("--max-steps", cfg.max_steps, "Step budget")->check(CLI::NonNegativeNumber);
    cs->add_option("--stall-limit", cfg.stall_limit, "Stop after this many rejections in a row")
        ->check(CLI::PositiveNumber);
    cs->add_flag("--no-anneal", cfg.no_anneal, "Accept improvements only");
    cs->add_option("--T0", cfg.T0, "Initial temperature (default 0.1 x starting cost)")->check(CLI::NonNegativeNumber);
    cs->add_option("--cooling", cfg.cooling, "Temperature factor per step")->check(CLI::Range(0.0, 1.0));
    cs->add_option("--jobs", cfg.jobs, "Accepted for symmetry; compass search is sequential")
        ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : CROWD_ERR_INPUT;
    }
    cfg.F_set = cfg.F >= 0.0;

    for (auto* sub : app.get_subcommands()) cfg.command = sub->get_name();
    try {
        if (cfg.command == "simulate") return cmd_simulate(cfg);
        if (cfg.command == "compare") return cmd_compare(cfg);
        return cmd_optimize(cfg);
    } catch (const Failure& f) {
        std::fprintf(stderr, "crowdsim: %s\n", f.message.c_str());
        return f.code;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "crowdsim: %s\n", e.what());
        return CROWD_ERR_INTERNAL;
    }
}
