#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "crowd/crowd.h"

namespace {

/// 10 m room, 0.5 m cells, one exit covering the right wall.
/// Walking speed 2 m/s, no interaction.
const char* kCorridor = R"({
  "domain": {"width": 10, "height": 10, "nx": 20, "ny": 20},
  "scales": {"L": 10, "V": 2, "rho": 1},
  "params": {"alpha_deg": 170, "R": 1.5, "F": 0},
  "exits": [{"id": "east", "side": "right", "from": 0, "to": 10}],
  "rho0": [{"x": 4.5, "y": 4.5, "w": 1, "h": 1, "density": 2}]
})";

struct Scn {
    crowd_scenario* p = nullptr;
    explicit Scn(const char* text) { REQUIRE(crowd_scenario_parse(text, &p) == CROWD_OK); }
    ~Scn() { crowd_scenario_free(p); }
};

struct Run {
    crowd_metrics* p = nullptr;
    ~Run() { crowd_metrics_free(p); }
};

crowd_behavior defaults(int kind) {
    crowd_behavior b{};
    REQUIRE(crowd_behavior_defaults(kind, &b) == CROWD_OK);
    return b;
}

struct Captured {
    std::vector<double> t;
    std::vector<double> mass;
    double first_max = 0.0;
};

void capture(void* user, size_t, double t, int nx, int ny, double cell, const double* rho) {
    auto* c = static_cast<Captured*>(user);
    double sum = 0.0, peak = 0.0;
    for (int k = 0; k < nx * ny; ++k) {
        sum += rho[k];
        peak = std::max(peak, rho[k]);
    }
    if (c->t.empty()) c->first_max = peak;
    c->t.push_back(t);
    c->mass.push_back(sum * cell * cell);
}

}  // namespace

TEST_CASE("status codes and last error") {
    CHECK(std::strlen(crowd_version()) > 0);
    crowd_scenario* s = nullptr;
    CHECK(crowd_scenario_parse("{not json", &s) == CROWD_ERR_INPUT);
    CHECK(s == nullptr);
    CHECK(std::strlen(crowd_last_error()) > 0);
    CHECK(crowd_scenario_load("/nonexistent/room.json", &s) == CROWD_ERR_INPUT);
    CHECK(std::string(crowd_last_error()).find("/nonexistent/room.json") != std::string::npos);
    CHECK(crowd_scenario_parse(nullptr, &s) == CROWD_ERR_INPUT);

    int kind = -1;
    CHECK(crowd_behavior_parse("hr", &kind) == CROWD_OK);
    CHECK(kind == CROWD_HIGHLY_RATIONAL);
    CHECK(std::strlen(crowd_last_error()) == 0);
    CHECK(crowd_behavior_parse("reckless", &kind) == CROWD_ERR_INPUT);
    CHECK(crowd_cost_parse("d3", &kind) == CROWD_OK);
    CHECK(kind == CROWD_DELTA3);
    CHECK(std::string(crowd_cost_name(CROWD_DELTA2)) == "d2");

    crowd_behavior b = defaults(CROWD_THETA);
    CHECK(b.replan_every == 5);
    b.fp_damping = 2.0;
    Scn room(kCorridor);
    crowd_metrics* m = nullptr;
    CHECK(crowd_simulate(room.p, &b, nullptr, nullptr, nullptr, 0, &m) == CROWD_ERR_INPUT);
    CHECK(m == nullptr);
}

TEST_CASE("results come back in physical units") {
    Scn room(kCorridor);
    crowd_scenario_info info{};
    REQUIRE(crowd_scenario_info_get(room.p, &info) == CROWD_OK);
    CHECK(info.cell == 0.5);
    CHECK(info.exits == 1);

    const crowd_behavior b = defaults(CROWD_BASIC);
    Captured cap;
    Run run;
    REQUIRE(crowd_simulate(room.p, &b, nullptr, capture, &cap, 1, &run.p) == CROWD_OK);
    crowd_metrics_summary s{};
    REQUIRE(crowd_metrics_summary_get(run.p, &s) == CROWD_OK);

    // The rear edge starts 5.5 m from the exit at 2 m/s; numerical diffusion
    // only delays the last percent of the crowd.
    CHECK(s.t_evac > 0.9 * 5.5 / 2.0);
    CHECK(s.t_evac < 2.0 * 5.5 / 2.0);
    CHECK(cap.first_max == 2.0);  // snapshots carry ped/m^2
    CHECK(s.used_exits == 1);
    double out = 0.0;
    REQUIRE(crowd_metrics_exit_mass(run.p, 0, &out) == CROWD_OK);
    CHECK(out <= 2.0 + 1e-12);  // 1 m^2 at 2 ped/m^2, stopped once 99% is out
    CHECK(out >= 0.99 * 2.0 - 1e-12);
    CHECK(crowd_metrics_exit_mass(run.p, 1, &out) == CROWD_ERR_INPUT);

    // every snapshot matches the recorded mass history
    REQUIRE(crowd_metrics_history_size(run.p) == cap.t.size());
    for (std::size_t k = 0; k < cap.t.size(); ++k) {
        double t = 0.0, mass = 0.0;
        REQUIRE(crowd_metrics_history_at(run.p, k, &t, &mass) == CROWD_OK);
        CHECK(t == doctest::Approx(cap.t[k]).epsilon(1e-12));
        CHECK(mass == doctest::Approx(cap.mass[k]).epsilon(1e-12));
    }
}

TEST_CASE("walking speed scales evacuation time exactly") {
    std::string slow = kCorridor;
    slow.replace(slow.find("\"V\": 2"), 6, "\"V\": 1");
    Scn fast_room(kCorridor);
    Scn slow_room(slow.c_str());
    const crowd_behavior b = defaults(CROWD_BASIC);
    Run fast, lazy;
    REQUIRE(crowd_simulate(fast_room.p, &b, nullptr, nullptr, nullptr, 0, &fast.p) == CROWD_OK);
    REQUIRE(crowd_simulate(slow_room.p, &b, nullptr, nullptr, nullptr, 0, &lazy.p) == CROWD_OK);
    crowd_metrics_summary f{}, l{};
    REQUIRE(crowd_metrics_summary_get(fast.p, &f) == CROWD_OK);
    REQUIRE(crowd_metrics_summary_get(lazy.p, &l) == CROWD_OK);
    CHECK(l.t_evac == doctest::Approx(2.0 * f.t_evac).epsilon(1e-12));
    CHECK(l.rho_max == f.rho_max);
}

TEST_CASE("costs and admissibility through the C surface") {
    Scn room(kCorridor);
    const crowd_behavior basic = defaults(CROWD_BASIC);
    const crowd_behavior rational = defaults(CROWD_RATIONAL);
    Run a, c;
    REQUIRE(crowd_simulate(room.p, &basic, nullptr, nullptr, nullptr, 0, &a.p) == CROWD_OK);
    REQUIRE(crowd_simulate(room.p, &rational, nullptr, nullptr, nullptr, 0, &c.p) == CROWD_OK);
    for (int k = CROWD_DELTA1; k <= CROWD_DELTA3; ++k) {
        double d = -1.0;
        REQUIRE(crowd_cost(k, a.p, c.p, &d) == CROWD_OK);
        CHECK(d == 0.0);  // without interaction rational walkers behave like basic ones
    }

    int ok = -1;
    crowd_obstacle corner{1.0, 1.0, 1.0, 1.0};
    REQUIRE(crowd_admissible(room.p, &corner, &ok) == CROWD_OK);
    CHECK(ok == 1);
    crowd_obstacle on_block{5.0, 5.0, 1.0, 1.0};
    REQUIRE(crowd_admissible(room.p, &on_block, &ok) == CROWD_OK);
    CHECK(ok == 0);
    crowd_obstacle wall{9.75, 5.0, 0.5, 10.0};  // seals the whole exit
    REQUIRE(crowd_admissible(room.p, &wall, &ok) == CROWD_OK);
    CHECK(ok == 0);
    Run blocked;
    CHECK(crowd_simulate(room.p, &basic, &on_block, nullptr, nullptr, 0, &blocked.p) == CROWD_ERR_INPUT);

    crowd_scenario* faster = nullptr;
    REQUIRE(crowd_scenario_with_F(room.p, 4.0, &faster) == CROWD_OK);
    crowd_scenario_info info{};
    REQUIRE(crowd_scenario_info_get(faster, &info) == CROWD_OK);
    CHECK(info.F == 4.0);
    CHECK(crowd_scenario_hash(faster) == crowd_scenario_hash(room.p));
    crowd_scenario_free(faster);
}

TEST_CASE("searches through the C surface") {
    Scn room(kCorridor);
    const crowd_behavior basic = defaults(CROWD_BASIC);
    Run target;
    REQUIRE(crowd_simulate(room.p, &basic, nullptr, nullptr, nullptr, 0, &target.p) == CROWD_OK);

    crowd_search* r = nullptr;
    CHECK(crowd_optimize_exhaustive(room.p, &basic, target.p, CROWD_DELTA1, 30.0, 30.0, 1, 1, &r) ==
          CROWD_ERR_INFEASIBLE);
    CHECK(r == nullptr);

    crowd_compass_params cp{};
    REQUIRE(crowd_compass_defaults(&cp) == CROWD_OK);
    CHECK(cp.max_steps == 200);
    CHECK(cp.stall_limit == 200);
    CHECK(cp.cooling == 0.95);
    cp.max_steps = 12;
    cp.seed = 3;
    const crowd_obstacle l0{2.0, 2.0, 1.0, 1.0};
    crowd_search* first = nullptr;
    crowd_search* second = nullptr;
    REQUIRE(crowd_optimize_compass(room.p, &basic, target.p, CROWD_DELTA1, &l0, &cp, &first) == CROWD_OK);
    REQUIRE(crowd_optimize_compass(room.p, &basic, target.p, CROWD_DELTA1, &l0, &cp, &second) == CROWD_OK);
    crowd_obstacle a{}, b{};
    double da = -1, db = -1, u = -1;
    std::size_t sims = 0;
    REQUIRE(crowd_search_best(first, &a, &da, &u, &sims) == CROWD_OK);
    REQUIRE(crowd_search_best(second, &b, &db, nullptr, nullptr) == CROWD_OK);
    CHECK(u == 0.0);  // natural and target coincide without the obstacle
    CHECK(da == db);
    CHECK(a.x == b.x);
    CHECK(a.w == b.w);
    CHECK(sims >= 1);
    crowd_search_free(first);
    crowd_search_free(second);

    const crowd_obstacle bad{0.0, 0.0, 1.0, 1.0};  // hangs over the corner
    CHECK(crowd_optimize_compass(room.p, &basic, target.p, CROWD_DELTA1, &bad, &cp, &r) == CROWD_ERR_INPUT);
}
