#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "crowd/errors.hpp"
#include "crowd/transport.hpp"
#include "support.hpp"

using namespace crowd;
using testsupport::room;

namespace {

CellGrid closed_room(int n, double h) {
    // The exit only exists to satisfy the grid builder; tests that need a
    // closed box keep velocities away from it.
    auto s = room(n * h, n * h, n, n);
    s.exits.push_back(testsupport::exit_on(Side::Right, 0.0, h));
    return classify_cells(s);
}

double mass(const DensityField& r, double h) { return total_mass(r, h); }

}  // namespace

TEST_CASE("project_velocity") {
    auto s = room(3, 3, 3, 3);
    s.exits.push_back(testsupport::exit_on(Side::Right, 1, 2));
    s.obstacles.push_back({0.2, 2.2, 0.6, 0.6});  // cell (0, 2)
    const auto g = classify_cells(s);
    VelocityField v(3, 3, Vec2{1, 0});
    v(2, 2) = {1, 0};   // wall to the right
    v(1, 2) = {0, 1};   // wall above
    v(0, 1) = {0.5, 1}; // obstacle above
    v(2, 1) = {1, 1};   // exit cell: outflow kept, but nothing above it blocks
    const auto p = project_velocity(v, g);
    CHECK(p(2, 2) == Vec2{0, 0});
    CHECK(p(1, 2) == Vec2{0, 0});
    CHECK(p(0, 1) == Vec2{0.5, 0});
    CHECK(p(2, 1) == Vec2{1, 1});
    CHECK(p(1, 1) == Vec2{1, 0});
    CHECK(p(0, 2) == Vec2{});

    VelocityField slide(3, 3, Vec2{0, 1});
    CHECK(project_velocity(slide, g)(2, 0) == Vec2{0, 1});
}

TEST_CASE("cfl_dt") {
    VelocityField v(4, 4);
    CHECK(cfl_dt(v, 0.5, 0.45, 0.25) == 0.25);
    v(1, 2) = {1.5, -0.5};
    CHECK(cfl_dt(v, 0.5, 0.45, 10.0) == doctest::Approx(0.1125).epsilon(1e-15));
    for (auto& x : v.values()) x = x * 2.0;
    CHECK(cfl_dt(v, 0.5, 0.45, 10.0) == doctest::Approx(0.1125 / 2).epsilon(1e-15));
    CHECK_THROWS_AS(cfl_dt(v, 0.5, 1.0, 1.0), InputError);
}

TEST_CASE("step_density basics") {
    const auto g = closed_room(20, 0.05);
    DensityField rho(20, 20);
    for (int j = 5; j < 10; ++j)
        for (int i = 5; i < 10; ++i) rho(i, j) = 1.0 + 0.1 * i;
    ExitLedger ledger(1);

    SUBCASE("zero velocity leaves the density alone") {
        CHECK(step_density(rho, VelocityField(20, 20), 0.01, g, ledger) == rho);
    }
    SUBCASE("uniform drift: mass conserved, center of mass advances") {
        const VelocityField v(20, 20, Vec2{1, 0});
        const double dt = cfl_dt(v, g.h, 0.45, 1.0);
        const double m0 = mass(rho, g.h);
        auto com = [&](const DensityField& r) {
            double s = 0.0;
            for (int j = 0; j < 20; ++j)
                for (int i = 0; i < 20; ++i) s += r(i, j) * g.center(i, j).x;
            return s * g.h * g.h / mass(r, g.h);
        };
        const double x0 = com(rho);
        auto r = rho;
        for (int k = 0; k < 10; ++k) r = step_density(r, v, dt, g, ledger);
        CHECK(std::abs(mass(r, g.h) - m0) <= 1e-12 * m0);
        CHECK(std::abs(com(r) - x0 - 10 * dt) <= g.h);
        CHECK(ledger.total() == 0.0);
    }
    SUBCASE("CFL violation is reported") {
        const VelocityField v(20, 20, Vec2{1, 0});
        CHECK_THROWS_AS(step_density(rho, v, 3 * g.h, g, ledger), NumericalError);
    }
}

TEST_CASE("exit flux bookkeeping") {
    auto s = room(1.0, 1.0, 10, 10);
    s.exits.push_back(testsupport::exit_on(Side::Right, 0.3, 0.7));
    s.exits.push_back(testsupport::exit_on(Side::Top, 0.0, 0.2));
    const auto g = classify_cells(s);
    DensityField rho(10, 10);
    VelocityField v(10, 10);
    for (int j = 0; j < 10; ++j)
        for (int i = 6; i < 10; ++i) {
            rho(i, j) = 0.3 + 0.05 * j;
            v(i, j) = {0.8, 0.2};
        }
    rho(0, 9) = 0.7;
    v(0, 9) = {0.0, 0.6};
    ExitLedger ledger(2);
    const double dt = 0.05;
    const auto out = step_density(rho, project_velocity(v, g), dt, g, ledger);
    // oracle: upwind density times normal velocity times dt times face length
    double e0 = 0.0;
    for (int j = 3; j < 7; ++j) e0 += rho(9, j) * 0.8 * dt * g.h;
    double e1 = 0.0;
    for (int i = 0; i < 2; ++i) e1 += rho(i, 9) * v(i, 9).y * dt * g.h;
    CHECK(ledger.per_exit[0] == doctest::Approx(e0).epsilon(1e-14));
    CHECK(ledger.per_exit[1] == doctest::Approx(e1).epsilon(1e-14));
    CHECK(mass(out, g.h) + ledger.total() == doctest::Approx(mass(rho, g.h)).epsilon(1e-14));
}

TEST_CASE("inject_inflow") {
    auto s = room(10.0, 10.0, 20, 20);
    s.exits.push_back(testsupport::exit_on(Side::Right, 4, 6));
    s.entrances.push_back({"in", Side::Left, 4.0, 6.0, 3.5, 25.0});
    const auto g = classify_cells(s);
    REQUIRE(g.entrance_cells[0].size() == 4);
    DensityField rho(20, 20);

    const double added = inject_inflow(rho, g, s.entrances, 0.0, 0.1);
    for (auto k : g.entrance_cells[0]) CHECK(rho[k] == doctest::Approx(3.5 * 0.1 / (4 * 0.25)).epsilon(1e-15));
    CHECK(rho[g.entrance_cells[0][0]] == doctest::Approx(0.35));
    CHECK(added == doctest::Approx(0.35).epsilon(1e-15));

    const auto before = rho;
    CHECK(inject_inflow(rho, g, s.entrances, 25.0, 0.1) == 0.0);
    CHECK(rho == before);

    auto idle = s.entrances;
    idle[0].rate = 0.0;
    CHECK(inject_inflow(rho, g, idle, 1.0, 0.1) == 0.0);
    CHECK(rho == before);

    // partial last step and the density cap
    DensityField r2(20, 20);
    CHECK(inject_inflow(r2, g, s.entrances, 24.95, 0.1) == doctest::Approx(3.5 * 0.05));
    DensityField r3(20, 20);
    CHECK(inject_inflow(r3, g, s.entrances, 0.0, 10.0, 4.0) == doctest::Approx(4 * 4.0 * 0.25));
    for (auto k : g.entrance_cells[0]) CHECK(r3[k] == 4.0);

    SUBCASE("held-back mass waits in the queue") {
        DensityField q(20, 20);
        std::vector<double> queue(1, 0.0);
        // 35 scheduled, room for 4 cells x 4 x 0.25 = 4
        CHECK(inject_inflow(q, g, s.entrances, 0.0, 10.0, 4.0, &queue) == doctest::Approx(4.0));
        CHECK(queue[0] == doctest::Approx(31.0));
        CHECK(inject_inflow(q, g, s.entrances, 30.0, 0.1, 4.0, &queue) == 0.0);  // still full
        CHECK(queue[0] == doctest::Approx(31.0));
        for (auto k : g.entrance_cells[0]) q[k] = 0.0;
        // after the inflow has ended the queue keeps draining
        CHECK(inject_inflow(q, g, s.entrances, 30.0, 0.1, 4.0, &queue) == doctest::Approx(4.0));
        CHECK(queue[0] == doctest::Approx(27.0));
        DensityField free_room(20, 20);
        std::vector<double> none(1, 0.0);
        inject_inflow(free_room, g, s.entrances, 0.0, 0.1, 4.0, &none);
        CHECK(none[0] == 0.0);
    }
}

TEST_CASE("transport invariants under random velocity fields") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    SUBCASE("closed box: mass conserved, density nonnegative, obstacles empty") {
        auto s = room(1.0, 1.0, 25, 25);
        s.exits.push_back(testsupport::exit_on(Side::Right, 0.0, 0.04));
        s.obstacles.push_back({0.4, 0.4, 0.2, 0.2});
        const auto g = classify_cells(s);
        DensityField rho(25, 25);
        for (std::size_t k = 0; k < rho.size(); ++k)
            if (g.walkable(k) && !g.is_exit(k)) rho[k] = 0.5 + 0.5 * u(rng);
        for (auto k : g.exit_cells[0]) rho[k] = 0.0;
        VelocityField v(25, 25);
        for (auto& x : v.values()) x = {u(rng), u(rng)};
        for (auto k : g.exit_cells[0]) v[k] = {-1.0, 0.0};  // keep the exit closed
        v = project_velocity(v, g);
        const double dt = cfl_dt(v, g.h, 0.45, 1.0);
        const double m0 = mass(rho, g.h);
        ExitLedger ledger(1);
        for (int step = 0; step < 1000; ++step) {
            rho = step_density(rho, v, dt, g, ledger);
            if (step % 100 == 0) {
                for (std::size_t k = 0; k < rho.size(); ++k) {
                    CHECK(rho[k] >= 0.0);
                    if (!g.walkable(k)) CHECK(rho[k] == 0.0);
                }
            }
        }
        CHECK(ledger.total() == 0.0);
        CHECK(std::abs(mass(rho, g.h) - m0) / m0 <= 1e-12);
    }
    SUBCASE("open room: initial + injected = remaining + exited") {
        auto s = room(1.0, 1.0, 25, 25);
        s.exits.push_back(testsupport::exit_on(Side::Right, 0.2, 0.5));
        s.exits.push_back(testsupport::exit_on(Side::Top, 0.5, 0.9));
        s.entrances.push_back({"in", Side::Left, 0.3, 0.6, 0.2, 0.5});
        const auto g = classify_cells(s);
        DensityField rho(25, 25);
        for (std::size_t k = 0; k < rho.size(); ++k) rho[k] = 0.5 + 0.5 * u(rng);
        double injected = 0.0;
        const double m0 = mass(rho, g.h);
        ExitLedger ledger(2);
        double t = 0.0;
        for (int step = 0; step < 400; ++step) {
            VelocityField v(25, 25);
            for (auto& x : v.values()) x = {0.5 + u(rng), 0.3 + u(rng)};
            v = project_velocity(v, g);
            const double dt = cfl_dt(v, g.h, 0.45, 0.5 * g.h);
            rho = step_density(rho, v, dt, g, ledger);
            injected += inject_inflow(rho, g, s.entrances, t, dt);
            t += dt;
            const double lhs = m0 + injected;
            const double rhs = mass(rho, g.h) + ledger.total();
            CHECK(std::abs(lhs - rhs) <= 1e-10 * lhs);
            for (double r : rho.values()) CHECK(r >= 0.0);
        }
        CHECK(ledger.per_exit[0] > 0.0);
        CHECK(ledger.per_exit[1] > 0.0);
        CHECK(injected > 0.0);
    }
}

TEST_CASE("uniform horizontal velocity reduces to the classical 1D upwind scheme") {
    auto s = room(1.0, 0.25, 40, 10);
    s.exits.push_back(testsupport::exit_on(Side::Right, 0.0, 0.25));
    const auto g = classify_cells(s);
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    DensityField rho(40, 10);
    for (auto& r : rho.values()) r = u(rng);
    const double c = 0.7;
    const VelocityField v(40, 10, Vec2{c, 0.0});
    const double dt = 0.4 * g.h / c;
    ExitLedger ledger(1);
    const auto out = step_density(rho, v, dt, g, ledger);
    const double nu = c * dt / g.h;
    for (int j = 0; j < 10; ++j)
        for (int i = 0; i < 40; ++i) {
            // q_i^{n+1} = q_i - nu (q_i - q_{i-1}), zero inflow at the left wall, outflow at the right exit
            const double left = i > 0 ? rho(i - 1, j) : 0.0;
            const double expect = rho(i, j) - nu * rho(i, j) + nu * left;
            CHECK(out(i, j) == doctest::Approx(expect).epsilon(1e-14));
        }
}
