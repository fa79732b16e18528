#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "crowd/interaction.hpp"
#include "support.hpp"

using namespace crowd;
using testsupport::room;

namespace {

CellGrid open_grid(int n, double h) {
    auto s = room(n * h, n * h, n, n);
    s.exits.push_back(testsupport::exit_on(Side::Right, 0.0, n * h));
    return classify_cells(s);
}

InteractionParams params(double alpha_deg, double R, double F) {
    InteractionParams p;
    p.alpha = alpha_deg * std::numbers::pi / 180.0;
    p.R = R;
    p.F = F;
    return p;
}

VelocityField uniform(const CellGrid& g, Vec2 v) { return VelocityField(g.nx, g.ny, v); }

}  // namespace

TEST_CASE("zero density gives zero interaction") {
    const auto g = open_grid(20, 0.5);
    const auto vi = interaction_velocity(DensityField(20, 20), uniform(g, {1, 0}), params(170, 1.5, 8), g);
    for (const auto& v : vi.values()) CHECK(v == Vec2{});
}

TEST_CASE("single occupied cell ahead: one quadrature term") {
    // x at cell (5, 10), mass at (9, 10): offset d = 2 along +x with h = 0.5
    const auto g = open_grid(20, 0.5);
    DensityField rho(20, 20);
    rho(9, 10) = 1.0;
    const auto vi = interaction_velocity(rho, uniform(g, {1, 0}), params(170, 3.0, 8), g);
    const double expect = -8.0 * 1.0 * 0.25 * 2.0 / 4.0;
    CHECK(vi(5, 10).x == doctest::Approx(expect).epsilon(1e-14));
    CHECK(vi(5, 10).y == 0.0);
    CHECK(expect == -1.0);
    // behind the source, walking away from it: outside the sector
    CHECK(vi(13, 10) == Vec2{});
}

TEST_CASE("mirror pair of masses cancels the transverse component") {
    const auto g = open_grid(21, 0.5);
    DensityField rho(21, 21);
    rho(13, 12) = 0.7;
    rho(13, 8) = 0.7;
    const auto vi = interaction_velocity(rho, uniform(g, {1, 0}), params(170, 2.5, 8), g);
    CHECK(vi(10, 10).y == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(vi(10, 10).x < 0.0);
}

TEST_CASE("sensory_mask") {
    const auto g = open_grid(21, 0.5);
    SUBCASE("full visual angle is the whole disc") {
        const auto p = params(360, 2.0, 1);
        int expect = 0;
        for (int dj = -4; dj <= 4; ++dj)
            for (int di = -4; di <= 4; ++di)
                if ((di || dj) && di * di + dj * dj <= 16) ++expect;
        CHECK(sensory_mask(10, 10, Vec2{1, 0}, p, g).size() == static_cast<std::size_t>(expect));
        CHECK(sensory_mask(10, 10, Vec2{0.3, -0.7}, p, g).size() == static_cast<std::size_t>(expect));
        CHECK(sensory_mask(10, 10, std::nullopt, params(170, 2.0, 1), g).size() == static_cast<std::size_t>(expect));
    }
    SUBCASE("half plane excludes the cell behind") {
        const auto mask = sensory_mask(10, 10, Vec2{1, 0}, params(180, 2.0, 1), g);
        const auto behind = g.kind.index(9, 10);
        const auto ahead = g.kind.index(11, 10);
        const auto beside = g.kind.index(10, 11);
        CHECK(std::find(mask.begin(), mask.end(), behind) == mask.end());
        CHECK(std::find(mask.begin(), mask.end(), ahead) != mask.end());
        CHECK(std::find(mask.begin(), mask.end(), beside) != mask.end());  // boundary of a 180 degree sector
    }
    SUBCASE("obstacle cells are not sensed") {
        auto s = room(10.5, 10.5, 21, 21);
        s.exits.push_back(testsupport::exit_on(Side::Right, 0.0, 10.5));
        s.obstacles.push_back({6.0, 4.0, 1.0, 2.5});
        const auto gg = classify_cells(s);
        const auto mask = sensory_mask(10, 10, std::nullopt, params(360, 2.0, 1), gg);
        int expect = 0;
        for (int dj = -4; dj <= 4; ++dj)
            for (int di = -4; di <= 4; ++di)
                if ((di || dj) && di * di + dj * dj <= 16 && gg.walkable(10 + di, 10 + dj)) ++expect;
        CHECK(mask.size() == static_cast<std::size_t>(expect));
        for (auto k : mask) CHECK(gg.walkable(k));
        CHECK(expect < 48);
    }
}

TEST_CASE("kernel cutoff") {
    const auto g = open_grid(10, 0.5);
    DensityField rho(10, 10);
    rho(6, 5) = 1.0;
    auto p = params(360, 2.0, 1.0);
    p.r_min = 1.0;  // larger than the 0.5 offset
    const auto vi = interaction_velocity(rho, uniform(g, {1, 0}), p, g);
    CHECK(vi(5, 5).x == doctest::Approx(-1.0 * 0.5 / 1.0 * 0.25).epsilon(1e-14));
}

TEST_CASE("interaction properties on random densities") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = 24;
    const auto g = open_grid(n, 0.5);
    const auto p = params(170, 1.5, 8);

    SUBCASE("repulsion points away from a single source") {
        for (int trial = 0; trial < 30; ++trial) {
            DensityField rho(n, n);
            const int si = 3 + static_cast<int>(u(rng) * 18);
            const int sj = 3 + static_cast<int>(u(rng) * 18);
            rho(si, sj) = 0.1 + u(rng);
            VelocityField vb(n, n);
            for (auto& v : vb.values()) {
                const double a = 2 * std::numbers::pi * u(rng);
                v = {std::cos(a), std::sin(a)};
            }
            const auto vi = interaction_velocity(rho, vb, p, g);
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i) {
                    const Vec2 r{(si - i) * g.h, (sj - j) * g.h};
                    CHECK(vi(i, j).dot(r) <= 0.0);
                }
        }
    }
    DensityField rho(n, n);
    for (auto& r : rho.values()) r = u(rng);
    VelocityField vb(n, n);
    for (auto& v : vb.values()) {
        const double a = 2 * std::numbers::pi * u(rng);
        v = {std::cos(a), std::sin(a)};
    }
    const auto base = interaction_velocity(rho, vb, p, g);

    SUBCASE("linear in F") {
        for (double c : {0.5, 2.0, 4.0}) {
            auto q = p;
            q.F = c * p.F;
            const auto scaled = interaction_velocity(rho, vb, q, g);
            for (std::size_t k = 0; k < scaled.size(); ++k) {
                CHECK(scaled[k].x == base[k].x * c);
                CHECK(scaled[k].y == base[k].y * c);
            }
        }
        auto q = p;
        q.F = 3.0 * p.F;
        const auto scaled = interaction_velocity(rho, vb, q, g);
        for (std::size_t k = 0; k < scaled.size(); ++k)
            CHECK(std::abs(scaled[k].x - 3.0 * base[k].x) <= 1e-12 * (1.0 + std::abs(base[k].x)));
    }
    SUBCASE("local: density beyond R does not matter") {
        auto far = rho;
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                if (std::hypot(i - 5, j - 5) * g.h > p.R + 1e-9) far(i, j) = 3.0 * u(rng);
        const auto vi = interaction_velocity(far, vb, p, g);
        CHECK(vi(5, 5) == base(5, 5));
    }
    SUBCASE("mirror symmetry across the horizontal midline") {
        DensityField rm(n, n);
        VelocityField vm(n, n);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                rm(i, n - 1 - j) = rho(i, j);
                vm(i, n - 1 - j) = {vb(i, j).x, -vb(i, j).y};
            }
        const auto mirrored = interaction_velocity(rm, vm, p, g);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                CHECK(mirrored(i, n - 1 - j).x == doctest::Approx(base(i, j).x).epsilon(1e-12));
                CHECK(mirrored(i, n - 1 - j).y == doctest::Approx(-base(i, j).y).epsilon(1e-12));
            }
    }
}

TEST_CASE("interaction vanishes on obstacle cells and with F = 0") {
    auto s = room(10, 10, 20, 20);
    s.exits.push_back(testsupport::exit_on(Side::Right, 0, 10));
    s.obstacles.push_back({4.0, 4.0, 2.0, 2.0});
    const auto g = classify_cells(s);
    DensityField rho(20, 20, 1.0);
    for (std::size_t k = 0; k < rho.size(); ++k)
        if (!g.walkable(k)) rho[k] = 0.0;
    const auto vi = interaction_velocity(rho, VelocityField(20, 20, Vec2{0, 1}), params(170, 1.5, 8), g);
    for (std::size_t k = 0; k < vi.size(); ++k)
        if (!g.walkable(k)) CHECK(vi[k] == Vec2{});
    const auto zero = interaction_velocity(rho, VelocityField(20, 20, Vec2{0, 1}), params(170, 1.5, 0), g);
    for (const auto& v : zero.values()) CHECK(v == Vec2{});
}
