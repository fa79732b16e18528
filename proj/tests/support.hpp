#pragma once

#include <cmath>
#include <string>

#include "crowd/scenario.hpp"

namespace testsupport {

/// Rectangular room already in dimensionless form (unit scales).
inline crowd::Scenario room(double width, double height, int nx, int ny) {
    crowd::Scenario s;
    s.width = width;
    s.height = height;
    s.nx = nx;
    s.ny = ny;
    s.alpha_deg = 170.0;
    s.R = 1.5;
    s.F = 0.0;
    s.dimensionless = true;
    return s;
}

inline crowd::ExitSegment exit_on(crowd::Side side, double from, double to, std::string id = "e") {
    return {std::move(id), side, from, to};
}

inline double cell_center(int i, double h) { return (i + 0.5) * h; }

}  // namespace testsupport

#include <random>
#include <vector>

namespace testsupport {

/// Perfect maze with one-cell corridors on an n x n grid of the unit square
/// (rooms at odd indices, carved by a seeded depth-first search). The exit is
/// the single top-row cell above room (1, n - 3).
inline crowd::Scenario perfect_maze(int n, unsigned seed) {
    const double h = 1.0 / n;
    std::vector<char> open(static_cast<std::size_t>(n) * n, 0);
    auto at = [&](int i, int j) -> char& { return open[static_cast<std::size_t>(j) * n + i]; };
    const int rooms = (n - 2) / 2;  // rooms at 1, 3, ..., 2 rooms - 1
    std::mt19937 rng(seed);
    std::vector<std::pair<int, int>> stack{{0, 0}};
    std::vector<char> seen(static_cast<std::size_t>(rooms) * rooms, 0);
    seen[0] = 1;
    at(1, 1) = 1;
    while (!stack.empty()) {
        auto [a, b] = stack.back();
        std::vector<std::pair<int, int>> next;
        const int da[] = {1, -1, 0, 0};
        const int db[] = {0, 0, 1, -1};
        for (int d = 0; d < 4; ++d) {
            const int p = a + da[d];
            const int q = b + db[d];
            if (p >= 0 && q >= 0 && p < rooms && q < rooms && !seen[static_cast<std::size_t>(q) * rooms + p])
                next.emplace_back(p, q);
        }
        if (next.empty()) {
            stack.pop_back();
            continue;
        }
        auto [p, q] = next[rng() % next.size()];
        seen[static_cast<std::size_t>(q) * rooms + p] = 1;
        at(2 * p + 1, 2 * q + 1) = 1;
        at(a + p + 1, b + q + 1) = 1;  // wall cell between the two rooms
        stack.emplace_back(p, q);
    }
    const int top = 2 * rooms - 1;
    for (int j = top + 1; j < n; ++j) at(1, j) = 1;  // corridor up to the exit

    auto s = room(1.0, 1.0, n, n);
    s.exits.push_back(exit_on(crowd::Side::Top, h, 2 * h));
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            if (!at(i, j)) s.obstacles.push_back({(i + 0.1) * h, (j + 0.1) * h, 0.8 * h, 0.8 * h});
    return s;
}

}  // namespace testsupport
