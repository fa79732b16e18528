#include "crowd/interaction.hpp"

#include <cmath>
#include <numbers>

#include "crowd/errors.hpp"

namespace crowd {

namespace {

struct StencilEntry {
    int di = 0;
    int dj = 0;
    Vec2 r;       // y - x
    double dist;  // |r|
    Vec2 weight;  // kernel times cell area, per unit density
};

double cutoff(const InteractionParams& p, const CellGrid& g) { return p.r_min > 0.0 ? p.r_min : g.h; }

std::vector<StencilEntry> make_stencil(const InteractionParams& p, const CellGrid& g) {
    const int reach = static_cast<int>(std::floor(p.R / g.h + 1e-9));
    const double rmin2 = cutoff(p, g) * cutoff(p, g);
    const double area = g.h * g.h;
    const double tol = 1e-9 * g.h;
    std::vector<StencilEntry> st;
    for (int dj = -reach; dj <= reach; ++dj)
        for (int di = -reach; di <= reach; ++di) {
            if (di == 0 && dj == 0) continue;
            const Vec2 r{di * g.h, dj * g.h};
            const double d = r.norm();
            if (d > p.R + tol) continue;
            const double denom = std::max(d * d, rmin2);
            st.push_back({di, dj, r, d, r * (-p.F * area / denom)});
        }
    return st;
}

bool in_sector(const StencilEntry& e, const std::optional<Vec2>& dir, double cos_half) {
    if (!dir) return true;
    return e.r.dot(*dir) >= cos_half * e.dist - 1e-12 * e.dist;
}

std::optional<Vec2> orientation(Vec2 v) {
    const double n = v.norm();
    if (!(n > 0.0)) return std::nullopt;
    return v * (1.0 / n);
}

}  // namespace

InteractionParams interaction_params(const Scenario& s, const CellGrid& g) {
    if (!s.dimensionless) throw InputError("interaction_params: scenario must be dimensionless");
    InteractionParams p;
    p.alpha = s.alpha_deg * std::numbers::pi / 180.0;
    p.R = s.R;
    p.F = s.F;
    p.r_min = g.h;
    return p;
}

void validate(const InteractionParams& p) {
    if (!(p.alpha > 0.0 && p.alpha <= 2.0 * std::numbers::pi + 1e-12)) throw InputError("alpha must lie in (0, 2pi]");
    if (!(p.R > 0.0)) throw InputError("R must be > 0");
    if (!(p.F >= 0.0)) throw InputError("F must be >= 0");
    if (p.r_min < 0.0) throw InputError("r_min must be > 0");
}

std::vector<std::size_t> sensory_mask(int i, int j, std::optional<Vec2> dir, const InteractionParams& p,
                                      const CellGrid& g) {
    validate(p);
    if (dir) dir = orientation(*dir);
    const double cos_half = std::cos(0.5 * p.alpha);
    std::vector<std::size_t> out;
    for (const auto& e : make_stencil(p, g)) {
        const int a = i + e.di;
        const int b = j + e.dj;
        if (!g.kind.in_bounds(a, b) || !g.walkable(a, b)) continue;
        if (in_sector(e, dir, cos_half)) out.push_back(g.kind.index(a, b));
    }
    return out;
}

VelocityField interaction_velocity(const DensityField& rho, const VelocityField& vb, const InteractionParams& p,
                                   const CellGrid& g) {
    validate(p);
    VelocityField out(g.nx, g.ny);
    if (p.F == 0.0) return out;
    const auto stencil = make_stencil(p, g);
    const double cos_half = std::cos(0.5 * p.alpha);
    const bool full_disc = cos_half <= -1.0 + 1e-15;

    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            if (!g.walkable(i, j)) continue;
            const auto dir = full_disc ? std::nullopt : orientation(vb(i, j));
            Vec2 sum;
            for (const auto& e : stencil) {
                const int a = i + e.di;
                const int b = j + e.dj;
                if (a < 0 || b < 0 || a >= g.nx || b >= g.ny) continue;
                const std::size_t k = static_cast<std::size_t>(b) * g.nx + a;
                const double m = rho[k];
                if (m == 0.0 || !g.walkable(k)) continue;
                if (!in_sector(e, dir, cos_half)) continue;
                sum += e.weight * m;
            }
            out(i, j) = sum;
        }
    return out;
}

}  // namespace crowd
