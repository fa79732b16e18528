#include "crowd/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "crowd/errors.hpp"

namespace crowd {

namespace {

using nlohmann::json;

double edge_tol(double a, double b) { return 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); }

[[noreturn]] void fail(const std::string& field, const std::string& what) {
    throw InputError(field + ": " + what);
}

Side parse_side(const json& j, const std::string& field) {
    if (!j.is_string()) fail(field, "expected one of left|right|top|bottom");
    const auto v = j.get<std::string>();
    if (v == "left") return Side::Left;
    if (v == "right") return Side::Right;
    if (v == "bottom") return Side::Bottom;
    if (v == "top") return Side::Top;
    fail(field, "unknown side '" + v + "'");
}

double number(const json& obj, const char* key, const std::string& where) {
    const std::string field = where + "." + key;
    if (!obj.is_object() || !obj.contains(key)) fail(field, "missing");
    const auto& v = obj.at(key);
    if (!v.is_number()) fail(field, "expected a number");
    return v.get<double>();
}

int integer(const json& obj, const char* key, const std::string& where) {
    const std::string field = where + "." + key;
    if (!obj.is_object() || !obj.contains(key)) fail(field, "missing");
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) fail(field, "expected an integer");
    return v.get<int>();
}

std::string identifier(const json& obj, const std::string& where, std::size_t index, const char* prefix) {
    if (obj.contains("id")) {
        const auto& v = obj.at("id");
        if (v.is_string()) return v.get<std::string>();
        if (v.is_number_integer()) return std::to_string(v.get<long long>());
        fail(where + ".id", "expected a string or integer");
    }
    return prefix + std::to_string(index + 1);
}

const json& list(const json& root, const char* key) {
    static const json empty = json::array();
    if (!root.contains(key)) return empty;
    const auto& v = root.at(key);
    if (!v.is_array()) fail(key, "expected a list");
    return v;
}

Rect rect_of(const json& obj, const std::string& where) {
    return {number(obj, "x", where), number(obj, "y", where), number(obj, "w", where), number(obj, "h", where)};
}

double side_length(const Scenario& s, Side side) {
    return (side == Side::Left || side == Side::Right) ? s.height : s.width;
}

template <class Seg>
void check_segment(const Scenario& s, const Seg& seg, const std::string& where) {
    const double len = side_length(s, seg.side);
    const double tol = edge_tol(len, 0.0);
    if (!(seg.from < seg.to)) fail(where, "segment must satisfy from < to");
    if (seg.from < -tol || seg.to > len + tol) fail(where, "segment does not lie on the domain boundary");
}

bool segments_overlap(Side a, double a0, double a1, Side b, double b0, double b1) {
    return a == b && std::min(a1, b1) > std::max(a0, b0);
}

Scenario scaled(const Scenario& s, double length, double density, double time, double mass_rate, double force,
                bool to_dimensionless) {
    Scenario out = s;
    out.width /= length;
    out.height /= length;
    for (auto& e : out.exits) {
        e.from /= length;
        e.to /= length;
    }
    for (auto& e : out.entrances) {
        e.from /= length;
        e.to /= length;
        e.rate /= mass_rate;
        e.duration /= time;
    }
    auto scale_rect = [&](Rect& r) {
        r.x /= length;
        r.y /= length;
        r.w /= length;
        r.h /= length;
    };
    for (auto& r : out.obstacles) scale_rect(r);
    for (auto& b : out.rho0) {
        scale_rect(b.rect);
        b.density /= density;
    }
    out.R /= length;
    out.F /= force;
    out.dimensionless = to_dimensionless;
    return out;
}

}  // namespace

const char* to_string(Side s) {
    switch (s) {
        case Side::Left: return "left";
        case Side::Right: return "right";
        case Side::Bottom: return "bottom";
        case Side::Top: return "top";
    }
    return "?";
}

bool Rect::contains(double px, double py) const {
    const double tx = edge_tol(x, x1());
    const double ty = edge_tol(y, y1());
    return px >= x - tx && px < x1() - tx && py >= y - ty && py < y1() - ty;
}

bool Rect::overlaps(const Rect& o) const {
    const double tol = edge_tol(std::max(std::abs(x1()), std::abs(o.x1())), std::max(std::abs(y1()), std::abs(o.y1())));
    return std::min(x1(), o.x1()) - std::max(x, o.x) > tol && std::min(y1(), o.y1()) - std::max(y, o.y) > tol;
}

Scenario parse_scenario(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(std::string("scenario: parse error: ") + e.what());
    }
    if (!root.is_object()) throw InputError("scenario: top level must be an object");

    Scenario s;
    if (!root.contains("domain")) fail("domain", "missing");
    const auto& dom = root.at("domain");
    s.width = number(dom, "width", "domain");
    s.height = number(dom, "height", "domain");
    s.nx = integer(dom, "nx", "domain");
    s.ny = integer(dom, "ny", "domain");

    if (root.contains("scales")) {
        const auto& sc = root.at("scales");
        s.scales = {number(sc, "L", "scales"), number(sc, "V", "scales"), number(sc, "rho", "scales")};
    }
    if (!root.contains("params")) fail("params", "missing");
    const auto& p = root.at("params");
    s.alpha_deg = number(p, "alpha_deg", "params");
    s.R = number(p, "R", "params");
    s.F = number(p, "F", "params");

    const auto& exits = list(root, "exits");
    for (std::size_t k = 0; k < exits.size(); ++k) {
        const std::string where = "exits[" + std::to_string(k) + "]";
        const auto& e = exits[k];
        if (!e.is_object() || !e.contains("side")) fail(where + ".side", "missing");
        s.exits.push_back({identifier(e, where, k, "e"), parse_side(e.at("side"), where + ".side"),
                           number(e, "from", where), number(e, "to", where)});
    }
    const auto& ents = list(root, "entrances");
    for (std::size_t k = 0; k < ents.size(); ++k) {
        const std::string where = "entrances[" + std::to_string(k) + "]";
        const auto& e = ents[k];
        if (!e.is_object() || !e.contains("side")) fail(where + ".side", "missing");
        s.entrances.push_back({identifier(e, where, k, "in"), parse_side(e.at("side"), where + ".side"),
                               number(e, "from", where), number(e, "to", where), number(e, "rate", where),
                               number(e, "duration", where)});
    }
    const auto& obs = list(root, "obstacles");
    for (std::size_t k = 0; k < obs.size(); ++k) s.obstacles.push_back(rect_of(obs[k], "obstacles[" + std::to_string(k) + "]"));
    const auto& blocks = list(root, "rho0");
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const std::string where = "rho0[" + std::to_string(k) + "]";
        s.rho0.push_back({rect_of(blocks[k], where), number(blocks[k], "density", where)});
    }

    validate(s);
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("scenario: cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

void validate(const Scenario& s) {
    if (!(s.width > 0.0)) fail("domain.width", "must be > 0");
    if (!(s.height > 0.0)) fail("domain.height", "must be > 0");
    if (s.nx < 3) fail("domain.nx", "must be >= 3");
    if (s.ny < 3) fail("domain.ny", "must be >= 3");
    const double hx = s.width / s.nx;
    const double hy = s.height / s.ny;
    if (std::abs(hx - hy) > 1e-9 * hx) fail("domain", "cells must be square (width/nx == height/ny)");
    if (!(s.scales.L > 0.0)) fail("scales.L", "must be > 0");
    if (!(s.scales.V > 0.0)) fail("scales.V", "must be > 0");
    if (!(s.scales.varrho > 0.0)) fail("scales.rho", "must be > 0");
    if (!(s.alpha_deg > 0.0 && s.alpha_deg <= 360.0)) fail("params.alpha_deg", "must lie in (0, 360]");
    if (!(s.R > 0.0)) fail("params.R", "must be > 0");
    if (!(s.F >= 0.0)) fail("params.F", "must be >= 0");
    if (s.exits.empty()) fail("exits", "at least one exit is required");

    for (std::size_t k = 0; k < s.exits.size(); ++k) {
        const auto& e = s.exits[k];
        const std::string where = "exits[" + std::to_string(k) + "]";
        check_segment(s, e, where);
        for (std::size_t m = 0; m < k; ++m) {
            const auto& o = s.exits[m];
            if (segments_overlap(e.side, e.from, e.to, o.side, o.from, o.to)) fail(where, "overlaps exits[" + std::to_string(m) + "]");
        }
    }
    for (std::size_t k = 0; k < s.entrances.size(); ++k) {
        const auto& e = s.entrances[k];
        const std::string where = "entrances[" + std::to_string(k) + "]";
        check_segment(s, e, where);
        if (!(e.rate >= 0.0)) fail(where + ".rate", "must be >= 0");
        if (!(e.duration >= 0.0)) fail(where + ".duration", "must be >= 0");
        for (const auto& x : s.exits)
            if (segments_overlap(e.side, e.from, e.to, x.side, x.from, x.to)) fail(where, "overlaps exit '" + x.id + "'");
        for (std::size_t m = 0; m < k; ++m) {
            const auto& o = s.entrances[m];
            if (segments_overlap(e.side, e.from, e.to, o.side, o.from, o.to)) fail(where, "overlaps entrances[" + std::to_string(m) + "]");
        }
    }
    for (std::size_t k = 0; k < s.obstacles.size(); ++k) {
        const auto& r = s.obstacles[k];
        const std::string where = "obstacles[" + std::to_string(k) + "]";
        if (!(r.w > 0.0 && r.h > 0.0)) fail(where, "side lengths must be > 0");
        if (!(r.x > 0.0 && r.y > 0.0 && r.x1() < s.width && r.y1() < s.height)) fail(where, "obstacle outside domain");
        for (std::size_t b = 0; b < s.rho0.size(); ++b)
            if (s.rho0[b].density > 0.0 && r.overlaps(s.rho0[b].rect))
                fail(where, "intersects the initial density rho0[" + std::to_string(b) + "]");
    }
    for (std::size_t k = 0; k < s.rho0.size(); ++k) {
        const auto& b = s.rho0[k];
        const std::string where = "rho0[" + std::to_string(k) + "]";
        if (!(b.density >= 0.0)) fail(where + ".density", "must be >= 0");
        if (!(b.rect.w > 0.0 && b.rect.h > 0.0)) fail(where, "side lengths must be > 0");
        const double tol = edge_tol(s.width, s.height);
        if (b.rect.x < -tol || b.rect.y < -tol || b.rect.x1() > s.width + tol || b.rect.y1() > s.height + tol)
            fail(where, "block outside domain");
    }
}

Scenario nondimensionalize(const Scenario& s) {
    if (s.dimensionless) return s;
    const auto& c = s.scales;
    const double time = c.L / c.V;
    const double mass_rate = c.varrho * c.L * c.V;  // ped/s per unit dimensionless rate
    return scaled(s, c.L, c.varrho, time, mass_rate, c.V / (c.varrho * c.L), true);
}

Scenario redimensionalize(const Scenario& s) {
    if (!s.dimensionless) return s;
    const auto& c = s.scales;
    const double time = c.L / c.V;
    const double mass_rate = c.varrho * c.L * c.V;
    return scaled(s, 1.0 / c.L, 1.0 / c.varrho, 1.0 / time, 1.0 / mass_rate, c.varrho * c.L / c.V, false);
}

std::uint8_t face_bit(Side s) {
    switch (s) {
        case Side::Left: return face::left;
        case Side::Right: return face::right;
        case Side::Bottom: return face::bottom;
        case Side::Top: return face::top;
    }
    return 0;
}

Vec2 outward_normal(Side s) {
    switch (s) {
        case Side::Left: return {-1.0, 0.0};
        case Side::Right: return {1.0, 0.0};
        case Side::Bottom: return {0.0, -1.0};
        case Side::Top: return {0.0, 1.0};
    }
    return {};
}

namespace {

struct BoundaryCell {
    int i = 0;
    int j = 0;
};

// Cells of side `side` whose boundary face midpoint lies on [from, to]. If the
// segment is narrower than a cell and hits no midpoint, the cell containing
// the segment midpoint is used so that every segment maps to a cell.
std::vector<BoundaryCell> segment_cells(const CellGrid& g, Side side, double from, double to) {
    const bool vertical = side == Side::Left || side == Side::Right;
    const int n = vertical ? g.ny : g.nx;
    std::vector<BoundaryCell> out;
    auto cell_at = [&](int k) -> BoundaryCell {
        switch (side) {
            case Side::Left: return {0, k};
            case Side::Right: return {g.nx - 1, k};
            case Side::Bottom: return {k, 0};
            case Side::Top: return {k, g.ny - 1};
        }
        return {};
    };
    const double tol = 1e-9 * std::max(1.0, n * g.h);
    for (int k = 0; k < n; ++k) {
        const double mid = (k + 0.5) * g.h;
        if (mid >= from - tol && mid <= to + tol) out.push_back(cell_at(k));
    }
    if (out.empty()) {
        const int k = std::clamp(static_cast<int>(std::floor(0.5 * (from + to) / g.h)), 0, n - 1);
        out.push_back(cell_at(k));
    }
    return out;
}

}  // namespace

CellGrid classify_cells(const Scenario& s, const std::optional<ObstacleParam>& lambda) {
    if (!s.dimensionless) throw InputError("classify_cells: scenario must be dimensionless");
    CellGrid g;
    g.nx = s.nx;
    g.ny = s.ny;
    g.h = s.cell_size();
    g.kind = Grid2<CellKind>(g.nx, g.ny, CellKind::Free);
    g.tag = Grid2<int>(g.nx, g.ny, -1);
    g.wall_faces = Grid2<std::uint8_t>(g.nx, g.ny, 0);
    g.exit_faces = Grid2<std::uint8_t>(g.nx, g.ny, 0);

    std::vector<Rect> holes = s.obstacles;
    if (lambda) holes.push_back(lambda->rect());
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const Vec2 c = g.center(i, j);
            for (const auto& r : holes)
                if (r.contains(c.x, c.y)) {
                    g.kind(i, j) = CellKind::Obstacle;
                    break;
                }
        }

    g.entrance_cells.assign(s.entrances.size(), {});
    for (std::size_t k = 0; k < s.entrances.size(); ++k) {
        const auto& e = s.entrances[k];
        for (auto [i, j] : segment_cells(g, e.side, e.from, e.to)) {
            if (g.kind(i, j) != CellKind::Free) continue;
            g.kind(i, j) = CellKind::Entrance;
            g.tag(i, j) = static_cast<int>(k);
            g.entrance_cells[k].push_back(g.kind.index(i, j));
        }
    }
    // Exits are classified last so that a corner cell shared with an
    // entrance on the adjacent side drains rather than injects.
    g.exit_cells.assign(s.exits.size(), {});
    for (std::size_t k = 0; k < s.exits.size(); ++k) {
        const auto& e = s.exits[k];
        for (auto [i, j] : segment_cells(g, e.side, e.from, e.to)) {
            if (g.kind(i, j) == CellKind::Obstacle) continue;
            if (g.kind(i, j) == CellKind::Entrance) {
                auto& cells = g.entrance_cells[static_cast<std::size_t>(g.tag(i, j))];
                std::erase(cells, g.kind.index(i, j));
            }
            if (g.kind(i, j) == CellKind::Exit) continue;  // first exit keeps a shared corner
            g.kind(i, j) = CellKind::Exit;
            g.tag(i, j) = static_cast<int>(k);
            g.exit_faces(i, j) |= face_bit(e.side);
            g.exit_cells[k].push_back(g.kind.index(i, j));
        }
    }

    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            if (!g.walkable(i, j)) continue;
            std::uint8_t walls = 0;
            auto blocked = [&](int a, int b) { return !g.kind.in_bounds(a, b) || !g.walkable(a, b); };
            if (blocked(i - 1, j)) walls |= face::left;
            if (blocked(i + 1, j)) walls |= face::right;
            if (blocked(i, j - 1)) walls |= face::bottom;
            if (blocked(i, j + 1)) walls |= face::top;
            g.wall_faces(i, j) = static_cast<std::uint8_t>(walls & ~g.exit_faces(i, j));
        }
    return g;
}

bool admissible(const ObstacleParam& lambda, const Scenario& s) {
    if (!s.dimensionless) throw InputError("admissible: scenario must be dimensionless");
    if (!(lambda.w > 0.0 && lambda.h > 0.0)) return false;
    const Rect r = lambda.rect();
    const double tol = edge_tol(s.width, s.height);
    if (r.x < -tol || r.y < -tol || r.x1() > s.width + tol || r.y1() > s.height + tol) return false;
    for (const auto& b : s.rho0)
        if (b.density > 0.0 && r.overlaps(b.rect)) return false;
    for (const auto& o : s.obstacles)
        if (r.overlaps(o)) return false;

    const CellGrid g = classify_cells(s, lambda);
    for (const auto& cells : g.exit_cells)
        if (cells.empty()) return false;
    for (const auto& cells : g.entrance_cells)
        if (cells.empty()) return false;
    return true;
}

DensityField initial_density(const Scenario& s, const CellGrid& g) {
    DensityField rho(g.nx, g.ny, 0.0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            if (!g.walkable(i, j)) continue;
            const Vec2 c = g.center(i, j);
            for (const auto& b : s.rho0)
                if (b.rect.contains(c.x, c.y)) rho(i, j) += b.density;
        }
    return rho;
}

}  // namespace crowd
