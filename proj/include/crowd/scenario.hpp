#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crowd/fields.hpp"

namespace crowd {

enum class Side : std::uint8_t { Left, Right, Bottom, Top };

const char* to_string(Side s);

/// Axis-aligned rectangle given by its lower-left corner and side lengths.
struct Rect {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double x1() const { return x + w; }
    double y1() const { return y + h; }
    bool contains(double px, double py) const;
    /// Positive-area intersection (touching edges do not count).
    bool overlaps(const Rect& o) const;
};

struct ExitSegment {
    std::string id;
    Side side = Side::Right;
    double from = 0.0;
    double to = 0.0;
};

struct EntranceSegment {
    std::string id;
    Side side = Side::Left;
    double from = 0.0;
    double to = 0.0;
    double rate = 0.0;      // mass per unit time
    double duration = 0.0;  // inflow is active for t < duration
};

struct DensityBlock {
    Rect rect;
    double density = 0.0;
};

struct CharacteristicScales {
    double L = 1.0;
    double V = 1.0;
    double varrho = 1.0;
};

/// Walking area, targets, obstacles, initial data and interaction parameters.
///
/// A scenario read from disk is in physical units (m, s, ped). Solvers work on
/// the dimensionless version returned by nondimensionalize().
struct Scenario {
    double width = 0.0;
    double height = 0.0;
    int nx = 0;
    int ny = 0;
    std::vector<ExitSegment> exits;
    std::vector<EntranceSegment> entrances;
    std::vector<Rect> obstacles;
    std::vector<DensityBlock> rho0;
    double alpha_deg = 360.0;
    double R = 1.0;
    double F = 0.0;
    CharacteristicScales scales;
    bool dimensionless = false;

    double cell_size() const { return width / nx; }
};

/// Controlled obstacle: barycenter plus side lengths, dimensionless.
struct ObstacleParam {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    Rect rect() const { return {x - 0.5 * w, y - 0.5 * h, w, h}; }
    bool operator==(const ObstacleParam&) const = default;
};

Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);
/// Throws InputError naming the offending field.
void validate(const Scenario& s);

Scenario nondimensionalize(const Scenario& s);
Scenario redimensionalize(const Scenario& s);

enum class CellKind : std::uint8_t { Free, Obstacle, Exit, Entrance };

/// Face bit masks used by CellGrid::wall_faces and CellGrid::exit_faces.
namespace face {
inline constexpr std::uint8_t left = 1;
inline constexpr std::uint8_t right = 2;
inline constexpr std::uint8_t bottom = 4;
inline constexpr std::uint8_t top = 8;
}  // namespace face

std::uint8_t face_bit(Side s);
Vec2 outward_normal(Side s);

/// Rasterized scenario. Exit and entrance cells are walkable; obstacle cells
/// are holes.
struct CellGrid {
    int nx = 0;
    int ny = 0;
    double h = 0.0;
    Grid2<CellKind> kind;
    Grid2<int> tag;                  // exit / entrance index, -1 elsewhere
    Grid2<std::uint8_t> wall_faces;  // impermeable faces of walkable cells
    Grid2<std::uint8_t> exit_faces;  // outflow faces of exit cells
    std::vector<std::vector<std::size_t>> exit_cells;
    std::vector<std::vector<std::size_t>> entrance_cells;

    bool walkable(int i, int j) const { return kind(i, j) != CellKind::Obstacle; }
    bool walkable(std::size_t k) const { return kind[k] != CellKind::Obstacle; }
    bool is_exit(std::size_t k) const { return kind[k] == CellKind::Exit; }
    Vec2 center(int i, int j) const { return {(i + 0.5) * h, (j + 0.5) * h}; }
    std::size_t cell_count() const { return kind.size(); }
    bool operator==(const CellGrid&) const = default;
};

/// Cell classification by cell-center membership. `s` must be dimensionless.
CellGrid classify_cells(const Scenario& s, const std::optional<ObstacleParam>& lambda = std::nullopt);

/// Whether the controlled obstacle may be placed in the (dimensionless) scenario.
bool admissible(const ObstacleParam& lambda, const Scenario& s);

/// Initial density sampled at cell centers (dimensionless, zero on obstacles).
DensityField initial_density(const Scenario& s, const CellGrid& g);

}  // namespace crowd
