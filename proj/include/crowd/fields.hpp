#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace crowd {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(Vec2 o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    bool operator==(const Vec2&) const = default;

    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
};

/// Cell-centered field on an nx-by-ny grid, row-major with j (the y index)
/// as the slow index. Cell (i, j) has its center at ((i + 0.5) h, (j + 0.5) h).
template <class T>
class Grid2 {
public:
    Grid2() = default;
    Grid2(int nx, int ny, T fill = T{}) : nx_(nx), ny_(ny), data_(static_cast<std::size_t>(nx) * ny, fill) {}

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    std::size_t size() const { return data_.size(); }

    std::size_t index(int i, int j) const {
        assert(in_bounds(i, j));
        return static_cast<std::size_t>(j) * nx_ + i;
    }
    bool in_bounds(int i, int j) const { return i >= 0 && j >= 0 && i < nx_ && j < ny_; }

    T& operator()(int i, int j) { return data_[index(i, j)]; }
    const T& operator()(int i, int j) const { return data_[index(i, j)]; }
    T& operator[](std::size_t k) { return data_[k]; }
    const T& operator[](std::size_t k) const { return data_[k]; }

    std::vector<T>& values() { return data_; }
    const std::vector<T>& values() const { return data_; }

    bool operator==(const Grid2&) const = default;

private:
    int nx_ = 0;
    int ny_ = 0;
    std::vector<T> data_;
};

using DensityField = Grid2<double>;
using VelocityField = Grid2<Vec2>;

}  // namespace crowd
