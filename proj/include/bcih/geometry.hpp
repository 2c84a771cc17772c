#pragma once

#include <cmath>

namespace bcih {

/// Planar vector in screen pixels (x right, y down).
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
    constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
    constexpr bool operator==(const Vec2&) const = default;

    double norm() const { return std::hypot(x, y); }
    constexpr double dot(Vec2 o) const { return x * o.x + y * o.y; }
    constexpr double cross(Vec2 o) const { return x * o.y - y * o.x; }

    /// Unit vector, or `fallback` for the zero vector.
    Vec2 normalized(Vec2 fallback = {1.0, 0.0}) const {
        const double n = norm();
        return n > 0.0 ? Vec2{x / n, y / n} : fallback;
    }
};

inline constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

}  // namespace bcih
