#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace cpsim {

/// Planar vector in the global frame (x east, y north), meters.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Vec2&, const Vec2&) = default;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(Vec2 o) {
        x += o.x;
        y += o.y;
        return *this;
    }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

constexpr double kPi = 3.14159265358979323846;
inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Wraps an angle in degrees into [0, 360).
double normalize_heading(double deg);

/// Signed smallest difference a - b in degrees, in (-180, 180].
double angle_diff(double a, double b);

/// Unit vector for a heading in degrees clockwise from north.
inline Vec2 heading_vector(double heading_deg) {
    const double r = deg2rad(heading_deg);
    return {std::sin(r), std::cos(r)};
}

/// Bearing of v in degrees clockwise from north, in [0, 360).
double bearing_of(Vec2 v);

/// Rotates a vehicle-frame offset (x right, y forward) into the global frame.
Vec2 rotate_body_to_world(Vec2 body, double heading_deg);

/// Constant-velocity extrapolation over dt_ms.
inline Vec2 extrapolate(Vec2 p, double speed, double heading_deg, double dt_ms) {
    return p + heading_vector(heading_deg) * (speed * dt_ms / 1000.0);
}

/// Oriented rectangle: length along heading, width across it.
struct OrientedRect {
    Vec2 center;
    double heading = 0.0;
    double length = 0.0;
    double width = 0.0;

    OrientedRect inflated(double margin) const {
        return {center, heading, length + 2 * margin, width + 2 * margin};
    }
    std::array<Vec2, 4> corners() const;
    bool contains(Vec2 p) const;
};

/// Entry parameter t in [0,1] of segment a->b into the rectangle, if they meet.
std::optional<double> segment_rect_entry(Vec2 a, Vec2 b, const OrientedRect& r);

inline bool segment_hits_rect(Vec2 a, Vec2 b, const OrientedRect& r) {
    return segment_rect_entry(a, b, r).has_value();
}

using Polygon = std::vector<Vec2>;

/// Crossing-number test; points on the boundary may land either way.
bool point_in_polygon(std::span<const Vec2> poly, Vec2 p);

/// Smallest distance from p to any polygon edge.
double distance_to_boundary(std::span<const Vec2> poly, Vec2 p);

/// True when no two non-adjacent edges intersect and no edge is degenerate.
bool is_simple_polygon(std::span<const Vec2> poly);

bool segments_intersect(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2);

}  // namespace cpsim
