#include "cpsim/geometry.hpp"

#include <algorithm>
#include <limits>

namespace cpsim {

double normalize_heading(double deg) {
    double h = std::fmod(deg, 360.0);
    if (h < 0) h += 360.0;
    if (h >= 360.0) h = 0.0;
    return h;
}

double angle_diff(double a, double b) {
    double d = std::fmod(a - b, 360.0);
    if (d > 180.0) d -= 360.0;
    if (d <= -180.0) d += 360.0;
    return d;
}

double bearing_of(Vec2 v) { return normalize_heading(rad2deg(std::atan2(v.x, v.y))); }

Vec2 rotate_body_to_world(Vec2 body, double heading_deg) {
    const Vec2 fwd = heading_vector(heading_deg);
    const Vec2 right{fwd.y, -fwd.x};
    return right * body.x + fwd * body.y;
}

namespace {

struct LocalFrame {
    Vec2 origin;
    Vec2 fwd;
    Vec2 right;
    Vec2 to_local(Vec2 p) const {
        const Vec2 d = p - origin;
        return {dot(d, right), dot(d, fwd)};
    }
};

LocalFrame frame_of(const OrientedRect& r) {
    const Vec2 f = heading_vector(r.heading);
    return {r.center, f, Vec2{f.y, -f.x}};
}

}  // namespace

std::array<Vec2, 4> OrientedRect::corners() const {
    const Vec2 f = heading_vector(heading) * (length / 2);
    const Vec2 rgt = Vec2{heading_vector(heading).y, -heading_vector(heading).x} * (width / 2);
    return {center + f + rgt, center + f - rgt, center - f - rgt, center - f + rgt};
}

bool OrientedRect::contains(Vec2 p) const {
    const Vec2 l = frame_of(*this).to_local(p);
    return std::abs(l.x) <= width / 2 && std::abs(l.y) <= length / 2;
}

std::optional<double> segment_rect_entry(Vec2 a, Vec2 b, const OrientedRect& r) {
    const LocalFrame fr = frame_of(r);
    const Vec2 la = fr.to_local(a);
    const Vec2 lb = fr.to_local(b);
    const Vec2 d = lb - la;
    const double hx = r.width / 2;
    const double hy = r.length / 2;

    // Liang-Barsky clipping against the axis-aligned box in the local frame.
    double t0 = 0.0;
    double t1 = 1.0;
    const double p[4] = {-d.x, d.x, -d.y, d.y};
    const double q[4] = {la.x + hx, hx - la.x, la.y + hy, hy - la.y};
    for (int i = 0; i < 4; ++i) {
        if (p[i] == 0.0) {
            if (q[i] < 0.0) return std::nullopt;
            continue;
        }
        const double t = q[i] / p[i];
        if (p[i] < 0.0) {
            if (t > t1) return std::nullopt;
            t0 = std::max(t0, t);
        } else {
            if (t < t0) return std::nullopt;
            t1 = std::min(t1, t);
        }
    }
    return t0;
}

bool point_in_polygon(std::span<const Vec2> poly, Vec2 p) {
    bool inside = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2 a = poly[i];
        const Vec2 b = poly[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double xint = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < xint) inside = !inside;
        }
    }
    return inside;
}

namespace {

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a;
    const double len2 = dot(ab, ab);
    if (len2 == 0.0) return distance(p, a);
    const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return distance(p, a + ab * t);
}

int orientation(Vec2 a, Vec2 b, Vec2 c) {
    const double v = cross(b - a, c - a);
    constexpr double eps = 1e-12;
    if (v > eps) return 1;
    if (v < -eps) return -1;
    return 0;
}

bool on_segment(Vec2 a, Vec2 b, Vec2 p) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
}

}  // namespace

double distance_to_boundary(std::span<const Vec2> poly, Vec2 p) {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        best = std::min(best, point_segment_distance(p, poly[i], poly[(i + 1) % n]));
    }
    return best;
}

bool segments_intersect(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) {
    const int o1 = orientation(p1, p2, q1);
    const int o2 = orientation(p1, p2, q2);
    const int o3 = orientation(q1, q2, p1);
    const int o4 = orientation(q1, q2, p2);
    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment(p1, p2, q1)) return true;
    if (o2 == 0 && on_segment(p1, p2, q2)) return true;
    if (o3 == 0 && on_segment(q1, q2, p1)) return true;
    if (o4 == 0 && on_segment(q1, q2, p2)) return true;
    return false;
}

bool is_simple_polygon(std::span<const Vec2> poly) {
    const std::size_t n = poly.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        if (poly[i] == poly[(i + 1) % n]) return false;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 a1 = poly[i];
        const Vec2 a2 = poly[(i + 1) % n];
        for (std::size_t j = i + 1; j < n; ++j) {
            // Adjacent edges share a vertex by construction.
            if (j == i + 1 || (i == 0 && j == n - 1)) continue;
            if (segments_intersect(a1, a2, poly[j], poly[(j + 1) % n])) return false;
        }
    }
    return true;
}

}  // namespace cpsim
