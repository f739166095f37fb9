#pragma once

// Planar circle through three points, and the chord-circle radius of a
// polyline that turns by a constant angle at every vertex.

#include <cmath>

namespace oracle {

struct Circle {
    double cx = 0.0;
    double cy = 0.0;
    double r = 0.0;
};

inline Circle circumcircle(double ax, double ay, double bx, double by, double cx, double cy) {
    const double d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
    const double a2 = ax * ax + ay * ay;
    const double b2 = bx * bx + by * by;
    const double c2 = cx * cx + cy * cy;
    Circle c;
    c.cx = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
    c.cy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
    c.r = std::hypot(ax - c.cx, ay - c.cy);
    return c;
}

inline double chord_radius(double chord, double turn) { return chord / (2.0 * std::sin(turn / 2.0)); }

}  // namespace oracle
