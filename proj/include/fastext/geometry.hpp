#pragma once

// Plane geometry in image coordinates (x right, y down).
//
// Angles are measured counter-clockwise as seen on screen, from the +x axis,
// so a box at angle theta has its width axis along (cos theta, -sin theta)
// and its height axis along (sin theta, cos theta).

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "fastext/error.hpp"

namespace fastext {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
    friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
    friend Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
    friend bool operator==(const Point&, const Point&) = default;
};

inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }

inline Point width_axis(double theta) { return {std::cos(theta), -std::sin(theta)}; }
inline Point height_axis(double theta) { return {std::sin(theta), std::cos(theta)}; }

// Maps an angle onto (-pi/2, pi/2]; a box at theta and theta + pi is the same box.
inline double normalize_angle(double theta) {
    constexpr double pi = std::numbers::pi;
    double t = std::fmod(theta, pi);
    if (t <= -pi / 2) t += pi;
    if (t > pi / 2) t -= pi;
    return t;
}

// Rotates p about `center` by phi, counter-clockwise on screen.
inline Point rotate_about(Point p, Point center, double phi) {
    const Point d = p - center;
    const double c = std::cos(phi), s = std::sin(phi);
    return {center.x + c * d.x + s * d.y, center.y - s * d.x + c * d.y};
}

// Corners of an oriented rectangle in screen-clockwise order starting at the
// top-left corner of the unrotated box.
inline std::array<Point, 4> rect_corners(Point center, double width, double height, double theta) {
    const Point u = 0.5 * width * width_axis(theta);
    const Point v = 0.5 * height * height_axis(theta);
    return {center - u - v, center + u - v, center + u + v, center - u + v};
}

// Signed shoelace area; positive when the vertices run counter-clockwise in
// the mathematical (y up) sense.
inline double signed_area(const std::vector<Point>& pts) {
    double a = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) a += cross(pts[i], pts[(i + 1) % pts.size()]);
    return 0.5 * a;
}

class ConvexPoly {
public:
    ConvexPoly() = default;

    // Accepts either winding; stores vertices with positive signed area.
    explicit ConvexPoly(std::vector<Point> vertices) : vertices_(std::move(vertices)) {
        if (vertices_.size() < 3) throw format_error("polygon needs at least 3 vertices");
        for (const auto& p : vertices_) {
            if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw format_error("polygon has non-finite vertex");
        }
        if (signed_area(vertices_) < 0.0) std::reverse(vertices_.begin(), vertices_.end());
        area_ = signed_area(vertices_);
        if (!(area_ > 0.0)) throw format_error("degenerate polygon (zero area)");
        const std::size_t n = vertices_.size();
        const double tol = 1e-9 * area_;
        for (std::size_t i = 0; i < n; ++i) {
            const Point a = vertices_[i], b = vertices_[(i + 1) % n], c = vertices_[(i + 2) % n];
            if (cross(b - a, c - b) < -tol) throw format_error("polygon is not convex");
        }
    }

    template <std::size_t N>
    explicit ConvexPoly(const std::array<Point, N>& v) : ConvexPoly(std::vector<Point>(v.begin(), v.end())) {}

    const std::vector<Point>& vertices() const { return vertices_; }
    double area() const { return area_; }

    bool contains(Point p) const {
        const std::size_t n = vertices_.size();
        for (std::size_t i = 0; i < n; ++i) {
            if (cross(vertices_[(i + 1) % n] - vertices_[i], p - vertices_[i]) < 0.0) return false;
        }
        return true;
    }

    ConvexPoly translated(Point d) const {
        std::vector<Point> v;
        for (const auto& p : vertices_) v.push_back(p + d);
        return ConvexPoly(std::move(v));
    }

private:
    std::vector<Point> vertices_;
    double area_ = 0.0;
};

// Sutherland-Hodgman clipping of `subject` against the convex `clip`.
inline std::vector<Point> clip_convex(const std::vector<Point>& subject, const ConvexPoly& clip) {
    std::vector<Point> out = subject;
    const auto& cv = clip.vertices();
    for (std::size_t i = 0; i < cv.size() && !out.empty(); ++i) {
        const Point a = cv[i], b = cv[(i + 1) % cv.size()];
        const Point edge = b - a;
        std::vector<Point> in = std::move(out);
        out.clear();
        for (std::size_t j = 0; j < in.size(); ++j) {
            const Point p = in[j], q = in[(j + 1) % in.size()];
            const double sp = cross(edge, p - a);
            const double sq = cross(edge, q - a);
            if (sp >= 0.0) out.push_back(p);
            if ((sp >= 0.0) != (sq >= 0.0)) {
                const double t = sp / (sp - sq);
                out.push_back(p + t * (q - p));
            }
        }
    }
    return out;
}

// Area of the intersection of two convex polygons; symmetric in its arguments.
inline double intersection_area(const ConvexPoly& a, const ConvexPoly& b) {
    const auto ab = clip_convex(a.vertices(), b);
    const auto ba = clip_convex(b.vertices(), a);
    const double x = ab.size() < 3 ? 0.0 : std::abs(signed_area(ab));
    const double y = ba.size() < 3 ? 0.0 : std::abs(signed_area(ba));
    return std::min({0.5 * (x + y), a.area(), b.area()});
}

inline double iou(const ConvexPoly& a, const ConvexPoly& b) {
    const double inter = intersection_area(a, b);
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

} // namespace fastext
