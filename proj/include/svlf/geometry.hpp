#pragma once

#include <array>
#include <cmath>
#include <optional>

// Geometry runs in double throughout; learned features and decoders are float.

namespace svlf {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalized(const Vec3& v) { return v / norm(v); }

inline Vec3 cwise_min(const Vec3& a, const Vec3& b) {
    return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}

inline Vec3 cwise_max(const Vec3& a, const Vec3& b) {
    return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}

struct Ray {
    Vec3 origin;
    Vec3 dir;  // unit length

    Vec3 at(double t) const { return origin + dir * t; }
};

struct Aabb {
    Vec3 lo;
    Vec3 hi;

    Vec3 extent() const { return hi - lo; }
    Vec3 center() const { return (lo + hi) * 0.5; }
    bool contains(const Vec3& p, double slack = 0.0) const {
        return p.x >= lo.x - slack && p.x <= hi.x + slack && p.y >= lo.y - slack &&
               p.y <= hi.y + slack && p.z >= lo.z - slack && p.z <= hi.z + slack;
    }
};

struct Interval {
    double t0;
    double t1;
};

// Slab intersection, clipped to t >= 0. Zero direction components are handled
// with an explicit inside-the-slab test instead of relying on inf arithmetic.
// Empty result when the box is missed or lies entirely behind the origin.
// Kept out-of-line so every caller (traversal, oracles) shares one instance.
std::optional<Interval> ray_aabb(const Ray& ray, const Aabb& box);

}  // namespace svlf
