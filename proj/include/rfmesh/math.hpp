#pragma once

// Small fixed-size vector/matrix types and geometry primitives.
// Everything is double precision; the training math depends on it.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace rfmesh {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }
inline double sqr(double v) { return v * v; }

struct Vec2 {
    double x = 0.0, y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    bool operator==(const Vec2& o) const { return x == o.x && y == o.y; }
};

inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double cross2(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& a) { return std::sqrt(dot(a, a)); }

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}
    explicit Vec3(double s) : x(s), y(s), z(s) {}

    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3 operator*(const Vec3& o) const { return {x * o.x, y * o.y, z * o.z}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm2(const Vec3& a) { return dot(a, a); }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalize(const Vec3& a) {
    double n = norm(a);
    return n > 0.0 ? a / n : Vec3{0.0, 0.0, 0.0};
}
inline Vec3 min(const Vec3& a, const Vec3& b) {
    return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}
inline Vec3 max(const Vec3& a, const Vec3& b) {
    return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}
inline Vec3 lerp(const Vec3& a, const Vec3& b, double t) { return a + (b - a) * t; }
inline Vec3 clamp01(const Vec3& v) { return {clamp01(v.x), clamp01(v.y), clamp01(v.z)}; }
inline double max_component(const Vec3& v) { return std::max(v.x, std::max(v.y, v.z)); }
inline bool is_finite(const Vec3& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

// Row-major 4x4; used only for rigid camera poses and their inverses.
struct Mat4 {
    double m[4][4] = {{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}};

    static Mat4 identity() { return Mat4{}; }

    Mat4 operator*(const Mat4& o) const {
        Mat4 r;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                double s = 0.0;
                for (int k = 0; k < 4; ++k) s += m[i][k] * o.m[k][j];
                r.m[i][j] = s;
            }
        return r;
    }

    Vec3 transform_point(const Vec3& p) const {
        return {m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z + m[0][3],
                m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z + m[1][3],
                m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z + m[2][3]};
    }

    Vec3 transform_dir(const Vec3& d) const {
        return {m[0][0] * d.x + m[0][1] * d.y + m[0][2] * d.z,
                m[1][0] * d.x + m[1][1] * d.y + m[1][2] * d.z,
                m[2][0] * d.x + m[2][1] * d.y + m[2][2] * d.z};
    }

    // Inverse assuming the upper 3x3 is a rotation (camera poses).
    Mat4 rigid_inverse() const {
        Mat4 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
        Vec3 t{m[0][3], m[1][3], m[2][3]};
        Vec3 rt = r.transform_dir(t);
        r.m[0][3] = -rt.x;
        r.m[1][3] = -rt.y;
        r.m[2][3] = -rt.z;
        r.m[3][0] = r.m[3][1] = r.m[3][2] = 0.0;
        r.m[3][3] = 1.0;
        return r;
    }

    Vec3 rotation_col(int j) const { return {m[0][j], m[1][j], m[2][j]}; }
    Vec3 translation() const { return {m[0][3], m[1][3], m[2][3]}; }
};

struct Ray {
    Vec3 origin;
    Vec3 dir;  // unit length by convention

    Vec3 at(double t) const { return origin + dir * t; }
};

struct AABB {
    Vec3 lo{kInf, kInf, kInf};
    Vec3 hi{-kInf, -kInf, -kInf};

    AABB() = default;
    AABB(const Vec3& lo_, const Vec3& hi_) : lo(lo_), hi(hi_) {}

    static AABB cube(double half) { return {Vec3{-half, -half, -half}, Vec3{half, half, half}}; }

    void expand(const Vec3& p) { lo = min(lo, p); hi = max(hi, p); }
    void expand(const AABB& b) { lo = min(lo, b.lo); hi = max(hi, b.hi); }
    Vec3 extent() const { return hi - lo; }
    Vec3 center() const { return (lo + hi) * 0.5; }
    double diagonal() const { return norm(extent()); }
    bool valid() const { return lo.x <= hi.x && lo.y <= hi.y && lo.z <= hi.z; }
    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z &&
               p.z <= hi.z;
    }
};

// Slab test; on hit returns the clipped [t0, t1] with t1 >= max(t0, 0).
inline bool intersect_aabb(const Ray& r, const AABB& b, double& t0, double& t1) {
    t0 = 0.0;
    t1 = kInf;
    for (int a = 0; a < 3; ++a) {
        double o = r.origin[a], d = r.dir[a];
        if (d == 0.0) {
            if (o < b.lo[a] || o > b.hi[a]) return false;
            continue;
        }
        double inv = 1.0 / d;
        double ta = (b.lo[a] - o) * inv;
        double tb = (b.hi[a] - o) * inv;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    return true;
}

// Watertight-enough Moller-Trumbore. Returns false for parallel rays and
// hits outside [t_min, t_max]. Two-sided (no backface culling).
inline bool intersect_triangle(const Ray& r, const Vec3& v0, const Vec3& v1, const Vec3& v2,
                               double t_min, double t_max, double& t, double& u, double& v) {
    Vec3 e1 = v1 - v0;
    Vec3 e2 = v2 - v0;
    Vec3 p = cross(r.dir, e2);
    double det = dot(e1, p);
    if (std::abs(det) < 1e-14) return false;
    double inv = 1.0 / det;
    Vec3 s = r.origin - v0;
    u = dot(s, p) * inv;
    if (u < -1e-12 || u > 1.0 + 1e-12) return false;
    Vec3 q = cross(s, e1);
    v = dot(r.dir, q) * inv;
    if (v < -1e-12 || u + v > 1.0 + 1e-12) return false;
    t = dot(e2, q) * inv;
    return t >= t_min && t <= t_max;
}

}  // namespace rfmesh
