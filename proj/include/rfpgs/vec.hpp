// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>

#include "rfpgs/common.hpp"

namespace rfpgs {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x, y += o.y, z += o.z;
        return *this;
    }
    Vec3& operator-=(const Vec3& o) {
        x -= o.x, y -= o.y, z -= o.z;
        return *this;
    }
    Vec3& operator*=(double s) {
        x *= s, y *= s, z *= s;
        return *this;
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline double norm2(const Vec3& v) { return dot(v, v); }

inline Vec3 normalized(const Vec3& v) {
    const double n = norm(v);
    return n > 0.0 ? v / n : Vec3{0, 0, 0};
}

inline std::ostream& operator<<(std::ostream& os, const Vec3& v) {
    return os << "(" << v.x << ", " << v.y << ", " << v.z << ")";
}

/// Unit quaternion, scalar-first (w, x, y, z). Stored unnormalized; every
/// consumer normalizes through rotation(), so gradients can be taken with
/// respect to the raw components.
struct Quat {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    constexpr Quat() = default;
    constexpr Quat(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}

    double& operator[](int i) { return i == 0 ? w : (i == 1 ? x : (i == 2 ? y : z)); }
    double operator[](int i) const { return i == 0 ? w : (i == 1 ? x : (i == 2 ? y : z)); }

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

    Quat normalized() const {
        const double n = norm();
        return {w / n, x / n, y / n, z / n};
    }
};

inline Quat quat_from_axis_angle(const Vec3& axis, double angle) {
    const Vec3 a = normalized(axis);
    const double h = 0.5 * angle;
    const double s = std::sin(h);
    return {std::cos(h), a.x * s, a.y * s, a.z * s};
}

/// Hamilton product a*b.
inline Quat quat_mul(const Quat& a, const Quat& b) {
    return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

inline Quat quat_conj(const Quat& q) { return {q.w, -q.x, -q.y, -q.z}; }

/// 3x3 rotation matrix columns of the normalized quaternion.
struct Mat3 {
    Vec3 col[3]; // column vectors

    Vec3 operator*(const Vec3& v) const { return col[0] * v.x + col[1] * v.y + col[2] * v.z; }
    /// Transpose-multiply (inverse rotation for orthonormal matrices).
    Vec3 tmul(const Vec3& v) const { return {dot(col[0], v), dot(col[1], v), dot(col[2], v)}; }
};

inline Mat3 rotation_matrix(const Quat& q_raw) {
    const Quat q = q_raw.normalized();
    const double w = q.w, x = q.x, y = q.y, z = q.z;
    Mat3 m;
    m.col[0] = {1 - 2 * (y * y + z * z), 2 * (x * y + w * z), 2 * (x * z - w * y)};
    m.col[1] = {2 * (x * y - w * z), 1 - 2 * (x * x + z * z), 2 * (y * z + w * x)};
    m.col[2] = {2 * (x * z + w * y), 2 * (y * z - w * x), 1 - 2 * (x * x + y * y)};
    return m;
}

/// Rotates v by the normalized quaternion.
inline Vec3 rotate(const Quat& q, const Vec3& v) { return rotation_matrix(q) * v; }

/// Rotates v by the inverse of the normalized quaternion.
inline Vec3 rotate_inv(const Quat& q, const Vec3& v) { return rotation_matrix(q).tmul(v); }

/// Gradient of dot(upstream, rotate(q, v)) with respect to the raw (possibly
/// unnormalized) quaternion components. Includes the normalization Jacobian,
/// so it matches finite differences on the stored components.
inline Quat rotate_grad_q(const Quat& q_raw, const Vec3& v, const Vec3& upstream) {
    const double n = q_raw.norm();
    const Quat q = q_raw.normalized();
    const double w = q.w, x = q.x, y = q.y, z = q.z;

    // d(R(q)v)/dq_i for the unit quaternion, contracted with upstream.
    // dR/dw * v = 2 (q_vec x v)
    const Vec3 dw{2 * (y * v.z - z * v.y),
                  2 * (z * v.x - x * v.z),
                  2 * (x * v.y - y * v.x)};
    // dR/dx * v
    const Vec3 dx{2 * (y * v.y + z * v.z),
                  2 * (y * v.x - 2 * x * v.y - w * v.z),
                  2 * (z * v.x + w * v.y - 2 * x * v.z)};
    // dR/dy * v
    const Vec3 dy{2 * (x * v.y - 2 * y * v.x + w * v.z),
                  2 * (x * v.x + z * v.z),
                  2 * (z * v.y - w * v.x - 2 * y * v.z)};
    // dR/dz * v
    const Vec3 dz{2 * (x * v.z - w * v.y - 2 * z * v.x),
                  2 * (w * v.x - 2 * z * v.y + y * v.z),
                  2 * (x * v.x + y * v.y)};

    Quat g_unit{dot(upstream, dw), dot(upstream, dx), dot(upstream, dy), dot(upstream, dz)};

    // Chain through q = q_raw / |q_raw|:  dL/dq_raw = (I - q q^T) / n * dL/dq.
    const double proj = g_unit.w * w + g_unit.x * x + g_unit.y * y + g_unit.z * z;
    return {(g_unit.w - proj * w) / n, (g_unit.x - proj * x) / n,
            (g_unit.y - proj * y) / n, (g_unit.z - proj * z) / n};
}

/// World-frame spherical angles of a unit direction: azimuth = atan2(y, x)
/// in [-pi, pi), zenith = acos(z) in [0, pi].
inline void direction_to_angles(const Vec3& d, double& azimuth, double& zenith) {
    azimuth = std::atan2(d.y, d.x);
    if (azimuth >= kPi)
        azimuth -= kTwoPi;
    zenith = std::acos(std::clamp(d.z, -1.0, 1.0));
}

inline Vec3 angles_to_direction(double azimuth, double zenith) {
    const double s = std::sin(zenith);
    return {s * std::cos(azimuth), s * std::sin(azimuth), std::cos(zenith)};
}

} // namespace rfpgs
