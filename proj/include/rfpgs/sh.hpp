// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "rfpgs/vec.hpp"

namespace rfpgs {

/// Number of real SH basis functions for a given maximum degree.
inline constexpr int sh_basis_count(int degree) { return (degree + 1) * (degree + 1); }

inline constexpr int kShMaxDegree = 3;
inline constexpr int kShMaxBasis = 16;

/// Y_0^0.
inline constexpr double kSh00 = 0.28209479177387814;

namespace detail {
inline constexpr double kSh1 = 0.4886025119029199;
inline constexpr std::array<double, 5> kSh2 = {
    1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
    -1.0925484305920792, 0.5462742152960396};
inline constexpr std::array<double, 7> kSh3 = {
    -0.5900435899266435, 2.890611442640554,  -0.4570457994644658,
    0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
    -0.5900435899266435};
} // namespace detail

/// Evaluates the real SH basis (graphics ordering, index l(l+1)+m) at a unit
/// direction, writing (degree+1)^2 values into out.
inline void eval_sh_basis(int degree, const Vec3& d, double* out) {
    const double x = d.x, y = d.y, z = d.z;
    out[0] = kSh00;
    if (degree < 1)
        return;
    out[1] = -detail::kSh1 * y;
    out[2] = detail::kSh1 * z;
    out[3] = -detail::kSh1 * x;
    if (degree < 2)
        return;
    const double xx = x * x, yy = y * y, zz = z * z;
    const double xy = x * y, yz = y * z, xz = x * z;
    out[4] = detail::kSh2[0] * xy;
    out[5] = detail::kSh2[1] * yz;
    out[6] = detail::kSh2[2] * (2.0 * zz - xx - yy);
    out[7] = detail::kSh2[3] * xz;
    out[8] = detail::kSh2[4] * (xx - yy);
    if (degree < 3)
        return;
    out[9] = detail::kSh3[0] * y * (3.0 * xx - yy);
    out[10] = detail::kSh3[1] * xy * z;
    out[11] = detail::kSh3[2] * y * (4.0 * zz - xx - yy);
    out[12] = detail::kSh3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    out[13] = detail::kSh3[4] * x * (4.0 * zz - xx - yy);
    out[14] = detail::kSh3[5] * z * (xx - yy);
    out[15] = detail::kSh3[6] * x * (xx - 3.0 * yy);
}

/// Per-channel SH coefficient table, channel-major: coeffs[c * basis + i].
struct ShTable {
    int degree = 0;
    int channels = 1;
    std::vector<double> coeffs; // channels * (degree+1)^2

    ShTable() : coeffs(1, 0.0) {}
    ShTable(int degree_, int channels_)
        : degree(degree_), channels(channels_),
          coeffs(static_cast<size_t>(channels_) * sh_basis_count(degree_), 0.0) {
        validate();
    }

    int basis_count() const { return sh_basis_count(degree); }

    void validate() const {
        if (degree < 0 || degree > kShMaxDegree)
            throw std::invalid_argument("ShTable: degree must be in [0, 3]");
        if (channels < 1)
            throw std::invalid_argument("ShTable: need at least one channel");
        if (coeffs.size() != static_cast<size_t>(channels) * basis_count())
            throw std::invalid_argument("ShTable: coefficient array length mismatch");
    }

    double* channel(int c) { return coeffs.data() + static_cast<size_t>(c) * basis_count(); }
    const double* channel(int c) const {
        return coeffs.data() + static_cast<size_t>(c) * basis_count();
    }
};

namespace detail {
inline void check_unit(const Vec3& d) {
    if (std::abs(norm(d) - 1.0) > 1e-6)
        throw std::invalid_argument("eval_sh: direction must be unit length");
}
} // namespace detail

/// Sum_i coeff_i * Y_i(d) for every channel.
inline std::vector<double> eval_sh(const ShTable& table, const Vec3& d) {
    detail::check_unit(d);
    double basis[kShMaxBasis];
    eval_sh_basis(table.degree, d, basis);
    const int nb = table.basis_count();
    std::vector<double> out(table.channels, 0.0);
    for (int c = 0; c < table.channels; ++c) {
        const double* co = table.channel(c);
        double acc = 0.0;
        for (int i = 0; i < nb; ++i)
            acc += co[i] * basis[i];
        out[c] = acc;
    }
    return out;
}

/// Single-channel evaluation against a raw coefficient span.
inline double eval_sh_channel(int degree, std::span<const double> coeffs, const Vec3& d) {
    detail::check_unit(d);
    double basis[kShMaxBasis];
    eval_sh_basis(degree, d, basis);
    double acc = 0.0;
    for (int i = 0; i < sh_basis_count(degree); ++i)
        acc += coeffs[i] * basis[i];
    return acc;
}

/// Gradient of eval_sh with respect to each coefficient: upstream-weighted
/// basis values, laid out like the coefficient table.
inline std::vector<double> grad_sh_coeffs(const ShTable& table, const Vec3& d,
                                          std::span<const double> upstream) {
    detail::check_unit(d);
    if (static_cast<int>(upstream.size()) != table.channels)
        throw std::invalid_argument("grad_sh_coeffs: one upstream value per channel required");
    double basis[kShMaxBasis];
    eval_sh_basis(table.degree, d, basis);
    const int nb = table.basis_count();
    std::vector<double> grads(table.coeffs.size(), 0.0);
    for (int c = 0; c < table.channels; ++c)
        for (int i = 0; i < nb; ++i)
            grads[static_cast<size_t>(c) * nb + i] = upstream[c] * basis[i];
    return grads;
}

} // namespace rfpgs
