// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "rfpgs/vec.hpp"

namespace rfpgs {

enum class Projection { Equirectangular, Pinhole };

inline std::string to_string(Projection p) {
    return p == Projection::Equirectangular ? "equirectangular" : "pinhole";
}

inline Projection projection_from_string(const std::string& s) {
    if (s == "equirectangular")
        return Projection::Equirectangular;
    if (s == "pinhole")
        return Projection::Pinhole;
    throw std::invalid_argument("unknown projection: " + s);
}

/// Sensor pose plus the angular raster it queries.
///
/// Camera frame: +x forward, +y left, +z up. Azimuth is measured from +x
/// toward +y in [-pi, pi); zenith from +z in [0, pi]. Pixel (col, row) maps
/// to the its center direction; column 0 is azimuth -fov_az/2, row 0 is the
/// top of the zenith range, which is centered on the horizon (zenith pi/2).
struct Pose {
    Vec3 position{0, 0, 0};
    Quat orientation{1, 0, 0, 0};
    Projection projection = Projection::Equirectangular;
    double fov_az = kTwoPi; // radians, (0, 2pi]
    double fov_zen = kPi;   // radians, (0, pi]
    int width = 2;
    int height = 2;

    void validate() const {
        if (!(fov_az > 0.0 && fov_az <= kTwoPi + 1e-12))
            throw std::invalid_argument("Pose: fov_az must be in (0, 2pi]");
        if (!(fov_zen > 0.0 && fov_zen <= kPi + 1e-12))
            throw std::invalid_argument("Pose: fov_zen must be in (0, pi]");
        if (width < 2 || height < 2)
            throw std::invalid_argument("Pose: raster must be at least 2x2");
    }

    int pixel_count() const { return width * height; }

    double azimuth_min() const { return -0.5 * fov_az; }
    double zenith_min() const { return 0.5 * kPi - 0.5 * fov_zen; }

    /// Pixel pitch in radians (azimuth direction).
    double pitch_az() const { return fov_az / width; }
    double pitch_zen() const { return fov_zen / height; }

    Vec3 forward() const { return rotate(orientation, Vec3{1, 0, 0}); }

    /// Camera-frame direction of a continuous pixel coordinate, where integer
    /// (col, row) addresses the pixel center (i.e. offset by half a pixel
    /// from the raster edge).
    Vec3 pixel_to_direction_cam(double col, double row) const {
        if (projection == Projection::Equirectangular) {
            const double az = azimuth_min() + (col + 0.5) * pitch_az();
            const double zen = zenith_min() + (row + 0.5) * pitch_zen();
            return angles_to_direction(az, zen);
        }
        const double tan_a = std::tan(0.5 * fov_az);
        const double tan_z = std::tan(0.5 * fov_zen);
        const double ndc_x = 2.0 * (col + 0.5) / width - 1.0;
        const double ndc_y = 2.0 * (row + 0.5) / height - 1.0;
        return normalized(Vec3{1.0, ndc_x * tan_a, -ndc_y * tan_z});
    }

    /// World-frame unit direction at the center of pixel (col, row).
    /// Out-of-bounds indices are rejected.
    Vec3 pixel_to_direction(int col, int row) const {
        if (col < 0 || col >= width || row < 0 || row >= height)
            throw std::invalid_argument("pixel_to_direction: pixel out of bounds");
        return rotate(orientation, pixel_to_direction_cam(col, row));
    }

    /// Continuous pixel coordinate of a world direction, such that the
    /// value (col, row) = (c, r) for the center of pixel (c, r). Returns
    /// false when the direction falls outside the raster (or behind the
    /// pinhole image plane).
    bool direction_to_pixel(const Vec3& dir_world, double& col, double& row) const {
        const Vec3 d = rotate_inv(orientation, normalized(dir_world));
        if (projection == Projection::Equirectangular) {
            double az, zen;
            direction_to_angles(d, az, zen);
            // Wrap azimuth into [az_min, az_min + 2pi) so full panoramas
            // cover the seam.
            const double az_min = azimuth_min();
            while (az < az_min)
                az += kTwoPi;
            while (az >= az_min + kTwoPi)
                az -= kTwoPi;
            col = (az - az_min) / pitch_az() - 0.5;
            row = (zen - zenith_min()) / pitch_zen() - 0.5;
            return az <= az_min + fov_az && row >= -0.5 && row <= height - 0.5;
        }
        if (d.x <= 1e-12) {
            col = row = -1.0;
            return false;
        }
        const double tan_a = std::tan(0.5 * fov_az);
        const double tan_z = std::tan(0.5 * fov_zen);
        const double ndc_x = d.y / (d.x * tan_a);
        const double ndc_y = -d.z / (d.x * tan_z);
        col = (ndc_x + 1.0) * 0.5 * width - 0.5;
        row = (ndc_y + 1.0) * 0.5 * height - 0.5;
        return col >= -0.5 && col <= width - 0.5 && row >= -0.5 && row <= height - 0.5;
    }

    /// Raster cell containing a world direction; false when outside.
    bool direction_to_pixel_index(const Vec3& dir_world, int& col, int& row) const {
        double c, r;
        if (!direction_to_pixel(dir_world, c, r))
            return false;
        col = static_cast<int>(std::floor(c + 0.5));
        row = static_cast<int>(std::floor(r + 0.5));
        if (col == width)
            col = width - 1;
        if (row == height)
            row = height - 1;
        return col >= 0 && col < width && row >= 0 && row < height;
    }
};

} // namespace rfpgs
