// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#pragma once

#include <cmath>
#include <stdexcept>

namespace rfpgs {

/// Power ratio -> decibel. Requires p > 0.
inline double db_from_linear(double p) {
    if (!(p > 0.0))
        throw std::invalid_argument("db_from_linear: power ratio must be > 0");
    return 10.0 * std::log10(p);
}

/// Decibel -> power ratio.
inline double linear_from_db(double x) { return std::pow(10.0, x / 10.0); }

/// Free-space path loss in dB over total path length d (meters) at
/// wavelength lambda (meters): 20 log10(lambda / (4 pi d)). Negative for
/// any practical distance.
inline double fspl_db(double wavelength_m, double total_distance_m) {
    if (!(total_distance_m > 0.0))
        throw std::invalid_argument("fspl_db: distance must be > 0");
    return 20.0 * std::log10(wavelength_m / (4.0 * 3.14159265358979323846 * total_distance_m));
}

} // namespace rfpgs
