// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "rfpgs/oracle.hpp"
#include "rfpgs/types.hpp"

namespace rfpgs {

struct ArrayConfig {
    int tx_rows = 8, tx_cols = 8;
    int rx_rows = 4, rx_cols = 4;
    double spacing_wavelengths = 0.5;
    double snr_db = 10.0;
};

struct BeamformingReport {
    double chosen_aod_az = 0, chosen_aod_zen = 0;
    double chosen_aoa_az = 0, chosen_aoa_zen = 0;
    double achieved_rate_bps_hz = 0;
    double oracle_capacity_bps_hz = 0;
    double ratio = 0;
    ArrayConfig config;
};

namespace detail {

/// Planar array in the y-z plane, half-wavelength by default; the steering
/// "gain" of a unit-power beam pointed at d0, evaluated toward d.
inline std::complex<double> beam_response(int rows, int cols, double spacing_wl, const Vec3& d,
                                          const Vec3& d0) {
    const double k = kTwoPi; // phases in units of wavelengths
    std::complex<double> acc{0.0, 0.0};
    const double cy = 0.5 * (cols - 1), cz = 0.5 * (rows - 1);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const double py = (c - cy) * spacing_wl;
            const double pz = (r - cz) * spacing_wl;
            const double phase = k * (py * (d.y - d0.y) + pz * (d.z - d0.z));
            acc += std::polar(1.0, phase);
        }
    return acc / std::sqrt(static_cast<double>(rows) * cols);
}

inline Vec3 argmax_direction(const SpectrumGrid& grid, const Pose& pose) {
    const int pl = grid.channel_index("pathloss_db");
    if (pl < 0)
        throw std::invalid_argument("beamform_eval: grid lacks pathloss_db");
    float best = -std::numeric_limits<float>::infinity();
    int best_px = -1;
    for (size_t i = 0; i < grid.pixels(); ++i) {
        if (grid.channel(pl)[i] > best) {
            best = grid.channel(pl)[i];
            best_px = static_cast<int>(i);
        }
    }
    if (best_px < 0 || best <= static_cast<float>(grid.floor_db) + 1e-6f)
        throw std::invalid_argument("beamform_eval: spectrum is empty (all at floor)");
    return pose.pixel_to_direction(best_px % grid.width, best_px / grid.width);
}

} // namespace detail

/// Single-stream spatial beamforming check: steer analog beams at the
/// model's strongest Tx/Rx directions and evaluate the achieved rate over
/// the true MPCs against a phase-coherent upper reference steered at the
/// strongest true path.
inline BeamformingReport beamform_eval(const SpectrumGrid& tx_spectrum, const Pose& tx_pose,
                                       const SpectrumGrid& rx_spectrum, const Pose& rx_pose,
                                       const std::vector<Mpc>& true_mpcs, double wavelength_m,
                                       const ArrayConfig& cfg = {}) {
    if (true_mpcs.empty())
        throw std::invalid_argument("beamform_eval: no true MPCs");
    (void)wavelength_m;

    BeamformingReport rep;
    rep.config = cfg;
    const Vec3 aod = detail::argmax_direction(tx_spectrum, tx_pose);
    const Vec3 aoa = detail::argmax_direction(rx_spectrum, rx_pose);
    direction_to_angles(aod, rep.chosen_aod_az, rep.chosen_aod_zen);
    direction_to_angles(aoa, rep.chosen_aoa_az, rep.chosen_aoa_zen);

    // True strongest path.
    const Mpc* strongest = &true_mpcs[0];
    for (const auto& m : true_mpcs)
        if (m.pathloss_db > strongest->pathloss_db)
            strongest = &m;
    const Vec3 best_aod = angles_to_direction(strongest->aod_az, strongest->aod_zen);
    const Vec3 best_aoa = angles_to_direction(strongest->aoa_az, strongest->aoa_zen);

    const double snr = linear_from_db(cfg.snr_db);
    std::complex<double> h{0.0, 0.0};
    double h_oracle = 0.0;
    for (const auto& m : true_mpcs) {
        const double amp = std::sqrt(m.linear_power());
        const Vec3 m_aod = angles_to_direction(m.aod_az, m.aod_zen);
        const Vec3 m_aoa = angles_to_direction(m.aoa_az, m.aoa_zen);
        const double dist_wl = m.tof_ns * 1e-9 * kSpeedOfLight / wavelength_m;
        const auto phase = std::polar(1.0, -kTwoPi * (dist_wl - std::floor(dist_wl)));
        const auto g_tx = detail::beam_response(cfg.tx_rows, cfg.tx_cols, cfg.spacing_wavelengths,
                                                m_aod, aod);
        const auto g_rx = detail::beam_response(cfg.rx_rows, cfg.rx_cols, cfg.spacing_wavelengths,
                                                m_aoa, aoa);
        h += amp * phase * g_tx * g_rx;
        // Coherent-combining reference with beams on the true strongest path.
        const auto o_tx = detail::beam_response(cfg.tx_rows, cfg.tx_cols, cfg.spacing_wavelengths,
                                                m_aod, best_aod);
        const auto o_rx = detail::beam_response(cfg.rx_rows, cfg.rx_cols, cfg.spacing_wavelengths,
                                                m_aoa, best_aoa);
        h_oracle += amp * std::abs(o_tx) * std::abs(o_rx);
    }
    rep.achieved_rate_bps_hz = std::log2(1.0 + snr * std::norm(h));
    rep.oracle_capacity_bps_hz = std::log2(1.0 + snr * h_oracle * h_oracle);
    rep.ratio = rep.oracle_capacity_bps_hz > 0.0
                    ? rep.achieved_rate_bps_hz / rep.oracle_capacity_bps_hz
                    : 0.0;
    return rep;
}

} // namespace rfpgs
