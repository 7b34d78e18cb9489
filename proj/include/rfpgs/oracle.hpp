// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfpgs/common.hpp"
#include "rfpgs/projection.hpp"
#include "rfpgs/types.hpp"
#include "rfpgs/units.hpp"

namespace rfpgs {

enum class MpcKind { Los, Reflection, Diffraction };

inline std::string to_string(MpcKind k) {
    switch (k) {
    case MpcKind::Los:
        return "los";
    case MpcKind::Reflection:
        return "reflection";
    default:
        return "diffraction";
    }
}

inline MpcKind mpc_kind_from_string(const std::string& s) {
    if (s == "los")
        return MpcKind::Los;
    if (s == "reflection")
        return MpcKind::Reflection;
    if (s == "diffraction")
        return MpcKind::Diffraction;
    throw std::invalid_argument("unknown MPC kind: " + s);
}

/// One multipath component. Angles are world-frame (azimuth/zenith).
struct Mpc {
    double pathloss_db = 0.0;
    double tof_ns = 0.0;
    double aod_az = 0.0, aod_zen = 0.0;
    double aoa_az = 0.0, aoa_zen = 0.0;
    int n_interactions = 0;
    std::optional<Vec3> retx_point;
    MpcKind kind = MpcKind::Los;

    double linear_power() const { return linear_from_db(pathloss_db); }
};

/// Builds an MPC from path geometry; ToF and angles are derived so the type
/// invariants hold by construction.
inline Mpc make_mpc(MpcKind kind, double pathloss_db, double total_distance_m,
                    const Vec3& departure_dir, const Vec3& arrival_source_dir,
                    std::optional<Vec3> retx = std::nullopt) {
    Mpc m;
    m.kind = kind;
    m.pathloss_db = pathloss_db;
    m.tof_ns = total_distance_m / kSpeedOfLight * 1e9;
    direction_to_angles(normalized(departure_dir), m.aod_az, m.aod_zen);
    direction_to_angles(normalized(arrival_source_dir), m.aoa_az, m.aoa_zen);
    m.n_interactions = kind == MpcKind::Los ? 0 : 1;
    m.retx_point = retx;
    return m;
}

/// Convex planar facet with a flat reflection gain and a lambertian albedo.
struct Facet {
    std::vector<Vec3> vertices; // ordered convex polygon
    double gain_db = -3.0;      // specular interaction gain
    double albedo = 0.7;        // visual shade

    Vec3 normal() const {
        return normalized(cross(vertices[1] - vertices[0], vertices[2] - vertices[0]));
    }

    void validate() const {
        if (vertices.size() < 3)
            throw std::invalid_argument("Facet: need at least 3 vertices");
        const Vec3 n = normal();
        for (const auto& v : vertices)
            if (std::abs(dot(v - vertices[0], n)) > 1e-9)
                throw std::invalid_argument("Facet: vertices not coplanar");
        // convex + consistent winding
        const size_t k = vertices.size();
        for (size_t i = 0; i < k; ++i) {
            const Vec3 a = vertices[(i + 1) % k] - vertices[i];
            const Vec3 b = vertices[(i + 2) % k] - vertices[(i + 1) % k];
            if (dot(cross(a, b), n) < -1e-12)
                throw std::invalid_argument("Facet: polygon not convex");
        }
    }

    bool contains(const Vec3& p, double eps = 1e-9) const {
        const Vec3 n = normal();
        const size_t k = vertices.size();
        for (size_t i = 0; i < k; ++i) {
            const Vec3 e = vertices[(i + 1) % k] - vertices[i];
            if (dot(cross(e, p - vertices[i]), n) < -eps)
                return false;
        }
        return true;
    }

    /// Ray-facet intersection; returns the ray parameter or nothing.
    std::optional<double> intersect(const Vec3& origin, const Vec3& dir,
                                    double t_min = 1e-9) const {
        const Vec3 n = normal();
        const double denom = dot(dir, n);
        if (std::abs(denom) < 1e-12)
            return std::nullopt;
        const double t = dot(vertices[0] - origin, n) / denom;
        if (t <= t_min)
            return std::nullopt;
        if (!contains(origin + t * dir))
            return std::nullopt;
        return t;
    }
};

/// Diffracting edge with a monotone toy gain profile
/// A(theta_bend) = a0_db - kappa_db_per_rad * theta_bend.
struct Wedge {
    Vec3 p0, p1;
    double interior_angle = kPi / 2;
    double a0_db = -10.0;
    double kappa_db_per_rad = 15.0;

    void validate() const {
        if (!(interior_angle > 0 && interior_angle < kPi))
            throw std::invalid_argument("Wedge: interior angle must be in (0, pi)");
        if (norm(p1 - p0) < 1e-9)
            throw std::invalid_argument("Wedge: degenerate edge");
    }
};

/// Analytic scene consumed by the ground-truth tracer.
struct OracleScene {
    std::vector<Facet> facets;
    std::vector<Wedge> wedges;
    Aabb bbox;

    void validate() const {
        for (const auto& f : facets)
            f.validate();
        for (const auto& w : wedges)
            w.validate();
    }
};

struct TraceOptions {
    bool include_los = true;
    bool include_reflections = true;
    bool include_diffraction = true;
    int scatter_per_facet = 0;      // synthetic diffuse lobes (off by default)
    double scatter_gain_db = -30.0; // mean gain of a scatter lobe
    std::uint64_t scatter_seed = 0;
};

namespace detail {

/// True when the open segment (a, b) is blocked by any facet. Facets listed
/// in `skip` are ignored (the reflecting facet itself).
inline bool segment_occluded(const OracleScene& scene, const Vec3& a, const Vec3& b,
                             const Facet* skip = nullptr) {
    const Vec3 d = b - a;
    const double len = norm(d);
    if (len < 1e-12)
        return false;
    const Vec3 dir = d / len;
    for (const auto& f : scene.facets) {
        if (&f == skip)
            continue;
        const auto t = f.intersect(a, dir, 1e-6 * len);
        if (t && *t < len * (1.0 - 1e-6))
            return true;
    }
    return false;
}

inline Vec3 mirror_across(const Facet& f, const Vec3& p) {
    const Vec3 n = f.normal();
    return p - 2.0 * dot(p - f.vertices[0], n) * n;
}

} // namespace detail

/// Deterministic LoS + single-bounce image-method + toy wedge-diffraction
/// trace. Gains follow the received/transmitted power decomposition with
/// isotropic antennas: interaction gain (dB) plus free-space loss over the
/// total path length.
inline std::vector<Mpc> trace(const OracleScene& scene, const Vec3& tx, const Vec3& rx,
                              double wavelength_m, const TraceOptions& opt = {}) {
    if (norm(rx - tx) < 1e-9)
        throw std::invalid_argument("trace: tx and rx coincide");
    std::vector<Mpc> out;

    if (opt.include_los && !detail::segment_occluded(scene, tx, rx)) {
        const double d = norm(rx - tx);
        out.push_back(make_mpc(MpcKind::Los, fspl_db(wavelength_m, d), d, rx - tx, tx - rx));
    }

    if (opt.include_reflections) {
        for (const auto& f : scene.facets) {
            const Vec3 tx_img = detail::mirror_across(f, tx);
            const Vec3 seg = rx - tx_img;
            const double seg_len = norm(seg);
            if (seg_len < 1e-9)
                continue;
            const auto t = f.intersect(tx_img, seg / seg_len, 1e-9);
            if (!t || *t >= seg_len * (1.0 - 1e-9))
                continue;
            const Vec3 hit = tx_img + *t * (seg / seg_len);
            if (detail::segment_occluded(scene, tx, hit, &f) ||
                detail::segment_occluded(scene, hit, rx, &f))
                continue;
            const double d1 = norm(hit - tx), d2 = norm(rx - hit);
            const double pl = f.gain_db + fspl_db(wavelength_m, d1 + d2);
            out.push_back(make_mpc(MpcKind::Reflection, pl, d1 + d2, hit - tx, hit - rx, hit));
        }
    }

    if (opt.include_diffraction) {
        for (const auto& w : scene.wedges) {
            // Shortest tx-edge-rx path by ternary search (the objective is
            // convex along the edge).
            double lo = 0.0, hi = 1.0;
            auto len_at = [&](double s) {
                const Vec3 e = w.p0 + s * (w.p1 - w.p0);
                return norm(e - tx) + norm(rx - e);
            };
            for (int it = 0; it < 100; ++it) {
                const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
                if (len_at(m1) <= len_at(m2))
                    hi = m2;
                else
                    lo = m1;
            }
            const double s = 0.5 * (lo + hi);
            const Vec3 e = w.p0 + s * (w.p1 - w.p0);
            if (norm(e - tx) < 1e-9 || norm(rx - e) < 1e-9)
                continue;
            if (detail::segment_occluded(scene, tx, e) || detail::segment_occluded(scene, e, rx))
                continue;
            const Vec3 din = normalized(e - tx), dout = normalized(rx - e);
            const double bend = std::acos(std::clamp(dot(din, dout), -1.0, 1.0));
            const double gain = w.a0_db - w.kappa_db_per_rad * bend;
            const double d1 = norm(e - tx), d2 = norm(rx - e);
            const double pl = gain + fspl_db(wavelength_m, d1 + d2);
            out.push_back(make_mpc(MpcKind::Diffraction, pl, d1 + d2, e - tx, e - rx, e));
        }
    }

    if (opt.scatter_per_facet > 0) {
        Rng rng = make_rng(opt.scatter_seed, 0x5cA77e);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        std::normal_distribution<double> gn(0.0, 4.0);
        for (const auto& f : scene.facets) {
            for (int i = 0; i < opt.scatter_per_facet; ++i) {
                // Rejection-sample a point on the polygon via its bbox in
                // the plane basis.
                const Vec3 n = f.normal();
                Vec3 eu = normalized(f.vertices[1] - f.vertices[0]);
                Vec3 ev = cross(n, eu);
                double ulo = 0, uhi = 0, vlo = 0, vhi = 0;
                for (const auto& v : f.vertices) {
                    const Vec3 d = v - f.vertices[0];
                    ulo = std::min(ulo, dot(d, eu));
                    uhi = std::max(uhi, dot(d, eu));
                    vlo = std::min(vlo, dot(d, ev));
                    vhi = std::max(vhi, dot(d, ev));
                }
                Vec3 p;
                bool ok = false;
                for (int tries = 0; tries < 64 && !ok; ++tries) {
                    p = f.vertices[0] + (ulo + u01(rng) * (uhi - ulo)) * eu +
                        (vlo + u01(rng) * (vhi - vlo)) * ev;
                    ok = f.contains(p, 1e-9);
                }
                if (!ok)
                    continue;
                if (detail::segment_occluded(scene, tx, p, &f) ||
                    detail::segment_occluded(scene, p, rx, &f))
                    continue;
                const double d1 = norm(p - tx), d2 = norm(rx - p);
                const double pl = opt.scatter_gain_db + gn(rng) + fspl_db(wavelength_m, d1 + d2);
                out.push_back(make_mpc(MpcKind::Reflection, pl, d1 + d2, p - tx, p - rx, p));
            }
        }
    }
    return out;
}

struct PsfConfig {
    double beamwidth_rad = 0.0; // FWHM of the main lobe; 0 disables the blur
};

namespace detail {

inline void blur_power_raster(std::vector<double>& power, const Pose& pose, double beamwidth_rad) {
    if (beamwidth_rad <= 0.0)
        return;
    const bool wrap = pose.projection == Projection::Equirectangular && pose.fov_az >= kTwoPi - 1e-9;
    auto kernel_for = [&](double pitch) {
        const double sigma_px = beamwidth_rad / 2.3548200450309493 / pitch;
        const int half = std::max(1, static_cast<int>(std::ceil(3.0 * sigma_px)));
        std::vector<double> k(static_cast<size_t>(2 * half + 1));
        double s = 0.0;
        for (int i = -half; i <= half; ++i) {
            k[static_cast<size_t>(i + half)] = std::exp(-0.5 * i * i / (sigma_px * sigma_px));
            s += k[static_cast<size_t>(i + half)];
        }
        for (auto& v : k)
            v /= s;
        return k;
    };
    const auto kx = kernel_for(pose.pitch_az());
    const auto ky = kernel_for(pose.pitch_zen());
    const int hx = static_cast<int>(kx.size() / 2), hy = static_cast<int>(ky.size() / 2);
    std::vector<double> tmp(power.size(), 0.0);
    for (int r = 0; r < pose.height; ++r)
        for (int c = 0; c < pose.width; ++c) {
            double acc = 0.0;
            for (int i = -hx; i <= hx; ++i) {
                int cc = c + i;
                if (wrap) {
                    cc = (cc % pose.width + pose.width) % pose.width;
                } else if (cc < 0 || cc >= pose.width) {
                    continue;
                }
                acc += kx[static_cast<size_t>(i + hx)] *
                       power[static_cast<size_t>(r) * pose.width + cc];
            }
            tmp[static_cast<size_t>(r) * pose.width + c] = acc;
        }
    for (int c = 0; c < pose.width; ++c)
        for (int r = 0; r < pose.height; ++r) {
            double acc = 0.0;
            for (int i = -hy; i <= hy; ++i) {
                const int rr = r + i;
                if (rr < 0 || rr >= pose.height)
                    continue;
                acc += ky[static_cast<size_t>(i + hy)] *
                       tmp[static_cast<size_t>(rr) * pose.width + c];
            }
            power[static_cast<size_t>(r) * pose.width + c] = acc;
        }
}

inline SpectrumGrid bin_mpcs(const std::vector<Mpc>& mpcs, const Pose& pose, double floor_db,
                             bool by_departure, const PsfConfig& psf, int* dropped) {
    pose.validate();
    SpectrumGrid grid(pose.width, pose.height, {"pathloss_db"}, floor_db);
    std::vector<double> power(grid.pixels(), 0.0);
    int drop = 0;
    for (const auto& m : mpcs) {
        const Vec3 dir = by_departure ? angles_to_direction(m.aod_az, m.aod_zen)
                                      : angles_to_direction(m.aoa_az, m.aoa_zen);
        int col, row;
        if (!pose.direction_to_pixel_index(dir, col, row)) {
            ++drop;
            continue;
        }
        power[static_cast<size_t>(row) * pose.width + col] += m.linear_power();
    }
    detail::blur_power_raster(power, pose, psf.beamwidth_rad);
    float* pl = grid.channel(0);
    const double floor_lin = linear_from_db(floor_db);
    for (size_t i = 0; i < power.size(); ++i)
        pl[i] = static_cast<float>(power[i] > floor_lin ? db_from_linear(power[i]) : floor_db);
    if (dropped)
        *dropped = drop;
    return grid;
}

} // namespace detail

/// Rx-side spectrum: deposits every MPC's linear power into the pixel that
/// contains its arrival direction; colliding MPCs add in linear power.
inline SpectrumGrid mpcs_to_spectrum(const std::vector<Mpc>& mpcs, const Pose& pose,
                                     double floor_db, const PsfConfig& psf = {},
                                     int* dropped = nullptr) {
    return detail::bin_mpcs(mpcs, pose, floor_db, false, psf, dropped);
}

/// Tx-side spectrum: same deposit rule, binned by departure direction.
inline SpectrumGrid mpcs_to_tx_spectrum(const std::vector<Mpc>& mpcs, const Pose& pose,
                                        double floor_db, const PsfConfig& psf = {},
                                        int* dropped = nullptr) {
    return detail::bin_mpcs(mpcs, pose, floor_db, true, psf, dropped);
}

/// Lambertian render for the visual training stage: per-pixel nearest facet,
/// shade = albedo * max(0, n.light) plus a small ambient term. Depth is the
/// ray distance; background pixels carry `sky` and depth 0 with valid=false.
struct VisualRender {
    int width = 0, height = 0;
    std::vector<double> shade;
    std::vector<double> depth;
    std::vector<char> valid;
};

inline VisualRender render_visual(const OracleScene& scene, const Pose& pose, const Vec3& light,
                                  double sky = 0.05, double ambient = 0.15) {
    pose.validate();
    VisualRender out;
    out.width = pose.width;
    out.height = pose.height;
    const size_t n = static_cast<size_t>(pose.width) * pose.height;
    out.shade.assign(n, sky);
    out.depth.assign(n, 0.0);
    out.valid.assign(n, 0);
    const Vec3 l = normalized(light);
    parallel_for(pose.height, [&](std::int64_t rb, std::int64_t re) {
        for (std::int64_t row = rb; row < re; ++row)
            for (int col = 0; col < pose.width; ++col) {
                const Vec3 d = pose.pixel_to_direction(col, static_cast<int>(row));
                double best = 0.0;
                const Facet* best_f = nullptr;
                for (const auto& f : scene.facets) {
                    const auto t = f.intersect(pose.position, d, 1e-9);
                    if (t && (!best_f || *t < best)) {
                        best = *t;
                        best_f = &f;
                    }
                }
                if (!best_f)
                    continue;
                const size_t px = static_cast<size_t>(row) * pose.width + col;
                Vec3 fn = best_f->normal();
                if (dot(fn, d) > 0)
                    fn = -fn; // shade the side facing the camera
                out.shade[px] = best_f->albedo * (ambient + (1.0 - ambient) * std::max(0.0, dot(fn, l)));
                out.depth[px] = best;
                out.valid[px] = 1;
            }
    });
    return out;
}

// ---------------------------------------------------------------------------
// MPC list files. The CSV format doubles as the ingestion path for external
// measured datasets.

inline constexpr const char* kMpcCsvHeader =
    "pathloss_db,tof_ns,aod_az,aod_zen,aoa_az,aoa_zen,kind,retx_x,retx_y,retx_z";

inline void save_mpcs_csv(const std::vector<Mpc>& mpcs, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot write " + path.string());
    os << kMpcCsvHeader << "\n";
    os.precision(17);
    for (const auto& m : mpcs) {
        os << m.pathloss_db << "," << m.tof_ns << "," << m.aod_az << "," << m.aod_zen << ","
           << m.aoa_az << "," << m.aoa_zen << "," << to_string(m.kind) << ",";
        if (m.retx_point)
            os << m.retx_point->x << "," << m.retx_point->y << "," << m.retx_point->z;
        else
            os << ",,";
        os << "\n";
    }
}

inline std::vector<Mpc> load_mpcs_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is)
        throw std::runtime_error("cannot read " + path.string());
    std::string line;
    if (!std::getline(is, line))
        throw std::runtime_error("empty MPC file: " + path.string());
    if (line != kMpcCsvHeader)
        throw std::runtime_error("unexpected MPC CSV header in " + path.string());
    std::vector<Mpc> out;
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        cells.resize(10);
        Mpc m;
        m.pathloss_db = std::stod(cells[0]);
        m.tof_ns = std::stod(cells[1]);
        m.aod_az = std::stod(cells[2]);
        m.aod_zen = std::stod(cells[3]);
        m.aoa_az = std::stod(cells[4]);
        m.aoa_zen = std::stod(cells[5]);
        m.kind = mpc_kind_from_string(cells[6]);
        m.n_interactions = m.kind == MpcKind::Los ? 0 : 1;
        if (!cells[7].empty())
            m.retx_point = Vec3{std::stod(cells[7]), std::stod(cells[8]), std::stod(cells[9])};
        out.push_back(m);
    }
    return out;
}

} // namespace rfpgs
