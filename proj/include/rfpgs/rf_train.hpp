// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "rfpgs/adam.hpp"
#include "rfpgs/losses.hpp"
#include "rfpgs/splat_backward.hpp"
#include "rfpgs/types.hpp"
#include "rfpgs/units.hpp"

namespace rfpgs {

enum class MergeMode { MinMerge, MaxMerge };

inline std::string to_string(MergeMode m) {
    return m == MergeMode::MinMerge ? "min_merge" : "max_merge";
}

enum class SampleProvenance { OracleClean, OracleBeamformed, MeasuredMpc };

/// One RF training sample: a pose and its observed path-loss spectrum.
struct RfSample {
    Pose pose;
    SpectrumGrid spectrum;
    SampleProvenance provenance = SampleProvenance::OracleClean;

    void validate() const {
        if (spectrum.width != pose.width || spectrum.height != pose.height)
            throw std::invalid_argument("RfSample: spectrum dimensions must match the pose raster");
        if (spectrum.channel_index("pathloss_db") < 0)
            throw std::invalid_argument("RfSample: spectrum lacks a pathloss_db channel");
    }
};

struct RfTrainConfig {
    int iterations = 6000;
    double lambda_mv = 0.0; // multi-view loss weight; 0 disables
    MergeMode mv_mode = MergeMode::MinMerge;
    double neighbor_angle_thresh = deg2rad(30.0);
    double neighbor_dist_min = 0.0;
    double neighbor_dist_max = 2.0;
    int max_neighbors = 4;
    int patch_base = 5;     // odd, >= 3
    int patch_cap = 9;
    double patch_ref_depth = 4.0; // depth at which the base size applies [m]
    int patch_stride = 4;
    int finetune_cap = 500;
    double lr_sh = 0.05;
    double lr_opacity = 5e-3;
    bool train_opacity = false; // per-Gaussian opacity fine-shift (off: frozen)
    double floor_weight = 0.25; // weight of at-floor target pixels
    double init_gain_db = -60.0;
    double alpha_min = 1.0 / 255.0;
    double los_clearance = 0.1; // occluders must be nearer than |tx-rx| minus this
    std::uint64_t seed = 1;

    void validate() const {
        if (finetune_cap <= 0)
            throw std::invalid_argument("RfTrainConfig: finetune_cap must be positive");
        if (patch_base < 3 || patch_base % 2 == 0 || patch_cap < patch_base || patch_cap % 2 == 0)
            throw std::invalid_argument("RfTrainConfig: patch sizes must be odd and >= 3");
        if (iterations < 0)
            throw std::invalid_argument("RfTrainConfig: iterations must be >= 0");
    }
};

/// Frozen-geometry render of one pose, reduced to what the RF stage needs:
/// per-pixel FSPL, intersection points, and the (gaussian, weight) hit lists
/// that make the predicted gain linear in the SH coefficients.
struct RfPixelCache {
    Pose pose;
    int width = 0, height = 0;
    std::vector<float> fspl_db;      // 20 log10(lambda / 4 pi (d1+d2))
    std::vector<float> alpha_acc;    // accumulated blend weight per pixel
    std::vector<char> valid;         // accumulated alpha >= alpha_min
    std::vector<char> is_los;
    std::vector<float> los_value_db;
    std::vector<Vec3> intersections; // x_int = x_rx + d2 * d
    std::vector<double> depth;       // d2
    std::vector<Vec3> pixel_dirs;
    std::vector<Vec3> normals;       // blended unit normals
    std::vector<int> top_gauss;      // strongest contributor per pixel (-1 if none)
    std::vector<double> sh_basis;    // kShMaxBasis per pixel, at -d
    std::vector<std::uint32_t> hit_offsets; // pixels+1
    std::vector<std::pair<std::uint32_t, float>> hits; // (gaussian, blend weight)

    size_t pixels() const { return static_cast<size_t>(width) * height; }
};

/// Builds the per-pixel cache with one full differentiable render.
inline RfPixelCache build_rf_cache(const SceneModel& scene, const Pose& pose,
                                   const RfTrainConfig& cfg) {
    const int rf = scene.sh_channel_index("rf_gain");
    if (rf < 0)
        throw std::invalid_argument("build_rf_cache: scene lacks an 'rf_gain' SH channel");
    RenderOptions opts;
    opts.channel_ids = {rf};
    opts.keep_contributors = true;
    opts.top_contributors = 1 << 20; // keep every contributor
    const RenderContext ctx = build_render_context(scene, pose, opts);
    const RenderOutput out = render(ctx);

    RfPixelCache cache;
    cache.pose = pose;
    cache.width = out.width;
    cache.height = out.height;
    const size_t npx = out.pixels();
    cache.fspl_db.assign(npx, 0.0f);
    cache.alpha_acc.assign(npx, 0.0f);
    cache.valid.assign(npx, 0);
    cache.is_los.assign(npx, 0);
    cache.los_value_db.assign(npx, 0.0f);
    cache.intersections.assign(npx, Vec3{0, 0, 0});
    cache.depth.assign(npx, 0.0);
    cache.pixel_dirs = ctx.pixel_dirs;
    cache.normals = out.normal;
    cache.top_gauss.assign(npx, -1);
    cache.sh_basis = ctx.sh_basis;
    cache.hit_offsets.assign(npx + 1, 0);

    const double lambda = scene.wavelength_m();
    const Vec3 tx = scene.tx_position;

    for (size_t px = 0; px < npx; ++px) {
        cache.hit_offsets[px + 1] = cache.hit_offsets[px];
        if (out.alpha[px] < cfg.alpha_min || out.alpha_depth[px] <= 1e-9)
            continue;
        cache.valid[px] = 1;
        cache.alpha_acc[px] = static_cast<float>(out.alpha[px]);
        const double d2 = out.depth[px];
        const Vec3 x_int = pose.position + d2 * ctx.pixel_dirs[px];
        const double d1 = norm(x_int - tx);
        cache.depth[px] = d2;
        cache.intersections[px] = x_int;
        cache.fspl_db[px] = static_cast<float>(fspl_db(lambda, d1 + d2));
        float best_w = -1.0f;
        for (const auto& c : out.contributors[px]) {
            cache.hits.emplace_back(static_cast<std::uint32_t>(c.gaussian), c.weight);
            if (c.weight > best_w) {
                best_w = c.weight;
                cache.top_gauss[px] = c.gaussian;
            }
        }
        cache.hit_offsets[px + 1] = static_cast<std::uint32_t>(cache.hits.size());
    }

    // LoS: the raster cell containing the Tx direction, if nothing renders
    // nearer than the Tx along that ray.
    int col = 0, row = 0;
    const double d_los = norm(tx - pose.position);
    if (d_los > 1e-9 && pose.direction_to_pixel_index(normalized(tx - pose.position), col, row)) {
        const size_t px = static_cast<size_t>(row) * pose.width + col;
        const bool occluded = cache.valid[px] && cache.depth[px] < d_los - cfg.los_clearance;
        if (!occluded) {
            cache.is_los[px] = 1;
            cache.los_value_db[px] = static_cast<float>(fspl_db(lambda, d_los));
        }
    }
    return cache;
}

/// Surface interaction gain in dB: the blend-weight-normalized average of
/// the per-Gaussian SH values along the ray. Normalization keeps partially
/// covered pixels from biasing dark (negative-dB) gains toward zero.
inline double cache_gain_db(const RfPixelCache& cache, const SceneModel& scene, int rf_channel,
                            size_t px) {
    const int nb = sh_basis_count(scene.sh_degree);
    const double* basis = &cache.sh_basis[px * kShMaxBasis];
    double gain = 0.0;
    for (std::uint32_t h = cache.hit_offsets[px]; h < cache.hit_offsets[px + 1]; ++h) {
        const auto& [gi, w] = cache.hits[h];
        const double* co = scene.gaussians[gi].sh.channel(rf_channel);
        double val = 0.0;
        for (int i = 0; i < nb; ++i)
            val += co[i] * basis[i];
        gain += w * val;
    }
    return cache.alpha_acc[px] > 1e-12f ? gain / cache.alpha_acc[px] : gain;
}

/// Unclamped per-pixel prediction (dB); floor/LoS handling included.
inline void cache_predict(const RfPixelCache& cache, const SceneModel& scene, int rf_channel,
                          double floor_db, std::vector<double>& pred_raw,
                          std::vector<double>& pred_clamped) {
    const size_t npx = cache.pixels();
    pred_raw.assign(npx, floor_db);
    pred_clamped.assign(npx, floor_db);
    for (size_t px = 0; px < npx; ++px) {
        if (cache.is_los[px]) {
            pred_raw[px] = cache.los_value_db[px];
            pred_clamped[px] = std::max<double>(cache.los_value_db[px], floor_db);
        } else if (cache.valid[px]) {
            pred_raw[px] = cache_gain_db(cache, scene, rf_channel, px) + cache.fspl_db[px];
            pred_clamped[px] = std::max(pred_raw[px], floor_db);
        }
    }
}

/// Full-structure path-loss prediction at a pose (Rx-side spectrum): blended
/// interaction gain plus free-space loss over the reconstructed path, with
/// LoS pixels carrying pure FSPL at unit gain. Values are clamped at the
/// floor; uncovered pixels stay at the floor.
inline SpectrumGrid predict_pathloss(const SceneModel& scene, const Pose& pose,
                                     double floor_db, const RfTrainConfig& cfg = {}) {
    const int rf = scene.sh_channel_index("rf_gain");
    const RfPixelCache cache = build_rf_cache(scene, pose, cfg);
    std::vector<double> raw, clamped;
    cache_predict(cache, scene, rf, floor_db, raw, clamped);
    SpectrumGrid grid(pose.width, pose.height, {"pathloss_db"}, floor_db);
    float* pl = grid.channel(0);
    for (size_t px = 0; px < cache.pixels(); ++px)
        pl[px] = static_cast<float>(clamped[px]);
    return grid;
}

/// Neighbor views for the multi-view loss: forward axes within the angular
/// threshold and positions within the distance range; the sample itself is
/// excluded by index.
inline std::vector<int> select_neighbor_views(int sample_idx, const std::vector<RfSample>& samples,
                                              const RfTrainConfig& cfg) {
    if (samples.empty())
        throw std::invalid_argument("select_neighbor_views: empty dataset");
    const auto& ref = samples[static_cast<size_t>(sample_idx)];
    const Vec3 fwd = ref.pose.forward();
    std::vector<std::pair<double, int>> scored;
    for (int i = 0; i < static_cast<int>(samples.size()); ++i) {
        if (i == sample_idx)
            continue;
        const auto& s = samples[static_cast<size_t>(i)];
        const double ang = std::acos(std::clamp(dot(fwd, s.pose.forward()), -1.0, 1.0));
        const double dist = norm(s.pose.position - ref.pose.position);
        if (ang <= cfg.neighbor_angle_thresh && dist >= cfg.neighbor_dist_min &&
            dist <= cfg.neighbor_dist_max)
            scored.emplace_back(dist, i);
    }
    std::sort(scored.begin(), scored.end());
    std::vector<int> out;
    for (size_t i = 0; i < scored.size() && static_cast<int>(i) < cfg.max_neighbors; ++i)
        out.push_back(scored[i].second);
    return out;
}

/// A reprojected reference patch: per-pixel values from a neighbor's
/// observed spectrum, with validity flags.
struct Patch {
    std::vector<double> values;
    std::vector<char> valid;
};

/// Reprojects the world intersections of a pixel patch into a neighbor view
/// and fetches the neighbor's observed path-loss values.
inline Patch project_patch(const RfPixelCache& cache, const std::vector<size_t>& patch_pixels,
                           const RfSample& neighbor) {
    Patch out;
    out.values.assign(patch_pixels.size(), 0.0);
    out.valid.assign(patch_pixels.size(), 0);
    const int pl = neighbor.spectrum.channel_index("pathloss_db");
    for (size_t k = 0; k < patch_pixels.size(); ++k) {
        const size_t px = patch_pixels[k];
        if (!cache.valid[px] || cache.is_los[px])
            continue;
        const Vec3 to_int = cache.intersections[px] - neighbor.pose.position;
        if (norm(to_int) < 1e-9)
            continue;
        int col = 0, row = 0;
        if (!neighbor.pose.direction_to_pixel_index(to_int, col, row))
            continue;
        out.values[k] = neighbor.spectrum.at(pl, col, row);
        out.valid[k] = 1;
    }
    return out;
}

/// Elementwise min- or max-merge over the valid entries of several patches.
inline Patch merge_patches(const std::vector<Patch>& patches, MergeMode mode) {
    if (patches.empty())
        throw std::invalid_argument("merge_patches: need at least one patch");
    const size_t n = patches[0].values.size();
    Patch out;
    out.values.assign(n, 0.0);
    out.valid.assign(n, 0);
    for (const auto& p : patches) {
        if (p.values.size() != n)
            throw std::invalid_argument("merge_patches: patch size mismatch");
        for (size_t i = 0; i < n; ++i) {
            if (!p.valid[i])
                continue;
            if (!out.valid[i]) {
                out.values[i] = p.values[i];
                out.valid[i] = 1;
            } else {
                out.values[i] = mode == MergeMode::MinMerge ? std::min(out.values[i], p.values[i])
                                                            : std::max(out.values[i], p.values[i]);
            }
        }
    }
    return out;
}

/// Adaptive patch around an anchor pixel: base size at the reference depth,
/// growing for nearer surfaces, clamped odd within [3, cap].
inline std::vector<size_t> adaptive_patch_pixels(const RfPixelCache& cache, int col, int row,
                                                 const RfTrainConfig& cfg) {
    const size_t anchor = static_cast<size_t>(row) * cache.width + col;
    double size_f = cfg.patch_base;
    if (cache.valid[anchor] && cache.depth[anchor] > 1e-6)
        size_f = cfg.patch_base * cfg.patch_ref_depth / cache.depth[anchor];
    int size = static_cast<int>(std::lround(size_f));
    size = std::clamp(size | 1, 3, cfg.patch_cap); // force odd
    const int half = size / 2;
    std::vector<size_t> out;
    out.reserve(static_cast<size_t>(size) * size);
    for (int dr = -half; dr <= half; ++dr)
        for (int dc = -half; dc <= half; ++dc) {
            const int r = row + dr, c = col + dc;
            if (r < 0 || r >= cache.height || c < 0 || c >= cache.width)
                continue;
            out.push_back(static_cast<size_t>(r) * cache.width + c);
        }
    return out;
}

struct RfTrainReport {
    int iterations_run = 0;
    MergeMode mv_mode = MergeMode::MinMerge;
    double lambda_mv = 0.0;
    double lr_scale = 1.0;
    double final_l1 = 0.0;
    double final_mv = 0.0;
    int mv_skipped_patches = 0;
};

namespace detail {

/// Adam over a flat parameter vector (the RF coefficient block).
class AdamVector {
public:
    explicit AdamVector(size_t n) : m_(n, 0.0), v_(n, 0.0) {}

    void step(std::vector<double*>& params, const std::vector<double>& grads, double lr) {
        ++t_;
        const double c1 = 1.0 - std::pow(0.9, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(0.999, static_cast<double>(t_));
        for (size_t i = 0; i < params.size(); ++i) {
            double& m = m_[i];
            double& v = v_[i];
            const double g = grads[i];
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            *params[i] -= lr * (m / c1) / (std::sqrt(v / c2) + 1e-15);
        }
    }

private:
    std::vector<double> m_, v_;
    std::int64_t t_ = 0;
};

} // namespace detail

/// Stage-2 trainer: freezes geometry and fits the per-Gaussian SH
/// interaction-gain patterns to observed path-loss spectra, optionally with
/// the multi-view consistency loss. Geometry parameters receive no updates;
/// their hash is bit-identical before and after.
inline RfTrainReport train_rf(SceneModel& scene, const std::vector<RfSample>& samples,
                              const RfTrainConfig& cfg, double lr_scale = 1.0,
                              const std::filesystem::path& outdir = {}) {
    cfg.validate();
    if (samples.empty())
        throw std::invalid_argument("train_rf: no samples");
    for (const auto& s : samples)
        s.validate();
    const int rf = scene.sh_channel_index("rf_gain");
    if (rf < 0)
        throw std::invalid_argument("train_rf: scene lacks an 'rf_gain' SH channel");

    RfTrainReport report;
    report.mv_mode = cfg.mv_mode;
    report.lambda_mv = cfg.lambda_mv;
    report.lr_scale = lr_scale;

    if (cfg.iterations == 0)
        return report;

    const int nb = sh_basis_count(scene.sh_degree);
    const size_t n_gauss = scene.gaussians.size();

    // Dark initialization: untouched directions stay below the floor.
    bool all_zero = true;
    for (const auto& g : scene.gaussians)
        for (int i = 0; i < nb && all_zero; ++i)
            if (g.sh.channel(rf)[i] != 0.0)
                all_zero = false;
    if (all_zero)
        for (auto& g : scene.gaussians)
            g.sh.channel(rf)[0] = cfg.init_gain_db / kSh00;

    // Frozen geometry: caches and neighbor reprojections are computed once.
    std::vector<RfPixelCache> caches;
    caches.reserve(samples.size());
    for (const auto& s : samples)
        caches.push_back(build_rf_cache(scene, s.pose, cfg));

    std::vector<std::vector<int>> neighbors(samples.size());
    if (cfg.lambda_mv > 0.0)
        for (int i = 0; i < static_cast<int>(samples.size()); ++i)
            neighbors[static_cast<size_t>(i)] = select_neighbor_views(i, samples, cfg);

    // Parameter block: the rf channel of every gaussian (+ optional logits).
    std::vector<double*> params;
    params.reserve(n_gauss * static_cast<size_t>(nb) + (cfg.train_opacity ? n_gauss : 0));
    for (auto& g : scene.gaussians)
        for (int i = 0; i < nb; ++i)
            params.push_back(&g.sh.channel(rf)[i]);
    if (cfg.train_opacity)
        for (auto& g : scene.gaussians)
            params.push_back(&g.alpha_logit);
    detail::AdamVector opt(params.size());
    std::vector<double> grads(params.size(), 0.0);

    std::ofstream loss_csv;
    if (!outdir.empty()) {
        std::filesystem::create_directories(outdir);
        loss_csv.open(outdir / "loss_rf.csv");
        loss_csv << "iteration,l1,mv,total,mv_mode,lambda_mv\n";
    }

    std::vector<double> pred_raw, pred_clamped, d_pred;
    for (int it = 0; it < cfg.iterations; ++it) {
        // Round-robin keeps a "full dataset pass" exactly that many steps.
        const int si = it % static_cast<int>(samples.size());
        const auto& sample = samples[static_cast<size_t>(si)];
        auto& cache = caches[static_cast<size_t>(si)];
        if (cfg.train_opacity)
            cache = build_rf_cache(scene, sample.pose, cfg); // weights moved
        const size_t npx = cache.pixels();
        const int pl = sample.spectrum.channel_index("pathloss_db");
        const double floor = sample.spectrum.floor_db;

        cache_predict(cache, scene, rf, floor, pred_raw, pred_clamped);

        // Weighted L1 with a one-sided hinge at floor targets.
        d_pred.assign(npx, 0.0);
        double l1 = 0.0, wsum = 0.0;
        for (size_t px = 0; px < npx; ++px) {
            const double target = sample.spectrum.channel(pl)[px];
            const bool at_floor = target <= floor + 1e-6;
            const double w = at_floor ? cfg.floor_weight : 1.0;
            wsum += w;
            const double e = pred_raw[px] - target;
            if (at_floor && e <= 0.0)
                continue; // satisfied: prediction at or below the floor
            l1 += w * std::abs(e);
            d_pred[px] = w * (e > 0.0 ? 1.0 : -1.0);
        }
        if (wsum > 0.0) {
            l1 /= wsum;
            for (auto& v : d_pred)
                v /= wsum;
        }

        // Multi-view consistency on adaptive patches.
        double mv = 0.0;
        if (cfg.lambda_mv > 0.0 && !neighbors[static_cast<size_t>(si)].empty()) {
            for (int row = cfg.patch_cap / 2; row < cache.height - cfg.patch_cap / 2;
                 row += cfg.patch_stride) {
                for (int col = cfg.patch_cap / 2; col < cache.width - cfg.patch_cap / 2;
                     col += cfg.patch_stride) {
                    const auto pixels = adaptive_patch_pixels(cache, col, row, cfg);
                    std::vector<Patch> projected;
                    for (int ni : neighbors[static_cast<size_t>(si)])
                        projected.push_back(
                            project_patch(cache, pixels, samples[static_cast<size_t>(ni)]));
                    const Patch ref = merge_patches(projected, cfg.mv_mode);
                    std::vector<double> a(pixels.size());
                    std::vector<char> valid(pixels.size());
                    bool any = false;
                    for (size_t k = 0; k < pixels.size(); ++k) {
                        a[k] = pred_clamped[pixels[k]];
                        valid[k] = static_cast<char>(ref.valid[k] && cache.valid[pixels[k]] &&
                                                     !cache.is_los[pixels[k]]);
                        any |= valid[k] != 0;
                    }
                    if (!any)
                        continue;
                    bool skipped = false;
                    std::vector<double> d_a;
                    const double term = ncc_loss(a, ref.values, valid, &skipped, &d_a);
                    if (skipped) {
                        ++report.mv_skipped_patches;
                        continue;
                    }
                    mv += term;
                    for (size_t k = 0; k < pixels.size(); ++k)
                        if (valid[k] && pred_raw[pixels[k]] > floor) // clamp gradient mask
                            d_pred[pixels[k]] += cfg.lambda_mv * d_a[k];
                }
            }
            mv *= cfg.lambda_mv;
        }

        // Pull back to the coefficients (and optionally the logits).
        std::fill(grads.begin(), grads.end(), 0.0);
        if (!cfg.train_opacity) {
            for (size_t px = 0; px < npx; ++px) {
                const double g = d_pred[px];
                if (g == 0.0 || cache.is_los[px] || !cache.valid[px])
                    continue;
                const double inv_a = cache.alpha_acc[px] > 1e-12f ? 1.0 / cache.alpha_acc[px] : 1.0;
                const double* basis = &cache.sh_basis[px * kShMaxBasis];
                for (std::uint32_t h = cache.hit_offsets[px]; h < cache.hit_offsets[px + 1]; ++h) {
                    const auto& [gi, w] = cache.hits[h];
                    double* dst = &grads[static_cast<size_t>(gi) * nb];
                    const double s = g * w * inv_a;
                    for (int i = 0; i < nb; ++i)
                        dst[i] += s * basis[i];
                }
            }
        } else {
            // Opacity refinement shifts the blend weights, so run the full
            // backward through the renderer for this sample.
            RenderOptions opts;
            opts.channel_ids = {rf};
            const RenderContext ctx = build_render_context(scene, sample.pose, opts);
            const RenderOutput out = render(ctx);
            RenderUpstream up;
            up.d_channels.assign(1, std::vector<double>(npx, 0.0));
            up.d_depth.assign(npx, 0.0);
            up.d_alpha.assign(npx, 0.0);
            for (size_t px = 0; px < npx; ++px) {
                const double g = d_pred[px];
                if (g == 0.0 || cache.is_los[px] || !cache.valid[px])
                    continue;
                // gain = M / A: quotient pulls on both the raw channel sum
                // and the accumulated alpha.
                const double a_acc = out.alpha[px];
                if (a_acc > 1e-12) {
                    up.d_channels[0][px] = g / a_acc;
                    up.d_alpha[px] = -g * out.channel_maps[0][px] / (a_acc * a_acc);
                }
                // d pred / d d2 through the FSPL term and d1(x_int).
                const double d2 = out.depth[px];
                const Vec3 x_int = sample.pose.position + d2 * ctx.pixel_dirs[px];
                const double d1 = norm(x_int - scene.tx_position);
                if (d1 > 1e-9 && d1 + d2 > 1e-9) {
                    const double dd1 = dot(ctx.pixel_dirs[px], x_int - scene.tx_position) / d1;
                    up.d_depth[px] = g * (-20.0 / std::log(10.0)) * (1.0 + dd1) / (d1 + d2);
                }
            }
            ParamGrads pg;
            pg.resize(scene);
            render_backward(ctx, up, pg);
            const size_t nsh = scene.sh_channels.size();
            for (size_t gi = 0; gi < n_gauss; ++gi) {
                for (int i = 0; i < nb; ++i)
                    grads[gi * static_cast<size_t>(nb) + static_cast<size_t>(i)] =
                        pg.sh[gi * nsh * static_cast<size_t>(nb) +
                              static_cast<size_t>(rf) * static_cast<size_t>(nb) + static_cast<size_t>(i)];
                grads[n_gauss * static_cast<size_t>(nb) + gi] = pg.alpha_logit[gi];
            }
        }

        opt.step(params, grads, cfg.lr_sh * lr_scale);
        report.iterations_run = it + 1;
        report.final_l1 = l1;
        report.final_mv = mv;
        if (loss_csv.is_open() && (it % 25 == 0 || it + 1 == cfg.iterations))
            loss_csv << it << "," << l1 << "," << mv << "," << (l1 + mv) << ","
                     << to_string(cfg.mv_mode) << "," << cfg.lambda_mv << "\n";
    }
    return report;
}

/// Measurement fine-tuning: at most min(finetune_cap, sample count)
/// iterations, max-merge multi-view mode, learning rates scaled by 0.1,
/// geometry untouched.
inline RfTrainReport finetune(SceneModel& scene, const std::vector<RfSample>& samples,
                              RfTrainConfig cfg, const std::filesystem::path& outdir = {}) {
    if (samples.empty())
        throw std::invalid_argument("finetune: empty measured set");
    cfg.mv_mode = MergeMode::MaxMerge;
    if (cfg.lambda_mv <= 0.0)
        cfg.lambda_mv = 0.2;
    cfg.iterations = std::min<int>(cfg.finetune_cap, static_cast<int>(samples.size()));
    return train_rf(scene, samples, cfg, 0.1, outdir);
}

} // namespace rfpgs
