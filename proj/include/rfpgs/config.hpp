// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#pragma once

#include <set>
#include <string>

#include "rfpgs/adam.hpp"
#include "rfpgs/box_scene.hpp"
#include "rfpgs/beamform.hpp"
#include "rfpgs/geom_train.hpp"
#include "rfpgs/rf_train.hpp"
#include "rfpgs/scene_io.hpp"

namespace rfpgs {

/// Full run configuration: every module config under one schema-versioned
/// tree. Unknown keys are rejected so typos cannot silently change a run.
struct RunConfig {
    std::uint64_t seed = 1;
    int threads = 0; // 0 = RFPGS_THREADS or hardware default
    bool deterministic = true;

    BoxSceneConfig scene;
    GeomTrainConfig geom;
    RfTrainConfig rf;
    ArrayConfig array;
    double psf_beamwidth_rad = 0.0; // blur applied to generated training spectra
    std::vector<std::string> eval_metrics{"psnr", "ssim"};
    bool eval_tx_side = true;
    bool eval_panels = true;

    void propagate_seed() {
        scene.seed = seed;
        geom.seed = seed;
        rf.seed = seed;
    }
};

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& known,
                           const std::string& where) {
    for (const auto& [key, value] : j.items())
        if (!known.contains(key))
            throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
}

template <typename T>
void get_if(const json& j, const char* key, T& dst) {
    if (j.contains(key))
        dst = j.at(key).get<T>();
}

} // namespace detail

inline json run_config_to_json(const RunConfig& c) {
    return json{
        {"schema", "rfpgs-config-v1"},
        {"seed", c.seed},
        {"threads", c.threads},
        {"deterministic", c.deterministic},
        {"psf_beamwidth_deg", rad2deg(c.psf_beamwidth_rad)},
        {"eval_metrics", c.eval_metrics},
        {"eval_tx_side", c.eval_tx_side},
        {"eval_panels", c.eval_panels},
        {"scene",
         json{{"room_w", c.scene.room_w},
              {"room_d", c.scene.room_d},
              {"room_h", c.scene.room_h},
              {"pillars", c.scene.pillars},
              {"tx_position", to_json(c.scene.tx_position)},
              {"n_train", c.scene.n_train},
              {"n_test", c.scene.n_test},
              {"rx_height", c.scene.rx_height},
              {"carrier_hz", c.scene.carrier_hz},
              {"floor_db", c.scene.floor_db},
              {"rf_width", c.scene.rf_width},
              {"rf_height", c.scene.rf_height},
              {"rf_fov_zen_deg", rad2deg(c.scene.rf_fov_zen)},
              {"vis_width", c.scene.vis_width},
              {"vis_height", c.scene.vis_height},
              {"vis_fov_zen_deg", rad2deg(c.scene.vis_fov_zen)}}},
        {"geom",
         json{{"iterations", c.geom.iterations},
              {"refine_start", c.geom.refine_start},
              {"lambda_scale", c.geom.lambda_scale},
              {"lambda_normal", c.geom.lambda_normal},
              {"lambda_dssim", c.geom.lambda_dssim},
              {"lambda_depth", c.geom.lambda_depth},
              {"densify_interval", c.geom.densify_interval},
              {"densify_until", c.geom.densify_until},
              {"densify_grad_threshold", c.geom.densify_grad_threshold},
              {"min_opacity", c.geom.min_opacity},
              {"max_gaussians", c.geom.max_gaussians},
              {"percent_dense", c.geom.percent_dense},
              {"tau_perp", c.geom.tau_perp},
              {"tau_depth", c.geom.tau_depth},
              {"wedge_radius_boost", c.geom.wedge_radius_boost},
              {"wedge_confirm_views", c.geom.wedge_confirm_views},
              {"wedge_merge_voxel", c.geom.wedge_merge_voxel},
              {"init_count", c.geom.init_count},
              {"init_opacity", c.geom.init_opacity},
              {"lr_position", c.geom.rates.position},
              {"lr_scale", c.geom.rates.scale},
              {"lr_rotation", c.geom.rates.rotation},
              {"lr_opacity", c.geom.rates.opacity},
              {"lr_sh", c.geom.rates.sh},
              {"checkpoint_interval", c.geom.checkpoint_interval},
              {"background", c.geom.background}}},
        {"rf",
         json{{"iterations", c.rf.iterations},
              {"lambda_mv", c.rf.lambda_mv},
              {"mv_mode", to_string(c.rf.mv_mode)},
              {"neighbor_angle_deg", rad2deg(c.rf.neighbor_angle_thresh)},
              {"neighbor_dist_min", c.rf.neighbor_dist_min},
              {"neighbor_dist_max", c.rf.neighbor_dist_max},
              {"max_neighbors", c.rf.max_neighbors},
              {"patch_base", c.rf.patch_base},
              {"patch_cap", c.rf.patch_cap},
              {"patch_ref_depth", c.rf.patch_ref_depth},
              {"patch_stride", c.rf.patch_stride},
              {"finetune_cap", c.rf.finetune_cap},
              {"lr_sh", c.rf.lr_sh},
              {"train_opacity", c.rf.train_opacity},
              {"floor_weight", c.rf.floor_weight},
              {"init_gain_db", c.rf.init_gain_db}}},
        {"beamform",
         json{{"tx_rows", c.array.tx_rows},
              {"tx_cols", c.array.tx_cols},
              {"rx_rows", c.array.rx_rows},
              {"rx_cols", c.array.rx_cols},
              {"spacing_wavelengths", c.array.spacing_wavelengths},
              {"snr_db", c.array.snr_db}}}};
}

inline RunConfig run_config_from_json(const json& j) {
    detail::reject_unknown(j, {"schema", "seed", "threads", "deterministic", "psf_beamwidth_deg",
                               "eval_metrics", "eval_tx_side", "eval_panels", "scene", "geom",
                               "rf", "beamform"},
                           "top level");
    if (j.contains("schema") && j.at("schema").get<std::string>() != "rfpgs-config-v1")
        throw std::invalid_argument("config: unsupported schema");
    if (!j.contains("seed"))
        throw std::invalid_argument("config: seed is required");

    RunConfig c;
    c.seed = j.at("seed").get<std::uint64_t>();
    detail::get_if(j, "threads", c.threads);
    detail::get_if(j, "deterministic", c.deterministic);
    if (j.contains("psf_beamwidth_deg"))
        c.psf_beamwidth_rad = deg2rad(j.at("psf_beamwidth_deg").get<double>());
    detail::get_if(j, "eval_metrics", c.eval_metrics);
    detail::get_if(j, "eval_tx_side", c.eval_tx_side);
    detail::get_if(j, "eval_panels", c.eval_panels);

    if (j.contains("scene")) {
        const json& s = j.at("scene");
        detail::reject_unknown(s,
                               {"room_w", "room_d", "room_h", "pillars", "tx_position", "n_train",
                                "n_test", "rx_height", "carrier_hz", "floor_db", "rf_width",
                                "rf_height", "rf_fov_zen_deg", "vis_width", "vis_height",
                                "vis_fov_zen_deg"},
                               "scene");
        detail::get_if(s, "room_w", c.scene.room_w);
        detail::get_if(s, "room_d", c.scene.room_d);
        detail::get_if(s, "room_h", c.scene.room_h);
        detail::get_if(s, "pillars", c.scene.pillars);
        if (s.contains("tx_position"))
            c.scene.tx_position = vec3_from_json(s.at("tx_position"));
        detail::get_if(s, "n_train", c.scene.n_train);
        detail::get_if(s, "n_test", c.scene.n_test);
        detail::get_if(s, "rx_height", c.scene.rx_height);
        detail::get_if(s, "carrier_hz", c.scene.carrier_hz);
        detail::get_if(s, "floor_db", c.scene.floor_db);
        detail::get_if(s, "rf_width", c.scene.rf_width);
        detail::get_if(s, "rf_height", c.scene.rf_height);
        if (s.contains("rf_fov_zen_deg"))
            c.scene.rf_fov_zen = deg2rad(s.at("rf_fov_zen_deg").get<double>());
        detail::get_if(s, "vis_width", c.scene.vis_width);
        detail::get_if(s, "vis_height", c.scene.vis_height);
        if (s.contains("vis_fov_zen_deg"))
            c.scene.vis_fov_zen = deg2rad(s.at("vis_fov_zen_deg").get<double>());
    }
    if (j.contains("geom")) {
        const json& g = j.at("geom");
        detail::reject_unknown(g,
                               {"iterations", "refine_start", "lambda_scale", "lambda_normal",
                                "lambda_dssim", "lambda_depth", "densify_interval",
                                "densify_until", "densify_grad_threshold", "min_opacity",
                                "max_gaussians", "percent_dense", "tau_perp", "tau_depth",
                                "wedge_radius_boost", "wedge_confirm_views", "wedge_merge_voxel",
                                "init_count", "init_opacity", "lr_position", "lr_scale",
                                "lr_rotation", "lr_opacity", "lr_sh", "checkpoint_interval",
                                "background"},
                               "geom");
        detail::get_if(g, "iterations", c.geom.iterations);
        detail::get_if(g, "refine_start", c.geom.refine_start);
        detail::get_if(g, "lambda_scale", c.geom.lambda_scale);
        detail::get_if(g, "lambda_normal", c.geom.lambda_normal);
        detail::get_if(g, "lambda_dssim", c.geom.lambda_dssim);
        detail::get_if(g, "lambda_depth", c.geom.lambda_depth);
        detail::get_if(g, "densify_interval", c.geom.densify_interval);
        detail::get_if(g, "densify_until", c.geom.densify_until);
        detail::get_if(g, "densify_grad_threshold", c.geom.densify_grad_threshold);
        detail::get_if(g, "min_opacity", c.geom.min_opacity);
        detail::get_if(g, "max_gaussians", c.geom.max_gaussians);
        detail::get_if(g, "percent_dense", c.geom.percent_dense);
        detail::get_if(g, "tau_perp", c.geom.tau_perp);
        detail::get_if(g, "tau_depth", c.geom.tau_depth);
        detail::get_if(g, "wedge_radius_boost", c.geom.wedge_radius_boost);
        detail::get_if(g, "wedge_confirm_views", c.geom.wedge_confirm_views);
        detail::get_if(g, "wedge_merge_voxel", c.geom.wedge_merge_voxel);
        detail::get_if(g, "init_count", c.geom.init_count);
        detail::get_if(g, "init_opacity", c.geom.init_opacity);
        detail::get_if(g, "lr_position", c.geom.rates.position);
        detail::get_if(g, "lr_scale", c.geom.rates.scale);
        detail::get_if(g, "lr_rotation", c.geom.rates.rotation);
        detail::get_if(g, "lr_opacity", c.geom.rates.opacity);
        detail::get_if(g, "lr_sh", c.geom.rates.sh);
        detail::get_if(g, "checkpoint_interval", c.geom.checkpoint_interval);
        detail::get_if(g, "background", c.geom.background);
    }
    if (j.contains("rf")) {
        const json& r = j.at("rf");
        detail::reject_unknown(r,
                               {"iterations", "lambda_mv", "mv_mode", "neighbor_angle_deg",
                                "neighbor_dist_min", "neighbor_dist_max", "max_neighbors",
                                "patch_base", "patch_cap", "patch_ref_depth", "patch_stride",
                                "finetune_cap", "lr_sh", "train_opacity", "floor_weight",
                                "init_gain_db"},
                               "rf");
        detail::get_if(r, "iterations", c.rf.iterations);
        detail::get_if(r, "lambda_mv", c.rf.lambda_mv);
        if (r.contains("mv_mode")) {
            const auto m = r.at("mv_mode").get<std::string>();
            if (m == "min_merge")
                c.rf.mv_mode = MergeMode::MinMerge;
            else if (m == "max_merge")
                c.rf.mv_mode = MergeMode::MaxMerge;
            else
                throw std::invalid_argument("config: mv_mode must be min_merge or max_merge");
        }
        if (r.contains("neighbor_angle_deg"))
            c.rf.neighbor_angle_thresh = deg2rad(r.at("neighbor_angle_deg").get<double>());
        detail::get_if(r, "neighbor_dist_min", c.rf.neighbor_dist_min);
        detail::get_if(r, "neighbor_dist_max", c.rf.neighbor_dist_max);
        detail::get_if(r, "max_neighbors", c.rf.max_neighbors);
        detail::get_if(r, "patch_base", c.rf.patch_base);
        detail::get_if(r, "patch_cap", c.rf.patch_cap);
        detail::get_if(r, "patch_ref_depth", c.rf.patch_ref_depth);
        detail::get_if(r, "patch_stride", c.rf.patch_stride);
        detail::get_if(r, "finetune_cap", c.rf.finetune_cap);
        detail::get_if(r, "lr_sh", c.rf.lr_sh);
        detail::get_if(r, "train_opacity", c.rf.train_opacity);
        detail::get_if(r, "floor_weight", c.rf.floor_weight);
        detail::get_if(r, "init_gain_db", c.rf.init_gain_db);
    }
    if (j.contains("beamform")) {
        const json& b = j.at("beamform");
        detail::reject_unknown(b,
                               {"tx_rows", "tx_cols", "rx_rows", "rx_cols", "spacing_wavelengths",
                                "snr_db"},
                               "beamform");
        detail::get_if(b, "tx_rows", c.array.tx_rows);
        detail::get_if(b, "tx_cols", c.array.tx_cols);
        detail::get_if(b, "rx_rows", c.array.rx_rows);
        detail::get_if(b, "rx_cols", c.array.rx_cols);
        detail::get_if(b, "spacing_wavelengths", c.array.spacing_wavelengths);
        detail::get_if(b, "snr_db", c.array.snr_db);
    }
    c.propagate_seed();
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is)
        throw std::runtime_error("cannot read config " + path.string());
    json j;
    is >> j;
    return run_config_from_json(j);
}

/// Parses "6deg", "0.2rad" or a bare number (degrees) into radians.
inline double parse_angle(const std::string& s) {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    const std::string unit = s.substr(pos);
    if (unit.empty() || unit == "deg")
        return deg2rad(v);
    if (unit == "rad")
        return v;
    throw std::invalid_argument("cannot parse angle: " + s);
}

} // namespace rfpgs
