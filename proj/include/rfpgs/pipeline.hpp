// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rfpgs/box_scene.hpp"
#include "rfpgs/beamform.hpp"
#include "rfpgs/config.hpp"
#include "rfpgs/csi.hpp"
#include "rfpgs/geom_train.hpp"
#include "rfpgs/metrics.hpp"
#include "rfpgs/oracle_io.hpp"
#include "rfpgs/png.hpp"
#include "rfpgs/rf_train.hpp"

namespace rfpgs {

namespace fs = std::filesystem;

inline void write_config_echo(const RunConfig& cfg, const std::string& command,
                              const fs::path& outdir) {
    fs::create_directories(outdir);
    json echo = run_config_to_json(cfg);
    echo["command"] = command;
    echo["threads_effective"] = cfg.threads > 0 ? cfg.threads : thread_count();
    std::ofstream os(outdir / "config.json");
    os << echo.dump(1) << "\n";
}

inline std::string index_name(const char* prefix, size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%03zu", prefix, i);
    return buf;
}

// ---------------------------------------------------------------------------
// gen: oracle scene + pose manifests + visual/depth rasters + spectra + MPCs.

inline void cmd_gen(const RunConfig& cfg, const fs::path& outdir) {
    write_config_echo(cfg, "gen", outdir);
    const BoxScene bs = generate_box_scene(cfg.scene);
    save_oracle_scene(bs.scene, outdir / "oracle_scene.json");

    const Pose tx_pose = default_tx_pose(bs);
    json manifest{{"schema", "rfpgs-dataset-v1"},
                  {"tx_position", to_json(bs.tx_position)},
                  {"carrier_hz", bs.carrier_hz},
                  {"floor_db", bs.floor_db},
                  {"provenance", cfg.psf_beamwidth_rad > 0.0 ? "oracle_beamformed" : "oracle_clean"},
                  {"n_train", cfg.scene.n_train},
                  {"n_test", cfg.scene.n_test},
                  {"tx_pose", to_json(tx_pose)},
                  {"poses",
                   json{{"train_rf", poses_to_json(bs.train_rf)},
                        {"train_vis", poses_to_json(bs.train_vis)},
                        {"test_rf", poses_to_json(bs.test_rf)},
                        {"test_vis", poses_to_json(bs.test_vis)}}}};
    {
        std::ofstream os(outdir / "manifest.json");
        os << manifest.dump(1) << "\n";
    }

    fs::create_directories(outdir / "train");
    fs::create_directories(outdir / "test");
    const Vec3 light = normalized(Vec3{0.3, -0.2, 1.0});
    const PsfConfig psf{cfg.psf_beamwidth_rad};

    for (size_t i = 0; i < bs.train_rf.size(); ++i) {
        const auto vr = render_visual(bs.scene, bs.train_vis[i], light);
        SpectrumGrid vis(bs.train_vis[i].width, bs.train_vis[i].height,
                         {"vis", "depth_m", "valid"}, bs.floor_db);
        for (size_t px = 0; px < vis.pixels(); ++px) {
            vis.channel(0)[px] = static_cast<float>(vr.shade[px]);
            vis.channel(1)[px] = static_cast<float>(vr.depth[px]);
            vis.channel(2)[px] = static_cast<float>(vr.valid[px]);
        }
        save_spectrum_grid(vis, bs.train_vis[i], outdir / "train" / index_name("vis", i));

        const auto mpcs = trace(bs.scene, bs.tx_position, bs.train_rf[i].position, bs.wavelength_m());
        save_mpcs_csv(mpcs, outdir / "train" / (index_name("mpc", i) + ".csv"));
        const auto rf = mpcs_to_spectrum(mpcs, bs.train_rf[i], bs.floor_db, psf);
        save_spectrum_grid(rf, bs.train_rf[i], outdir / "train" / index_name("rf", i));
    }
    for (size_t i = 0; i < bs.test_rf.size(); ++i) {
        const auto mpcs = trace(bs.scene, bs.tx_position, bs.test_rf[i].position, bs.wavelength_m());
        save_mpcs_csv(mpcs, outdir / "test" / (index_name("mpc", i) + ".csv"));
        // Test spectra stay clean: they are the evaluation reference.
        const auto rf = mpcs_to_spectrum(mpcs, bs.test_rf[i], bs.floor_db);
        save_spectrum_grid(rf, bs.test_rf[i], outdir / "test" / index_name("rf", i));
        const auto txg = mpcs_to_tx_spectrum(mpcs, tx_pose, bs.floor_db);
        save_spectrum_grid(txg, tx_pose, outdir / "test" / index_name("tx", i));
    }
}

// ---------------------------------------------------------------------------
// dataset loading

struct Dataset {
    fs::path dir;
    Vec3 tx_position;
    double carrier_hz = 2.4e9;
    double floor_db = -100.0;
    std::string provenance;
    Pose tx_pose;
    std::vector<Pose> train_rf, train_vis, test_rf, test_vis;
    Aabb bbox;
};

inline Dataset load_dataset(const fs::path& dir) {
    std::ifstream is(dir / "manifest.json");
    if (!is)
        throw std::runtime_error("cannot read dataset manifest in " + dir.string());
    json m;
    is >> m;
    if (m.value("schema", "") != "rfpgs-dataset-v1")
        throw std::runtime_error("dataset manifest: unknown schema");
    Dataset d;
    d.dir = dir;
    d.tx_position = vec3_from_json(m.at("tx_position"));
    d.carrier_hz = m.at("carrier_hz").get<double>();
    d.floor_db = m.at("floor_db").get<double>();
    d.provenance = m.value("provenance", "oracle_clean");
    d.tx_pose = pose_from_json(m.at("tx_pose"));
    d.train_rf = poses_from_json(m.at("poses").at("train_rf"));
    d.train_vis = poses_from_json(m.at("poses").at("train_vis"));
    d.test_rf = poses_from_json(m.at("poses").at("test_rf"));
    d.test_vis = poses_from_json(m.at("poses").at("test_vis"));
    const OracleScene oracle = load_oracle_scene(dir / "oracle_scene.json");
    d.bbox = oracle.bbox;
    return d;
}

inline std::vector<GeomView> load_geom_views(const Dataset& d) {
    std::vector<GeomView> views;
    for (size_t i = 0; i < d.train_vis.size(); ++i) {
        Pose pose;
        const SpectrumGrid grid = load_spectrum_grid(d.dir / "train" / index_name("vis", i), &pose);
        GeomView v;
        v.pose = pose;
        const size_t n = grid.pixels();
        v.image.resize(n);
        v.depth.resize(n);
        v.depth_valid.resize(n);
        for (size_t px = 0; px < n; ++px) {
            v.image[px] = grid.channel(0)[px];
            v.depth[px] = grid.channel(1)[px];
            v.depth_valid[px] = grid.channel(2)[px] > 0.5f ? 1 : 0;
        }
        views.push_back(std::move(v));
    }
    return views;
}

inline std::vector<RfSample> load_rf_samples(const Dataset& d, const std::string& subdir,
                                             size_t count, int limit = -1) {
    std::vector<RfSample> samples;
    const size_t n = limit >= 0 ? std::min<size_t>(count, static_cast<size_t>(limit)) : count;
    for (size_t i = 0; i < n; ++i) {
        RfSample s;
        s.spectrum = load_spectrum_grid(d.dir / subdir / index_name("rf", i), &s.pose);
        s.provenance = d.provenance == "oracle_beamformed" ? SampleProvenance::OracleBeamformed
                                                           : SampleProvenance::OracleClean;
        s.validate();
        samples.push_back(std::move(s));
    }
    return samples;
}

// ---------------------------------------------------------------------------
// training commands

inline fs::path cmd_train_geom(const RunConfig& cfg, const fs::path& data_dir,
                               const fs::path& outdir, const fs::path& resume = {}) {
    write_config_echo(cfg, "train-geom", outdir);
    const Dataset d = load_dataset(data_dir);
    const auto views = load_geom_views(d);

    SceneModel scene;
    GeomTrainState state;
    GeomTrainState* state_ptr = nullptr;
    if (!resume.empty()) {
        scene = load_scene(resume / "scene.json");
        state.load(resume);
        state_ptr = &state;
    } else {
        const OracleScene oracle = load_oracle_scene(data_dir / "oracle_scene.json");
        scene = init_scene_from_surfaces(oracle, d.tx_position, d.carrier_hz, cfg.geom.init_count,
                                         cfg.seed, cfg.geom.init_opacity);
    }
    if (cfg.geom.iterations == 0) {
        // passthrough checkpoint
        save_scene(scene, outdir / "scene_geom.json");
        return outdir / "scene_geom.json";
    }
    SceneModel trained = train_geometry(views, cfg.geom, std::move(scene), state_ptr, outdir);
    save_scene(trained, outdir / "scene_geom.json");
    return outdir / "scene_geom.json";
}

inline fs::path cmd_train_rf(const RunConfig& cfg, const fs::path& data_dir,
                             const fs::path& scene_path, const fs::path& outdir,
                             int sample_limit = -1) {
    write_config_echo(cfg, "train-rf", outdir);
    const Dataset d = load_dataset(data_dir);
    SceneModel scene = load_scene(scene_path);
    scene.tx_position = d.tx_position;
    scene.carrier_hz = d.carrier_hz;
    const auto samples = load_rf_samples(d, "train", d.train_rf.size(), sample_limit);
    train_rf(scene, samples, cfg.rf, 1.0, outdir);
    save_scene(scene, outdir / "scene_rf.json");
    return outdir / "scene_rf.json";
}

inline fs::path cmd_finetune(const RunConfig& cfg, const fs::path& data_dir,
                             const fs::path& scene_path, const fs::path& outdir,
                             int sample_limit = -1) {
    write_config_echo(cfg, "finetune", outdir);
    const Dataset d = load_dataset(data_dir);
    SceneModel scene = load_scene(scene_path);
    scene.tx_position = d.tx_position;
    scene.carrier_hz = d.carrier_hz;
    auto samples = load_rf_samples(d, "train", d.train_rf.size(), sample_limit);
    for (auto& s : samples)
        s.provenance = SampleProvenance::MeasuredMpc;
    const auto report = finetune(scene, samples, cfg.rf, outdir);
    save_scene(scene, outdir / "scene_finetuned.json");
    json rep{{"iterations_run", report.iterations_run},
             {"mv_mode", to_string(report.mv_mode)},
             {"lambda_mv", report.lambda_mv},
             {"lr_scale", report.lr_scale}};
    std::ofstream os(outdir / "finetune_report.json");
    os << rep.dump(1) << "\n";
    return outdir / "scene_finetuned.json";
}

// ---------------------------------------------------------------------------
// render / eval / beamform

inline void cmd_render(const RunConfig& cfg, const fs::path& data_dir, const fs::path& scene_path,
                       const fs::path& outdir) {
    write_config_echo(cfg, "render", outdir);
    const Dataset d = load_dataset(data_dir);
    SceneModel scene = load_scene(scene_path);
    scene.tx_position = d.tx_position;
    scene.carrier_hz = d.carrier_hz;
    double render_ms_total = 0.0;
    for (size_t i = 0; i < d.test_rf.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto grid = predict_pathloss(scene, d.test_rf[i], d.floor_db, cfg.rf);
        render_ms_total +=
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        save_spectrum_grid(grid, d.test_rf[i], outdir / index_name("pred_rf", i));
        const auto txg = render_tx_spectrum(scene, d.tx_pose, d.test_rf[i], d.floor_db, cfg.rf);
        save_spectrum_grid(txg, d.tx_pose, outdir / index_name("pred_tx", i));
        if (cfg.eval_panels) {
            Pose unused;
            const auto gt = load_spectrum_grid(d.dir / "test" / index_name("rf", i), &unused);
            save_comparison_panel(gt, grid, outdir / (index_name("panel_rf", i) + ".png"));
        }
    }
    json timing{{"spectra", d.test_rf.size()},
                {"mean_render_ms", d.test_rf.empty() ? 0.0 : render_ms_total / d.test_rf.size()}};
    std::ofstream os(outdir / "render_timing.json");
    os << timing.dump(1) << "\n";
}

struct EvalSummary {
    double rx_psnr_mean = 0, rx_psnr_min = 0, rx_psnr_max = 0;
    double rx_ssim_mean = 0, rx_ssim_min = 0, rx_ssim_max = 0;
    double tx_psnr_mean = 0, tx_ssim_mean = 0;
    double train_psnr_mean = 0;
};

inline EvalSummary cmd_eval(const RunConfig& cfg, const fs::path& data_dir,
                            const fs::path& scene_path, const fs::path& outdir,
                            bool include_train = true) {
    write_config_echo(cfg, "eval", outdir);
    const Dataset d = load_dataset(data_dir);
    SceneModel scene = load_scene(scene_path);
    scene.tx_position = d.tx_position;
    scene.carrier_hz = d.carrier_hz;

    const bool want_psnr = std::find(cfg.eval_metrics.begin(), cfg.eval_metrics.end(), "psnr") !=
                           cfg.eval_metrics.end();
    const bool want_ssim = std::find(cfg.eval_metrics.begin(), cfg.eval_metrics.end(), "ssim") !=
                           cfg.eval_metrics.end();

    std::ofstream csv(outdir / "eval.csv");
    csv << "pose_id";
    if (want_psnr)
        csv << ",psnr";
    if (want_ssim)
        csv << ",ssim";
    if (cfg.eval_tx_side) {
        if (want_psnr)
            csv << ",tx_psnr";
        if (want_ssim)
            csv << ",tx_ssim";
    }
    csv << "\n";

    EvalSummary sum;
    sum.rx_psnr_min = 1e300;
    sum.rx_psnr_max = -1e300;
    sum.rx_ssim_min = 1e300;
    sum.rx_ssim_max = -1e300;
    for (size_t i = 0; i < d.test_rf.size(); ++i) {
        Pose unused;
        const auto gt = load_spectrum_grid(d.dir / "test" / index_name("rf", i), &unused);
        const auto pred = predict_pathloss(scene, d.test_rf[i], d.floor_db, cfg.rf);
        const double p = want_psnr ? psnr(pred, gt) : 0.0;
        const double s = want_ssim ? ssim(pred, gt) : 0.0;
        csv << i;
        if (want_psnr)
            csv << "," << p;
        if (want_ssim)
            csv << "," << s;
        sum.rx_psnr_mean += p;
        sum.rx_ssim_mean += s;
        sum.rx_psnr_min = std::min(sum.rx_psnr_min, p);
        sum.rx_psnr_max = std::max(sum.rx_psnr_max, p);
        sum.rx_ssim_min = std::min(sum.rx_ssim_min, s);
        sum.rx_ssim_max = std::max(sum.rx_ssim_max, s);
        if (cfg.eval_tx_side) {
            const auto gt_tx = load_spectrum_grid(d.dir / "test" / index_name("tx", i), &unused);
            const auto pred_tx = render_tx_spectrum(scene, d.tx_pose, d.test_rf[i], d.floor_db, cfg.rf);
            const double tp = want_psnr ? psnr(pred_tx, gt_tx) : 0.0;
            const double ts = want_ssim ? ssim(pred_tx, gt_tx) : 0.0;
            sum.tx_psnr_mean += tp;
            sum.tx_ssim_mean += ts;
            if (want_psnr)
                csv << "," << tp;
            if (want_ssim)
                csv << "," << ts;
            if (cfg.eval_panels)
                save_comparison_panel(gt_tx, pred_tx, outdir / (index_name("panel_tx", i) + ".png"));
        }
        csv << "\n";
        if (cfg.eval_panels)
            save_comparison_panel(gt, pred, outdir / (index_name("panel_rf", i) + ".png"));
    }
    const double n = std::max<size_t>(1, d.test_rf.size());
    sum.rx_psnr_mean /= n;
    sum.rx_ssim_mean /= n;
    sum.tx_psnr_mean /= n;
    sum.tx_ssim_mean /= n;

    if (include_train) {
        double acc = 0.0;
        for (size_t i = 0; i < d.train_rf.size(); ++i) {
            Pose unused;
            const auto gt = load_spectrum_grid(d.dir / "train" / index_name("rf", i), &unused);
            acc += psnr(predict_pathloss(scene, d.train_rf[i], d.floor_db, cfg.rf), gt);
        }
        sum.train_psnr_mean = d.train_rf.empty() ? 0.0 : acc / d.train_rf.size();
    }

    json summary{{"rx", json{{"psnr_mean", sum.rx_psnr_mean},
                             {"psnr_min", sum.rx_psnr_min},
                             {"psnr_max", sum.rx_psnr_max},
                             {"ssim_mean", sum.rx_ssim_mean},
                             {"ssim_min", sum.rx_ssim_min},
                             {"ssim_max", sum.rx_ssim_max}}},
                 {"tx", json{{"psnr_mean", sum.tx_psnr_mean}, {"ssim_mean", sum.tx_ssim_mean}}},
                 {"train", json{{"psnr_mean", sum.train_psnr_mean}}},
                 {"poses", d.test_rf.size()}};
    std::ofstream os(outdir / "summary.json");
    os << summary.dump(1) << "\n";
    return sum;
}

struct BeamformSummary {
    double ratio_mean = 0, ratio_min = 0, ratio_max = 0;
};

inline BeamformSummary cmd_beamform(const RunConfig& cfg, const fs::path& data_dir,
                                    const fs::path& scene_path, const fs::path& outdir) {
    write_config_echo(cfg, "beamform", outdir);
    const Dataset d = load_dataset(data_dir);
    SceneModel scene = load_scene(scene_path);
    scene.tx_position = d.tx_position;
    scene.carrier_hz = d.carrier_hz;

    std::ofstream csv(outdir / "beamform.csv");
    csv << "pose_id,achieved_rate,oracle_capacity,ratio,tx_rows,tx_cols,rx_rows,rx_cols,snr_db\n";
    BeamformSummary sum;
    sum.ratio_min = 1e300;
    sum.ratio_max = -1e300;
    size_t n = 0;
    for (size_t i = 0; i < d.test_rf.size(); ++i) {
        const auto true_mpcs = load_mpcs_csv(d.dir / "test" / (index_name("mpc", i) + ".csv"));
        const auto rx_grid = predict_pathloss(scene, d.test_rf[i], d.floor_db, cfg.rf);
        const auto tx_grid = render_tx_spectrum(scene, d.tx_pose, d.test_rf[i], d.floor_db, cfg.rf);
        const auto rep = beamform_eval(tx_grid, d.tx_pose, rx_grid, d.test_rf[i], true_mpcs,
                                       scene.wavelength_m(), cfg.array);
        csv << i << "," << rep.achieved_rate_bps_hz << "," << rep.oracle_capacity_bps_hz << ","
            << rep.ratio << "," << cfg.array.tx_rows << "," << cfg.array.tx_cols << ","
            << cfg.array.rx_rows << "," << cfg.array.rx_cols << "," << cfg.array.snr_db << "\n";
        sum.ratio_mean += rep.ratio;
        sum.ratio_min = std::min(sum.ratio_min, rep.ratio);
        sum.ratio_max = std::max(sum.ratio_max, rep.ratio);
        ++n;
    }
    if (n > 0)
        sum.ratio_mean /= static_cast<double>(n);
    json summary{{"ratio_mean", sum.ratio_mean},
                 {"ratio_min", sum.ratio_min},
                 {"ratio_max", sum.ratio_max},
                 {"poses", n}};
    std::ofstream os(outdir / "summary.json");
    os << summary.dump(1) << "\n";
    return sum;
}

} // namespace rfpgs
