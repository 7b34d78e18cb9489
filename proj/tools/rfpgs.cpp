// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rfpgs/pipeline.hpp"

namespace {

using rfpgs::json;

/// Applies "dotted.path=value" overrides onto the raw config JSON.
void apply_override(json& root, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos)
        throw std::invalid_argument("--set expects key.path=value, got: " + spec);
    const std::string path = spec.substr(0, eq);
    const std::string value = spec.substr(eq + 1);
    json* node = &root;
    size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        if (dot == std::string::npos) {
            json parsed = json::parse(value, nullptr, false);
            (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
            break;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

json load_raw_config(const std::string& path) {
    if (path.empty())
        return json{{"seed", 1}};
    std::ifstream is(path);
    if (!is)
        throw std::runtime_error("cannot read config " + path);
    json j;
    is >> j;
    return j;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"rfpgs: planar-Gaussian radio radiance fields"};
    app.require_subcommand(1);

    std::string config_path, data_dir, scene_path, out_dir, resume_dir;
    std::vector<std::string> overrides;
    int samples_override = -1;
    std::string psf_override, metric_override;
    long long iterations_override = -1;

    auto add_common = [&](CLI::App* cmd, bool needs_data, bool needs_scene) {
        cmd->add_option("--config", config_path, "run configuration JSON");
        cmd->add_option("--out", out_dir, "output directory")->required();
        if (needs_data)
            cmd->add_option("--data", data_dir, "dataset directory (from `rfpgs gen`)")->required();
        if (needs_scene)
            cmd->add_option("--scene", scene_path, "trained scene checkpoint JSON")->required();
        cmd->add_option("--set", overrides, "config override, key.path=value")->take_all();
    };

    auto* gen = app.add_subcommand("gen", "generate the oracle scene and datasets");
    add_common(gen, false, false);
    gen->add_option("--samples", samples_override, "number of training samples");
    gen->add_option("--psf-beamwidth", psf_override,
                    "beamforming main-lobe FWHM applied to training spectra (e.g. 6deg)");

    auto* tg = app.add_subcommand("train-geom", "stage-1 geometry training");
    add_common(tg, true, false);
    tg->add_option("--resume", resume_dir, "checkpoint directory to resume from");
    tg->add_option("--iterations", iterations_override, "override geometry iterations");

    auto* tr = app.add_subcommand("train-rf", "stage-2 interaction-gain training");
    add_common(tr, true, true);
    tr->add_option("--samples", samples_override, "cap on training samples used");
    tr->add_option("--iterations", iterations_override, "override rf iterations");

    auto* ft = app.add_subcommand("finetune", "measurement fine-tuning");
    add_common(ft, true, true);
    ft->add_option("--samples", samples_override, "cap on fine-tuning samples used");

    auto* rd = app.add_subcommand("render", "render predicted Rx/Tx spectra at the test poses");
    add_common(rd, true, true);

    auto* ev = app.add_subcommand("eval", "evaluate predictions against the oracle spectra");
    add_common(ev, true, true);
    ev->add_option("--metric", metric_override, "comma-separated metric list (psnr,ssim)");

    auto* bf = app.add_subcommand("beamform", "spatial-domain beamforming evaluation");
    add_common(bf, true, true);

    CLI11_PARSE(app, argc, argv);

    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        json raw = load_raw_config(config_path);
        for (const auto& o : overrides)
            apply_override(raw, o);
        if (samples_override >= 0 && cmd == "gen")
            raw["scene"]["n_train"] = samples_override;
        if (!psf_override.empty())
            raw["psf_beamwidth_deg"] = rfpgs::rad2deg(rfpgs::parse_angle(psf_override));
        if (iterations_override >= 0)
            raw[cmd == "train-geom" ? "geom" : "rf"]["iterations"] =
                static_cast<int>(iterations_override);
        if (!metric_override.empty()) {
            std::vector<std::string> metrics;
            std::stringstream ss(metric_override);
            std::string tok;
            while (std::getline(ss, tok, ','))
                metrics.push_back(tok);
            raw["eval_metrics"] = metrics;
        }
        rfpgs::RunConfig cfg = rfpgs::run_config_from_json(raw);
        if (cfg.threads > 0)
            setenv("RFPGS_THREADS", std::to_string(cfg.threads).c_str(), 1);

        if (cmd == "gen") {
            rfpgs::cmd_gen(cfg, out_dir);
        } else if (cmd == "train-geom") {
            rfpgs::cmd_train_geom(cfg, data_dir, out_dir, resume_dir);
        } else if (cmd == "train-rf") {
            rfpgs::cmd_train_rf(cfg, data_dir, scene_path, out_dir, samples_override);
        } else if (cmd == "finetune") {
            rfpgs::cmd_finetune(cfg, data_dir, scene_path, out_dir, samples_override);
        } else if (cmd == "render") {
            rfpgs::cmd_render(cfg, data_dir, scene_path, out_dir);
        } else if (cmd == "eval") {
            rfpgs::cmd_eval(cfg, data_dir, scene_path, out_dir);
        } else if (cmd == "beamform") {
            rfpgs::cmd_beamform(cfg, data_dir, scene_path, out_dir);
        }
    } catch (const std::exception& e) {
        const json err{{"error", e.what()}, {"command", cmd}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
