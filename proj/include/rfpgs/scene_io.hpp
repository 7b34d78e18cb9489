// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfpgs/types.hpp"

namespace rfpgs {

using json = nlohmann::json;

inline json to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
inline Vec3 vec3_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3)
        throw std::invalid_argument("expected 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json to_json(const Quat& q) { return json::array({q.w, q.x, q.y, q.z}); }
inline Quat quat_from_json(const json& j) {
    if (!j.is_array() || j.size() != 4)
        throw std::invalid_argument("expected 4-element array (w,x,y,z)");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

inline json to_json(const Pose& pose) {
    return json{{"position", to_json(pose.position)},
                {"orientation", to_json(pose.orientation)},
                {"projection", to_string(pose.projection)},
                {"fov_az", pose.fov_az},
                {"fov_zen", pose.fov_zen},
                {"width", pose.width},
                {"height", pose.height}};
}

inline Pose pose_from_json(const json& j) {
    Pose p;
    p.position = vec3_from_json(j.at("position"));
    p.orientation = quat_from_json(j.at("orientation"));
    p.projection = projection_from_string(j.at("projection").get<std::string>());
    p.fov_az = j.at("fov_az").get<double>();
    p.fov_zen = j.at("fov_zen").get<double>();
    p.width = j.at("width").get<int>();
    p.height = j.at("height").get<int>();
    p.validate();
    return p;
}

inline json scene_to_json(const SceneModel& scene) {
    json gs = json::array();
    for (const auto& g : scene.gaussians) {
        json sh = json::array();
        const int nb = g.sh.basis_count();
        for (int c = 0; c < g.sh.channels; ++c) {
            json row = json::array();
            for (int i = 0; i < nb; ++i)
                row.push_back(g.sh.channel(c)[i]);
            sh.push_back(std::move(row));
        }
        gs.push_back(json{{"x_g", to_json(g.x_g)},
                          {"s_scale", to_json(g.scales())},
                          {"q", to_json(g.q)},
                          {"alpha_g", g.alpha()},
                          {"sh", std::move(sh)},
                          {"is_wedge", g.is_wedge},
                          {"radius_boost", g.radius_boost}});
    }
    return json{{"schema", "rfpgs-scene-v1"},
                {"carrier_hz", scene.carrier_hz},
                {"tx_position", to_json(scene.tx_position)},
                {"bbox", json{{"min", to_json(scene.bbox.min)}, {"max", to_json(scene.bbox.max)}}},
                {"sh_degree", scene.sh_degree},
                {"sh_channels", scene.sh_channels},
                {"gaussians", std::move(gs)}};
}

inline SceneModel scene_from_json(const json& j) {
    if (j.value("schema", "") != "rfpgs-scene-v1")
        throw std::runtime_error("scene file: unknown or missing schema tag");
    SceneModel scene;
    scene.carrier_hz = j.at("carrier_hz").get<double>();
    scene.tx_position = vec3_from_json(j.at("tx_position"));
    scene.bbox.min = vec3_from_json(j.at("bbox").at("min"));
    scene.bbox.max = vec3_from_json(j.at("bbox").at("max"));
    scene.sh_degree = j.at("sh_degree").get<int>();
    scene.sh_channels = j.at("sh_channels").get<std::vector<std::string>>();
    const int nb = sh_basis_count(scene.sh_degree);
    const int nc = static_cast<int>(scene.sh_channels.size());
    for (const auto& gj : j.at("gaussians")) {
        PlanarGaussian g;
        g.x_g = vec3_from_json(gj.at("x_g"));
        g.set_scales(vec3_from_json(gj.at("s_scale")));
        g.q = quat_from_json(gj.at("q"));
        g.set_alpha(gj.at("alpha_g").get<double>());
        g.sh = ShTable(scene.sh_degree, nc);
        const auto& sh = gj.at("sh");
        if (static_cast<int>(sh.size()) != nc)
            throw std::runtime_error("scene file: SH channel count mismatch");
        for (int c = 0; c < nc; ++c) {
            if (static_cast<int>(sh[c].size()) != nb)
                throw std::runtime_error("scene file: SH basis count mismatch");
            for (int i = 0; i < nb; ++i)
                g.sh.channel(c)[i] = sh[c][i].get<double>();
        }
        g.is_wedge = gj.value("is_wedge", false);
        g.radius_boost = gj.value("radius_boost", 1.0);
        scene.gaussians.push_back(std::move(g));
    }
    scene.validate();
    return scene;
}

inline void save_scene(const SceneModel& scene, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot write " + path.string());
    os << scene_to_json(scene).dump(1) << "\n";
}

inline SceneModel load_scene(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is)
        throw std::runtime_error("cannot read " + path.string());
    json j;
    is >> j;
    return scene_from_json(j);
}

/// Writes <base>.f32 (little-endian float32 blob, channel-major) and
/// <base>.json (sidecar with raster metadata and the capture pose).
inline void save_spectrum_grid(const SpectrumGrid& grid, const Pose& pose,
                               const std::filesystem::path& base) {
    grid.validate();
    {
        std::ofstream os(base.string() + ".f32", std::ios::binary);
        if (!os)
            throw std::runtime_error("cannot write " + base.string() + ".f32");
        os.write(reinterpret_cast<const char*>(grid.data.data()),
                 static_cast<std::streamsize>(grid.data.size() * sizeof(float)));
    }
    json side{{"width", grid.width},
              {"height", grid.height},
              {"channels", grid.channels},
              {"fov_az", pose.fov_az},
              {"fov_zen", pose.fov_zen},
              {"projection", to_string(pose.projection)},
              {"floor_db", grid.floor_db},
              {"pose", to_json(pose)}};
    std::ofstream os(base.string() + ".json");
    if (!os)
        throw std::runtime_error("cannot write " + base.string() + ".json");
    os << side.dump(1) << "\n";
}

inline SpectrumGrid load_spectrum_grid(const std::filesystem::path& base, Pose* pose_out = nullptr) {
    std::ifstream sidecar(base.string() + ".json");
    if (!sidecar)
        throw std::runtime_error("cannot read " + base.string() + ".json");
    json side;
    sidecar >> side;
    SpectrumGrid grid;
    grid.width = side.at("width").get<int>();
    grid.height = side.at("height").get<int>();
    grid.channels = side.at("channels").get<std::vector<std::string>>();
    grid.floor_db = side.at("floor_db").get<double>();
    grid.data.resize(grid.pixels() * grid.channels.size());
    std::ifstream blob(base.string() + ".f32", std::ios::binary);
    if (!blob)
        throw std::runtime_error("cannot read " + base.string() + ".f32");
    blob.read(reinterpret_cast<char*>(grid.data.data()),
              static_cast<std::streamsize>(grid.data.size() * sizeof(float)));
    if (blob.gcount() != static_cast<std::streamsize>(grid.data.size() * sizeof(float)))
        throw std::runtime_error("spectrum blob truncated: " + base.string() + ".f32");
    grid.validate();
    if (pose_out)
        *pose_out = pose_from_json(side.at("pose"));
    return grid;
}

} // namespace rfpgs
