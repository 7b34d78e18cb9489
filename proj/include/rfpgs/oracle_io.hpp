// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#pragma once

#include "rfpgs/box_scene.hpp"
#include "rfpgs/scene_io.hpp"

namespace rfpgs {

inline json oracle_scene_to_json(const OracleScene& scene) {
    json facets = json::array();
    for (const auto& f : scene.facets) {
        json verts = json::array();
        for (const auto& v : f.vertices)
            verts.push_back(to_json(v));
        facets.push_back(json{{"vertices", std::move(verts)},
                              {"gain_db", f.gain_db},
                              {"albedo", f.albedo}});
    }
    json wedges = json::array();
    for (const auto& w : scene.wedges)
        wedges.push_back(json{{"p0", to_json(w.p0)},
                              {"p1", to_json(w.p1)},
                              {"interior_angle", w.interior_angle},
                              {"a0_db", w.a0_db},
                              {"kappa_db_per_rad", w.kappa_db_per_rad}});
    return json{{"schema", "rfpgs-oracle-scene-v1"},
                {"facets", std::move(facets)},
                {"wedges", std::move(wedges)},
                {"bbox", json{{"min", to_json(scene.bbox.min)}, {"max", to_json(scene.bbox.max)}}}};
}

inline OracleScene oracle_scene_from_json(const json& j) {
    if (j.value("schema", "") != "rfpgs-oracle-scene-v1")
        throw std::runtime_error("oracle scene file: unknown schema");
    OracleScene scene;
    for (const auto& fj : j.at("facets")) {
        Facet f;
        for (const auto& vj : fj.at("vertices"))
            f.vertices.push_back(vec3_from_json(vj));
        f.gain_db = fj.at("gain_db").get<double>();
        f.albedo = fj.at("albedo").get<double>();
        scene.facets.push_back(std::move(f));
    }
    for (const auto& wj : j.at("wedges")) {
        Wedge w;
        w.p0 = vec3_from_json(wj.at("p0"));
        w.p1 = vec3_from_json(wj.at("p1"));
        w.interior_angle = wj.at("interior_angle").get<double>();
        w.a0_db = wj.at("a0_db").get<double>();
        w.kappa_db_per_rad = wj.at("kappa_db_per_rad").get<double>();
        scene.wedges.push_back(w);
    }
    scene.bbox.min = vec3_from_json(j.at("bbox").at("min"));
    scene.bbox.max = vec3_from_json(j.at("bbox").at("max"));
    scene.validate();
    return scene;
}

inline void save_oracle_scene(const OracleScene& scene, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot write " + path.string());
    os << oracle_scene_to_json(scene).dump(1) << "\n";
}

inline OracleScene load_oracle_scene(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is)
        throw std::runtime_error("cannot read " + path.string());
    json j;
    is >> j;
    return oracle_scene_from_json(j);
}

inline json poses_to_json(const std::vector<Pose>& poses) {
    json arr = json::array();
    for (const auto& p : poses)
        arr.push_back(to_json(p));
    return arr;
}

inline std::vector<Pose> poses_from_json(const json& arr) {
    std::vector<Pose> out;
    for (const auto& pj : arr)
        out.push_back(pose_from_json(pj));
    return out;
}

} // namespace rfpgs
