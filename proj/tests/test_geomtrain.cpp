// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#include <catch2/catch_amalgamated.hpp>

#include "rfpgs/box_scene.hpp"
#include "rfpgs/curvature.hpp"
#include "rfpgs/geom_train.hpp"
#include "rfpgs/losses.hpp"
#include "test_helpers.hpp"

using namespace rfpgs;

TEST_CASE("loss_min_scale") {
    SceneModel scene;
    scene.bbox = {{-1, -1, -1}, {1, 1, 1}};
    PlanarGaussian g;
    g.sh = ShTable(scene.sh_degree, 2);
    g.set_scales({0.2, 0.3, 0.01});
    scene.gaussians.push_back(g);
    CHECK(loss_min_scale(scene) == Catch::Approx(0.01).margin(1e-15));

    scene.gaussians[0].set_scales({0.2, 0.3, 1e-6});
    CHECK(loss_min_scale(scene) == Catch::Approx(1e-6).margin(1e-18));
    ParamGrads grads;
    grads.resize(scene);
    grad_min_scale(scene, 1.0, grads);
    CHECK(grads.s_log[0].x == 0.0);
    CHECK(grads.s_log[0].y == 0.0);
    CHECK(grads.s_log[0].z == Catch::Approx(1e-6).epsilon(1e-12));
}

TEST_CASE("loss_min_scale matches a scalar-loop oracle on random scenes") {
    SceneModel scene = testutil::random_scene(61, 100);
    double ref = 0.0;
    for (const auto& g : scene.gaussians) {
        const Vec3 s = g.scales();
        ref += std::min({s.x, s.y, s.z});
    }
    CHECK(loss_min_scale(scene) == Catch::Approx(ref).epsilon(1e-12));
}

namespace {

// Analytic depth/perp maps of a set of planes seen from `pose`. Planes are
// (point, normal) pairs; each ray keeps the nearest positive hit.
struct PlaneMaps {
    std::vector<double> depth, perp;
    std::vector<char> valid;
    std::vector<int> plane_id;
};

PlaneMaps analytic_plane_maps(const Pose& pose, const std::vector<std::pair<Vec3, Vec3>>& planes,
                              const std::vector<std::pair<double, double>>* az_limits = nullptr) {
    PlaneMaps maps;
    const size_t n = static_cast<size_t>(pose.width) * pose.height;
    maps.depth.assign(n, 0.0);
    maps.perp.assign(n, 0.0);
    maps.valid.assign(n, 0);
    maps.plane_id.assign(n, -1);
    for (int row = 0; row < pose.height; ++row)
        for (int col = 0; col < pose.width; ++col) {
            const size_t px = static_cast<size_t>(row) * pose.width + col;
            const Vec3 d = pose.pixel_to_direction(col, row);
            double best = 1e300;
            int best_id = -1;
            for (size_t p = 0; p < planes.size(); ++p) {
                const auto& [p0, nrm] = planes[p];
                const double denom = dot(d, nrm);
                if (std::abs(denom) < 1e-9)
                    continue;
                const double t = dot(p0 - pose.position, nrm) / denom;
                if (t <= 1e-9 || t >= best)
                    continue;
                if (az_limits) {
                    double az, zen;
                    direction_to_angles(rotate_inv(pose.orientation, d), az, zen);
                    const auto& [lo, hi] = (*az_limits)[p];
                    if (az < lo || az > hi)
                        continue;
                }
                best = t;
                best_id = static_cast<int>(p);
            }
            if (best_id < 0)
                continue;
            maps.valid[px] = 1;
            maps.depth[px] = best;
            maps.perp[px] = std::abs(dot(pose.position - planes[static_cast<size_t>(best_id)].first,
                                         planes[static_cast<size_t>(best_id)].second));
            maps.plane_id[px] = best_id;
        }
    return maps;
}

} // namespace

TEST_CASE("estimate_curvature: flat wall has no wedge pixels") {
    Pose pose = testutil::small_equirect_pose({0.5, 1.0, 0.0}, 90, 45);
    pose.fov_az = kPi / 2;
    pose.fov_zen = kPi / 3;
    // Oblique wall: constant perpendicular distance, smoothly varying depth.
    const auto maps = analytic_plane_maps(pose, {{{3, 0, 0}, {1, 0, 0}}});
    const double pitch_deg = rad2deg(pose.pitch_zen());
    const auto curv = estimate_curvature(maps.depth, maps.perp, maps.valid, pose.width,
                                         pose.height, 0.05 * pitch_deg, 0.02 * pitch_deg);
    for (size_t i = 0; i < curv.pixels(); ++i) {
        CHECK(curv.wedge_mask[i] == 0);
        CHECK(curv.score[i] <= 1e-9);
    }
}

TEST_CASE("estimate_curvature: interior corner detected with precision/recall >= 0.9") {
    Pose pose;
    pose.position = {0.6, 1.1, 0.0};
    pose.orientation = quat_from_axis_angle({0, 0, 1}, kPi / 4); // look at the corner
    pose.fov_az = kPi / 2;
    pose.fov_zen = kPi / 3;
    pose.width = 90;
    pose.height = 60;
    // Two vertical planes meeting at x=2.2, y=2.6.
    const std::vector<std::pair<Vec3, Vec3>> planes{{{2.2, 0, 0}, {1, 0, 0}},
                                                    {{0, 2.6, 0}, {0, 1, 0}}};
    const auto maps = analytic_plane_maps(pose, planes);
    const double pitch_deg = rad2deg(pose.pitch_zen());
    // tau_depth sized for a 2+ m viewing distance: perspective depth slopes
    // reach ~0.04 m/px at oblique incidence, still 20x below silhouette jumps.
    const auto curv = estimate_curvature(maps.depth, maps.perp, maps.valid, pose.width,
                                         pose.height, 0.05 * pitch_deg, 0.05 * pitch_deg);

    // Analytic edge mask: interior pixels where the hit plane changes
    // between horizontal neighbors.
    std::vector<char> edge(maps.plane_id.size(), 0);
    for (int row = 1; row < pose.height - 1; ++row)
        for (int col = 1; col < pose.width - 1; ++col) {
            const size_t px = static_cast<size_t>(row) * pose.width + col;
            if (maps.plane_id[px - 1] != maps.plane_id[px + 1])
                edge[px] = 1;
        }
    auto near_edge = [&](size_t px) {
        const int col = static_cast<int>(px) % pose.width;
        const int row = static_cast<int>(px) / pose.width;
        for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc) {
                const int c = col + dc, r = row + dr;
                if (c < 0 || c >= pose.width || r < 0 || r >= pose.height)
                    continue;
                if (edge[static_cast<size_t>(r) * pose.width + c])
                    return true;
            }
        return false;
    };

    size_t detected = 0, true_pos = 0, edge_total = 0, edge_hit = 0;
    for (size_t px = 0; px < curv.pixels(); ++px) {
        if (curv.wedge_mask[px]) {
            ++detected;
            if (near_edge(px))
                ++true_pos;
        }
        if (edge[px] && curv.valid[px]) {
            ++edge_total;
            // recall with 1-px tolerance on the detection side
            const int col = static_cast<int>(px) % pose.width;
            const int row = static_cast<int>(px) / pose.width;
            bool hit = false;
            for (int dr = -1; dr <= 1 && !hit; ++dr)
                for (int dc = -1; dc <= 1 && !hit; ++dc) {
                    const int c = col + dc, r = row + dr;
                    if (c < 0 || c >= pose.width || r < 0 || r >= pose.height)
                        continue;
                    hit = curv.wedge_mask[static_cast<size_t>(r) * pose.width + c] != 0;
                }
            if (hit)
                ++edge_hit;
        }
    }
    REQUIRE(edge_total > 10);
    REQUIRE(detected > 0);
    const double precision = static_cast<double>(true_pos) / detected;
    const double recall = static_cast<double>(edge_hit) / edge_total;
    INFO("precision " << precision << " recall " << recall << " detected " << detected);
    CHECK(precision >= 0.9);
    CHECK(recall >= 0.9);
}

TEST_CASE("estimate_curvature: silhouette edges are excluded") {
    Pose pose = testutil::small_equirect_pose({0, 0, 0}, 90, 45);
    pose.fov_az = kPi / 2;
    pose.fov_zen = kPi / 3;
    // Foreground plane only for azimuth > 0, far background elsewhere.
    const std::vector<std::pair<Vec3, Vec3>> planes{{{2, 0, 0}, {1, 0, 0}},
                                                    {{8, 0, 0}, {1, 0, 0}}};
    const std::vector<std::pair<double, double>> az_limits{{0.0, kPi}, {-kPi, kPi}};
    const auto maps = analytic_plane_maps(pose, planes, &az_limits);
    const double pitch_deg = rad2deg(pose.pitch_zen());
    const auto curv = estimate_curvature(maps.depth, maps.perp, maps.valid, pose.width,
                                         pose.height, 0.05 * pitch_deg, 0.02 * pitch_deg);
    for (size_t i = 0; i < curv.pixels(); ++i)
        CHECK(curv.wedge_mask[i] == 0);
}

TEST_CASE("estimate_curvature: translation equivariance on interior pixels") {
    const int w = 40, h = 30;
    Rng rng = make_rng(71);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> depth(static_cast<size_t>(w) * h), perp(depth.size());
    for (size_t i = 0; i < depth.size(); ++i) {
        depth[i] = 2.0 + 0.1 * u(rng);
        perp[i] = 1.5 + 0.2 * u(rng);
    }
    std::vector<char> valid(depth.size(), 1);
    const int shift = 3;
    std::vector<double> depth_s(depth.size(), 0.0), perp_s(depth.size(), 0.0);
    for (int row = 0; row < h; ++row)
        for (int col = 0; col < w - shift; ++col) {
            depth_s[static_cast<size_t>(row) * w + col + shift] = depth[static_cast<size_t>(row) * w + col];
            perp_s[static_cast<size_t>(row) * w + col + shift] = perp[static_cast<size_t>(row) * w + col];
        }
    const auto a = estimate_curvature(depth, perp, valid, w, h, 0.05, 0.02);
    const auto b = estimate_curvature(depth_s, perp_s, valid, w, h, 0.05, 0.02);
    for (int row = 1; row < h - 1; ++row)
        for (int col = 1; col < w - 1 - shift; ++col) {
            const size_t src = static_cast<size_t>(row) * w + col;
            const size_t dst = src + shift;
            CHECK(b.score[dst] == Catch::Approx(a.score[src]).margin(1e-12));
        }
}

TEST_CASE("local_plane_normal") {
    SECTION("cross product of the diagonals, camera-facing") {
        IntersectionBuffer buf;
        buf.width = 3;
        buf.height = 3;
        buf.points.assign(9, Vec3{0, 0, 0});
        buf.valid.assign(9, 1);
        buf.view_dirs.assign(9, Vec3{0, 0, -1});
        // neighbors of the center pixel (1,1): right, down, left, up
        buf.points[4 + 1] = {1, 0, 0};
        buf.points[4 + 3] = {0, 1, 0};
        buf.points[4 - 1] = {-1, 0, 0};
        buf.points[4 - 3] = {0, -1, 0};
        const auto n = local_plane_normal(buf, 1, 1);
        REQUIRE(n.has_value());
        CHECK(norm(*n - Vec3{0, 0, 1}) < 1e-12);
    }
    SECTION("degenerate collinear neighbors are rejected") {
        IntersectionBuffer buf;
        buf.width = 3;
        buf.height = 3;
        buf.points.assign(9, Vec3{0, 0, 0});
        buf.valid.assign(9, 1);
        buf.view_dirs.assign(9, Vec3{0, 0, -1});
        buf.points[4 + 1] = {1, 0, 0};
        buf.points[4 + 3] = {2, 0, 0};
        buf.points[4 - 1] = {-1, 0, 0};
        buf.points[4 - 3] = {-2, 0, 0};
        CHECK_FALSE(local_plane_normal(buf, 1, 1).has_value());
    }
    SECTION("invalid neighbor rejects the pixel") {
        IntersectionBuffer buf;
        buf.width = 3;
        buf.height = 3;
        buf.points.assign(9, Vec3{0, 0, 0});
        buf.valid.assign(9, 1);
        buf.valid[4 + 1] = 0;
        buf.view_dirs.assign(9, Vec3{0, 0, -1});
        CHECK_FALSE(local_plane_normal(buf, 1, 1).has_value());
    }
    SECTION("tilted analytic plane recovered within 1e-3 rad") {
        Pose pose = testutil::small_equirect_pose({0, 0, 0}, 60, 40);
        pose.fov_az = kPi / 2;
        pose.fov_zen = kPi / 3;
        const Vec3 pn = normalized(Vec3{1.0, 0.35, 0.2});
        const auto maps = analytic_plane_maps(pose, {{{3, 0, 0}, pn}});
        IntersectionBuffer buf;
        buf.width = pose.width;
        buf.height = pose.height;
        buf.valid = maps.valid;
        buf.points.resize(maps.depth.size());
        buf.view_dirs.resize(maps.depth.size());
        for (int row = 0; row < pose.height; ++row)
            for (int col = 0; col < pose.width; ++col) {
                const size_t px = static_cast<size_t>(row) * pose.width + col;
                const Vec3 d = pose.pixel_to_direction(col, row);
                buf.view_dirs[px] = d;
                buf.points[px] = pose.position + maps.depth[px] * d;
            }
        for (int row = 1; row < pose.height - 1; ++row)
            for (int col = 1; col < pose.width - 1; ++col) {
                const auto n = local_plane_normal(buf, col, row);
                REQUIRE(n.has_value());
                const double ang = std::acos(std::clamp(std::abs(dot(*n, pn)), -1.0, 1.0));
                CHECK(ang < 1e-3);
            }
    }
}

TEST_CASE("loss_normal_alignment") {
    const int w = 8, h = 6;
    RenderOutput out;
    out.width = w;
    out.height = h;
    out.normal.assign(static_cast<size_t>(w) * h, Vec3{0, 0, 1});
    out.alpha.assign(out.normal.size(), 1.0);
    out.alpha_depth = out.alpha;
    out.depth.assign(out.normal.size(), 1.0);
    out.perp = out.depth;

    IntersectionBuffer buf;
    buf.width = w;
    buf.height = h;
    buf.valid.assign(out.normal.size(), 1);
    buf.points.resize(out.normal.size());
    buf.view_dirs.assign(out.normal.size(), Vec3{0, 0, -1});
    // Flat z=0 plane sampled on a grid: local normals all +z.
    for (int row = 0; row < h; ++row)
        for (int col = 0; col < w; ++col)
            buf.points[static_cast<size_t>(row) * w + col] = {0.1 * col, 0.1 * row, 0.0};

    CurvatureMap curv;
    curv.width = w;
    curv.height = h;
    curv.score.assign(out.normal.size(), 0.0);
    curv.wedge_mask.assign(out.normal.size(), 0);
    curv.valid.assign(out.normal.size(), 1);

    SECTION("perfect alignment costs zero") {
        CHECK(loss_normal_alignment(out, buf, curv, 1.0) == Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("antiparallel normals cost weight x 2 per pixel") {
        for (auto& n : out.normal)
            n = {0, 0, -1};
        const double loss = loss_normal_alignment(out, buf, curv, 0.5);
        const size_t interior = static_cast<size_t>(w - 2) * (h - 2);
        CHECK(loss == Catch::Approx(0.5 * 2.0 * interior).epsilon(1e-12));
    }
    SECTION("wedge pixels contribute nothing") {
        for (auto& n : out.normal)
            n = {0, 0, -1};
        for (auto& m : curv.wedge_mask)
            m = 1;
        CHECK(loss_normal_alignment(out, buf, curv, 0.5) == Catch::Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("enlarge_wedge_gaussians") {
    SceneModel scene = testutil::random_scene(81, 10);
    const Pose pose = testutil::small_equirect_pose({0, 0, 0}, 16, 8);
    RenderOptions opts;
    opts.keep_contributors = true;
    const auto ctx = build_render_context(scene, pose, opts);
    RenderOutput out = render(ctx);

    WedgeViewEvidence ev;
    ev.intersections = intersections_from_render(ctx, out);
    ev.curvature.width = out.width;
    ev.curvature.height = out.height;
    ev.curvature.score.assign(out.pixels(), 0.0);
    ev.curvature.wedge_mask.assign(out.pixels(), 0);
    ev.curvature.valid.assign(out.pixels(), 1);
    ev.rendered = &out;

    SECTION("no wedge pixels leaves the scene unchanged") {
        const auto before = geometry_hash(scene);
        std::vector<WedgeViewEvidence> views{ev, ev, ev};
        CHECK(enlarge_wedge_gaussians(scene, views) == 0);
        CHECK(geometry_hash(scene) == before);
        for (const auto& g : scene.gaussians)
            CHECK_FALSE(g.is_wedge);
    }

    SECTION("a confirmed cluster flags exactly one gaussian, keeping its SH") {
        // Mark a small blob of pixels that actually hit something.
        std::vector<WedgeViewEvidence> views{ev, ev, ev};
        int marked = 0;
        for (size_t px = 0; px < out.pixels() && marked < 4; ++px) {
            if (ev.intersections.valid[px] && !out.contributors[px].empty()) {
                for (auto& v : views)
                    v.curvature.wedge_mask[px] = 1;
                ++marked;
            }
        }
        REQUIRE(marked > 0);
        const auto sh_before = scene.gaussians;
        const int flagged = enlarge_wedge_gaussians(scene, views);
        CHECK(flagged >= 1);
        int count = 0;
        for (size_t i = 0; i < scene.gaussians.size(); ++i) {
            if (scene.gaussians[i].is_wedge) {
                ++count;
                CHECK(scene.gaussians[i].radius_boost == Catch::Approx(3.0));
                // SH table untouched
                CHECK(scene.gaussians[i].sh.coeffs == sh_before[i].sh.coeffs);
                // rounded: in-plane scales equalized
                const int kn = min_scale_axis(scene.gaussians[i]);
                const Vec3 s = scene.gaussians[i].scales();
                CHECK(s[(kn + 1) % 3] == Catch::Approx(s[(kn + 2) % 3]).epsilon(1e-12));
            }
        }
        CHECK(count == flagged);
    }
}

TEST_CASE("train_geometry: smoke run improves photometric loss and can resume") {
    BoxSceneConfig bcfg;
    bcfg.pillars = 1;
    bcfg.vis_width = 60;
    bcfg.vis_height = 24;
    bcfg.n_train = 6;
    bcfg.n_test = 0;
    const BoxScene bs = generate_box_scene(bcfg);

    std::vector<GeomView> views;
    for (size_t i = 0; i < bs.train_vis.size(); ++i)
        views.push_back(geom_view_from_visual(bs.train_vis[i],
                                              render_visual(bs.scene, bs.train_vis[i], {0.3, -0.2, 1.0})));

    GeomTrainConfig cfg;
    cfg.iterations = 120;
    cfg.refine_start = 100;
    cfg.init_count = 400;
    cfg.densify_interval = 50;
    cfg.densify_until = 80;
    cfg.checkpoint_interval = 60;
    cfg.seed = 3;

    SceneModel init = init_scene_from_surfaces(bs.scene, bs.tx_position, bs.carrier_hz,
                                               cfg.init_count, cfg.seed);
    const auto tmp = std::filesystem::temp_directory_path() / "rfpgs_geom_smoke";
    std::filesystem::remove_all(tmp);

    std::vector<GeomLossRow> log_a;
    GeomTrainState state_a;
    SceneModel trained = train_geometry(views, cfg, init, &state_a, tmp, &log_a);
    REQUIRE(log_a.size() == 120);
    // photometric loss drops over the run
    double early = 0.0, late = 0.0;
    for (int i = 0; i < 10; ++i) {
        early += log_a[static_cast<size_t>(i)].photometric;
        late += log_a[log_a.size() - 1 - static_cast<size_t>(i)].photometric;
    }
    CHECK(late < early);

    SECTION("empty dataset rejected") {
        CHECK_THROWS_AS(train_geometry({}, cfg, init), std::invalid_argument);
    }

    SECTION("resume reproduces the loss trace") {
        SceneModel ck = load_scene(tmp / "checkpoint_60" / "scene.json");
        GeomTrainState state_b;
        state_b.load(tmp / "checkpoint_60");
        std::vector<GeomLossRow> log_b;
        SceneModel resumed = train_geometry(views, cfg, ck, &state_b, {}, &log_b);
        REQUIRE(log_b.size() == 60);
        for (size_t i = 0; i < log_b.size(); ++i) {
            CHECK(log_b[i].total ==
                  Catch::Approx(log_a[60 + i].total).epsilon(1e-6).margin(1e-9));
        }
        // Final scenes agree closely.
        REQUIRE(resumed.gaussians.size() == trained.gaussians.size());
        double max_dx = 0.0;
        for (size_t i = 0; i < resumed.gaussians.size(); ++i)
            max_dx = std::max(max_dx, norm(resumed.gaussians[i].x_g - trained.gaussians[i].x_g));
        CHECK(max_dx < 1e-6);
    }
    std::filesystem::remove_all(tmp);
}
