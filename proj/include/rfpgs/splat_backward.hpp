// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rfpgs/splat.hpp"

namespace rfpgs {

/// Upstream gradients on the rendered maps. Empty vectors mean zero.
struct RenderUpstream {
    std::vector<std::vector<double>> d_channels; // per blended channel
    std::vector<double> d_depth;
    std::vector<double> d_perp;
    std::vector<double> d_alpha;
    std::vector<Vec3> d_normal;
};

/// Parameter gradients, SoA over the scene's Gaussians. SH gradients use the
/// scene layout: gaussian * (channels * basis) + channel * basis + i.
struct ParamGrads {
    std::vector<Vec3> x_g;
    std::vector<Vec3> s_log;
    std::vector<Quat> q;
    std::vector<double> alpha_logit;
    std::vector<double> sh;

    void resize(const SceneModel& scene) {
        const size_t n = scene.gaussians.size();
        const size_t shn = n * scene.sh_channels.size() * sh_basis_count(scene.sh_degree);
        x_g.assign(n, Vec3{0, 0, 0});
        s_log.assign(n, Vec3{0, 0, 0});
        q.assign(n, Quat{0, 0, 0, 0});
        alpha_logit.assign(n, 0.0);
        sh.assign(shn, 0.0);
    }

    void add(const ParamGrads& o) {
        for (size_t i = 0; i < x_g.size(); ++i) {
            x_g[i] += o.x_g[i];
            s_log[i] += o.s_log[i];
            q[i].w += o.q[i].w;
            q[i].x += o.q[i].x;
            q[i].y += o.q[i].y;
            q[i].z += o.q[i].z;
            alpha_logit[i] += o.alpha_logit[i];
        }
        for (size_t i = 0; i < sh.size(); ++i)
            sh[i] += o.sh[i];
    }
};

/// Analytic backward pass of render(). Walks each pixel's sorted hit list
/// once forward (rebuilding the compositing state) and once back-to-front
/// to unroll the transmittance coupling, then chains into every learnable
/// parameter. Gradient accumulation runs over a fixed number of row blocks
/// reduced in block order, so results do not depend on the worker count.
inline void render_backward(const RenderContext& ctx, const RenderUpstream& up, ParamGrads& grads) {
    const SceneModel& scene = *ctx.scene;
    const Pose& pose = ctx.pose;
    const auto& opts = ctx.opts;
    const double rho1 = opts.sigma_cutoff * opts.sigma_cutoff;
    const double rho0 = opts.fade_start_sigma * opts.fade_start_sigma;
    const int nch = static_cast<int>(ctx.channel_ids.size());
    const int nb_full = sh_basis_count(scene.sh_degree);
    const int nb = opts.active_sh_degree >= 0
                       ? sh_basis_count(std::min(opts.active_sh_degree, scene.sh_degree))
                       : nb_full;
    const int scene_nc = static_cast<int>(scene.sh_channels.size());
    const bool exponential = opts.form == TransmittanceForm::Exponential;

    const size_t npx = ctx.pixels();
    auto check = [&](size_t sz, const char* what) {
        if (sz != 0 && sz != npx)
            throw std::invalid_argument(std::string("render_backward: bad upstream size for ") + what);
    };
    for (const auto& chup : up.d_channels)
        check(chup.size(), "channel");
    if (up.d_channels.size() != 0 && up.d_channels.size() != static_cast<size_t>(nch))
        throw std::invalid_argument("render_backward: upstream channel count mismatch");
    check(up.d_depth.size(), "depth");
    check(up.d_perp.size(), "perp");
    check(up.d_alpha.size(), "alpha");
    check(up.d_normal.size(), "normal");

    if (grads.x_g.size() != scene.gaussians.size())
        grads.resize(scene);

    constexpr int kBlocks = 4;
    std::vector<ParamGrads> block_grads(kBlocks);
    for (auto& bg : block_grads)
        bg.resize(scene);
    const int rows_per_block = (pose.height + kBlocks - 1) / kBlocks;

    parallel_for(kBlocks, [&](std::int64_t bb, std::int64_t be) {
        std::vector<detail::Hit> hits;
        std::vector<double> weights, trans, gammas, cvals;
        for (std::int64_t block = bb; block < be; ++block) {
            ParamGrads& bg = block_grads[static_cast<size_t>(block)];
            const int row_lo = static_cast<int>(block) * rows_per_block;
            const int row_hi = std::min(pose.height, row_lo + rows_per_block);
            for (int row = row_lo; row < row_hi; ++row) {
                for (int col = 0; col < pose.width; ++col) {
                    const size_t px = static_cast<size_t>(row) * pose.width + col;
                    const Vec3 d = ctx.pixel_dirs[px];
                    const double* basis = &ctx.sh_basis[px * kShMaxBasis];

                    hits.clear();
                    for (int gi : ctx.candidates(col, row)) {
                        detail::Hit h;
                        if (detail::compute_hit(ctx.frames[static_cast<size_t>(gi)], d,
                                                opts.eps_parallel, rho0, rho1, h)) {
                            h.gauss = gi;
                            hits.push_back(h);
                        }
                    }
                    if (hits.empty())
                        continue;
                    std::sort(hits.begin(), hits.end(), [](const detail::Hit& a, const detail::Hit& b) {
                        return a.t != b.t ? a.t < b.t : a.gauss < b.gauss;
                    });

                    // Forward walk: rebuild weights and blended aggregates.
                    const size_t nk = hits.size();
                    weights.assign(nk, 0.0);
                    trans.assign(nk, 0.0);
                    cvals.assign(nk * static_cast<size_t>(nch), 0.0);
                    double transmittance = 1.0, alpha_sum = 0.0;
                    double acc_a = 0.0, acc_ad = 0.0, depth_num = 0.0, perp_num = 0.0;
                    Vec3 vnorm{0, 0, 0};
                    for (size_t k = 0; k < nk; ++k) {
                        const auto& h = hits[k];
                        const auto& fr = ctx.frames[static_cast<size_t>(h.gauss)];
                        trans[k] = transmittance;
                        const double w = transmittance * h.alpha;
                        weights[k] = w;
                        const auto& sh = scene.gaussians[static_cast<size_t>(h.gauss)].sh;
                        for (int c = 0; c < nch; ++c) {
                            const double* co = sh.channel(ctx.channel_ids[static_cast<size_t>(c)]);
                            double val = 0.0;
                            for (int i = 0; i < nb; ++i)
                                val += co[i] * basis[i];
                            cvals[k * static_cast<size_t>(nch) + static_cast<size_t>(c)] = val;
                        }
                        acc_a += w;
                        perp_num += w * h.perp;
                        if (h.depth_valid) {
                            acc_ad += w;
                            depth_num += w * h.t;
                        }
                        vnorm += (w * h.flip) * fr.n;
                        if (exponential) {
                            alpha_sum += h.alpha;
                            transmittance = std::exp(-alpha_sum);
                        } else {
                            transmittance *= (1.0 - h.alpha);
                        }
                    }
                    const double depth_val = acc_ad > 1e-12 ? depth_num / acc_ad : 0.0;
                    const double perp_val = acc_a > 1e-12 ? perp_num / acc_a : 0.0;

                    // Upstream pulls for this pixel.
                    const double gD = (!up.d_depth.empty() && acc_ad > 1e-12) ? up.d_depth[px] : 0.0;
                    const double gP = (!up.d_perp.empty() && acc_a > 1e-12) ? up.d_perp[px] : 0.0;
                    const double gA = up.d_alpha.empty() ? 0.0 : up.d_alpha[px];
                    Vec3 gV{0, 0, 0};
                    if (!up.d_normal.empty()) {
                        const double vlen = norm(vnorm);
                        if (vlen > 1e-12) {
                            const Vec3 nu = vnorm / vlen;
                            const Vec3 gn = up.d_normal[px];
                            gV = (gn - dot(gn, nu) * nu) / vlen;
                        }
                    }

                    // Per-hit direct sensitivities gamma_k = dL/dw_k.
                    gammas.assign(nk, 0.0);
                    bool any_pull = gD != 0.0 || gP != 0.0 || gA != 0.0 || norm2(gV) > 0.0;
                    for (size_t k = 0; k < nk; ++k) {
                        const auto& h = hits[k];
                        const auto& fr = ctx.frames[static_cast<size_t>(h.gauss)];
                        double gamma = gA;
                        if (!up.d_channels.empty())
                            for (int c = 0; c < nch; ++c) {
                                const double gm = up.d_channels[static_cast<size_t>(c)][px];
                                gamma += gm * cvals[k * static_cast<size_t>(nch) + static_cast<size_t>(c)];
                                if (gm != 0.0)
                                    any_pull = true;
                            }
                        if (gD != 0.0 && h.depth_valid)
                            gamma += gD * (h.t - depth_val) / acc_ad;
                        if (gP != 0.0)
                            gamma += gP * (h.perp - perp_val) / acc_a;
                        gamma += dot(gV, h.flip * fr.n) * 1.0;
                        gammas[k] = gamma;
                    }
                    if (!any_pull)
                        continue;

                    // Background contributes through the final transmittance.
                    double gB = 0.0;
                    if (!opts.background.empty() && !up.d_channels.empty())
                        for (int c = 0; c < nch; ++c)
                            gB += up.d_channels[static_cast<size_t>(c)][px] *
                                  opts.background[static_cast<size_t>(c)];

                    // Back-to-front: unroll the transmittance coupling.
                    double bacc = gB * transmittance; // transmittance == T_final here
                    for (size_t kk = nk; kk-- > 0;) {
                        const auto& h = hits[kk];
                        const auto& fr = ctx.frames[static_cast<size_t>(h.gauss)];
                        const size_t gi = static_cast<size_t>(h.gauss);
                        const double w = weights[kk];

                        double d_alpha;
                        if (exponential)
                            d_alpha = gammas[kk] * trans[kk] - bacc;
                        else
                            d_alpha = gammas[kk] * trans[kk] - bacc / (1.0 - h.alpha);
                        bacc += gammas[kk] * w;

                        // SH coefficient gradients (linear path).
                        if (!up.d_channels.empty()) {
                            for (int c = 0; c < nch; ++c) {
                                const double gm = up.d_channels[static_cast<size_t>(c)][px];
                                if (gm == 0.0)
                                    continue;
                                const double scale = gm * w;
                                double* dst = &bg.sh[gi * static_cast<size_t>(scene_nc) * nb_full +
                                                     static_cast<size_t>(ctx.channel_ids[static_cast<size_t>(c)]) * nb_full];
                                for (int i = 0; i < nb; ++i)
                                    dst[i] += scale * basis[i];
                            }
                        }

                        // Geometry chain.
                        const double G = std::exp(-0.5 * h.rho);
                        double dwin;
                        const double win = detail::fade_window(h.rho, rho0, rho1, &dwin);
                        const double da_base = d_alpha * G * win; // d/d base opacity
                        bg.alpha_logit[gi] += da_base * fr.a * (1.0 - fr.a);
                        const double drho = d_alpha * fr.a * G * (dwin - 0.5 * win);
                        const double du1 = 2.0 * h.u1 * drho;
                        const double du2 = 2.0 * h.u2 * drho;
                        bg.s_log[gi][fr.axis_u] += -h.u1 * du1;
                        bg.s_log[gi][fr.axis_v] += -h.u2 * du2;

                        const Vec3 delta = h.t * d - fr.r;
                        const Vec3 ddelta = (du1 / fr.su) * fr.e_u + (du2 / fr.sv) * fr.e_v;
                        const Vec3 de_u = (du1 / fr.su) * delta;
                        const Vec3 de_v = (du2 / fr.sv) * delta;

                        const double dt_direct = (gD != 0.0 && h.depth_valid) ? gD * w / acc_ad : 0.0;
                        const double dt = dt_direct + dot(ddelta, d);
                        Vec3 dr = -1.0 * ddelta;
                        double drn = (gP != 0.0) ? gP * w / acc_a * (fr.rn >= 0.0 ? 1.0 : -1.0) : 0.0;
                        double ddenom = 0.0;
                        if (h.depth_valid) {
                            drn += dt / h.denom;
                            ddenom = -dt * h.t / h.denom;
                        } else {
                            dr += dt * d; // grazing proxy t = dot(r, d)
                        }
                        Vec3 dn = drn * fr.r + ddenom * d + (w * h.flip) * gV;
                        dr += drn * fr.n;
                        bg.x_g[gi] += dr;

                        const PlanarGaussian& g = scene.gaussians[gi];
                        Vec3 en{0, 0, 0}, eu{0, 0, 0}, ev{0, 0, 0};
                        en[fr.axis_n] = 1.0;
                        eu[fr.axis_u] = 1.0;
                        ev[fr.axis_v] = 1.0;
                        const Quat dq_n = rotate_grad_q(g.q, en, dn);
                        const Quat dq_u = rotate_grad_q(g.q, eu, de_u);
                        const Quat dq_v = rotate_grad_q(g.q, ev, de_v);
                        bg.q[gi].w += dq_n.w + dq_u.w + dq_v.w;
                        bg.q[gi].x += dq_n.x + dq_u.x + dq_v.x;
                        bg.q[gi].y += dq_n.y + dq_u.y + dq_v.y;
                        bg.q[gi].z += dq_n.z + dq_u.z + dq_v.z;
                    }
                }
            }
        }
    }, opts.threads);

    for (const auto& bgr : block_grads)
        grads.add(bgr);
}

} // namespace rfpgs
