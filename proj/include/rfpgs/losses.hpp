// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rfpgs/splat_backward.hpp"
#include "rfpgs/types.hpp"

namespace rfpgs {

/// Eq.-style flattening loss: sum over Gaussians of the smallest axis scale.
/// Zero iff every Gaussian has a collapsed axis.
inline double loss_min_scale(const SceneModel& scene) {
    double acc = 0.0;
    for (const auto& g : scene.gaussians)
        acc += g.scales()[min_scale_axis(g)];
    return acc;
}

/// Subgradient of loss_min_scale into the log-scale parameters; flows only
/// to the minimal axis (ties break to the lowest index).
inline void grad_min_scale(const SceneModel& scene, double weight, ParamGrads& grads) {
    for (size_t i = 0; i < scene.gaussians.size(); ++i) {
        const auto& g = scene.gaussians[i];
        const int k = min_scale_axis(g);
        // d min(s) / d log s_k = s_k
        grads.s_log[i][k] += weight * std::exp(g.s_log[k]);
    }
}

/// Weighted mean absolute error; writes d(loss)/d(pred) when d_pred != null.
inline double weighted_l1(const std::vector<double>& pred, const std::vector<double>& target,
                          const std::vector<double>& weight, std::vector<double>* d_pred = nullptr) {
    if (pred.size() != target.size() || pred.size() != weight.size())
        throw std::invalid_argument("weighted_l1: size mismatch");
    double wsum = 0.0;
    for (double w : weight)
        wsum += w;
    if (d_pred)
        d_pred->assign(pred.size(), 0.0);
    if (wsum <= 0.0)
        return 0.0;
    double acc = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - target[i];
        acc += weight[i] * std::abs(e);
        if (d_pred)
            (*d_pred)[i] = weight[i] * (e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0)) / wsum;
    }
    return acc / wsum;
}

namespace detail {

/// Separable 2D convolution with an odd symmetric kernel; border taps are
/// renormalized (normalized convolution) so edge statistics stay unbiased.
class GaussianFilter {
public:
    GaussianFilter(int width, int height, int win = 11, double sigma = 1.5)
        : w_(width), h_(height), half_(win / 2), k_(static_cast<size_t>(win)) {
        double s = 0.0;
        for (int i = 0; i < win; ++i) {
            const double x = i - half_;
            k_[static_cast<size_t>(i)] = std::exp(-0.5 * x * x / (sigma * sigma));
            s += k_[static_cast<size_t>(i)];
        }
        for (auto& v : k_)
            v /= s;
        norm_.assign(static_cast<size_t>(w_) * h_, 0.0);
        std::vector<double> ones(norm_.size(), 1.0);
        conv_raw(ones, norm_);
    }

    /// out = conv(x) / conv(1)
    void nconv(const std::vector<double>& x, std::vector<double>& out) const {
        conv_raw(x, out);
        for (size_t i = 0; i < out.size(); ++i)
            out[i] /= norm_[i];
    }

    /// Adjoint of nconv for a symmetric kernel: conv(g / conv(1)).
    void nconv_adjoint(const std::vector<double>& g, std::vector<double>& out) const {
        scratch_ = g;
        for (size_t i = 0; i < scratch_.size(); ++i)
            scratch_[i] /= norm_[i];
        conv_raw(scratch_, out);
    }

    int width() const { return w_; }
    int height() const { return h_; }

private:
    void conv_raw(const std::vector<double>& x, std::vector<double>& out) const {
        tmp_.assign(x.size(), 0.0);
        // horizontal
        for (int r = 0; r < h_; ++r) {
            const double* row = x.data() + static_cast<size_t>(r) * w_;
            double* trow = tmp_.data() + static_cast<size_t>(r) * w_;
            for (int c = 0; c < w_; ++c) {
                double acc = 0.0;
                const int lo = std::max(0, c - half_), hi = std::min(w_ - 1, c + half_);
                for (int cc = lo; cc <= hi; ++cc)
                    acc += k_[static_cast<size_t>(cc - c + half_)] * row[cc];
                trow[c] = acc;
            }
        }
        // vertical
        out.assign(x.size(), 0.0);
        for (int r = 0; r < h_; ++r) {
            const int lo = std::max(0, r - half_), hi = std::min(h_ - 1, r + half_);
            for (int c = 0; c < w_; ++c) {
                double acc = 0.0;
                for (int rr = lo; rr <= hi; ++rr)
                    acc += k_[static_cast<size_t>(rr - r + half_)] * tmp_[static_cast<size_t>(rr) * w_ + c];
                out[static_cast<size_t>(r) * w_ + c] = acc;
            }
        }
    }

    int w_, h_, half_;
    std::vector<double> k_;
    std::vector<double> norm_;
    mutable std::vector<double> tmp_, scratch_;
};

} // namespace detail

/// Differentiable structural dissimilarity, 1 - mean SSIM, for the
/// photometric training term. Returns the loss and accumulates
/// d(loss)/d(pred) scaled by `weight` into d_pred.
inline double dssim_loss(const std::vector<double>& pred, const std::vector<double>& target,
                         int width, int height, double dynamic_range, double weight,
                         std::vector<double>& d_pred) {
    const detail::GaussianFilter f(width, height);
    const size_t n = pred.size();
    if (target.size() != n || n != static_cast<size_t>(width) * height)
        throw std::invalid_argument("dssim_loss: size mismatch");
    const double c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
    const double c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);

    std::vector<double> mu_x, mu_y, xx(n), yy(n), xy(n), sxx, syy, sxy;
    f.nconv(pred, mu_x);
    f.nconv(target, mu_y);
    for (size_t i = 0; i < n; ++i) {
        xx[i] = pred[i] * pred[i];
        yy[i] = target[i] * target[i];
        xy[i] = pred[i] * target[i];
    }
    f.nconv(xx, sxx);
    f.nconv(yy, syy);
    f.nconv(xy, sxy);

    double mean_ssim = 0.0;
    std::vector<double> g_mu(n), g_sxx(n), g_sxy(n);
    for (size_t i = 0; i < n; ++i) {
        const double mx = mu_x[i], my = mu_y[i];
        const double vx = sxx[i] - mx * mx;
        const double vy = syy[i] - my * my;
        const double cxy = sxy[i] - mx * my;
        const double l_num = 2.0 * mx * my + c1, l_den = mx * mx + my * my + c1;
        const double s_num = 2.0 * cxy + c2, s_den = vx + vy + c2;
        const double l = l_num / l_den;
        const double cs = s_num / s_den;
        mean_ssim += l * cs;
        // dSSIM/dmu_x, dSSIM/dsigma_x2, dSSIM/dsigma_xy at this window
        const double dl_dmx = (2.0 * my * l_den - 2.0 * mx * l_num) / (l_den * l_den);
        const double dcs_dvx = -cs / s_den;
        const double dcs_dcxy = 2.0 / s_den;
        // chain: vx = sxx - mx^2, cxy = sxy - mx*my
        g_mu[i] = cs * dl_dmx + l * (dcs_dvx * (-2.0 * mx) + dcs_dcxy * (-my));
        g_sxx[i] = l * dcs_dvx;
        g_sxy[i] = l * dcs_dcxy;
    }
    mean_ssim /= static_cast<double>(n);

    // Pull the window statistics back to pixels. d(loss) = -d(mean ssim).
    const double scale = -weight / static_cast<double>(n);
    std::vector<double> a1, a2, a3;
    f.nconv_adjoint(g_mu, a1);
    f.nconv_adjoint(g_sxx, a2);
    f.nconv_adjoint(g_sxy, a3);
    for (size_t i = 0; i < n; ++i)
        d_pred[i] += scale * (a1[i] + 2.0 * pred[i] * a2[i] + target[i] * a3[i]);
    return weight * (1.0 - mean_ssim);
}

/// 1 - normalized cross-correlation over the valid entries of two patches.
/// Degenerate patches (fewer than 4 valid entries or near-zero variance)
/// return 0 and report skipped = true.
inline double ncc_loss(const std::vector<double>& a, const std::vector<double>& b,
                       const std::vector<char>& valid, bool* skipped = nullptr,
                       std::vector<double>* d_a = nullptr) {
    if (a.size() != b.size() || a.size() != valid.size())
        throw std::invalid_argument("ncc_loss: size mismatch");
    if (d_a)
        d_a->assign(a.size(), 0.0);
    if (skipped)
        *skipped = false;
    size_t m = 0;
    double ma = 0.0, mb = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        if (valid[i]) {
            ++m;
            ma += a[i];
            mb += b[i];
        }
    if (m < 4) {
        if (skipped)
            *skipped = true;
        return 0.0;
    }
    ma /= static_cast<double>(m);
    mb /= static_cast<double>(m);
    double naa = 0.0, nbb = 0.0, nab = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        if (valid[i]) {
            const double da = a[i] - ma, db = b[i] - mb;
            naa += da * da;
            nbb += db * db;
            nab += da * db;
        }
    if (naa < 1e-12 || nbb < 1e-12) {
        if (skipped)
            *skipped = true;
        return 0.0;
    }
    const double den = std::sqrt(naa * nbb);
    const double ncc = nab / den;
    if (d_a) {
        // d(1-ncc)/da_i, including the mean-centering projection.
        double gsum = 0.0;
        std::vector<double>& g = *d_a;
        for (size_t i = 0; i < a.size(); ++i)
            if (valid[i]) {
                const double da = a[i] - ma, db = b[i] - mb;
                g[i] = -(db / den - ncc * da / naa);
                gsum += g[i];
            }
        const double mean_g = gsum / static_cast<double>(m);
        for (size_t i = 0; i < a.size(); ++i)
            if (valid[i])
                g[i] -= mean_g;
    }
    return 1.0 - ncc;
}

} // namespace rfpgs
