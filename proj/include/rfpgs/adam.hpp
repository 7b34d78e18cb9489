// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "rfpgs/splat_backward.hpp"
#include "rfpgs/types.hpp"

namespace rfpgs {

/// Per-group learning rates for the scene parameters.
struct OptimizerRates {
    double position = 1.6e-4; // multiplied by the scene extent
    double scale = 5e-3;
    double rotation = 1e-3;
    double opacity = 5e-2;
    double sh = 2.5e-3;
};

/// Adam over the scene's Gaussian parameters, with one moment pair per
/// scalar and per-group learning rates. Quaternions are renormalized and
/// logits/logs kept in sane ranges after every step.
class SceneOptimizer {
public:
    SceneOptimizer() = default;
    SceneOptimizer(const SceneModel& scene, const OptimizerRates& rates, double scene_extent)
        : rates_(rates), extent_(scene_extent) {
        resize(scene);
    }

    void resize(const SceneModel& scene) {
        n_ = scene.gaussians.size();
        sh_stride_ = scene.sh_channels.size() * static_cast<size_t>(sh_basis_count(scene.sh_degree));
        const size_t scalars = n_ * (3 + 3 + 4 + 1 + sh_stride_);
        m_.assign(scalars, 0.0);
        v_.assign(scalars, 0.0);
    }

    size_t gaussian_count() const { return n_; }
    std::int64_t step_count() const { return t_; }
    double lr_scale = 1.0; // global multiplier (fine-tuning uses 0.1)

    /// Applies one Adam step. Gradient layout must match the scene.
    void step(SceneModel& scene, const ParamGrads& g) {
        if (g.x_g.size() != n_)
            throw std::invalid_argument("SceneOptimizer: gradient size mismatch");
        ++t_;
        const double b1 = 0.9, b2 = 0.999, eps = 1e-15;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));

        const double lr_pos = rates_.position * extent_ * lr_scale;
        const double lr_scl = rates_.scale * lr_scale;
        const double lr_rot = rates_.rotation * lr_scale;
        const double lr_opa = rates_.opacity * lr_scale;
        const double lr_sh = rates_.sh * lr_scale;

        parallel_for(static_cast<std::int64_t>(n_), [&](std::int64_t b, std::int64_t e) {
            for (std::int64_t i = b; i < e; ++i) {
                PlanarGaussian& gs = scene.gaussians[static_cast<size_t>(i)];
                size_t base = static_cast<size_t>(i) * (11 + sh_stride_);
                for (int k = 0; k < 3; ++k)
                    gs.x_g[k] -= lr_pos * update(base + static_cast<size_t>(k), g.x_g[static_cast<size_t>(i)][k], c1, c2, eps);
                base += 3;
                for (int k = 0; k < 3; ++k)
                    gs.s_log[k] -= lr_scl * update(base + static_cast<size_t>(k), g.s_log[static_cast<size_t>(i)][k], c1, c2, eps);
                base += 3;
                for (int k = 0; k < 4; ++k)
                    gs.q[k] -= lr_rot * update(base + static_cast<size_t>(k), g.q[static_cast<size_t>(i)][k], c1, c2, eps);
                base += 4;
                gs.alpha_logit -= lr_opa * update(base, g.alpha_logit[static_cast<size_t>(i)], c1, c2, eps);
                base += 1;
                for (size_t k = 0; k < sh_stride_; ++k)
                    gs.sh.coeffs[k] -= lr_sh * update(base + k, g.sh[static_cast<size_t>(i) * sh_stride_ + k], c1, c2, eps);

                // Keep the parameterization well-conditioned.
                gs.q = gs.q.normalized();
                gs.alpha_logit = std::clamp(gs.alpha_logit, -12.0, 9.0);
                for (int k = 0; k < 3; ++k)
                    gs.s_log[k] = std::clamp(gs.s_log[k], std::log(1e-7), std::log(0.25 * (extent_ + 1e-9)));
                scene.bbox.clamp_inside(gs.x_g, 0.10);
            }
        });
    }

    /// Drops the state rows for removed Gaussians (keep[i] == true survives).
    void prune(const std::vector<char>& keep) {
        const size_t stride = 11 + sh_stride_;
        size_t w = 0;
        for (size_t i = 0; i < n_; ++i) {
            if (!keep[i])
                continue;
            if (w != i) {
                std::copy(m_.begin() + static_cast<std::ptrdiff_t>(i * stride),
                          m_.begin() + static_cast<std::ptrdiff_t>((i + 1) * stride),
                          m_.begin() + static_cast<std::ptrdiff_t>(w * stride));
                std::copy(v_.begin() + static_cast<std::ptrdiff_t>(i * stride),
                          v_.begin() + static_cast<std::ptrdiff_t>((i + 1) * stride),
                          v_.begin() + static_cast<std::ptrdiff_t>(w * stride));
            }
            ++w;
        }
        n_ = w;
        m_.resize(n_ * stride);
        v_.resize(n_ * stride);
    }

    /// Appends zero-moment state rows for cloned/split Gaussians. When
    /// source >= 0 the moments are copied from that row instead.
    void append(size_t count, std::ptrdiff_t source = -1) {
        const size_t stride = 11 + sh_stride_;
        for (size_t c = 0; c < count; ++c) {
            if (source >= 0) {
                m_.insert(m_.end(), m_.begin() + source * static_cast<std::ptrdiff_t>(stride),
                          m_.begin() + (source + 1) * static_cast<std::ptrdiff_t>(stride));
                v_.insert(v_.end(), v_.begin() + source * static_cast<std::ptrdiff_t>(stride),
                          v_.begin() + (source + 1) * static_cast<std::ptrdiff_t>(stride));
            } else {
                m_.insert(m_.end(), stride, 0.0);
                v_.insert(v_.end(), stride, 0.0);
            }
            ++n_;
        }
    }

    void save(std::ostream& os) const {
        const std::uint64_t sizes[3] = {static_cast<std::uint64_t>(n_),
                                        static_cast<std::uint64_t>(sh_stride_),
                                        static_cast<std::uint64_t>(t_)};
        os.write(reinterpret_cast<const char*>(sizes), sizeof(sizes));
        const double hyper[7] = {rates_.position, rates_.scale, rates_.rotation,
                                 rates_.opacity,  rates_.sh,    extent_,
                                 lr_scale};
        os.write(reinterpret_cast<const char*>(hyper), sizeof(hyper));
        os.write(reinterpret_cast<const char*>(m_.data()), static_cast<std::streamsize>(m_.size() * 8));
        os.write(reinterpret_cast<const char*>(v_.data()), static_cast<std::streamsize>(v_.size() * 8));
    }

    void load(std::istream& is) {
        std::uint64_t sizes[3];
        is.read(reinterpret_cast<char*>(sizes), sizeof(sizes));
        n_ = sizes[0];
        sh_stride_ = sizes[1];
        t_ = static_cast<std::int64_t>(sizes[2]);
        double hyper[7];
        is.read(reinterpret_cast<char*>(hyper), sizeof(hyper));
        rates_ = {hyper[0], hyper[1], hyper[2], hyper[3], hyper[4]};
        extent_ = hyper[5];
        lr_scale = hyper[6];
        const size_t scalars = n_ * (11 + sh_stride_);
        m_.resize(scalars);
        v_.resize(scalars);
        is.read(reinterpret_cast<char*>(m_.data()), static_cast<std::streamsize>(m_.size() * 8));
        is.read(reinterpret_cast<char*>(v_.data()), static_cast<std::streamsize>(v_.size() * 8));
        if (!is)
            throw std::runtime_error("optimizer state truncated");
    }

private:
    double update(size_t idx, double grad, double c1, double c2, double eps) {
        double& m = m_[idx];
        double& v = v_[idx];
        m = 0.9 * m + 0.1 * grad;
        v = 0.999 * v + 0.001 * grad * grad;
        return (m / c1) / (std::sqrt(v / c2) + eps);
    }

    OptimizerRates rates_;
    double extent_ = 1.0;
    size_t n_ = 0;
    size_t sh_stride_ = 0;
    std::int64_t t_ = 0;
    std::vector<double> m_, v_;
};

} // namespace rfpgs
