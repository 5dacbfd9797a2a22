#pragma once

// Brute-force reference implementations, independent of the library's
// production code paths. Everything here favors obviousness over speed.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "ctseg/loss.hpp"
#include "ctseg/metrics.hpp"
#include "ctseg/tensor.hpp"
#include "ctseg/volume.hpp"

namespace oracle {

// Nearest-center lookup along one axis, scanning every input voxel center.
// Exact midpoints resolve to the greater index (scan keeps the last minimum).
inline std::int64_t nearest_input_index(std::int64_t j, double target_spacing,
                                        std::int64_t in_len, double in_spacing) {
    const double out_center = (static_cast<double>(j) + 0.5) * target_spacing;
    std::int64_t best = 0;
    double best_dist = std::abs(out_center - 0.5 * in_spacing);
    for (std::int64_t i = 1; i < in_len; ++i) {
        const double dist = std::abs(out_center - (static_cast<double>(i) + 0.5) * in_spacing);
        if (dist <= best_dist) {
            best_dist = dist;
            best = i;
        }
    }
    return best;
}

template <class Grid>
Grid resample_nearest(const Grid& g, const ctseg::Spacing& target) {
    auto out_len = [](std::int64_t len, double sp, double target_sp) {
        return std::max<std::int64_t>(1, std::llround(len * sp / target_sp));
    };
    Grid out;
    out.shape = {out_len(g.shape.d, g.spacing.sd, target.sd),
                 out_len(g.shape.h, g.spacing.sh, target.sh),
                 out_len(g.shape.w, g.spacing.sw, target.sw)};
    out.spacing = target;
    out.data.resize(static_cast<std::size_t>(out.shape.voxels()));
    for (std::int64_t d = 0; d < out.shape.d; ++d) {
        for (std::int64_t h = 0; h < out.shape.h; ++h) {
            for (std::int64_t w = 0; w < out.shape.w; ++w) {
                const std::int64_t sd = nearest_input_index(d, target.sd, g.shape.d, g.spacing.sd);
                const std::int64_t sh = nearest_input_index(h, target.sh, g.shape.h, g.spacing.sh);
                const std::int64_t sw = nearest_input_index(w, target.sw, g.shape.w, g.spacing.sw);
                out.data[static_cast<std::size_t>(ctseg::linear_index(d, h, w, out.shape))] =
                    g.data[static_cast<std::size_t>(ctseg::linear_index(sd, sh, sw, g.shape))];
            }
        }
    }
    return out;
}

// Direct nested-loop 3D cross-correlation with zero padding.
template <class T>
ctseg::TensorT<T> conv3d(const ctseg::TensorT<T>& x, const ctseg::TensorT<T>& w,
                         const ctseg::TensorT<T>& b, std::int64_t k, std::int64_t pad) {
    const std::int64_t N = x.dim(0), Cin = x.dim(1), D = x.dim(2), H = x.dim(3), W = x.dim(4);
    const std::int64_t Cout = w.dim(0);
    ctseg::TensorT<T> y({N, Cout, D, H, W});
    auto xat = [&](std::int64_t n, std::int64_t c, std::int64_t d, std::int64_t h,
                   std::int64_t wi) -> T {
        if (d < 0 || d >= D || h < 0 || h >= H || wi < 0 || wi >= W) return T{0};
        return x.data[static_cast<std::size_t>((((n * Cin + c) * D + d) * H + h) * W + wi)];
    };
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t co = 0; co < Cout; ++co)
            for (std::int64_t d = 0; d < D; ++d)
                for (std::int64_t h = 0; h < H; ++h)
                    for (std::int64_t wi = 0; wi < W; ++wi) {
                        T acc = b.data[static_cast<std::size_t>(co)];
                        for (std::int64_t ci = 0; ci < Cin; ++ci)
                            for (std::int64_t kd = 0; kd < k; ++kd)
                                for (std::int64_t kh = 0; kh < k; ++kh)
                                    for (std::int64_t kw = 0; kw < k; ++kw) {
                                        acc += w.data[static_cast<std::size_t>(
                                                   ((((co * Cin) + ci) * k + kd) * k + kh) * k +
                                                   kw)] *
                                               xat(n, ci, d + kd - pad, h + kh - pad,
                                                   wi + kw - pad);
                                    }
                        y.data[static_cast<std::size_t>((((n * Cout + co) * D + d) * H + h) * W +
                                                        wi)] = acc;
                    }
    return y;
}

// Direct transposed convolution, kernel 2, stride 2, weight Cin x Cout x 2^3.
template <class T>
ctseg::TensorT<T> upconv3d_2(const ctseg::TensorT<T>& x, const ctseg::TensorT<T>& w,
                             const ctseg::TensorT<T>& b) {
    const std::int64_t N = x.dim(0), Cin = x.dim(1), D = x.dim(2), H = x.dim(3), W = x.dim(4);
    const std::int64_t Cout = w.dim(1);
    ctseg::TensorT<T> y({N, Cout, 2 * D, 2 * H, 2 * W});
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        const std::int64_t co = (static_cast<std::int64_t>(i) / (8 * D * H * W)) % Cout;
        y.data[i] = b.data[static_cast<std::size_t>(co)];
    }
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t ci = 0; ci < Cin; ++ci)
            for (std::int64_t co = 0; co < Cout; ++co)
                for (std::int64_t d = 0; d < D; ++d)
                    for (std::int64_t h = 0; h < H; ++h)
                        for (std::int64_t wi = 0; wi < W; ++wi)
                            for (std::int64_t kd = 0; kd < 2; ++kd)
                                for (std::int64_t kh = 0; kh < 2; ++kh)
                                    for (std::int64_t kw = 0; kw < 2; ++kw) {
                                        y.data[static_cast<std::size_t>(
                                            (((n * Cout + co) * 2 * D + 2 * d + kd) * 2 * H + 2 * h +
                                             kh) *
                                                2 * W +
                                            2 * wi + kw)] +=
                                            x.data[static_cast<std::size_t>(
                                                (((n * Cin + ci) * D + d) * H + h) * W + wi)] *
                                            w.data[static_cast<std::size_t>(
                                                (((ci * Cout + co) * 2 + kd) * 2 + kh) * 2 + kw)];
                                    }
    return y;
}

// Central finite differences of a scalar-valued function w.r.t. one tensor,
// evaluated in double precision.
inline ctseg::TensorT<double> finite_difference(
    ctseg::TensorT<double>& arg, const std::function<double()>& eval, double h = 1e-5) {
    ctseg::TensorT<double> grad(arg.shape);
    for (std::size_t i = 0; i < arg.data.size(); ++i) {
        const double saved = arg.data[i];
        arg.data[i] = saved + h;
        const double fp = eval();
        arg.data[i] = saved - h;
        const double fm = eval();
        arg.data[i] = saved;
        grad.data[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

// Largest relative error between an analytic gradient and its finite
// difference estimate, with an absolute floor to avoid 0/0.
inline double max_rel_error(const ctseg::TensorT<double>& analytic,
                            const ctseg::TensorT<double>& fd, double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.data.size(); ++i) {
        const double denom = std::max({std::abs(analytic.data[i]), std::abs(fd.data[i]), floor});
        worst = std::max(worst, std::abs(analytic.data[i] - fd.data[i]) / denom);
    }
    return worst;
}

// Naive per-voxel confusion counting.
inline ctseg::ConfusionCounts confusion(const ctseg::LabelMask& pred,
                                        const ctseg::LabelMask& gt) {
    ctseg::ConfusionCounts c;
    c.total = pred.shape.voxels();
    for (int cls = 0; cls < ctseg::kNumClasses; ++cls) {
        for (std::int64_t d = 0; d < pred.shape.d; ++d)
            for (std::int64_t h = 0; h < pred.shape.h; ++h)
                for (std::int64_t w = 0; w < pred.shape.w; ++w) {
                    const bool p = pred.at(d, h, w) == cls;
                    const bool g = gt.at(d, h, w) == cls;
                    if (p && g) c.per_class[static_cast<std::size_t>(cls)].tp++;
                    if (p && !g) c.per_class[static_cast<std::size_t>(cls)].fp++;
                    if (!p && g) c.per_class[static_cast<std::size_t>(cls)].fn++;
                }
    }
    return c;
}

// Direct evaluation of the weighted softmax cross entropy in its written
// form: -sum_x w(x) log(exp(a_l)/sum_k exp(a_k)).
inline double weighted_ce_direct(const ctseg::TensorT<double>& logits,
                                 const std::vector<std::uint8_t>& labels,
                                 const ctseg::ClassWeights& weights) {
    const std::int64_t N = logits.dim(0);
    const std::int64_t plane = logits.dim(2) * logits.dim(3) * logits.dim(4);
    double loss = 0.0;
    for (std::int64_t n = 0; n < N; ++n) {
        for (std::int64_t v = 0; v < plane; ++v) {
            double denom = 0.0;
            for (int c = 0; c < 3; ++c) {
                denom += std::exp(logits.data[static_cast<std::size_t>((n * 3 + c) * plane + v)]);
            }
            const std::uint8_t l = labels[static_cast<std::size_t>(n * plane + v)];
            const double num =
                std::exp(logits.data[static_cast<std::size_t>((n * 3 + l) * plane + v)]);
            loss -= weights.for_class(l) * std::log(num / denom);
        }
    }
    return loss;
}

}  // namespace oracle
