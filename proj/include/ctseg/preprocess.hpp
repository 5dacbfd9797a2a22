#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ctseg/rng.hpp"
#include "ctseg/volume.hpp"

namespace ctseg {

// Whitening transform computed once over the pooled training voxels and
// reused for every phase.
struct NormStats {
    double mean = 0.0;
    double std = 1.0;
};

struct PatchSpec {
    Shape3 patch{32, 64, 64};
    Shape3 stride{20, 40, 40};

    void validate() const {
        if (patch.d < 1 || patch.h < 1 || patch.w < 1) {
            throw UsageError("PatchSpec: patch dims must be positive");
        }
        if (stride.d < 1 || stride.h < 1 || stride.w < 1 || stride.d > patch.d ||
            stride.h > patch.h || stride.w > patch.w) {
            throw UsageError("PatchSpec: stride must be in [1, patch] per axis");
        }
    }
};

struct AugmentParams {
    double noise_sigma = 0.1;  // additive Gaussian, normalized-intensity units
    double flip_prob = 0.5;    // per in-plane axis
    double jitter_mm = 0.2;    // voxel-size perturbation, drawn per axis

    void validate() const {
        if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
            throw UsageError("AugmentParams: noise_sigma must be >= 0");
        }
        if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) {
            throw UsageError("AugmentParams: flip_prob must be in [0,1]");
        }
        if (!(jitter_mm >= 0.0 && jitter_mm < 1.0)) {
            throw UsageError("AugmentParams: jitter_mm must be in [0,1)");
        }
    }
};

namespace detail {

// Index map of one resampled axis. Output voxel j (center (j+0.5)*target mm)
// takes the input voxel whose center is nearest; exact midpoints resolve to
// the greater index.
inline std::vector<std::int64_t> nearest_axis_map(std::int64_t in_len, float in_spacing,
                                                  float target_spacing,
                                                  std::int64_t& out_len) {
    const double extent = static_cast<double>(in_len) * in_spacing;
    out_len = std::max<std::int64_t>(1, std::llround(extent / target_spacing));
    std::vector<std::int64_t> map(static_cast<std::size_t>(out_len));
    for (std::int64_t j = 0; j < out_len; ++j) {
        const double center = (static_cast<double>(j) + 0.5) * target_spacing;
        auto i = static_cast<std::int64_t>(std::floor(center / in_spacing));
        map[static_cast<std::size_t>(j)] = std::clamp<std::int64_t>(i, 0, in_len - 1);
    }
    return map;
}

template <class Grid>
Grid resample_nearest_impl(const Grid& g, const Spacing& target) {
    if (!target.valid()) {
        throw UsageError("resample_nearest: target spacing must be positive and finite");
    }
    Shape3 out_shape;
    const auto dmap = nearest_axis_map(g.shape.d, g.spacing.sd, target.sd, out_shape.d);
    const auto hmap = nearest_axis_map(g.shape.h, g.spacing.sh, target.sh, out_shape.h);
    const auto wmap = nearest_axis_map(g.shape.w, g.spacing.sw, target.sw, out_shape.w);

    Grid out;
    out.shape = out_shape;
    out.spacing = target;
    out.data.resize(static_cast<std::size_t>(out_shape.voxels()));
    std::size_t idx = 0;
    for (std::int64_t d = 0; d < out_shape.d; ++d) {
        const std::int64_t sd = dmap[static_cast<std::size_t>(d)];
        for (std::int64_t h = 0; h < out_shape.h; ++h) {
            const auto* src_row =
                g.data.data() + (sd * g.shape.h + hmap[static_cast<std::size_t>(h)]) * g.shape.w;
            for (std::int64_t w = 0; w < out_shape.w; ++w) {
                out.data[idx++] = src_row[wmap[static_cast<std::size_t>(w)]];
            }
        }
    }
    return out;
}

}  // namespace detail

inline Volume resample_nearest(const Volume& v, const Spacing& target) {
    Volume out = detail::resample_nearest_impl(v, target);
    out.stored = v.stored;  // nearest-neighbor introduces no new values
    return out;
}

inline LabelMask resample_nearest(const LabelMask& m, const Spacing& target) {
    return detail::resample_nearest_impl(m, target);
}

// Global mean and population standard deviation over all voxels of all
// training volumes pooled together.
inline NormStats compute_norm_stats(const std::vector<const Volume*>& training) {
    if (training.empty()) {
        throw UsageError("compute_norm_stats: empty training set");
    }
    double sum = 0.0, sumsq = 0.0;
    std::int64_t n = 0;
    for (const Volume* v : training) {
        if (v == nullptr || v->data.empty()) {
            throw UsageError("compute_norm_stats: empty volume in training set");
        }
        for (float x : v->data) {
            sum += x;
            sumsq += static_cast<double>(x) * x;
        }
        n += static_cast<std::int64_t>(v->data.size());
    }
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sumsq / static_cast<double>(n) - mean * mean);
    const double std_dev = std::sqrt(var);
    if (!(std_dev > 0.0)) {
        throw DataError("compute_norm_stats: zero variance across training voxels");
    }
    return NormStats{mean, std_dev};
}

inline NormStats compute_norm_stats(const std::vector<Volume>& training) {
    std::vector<const Volume*> ptrs;
    ptrs.reserve(training.size());
    for (const Volume& v : training) ptrs.push_back(&v);
    return compute_norm_stats(ptrs);
}

inline Volume normalize(const Volume& v, const NormStats& s) {
    if (!(s.std > 0.0)) {
        throw UsageError("normalize: std must be positive");
    }
    Volume out = v;
    out.stored = VoxelType::Float32;
    for (float& x : out.data) {
        x = static_cast<float>((static_cast<double>(x) - s.mean) / s.std);
    }
    return out;
}

// Window origins along one axis: 0, stride, 2*stride, ... while the window
// fits, plus a final clamped origin so the last window touches the end.
// axis_len <= patch yields exactly {0}.
inline std::vector<std::int64_t> patch_origins(std::int64_t axis_len, std::int64_t patch,
                                               std::int64_t stride) {
    if (axis_len < 1 || patch < 1 || stride < 1) {
        throw UsageError("patch_origins: axis_len, patch, and stride must be positive");
    }
    std::vector<std::int64_t> origins;
    if (axis_len <= patch) {
        origins.push_back(0);
        return origins;
    }
    for (std::int64_t o = 0; o + patch <= axis_len; o += stride) origins.push_back(o);
    if (origins.back() != axis_len - patch) origins.push_back(axis_len - patch);
    return origins;
}

namespace detail {

template <class Grid, class Fill>
Grid extract_patch_impl(const Grid& g, Index3 origin, Shape3 size, Fill pad_value) {
    if (origin.d < 0 || origin.h < 0 || origin.w < 0) {
        throw UsageError("extract_patch: negative origin");
    }
    if (origin.d >= g.shape.d || origin.h >= g.shape.h || origin.w >= g.shape.w) {
        throw UsageError("extract_patch: origin beyond volume extent");
    }
    if (size.d < 1 || size.h < 1 || size.w < 1) {
        throw UsageError("extract_patch: patch size must be positive");
    }
    Grid out;
    out.shape = size;
    out.spacing = g.spacing;
    out.data.assign(static_cast<std::size_t>(size.voxels()), pad_value);
    const std::int64_t nd = std::min(size.d, g.shape.d - origin.d);
    const std::int64_t nh = std::min(size.h, g.shape.h - origin.h);
    const std::int64_t nw = std::min(size.w, g.shape.w - origin.w);
    for (std::int64_t d = 0; d < nd; ++d) {
        for (std::int64_t h = 0; h < nh; ++h) {
            const auto* src =
                g.data.data() + ((origin.d + d) * g.shape.h + origin.h + h) * g.shape.w + origin.w;
            auto* dst = out.data.data() + (d * size.h + h) * size.w;
            std::copy(src, src + nw, dst);
        }
    }
    return out;
}

}  // namespace detail

// Out-of-range voxels (window past the end of a smaller volume) are padded
// with 0, the post-normalization background value.
inline Volume extract_patch(const Volume& v, Index3 origin, Shape3 size) {
    Volume out = detail::extract_patch_impl(v, origin, size, 0.0f);
    out.stored = v.stored;
    return out;
}

inline LabelMask extract_patch(const LabelMask& m, Index3 origin, Shape3 size) {
    return detail::extract_patch_impl(m, origin, size, kBackground);
}

namespace detail {

template <class Grid>
void flip_axis(Grid& g, int axis) {
    const Shape3 s = g.shape;
    auto swap_at = [&](std::int64_t a, std::int64_t b) { std::swap(g.data[a], g.data[b]); };
    if (axis == 1) {  // H
        for (std::int64_t d = 0; d < s.d; ++d)
            for (std::int64_t h = 0; h < s.h / 2; ++h)
                for (std::int64_t w = 0; w < s.w; ++w)
                    swap_at(linear_index(d, h, w, s), linear_index(d, s.h - 1 - h, w, s));
    } else {  // W
        for (std::int64_t d = 0; d < s.d; ++d)
            for (std::int64_t h = 0; h < s.h; ++h)
                for (std::int64_t w = 0; w < s.w / 2; ++w)
                    swap_at(linear_index(d, h, w, s), linear_index(d, h, s.w - 1 - w, s));
    }
}

}  // namespace detail

// Stochastic training-time transform, applied in order:
//   1. additive Gaussian noise on the CT patch (drawn iff noise_sigma > 0)
//   2. H-axis then W-axis flips, one uniform draw each, shared by CT and label
//   3. voxel-size jitter (drawn iff jitter_mm > 0): per-axis target spacing
//      uniform in [1-jitter_mm, 1+jitter_mm] mm, nearest-neighbor resample,
//      then crop/pad back to the original patch shape and spacing
// The depth axis is never flipped.
inline std::pair<Volume, LabelMask> augment(const Volume& ct_patch, const LabelMask& label_patch,
                                            const AugmentParams& p, Rng& rng) {
    p.validate();
    if (ct_patch.shape != label_patch.shape) {
        throw UsageError("augment: CT and label patch shapes differ");
    }
    Volume ct = ct_patch;
    LabelMask label = label_patch;

    if (p.noise_sigma > 0.0) {
        for (float& x : ct.data) {
            x += static_cast<float>(p.noise_sigma * rng.normal());
        }
    }

    if (rng.uniform() < p.flip_prob) {
        detail::flip_axis(ct, 1);
        detail::flip_axis(label, 1);
    }
    if (rng.uniform() < p.flip_prob) {
        detail::flip_axis(ct, 2);
        detail::flip_axis(label, 2);
    }

    if (p.jitter_mm > 0.0) {
        const Spacing target{
            static_cast<float>(rng.uniform(1.0 - p.jitter_mm, 1.0 + p.jitter_mm)),
            static_cast<float>(rng.uniform(1.0 - p.jitter_mm, 1.0 + p.jitter_mm)),
            static_cast<float>(rng.uniform(1.0 - p.jitter_mm, 1.0 + p.jitter_mm))};
        const Shape3 shape = ct.shape;
        const Spacing spacing = ct.spacing;
        Volume ct_j = resample_nearest(ct, target);
        LabelMask label_j = resample_nearest(label, target);
        ct = extract_patch(ct_j, {0, 0, 0}, shape);
        label = extract_patch(label_j, {0, 0, 0}, shape);
        ct.spacing = spacing;  // jitter perturbs structure size, not coordinates
        label.spacing = spacing;
    }
    return {std::move(ct), std::move(label)};
}

}  // namespace ctseg
