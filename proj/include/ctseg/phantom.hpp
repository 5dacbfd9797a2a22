#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ctseg/dataset.hpp"
#include "ctseg/rng.hpp"
#include "ctseg/svol.hpp"
#include "ctseg/volume.hpp"

namespace ctseg {

struct IntensityBand {
    double mean = 0.0;
    double sigma = 1.0;
};

// Synthetic CT-like cases: bright bone-analog solids and thin nerve-analog
// tubes on a noisy background. Intensities follow the CT ordering
// (air/soft tissue < nerve < bone) so whitening and class weighting see
// realistic contrast; labels equal the generating geometry exactly.
struct PhantomConfig {
    Shape3 shape{48, 64, 64};
    Spacing spacing{1.0f, 1.0f, 1.0f};
    IntensityBand background{-50.0, 30.0};
    IntensityBand nerve{60.0, 20.0};
    IntensityBand bone{700.0, 80.0};
    int min_bones = 1;
    int max_bones = 2;
    int min_nerves = 2;
    int max_nerves = 4;
    double nerve_radius_min = 1.0;
    double nerve_radius_max = 3.0;
    int bone_size_min = 8;
    int bone_size_max = 20;

    void validate() const {
        if (!(background.mean < nerve.mean && nerve.mean < bone.mean)) {
            throw UsageError("PhantomConfig: intensity bands must be ordered background < nerve < bone");
        }
        if (background.sigma < 0 || nerve.sigma < 0 || bone.sigma < 0) {
            throw UsageError("PhantomConfig: sigmas must be non-negative");
        }
        if (min_bones < 1 || max_bones < min_bones || min_nerves < 1 ||
            max_nerves < min_nerves) {
            throw UsageError("PhantomConfig: invalid structure count ranges");
        }
        if (nerve_radius_min < 1.0 || nerve_radius_max < nerve_radius_min) {
            throw UsageError("PhantomConfig: nerve radii must be >= 1 and ordered");
        }
        if (bone_size_min < 2 || bone_size_max < bone_size_min) {
            throw UsageError("PhantomConfig: invalid bone size range");
        }
        if (!spacing.valid()) {
            throw UsageError("PhantomConfig: spacing must be positive");
        }
        const std::int64_t need = std::max<std::int64_t>(
            bone_size_min + 2, 2 * static_cast<std::int64_t>(std::ceil(nerve_radius_max)) + 3);
        if (shape.d < need || shape.h < need || shape.w < need) {
            throw UsageError("PhantomConfig: volume of shape " + std::to_string(shape.d) + "x" +
                             std::to_string(shape.h) + "x" + std::to_string(shape.w) +
                             " cannot fit the configured structures (need >= " +
                             std::to_string(need) + " per axis)");
        }
    }
};

// Stable 64-bit digest of every generation-relevant field.
inline std::uint64_t phantom_config_hash(const PhantomConfig& c) {
    std::string repr;
    auto add = [&repr](const std::string& s) {
        repr += s;
        repr += ';';
    };
    for (std::int64_t v : {c.shape.d, c.shape.h, c.shape.w}) add(std::to_string(v));
    for (float v : {c.spacing.sd, c.spacing.sh, c.spacing.sw}) add(std::to_string(v));
    for (double v : {c.background.mean, c.background.sigma, c.nerve.mean, c.nerve.sigma,
                     c.bone.mean, c.bone.sigma, c.nerve_radius_min, c.nerve_radius_max}) {
        add(std::to_string(v));
    }
    for (int v : {c.min_bones, c.max_bones, c.min_nerves, c.max_nerves, c.bone_size_min,
                  c.bone_size_max}) {
        add(std::to_string(v));
    }
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (unsigned char ch : repr) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace detail {

struct Vec3 {
    double d, h, w;
};

inline void paint_bone_block(LabelMask& labels, Rng& rng, const PhantomConfig& cfg) {
    Shape3 size;
    size.d = rng.uniform_int(cfg.bone_size_min, std::min<std::int64_t>(cfg.bone_size_max, labels.shape.d - 2));
    size.h = rng.uniform_int(cfg.bone_size_min, std::min<std::int64_t>(cfg.bone_size_max, labels.shape.h - 2));
    size.w = rng.uniform_int(cfg.bone_size_min, std::min<std::int64_t>(cfg.bone_size_max, labels.shape.w - 2));
    const Index3 origin{rng.uniform_int(1, labels.shape.d - 1 - size.d),
                        rng.uniform_int(1, labels.shape.h - 1 - size.h),
                        rng.uniform_int(1, labels.shape.w - 1 - size.w)};
    for (std::int64_t d = origin.d; d < origin.d + size.d; ++d)
        for (std::int64_t h = origin.h; h < origin.h + size.h; ++h)
            for (std::int64_t w = origin.w; w < origin.w + size.w; ++w)
                labels.at(d, h, w) = kBone;
}

inline void paint_bone_cylinder(LabelMask& labels, Rng& rng, const PhantomConfig& cfg) {
    const int axis = static_cast<int>(rng.uniform_int(3));
    const std::int64_t axis_len =
        axis == 0 ? labels.shape.d : (axis == 1 ? labels.shape.h : labels.shape.w);
    const std::int64_t radius =
        std::max<std::int64_t>(2, rng.uniform_int(cfg.bone_size_min / 2, cfg.bone_size_max / 2));
    const std::int64_t length =
        rng.uniform_int(cfg.bone_size_min, std::min<std::int64_t>(cfg.bone_size_max, axis_len - 2));
    const std::int64_t start = rng.uniform_int(1, axis_len - 1 - length);

    // cross-section center on the two remaining axes
    std::array<std::int64_t, 3> lens{labels.shape.d, labels.shape.h, labels.shape.w};
    std::array<std::int64_t, 3> center{};
    for (int a = 0; a < 3; ++a) {
        if (a == axis) continue;
        const std::int64_t margin = radius + 1;
        center[static_cast<std::size_t>(a)] =
            rng.uniform_int(margin, std::max<std::int64_t>(margin, lens[static_cast<std::size_t>(a)] - 1 - margin));
    }
    for (std::int64_t d = 0; d < labels.shape.d; ++d)
        for (std::int64_t h = 0; h < labels.shape.h; ++h)
            for (std::int64_t w = 0; w < labels.shape.w; ++w) {
                const std::array<std::int64_t, 3> p{d, h, w};
                const std::int64_t along = p[static_cast<std::size_t>(axis)];
                if (along < start || along >= start + length) continue;
                double r2 = 0.0;
                for (int a = 0; a < 3; ++a) {
                    if (a == axis) continue;
                    const double delta = static_cast<double>(p[static_cast<std::size_t>(a)] -
                                                             center[static_cast<std::size_t>(a)]);
                    r2 += delta * delta;
                }
                if (r2 <= static_cast<double>(radius * radius)) labels.at(d, h, w) = kBone;
            }
}

inline double point_segment_dist2(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab{b.d - a.d, b.h - a.h, b.w - a.w};
    const Vec3 ap{p.d - a.d, p.h - a.h, p.w - a.w};
    const double len2 = ab.d * ab.d + ab.h * ab.h + ab.w * ab.w;
    double t = len2 > 0.0 ? (ap.d * ab.d + ap.h * ab.h + ap.w * ab.w) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vec3 c{a.d + t * ab.d - p.d, a.h + t * ab.h - p.h, a.w + t * ab.w - p.w};
    return c.d * c.d + c.h * c.h + c.w * c.w;
}

// Thin curved tube along a piecewise-linear centerline. Bone keeps
// precedence where the tube crosses it.
inline void paint_nerve_tube(LabelMask& labels, Rng& rng, const PhantomConfig& cfg) {
    const double radius = rng.uniform(cfg.nerve_radius_min, cfg.nerve_radius_max);
    const double margin = radius + 1.0;
    auto clamp_pos = [&](Vec3 v) {
        v.d = std::clamp(v.d, margin, static_cast<double>(labels.shape.d) - 1.0 - margin);
        v.h = std::clamp(v.h, margin, static_cast<double>(labels.shape.h) - 1.0 - margin);
        v.w = std::clamp(v.w, margin, static_cast<double>(labels.shape.w) - 1.0 - margin);
        return v;
    };
    Vec3 p = clamp_pos({rng.uniform(0.0, static_cast<double>(labels.shape.d)),
                        rng.uniform(0.0, static_cast<double>(labels.shape.h)),
                        rng.uniform(0.0, static_cast<double>(labels.shape.w))});
    const int segments = static_cast<int>(rng.uniform_int(3, 6));
    for (int s = 0; s < segments; ++s) {
        Vec3 dir{rng.normal(), rng.normal(), rng.normal()};
        const double norm = std::sqrt(dir.d * dir.d + dir.h * dir.h + dir.w * dir.w);
        if (norm < 1e-9) continue;
        const double step = rng.uniform(6.0, 14.0);
        Vec3 q = clamp_pos({p.d + dir.d / norm * step, p.h + dir.h / norm * step,
                            p.w + dir.w / norm * step});

        const std::int64_t d0 = static_cast<std::int64_t>(std::floor(std::min(p.d, q.d) - radius));
        const std::int64_t d1 = static_cast<std::int64_t>(std::ceil(std::max(p.d, q.d) + radius));
        const std::int64_t h0 = static_cast<std::int64_t>(std::floor(std::min(p.h, q.h) - radius));
        const std::int64_t h1 = static_cast<std::int64_t>(std::ceil(std::max(p.h, q.h) + radius));
        const std::int64_t w0 = static_cast<std::int64_t>(std::floor(std::min(p.w, q.w) - radius));
        const std::int64_t w1 = static_cast<std::int64_t>(std::ceil(std::max(p.w, q.w) + radius));
        for (std::int64_t d = std::max<std::int64_t>(0, d0); d <= std::min(labels.shape.d - 1, d1); ++d)
            for (std::int64_t h = std::max<std::int64_t>(0, h0); h <= std::min(labels.shape.h - 1, h1); ++h)
                for (std::int64_t w = std::max<std::int64_t>(0, w0); w <= std::min(labels.shape.w - 1, w1); ++w) {
                    if (labels.at(d, h, w) == kBone) continue;
                    const Vec3 voxel{static_cast<double>(d), static_cast<double>(h),
                                     static_cast<double>(w)};
                    if (point_segment_dist2(voxel, p, q) <= radius * radius) {
                        labels.at(d, h, w) = kNerve;
                    }
                }
        p = q;
    }
}

}  // namespace detail

// Deterministic case synthesis: geometry first (bone, then nerve with bone
// precedence), then per-voxel intensities drawn from the band of the final
// label. Re-rolls with a derived seed in the rare event a class ends up
// absent, so every emitted case contains all three classes.
inline std::pair<Volume, LabelMask> generate_case(const PhantomConfig& cfg,
                                                  std::uint64_t case_seed) {
    cfg.validate();
    for (int attempt = 0; attempt < 64; ++attempt) {
        Rng rng(derive_seed(case_seed, static_cast<std::uint64_t>(attempt)));
        LabelMask labels = make_label_mask(cfg.shape, cfg.spacing, kBackground);

        const std::int64_t bones = rng.uniform_int(cfg.min_bones, cfg.max_bones);
        for (std::int64_t i = 0; i < bones; ++i) {
            if (rng.uniform() < 0.5) {
                detail::paint_bone_block(labels, rng, cfg);
            } else {
                detail::paint_bone_cylinder(labels, rng, cfg);
            }
        }
        const std::int64_t nerves = rng.uniform_int(cfg.min_nerves, cfg.max_nerves);
        for (std::int64_t i = 0; i < nerves; ++i) detail::paint_nerve_tube(labels, rng, cfg);

        std::array<std::int64_t, kNumClasses> counts{};
        for (std::uint8_t c : labels.data) counts[c]++;
        if (counts[kBackground] == 0 || counts[kBone] == 0 || counts[kNerve] == 0) {
            continue;  // deterministic re-roll
        }

        Volume ct = make_volume(cfg.shape, cfg.spacing);
        for (std::size_t i = 0; i < ct.data.size(); ++i) {
            const IntensityBand& band = labels.data[i] == kBone
                                            ? cfg.bone
                                            : (labels.data[i] == kNerve ? cfg.nerve
                                                                        : cfg.background);
            ct.data[i] = static_cast<float>(rng.normal(band.mean, band.sigma));
        }
        return {std::move(ct), std::move(labels)};
    }
    throw DataError("generate_case: could not realize all three classes; configuration too tight");
}

// Writes ct_{i}.svol / label_{i}.svol pairs plus the manifest.
inline Manifest generate_dataset(const PhantomConfig& cfg, int n_cases, std::uint64_t seed,
                                 const std::filesystem::path& out_dir) {
    cfg.validate();
    if (n_cases < 1) throw UsageError("generate_dataset: need at least one case");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("generate_dataset: cannot create " + out_dir.string() + ": " + ec.message());

    Manifest man;
    man.config_hash = phantom_config_hash(cfg);
    for (int i = 0; i < n_cases; ++i) {
        CaseEntry entry;
        entry.id = i;
        entry.seed = derive_seed(seed, static_cast<std::uint64_t>(i));
        entry.ct_path = "ct_" + std::to_string(i) + ".svol";
        entry.label_path = "label_" + std::to_string(i) + ".svol";
        auto [ct, labels] = generate_case(cfg, entry.seed);
        save_svol(out_dir / entry.ct_path, ct);
        save_svol(out_dir / entry.label_path, labels);
        man.cases.push_back(std::move(entry));
    }
    save_manifest(out_dir / "manifest.txt", man);
    return man;
}

}  // namespace ctseg
