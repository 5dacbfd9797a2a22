#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctseg {

// Error taxonomy. The CLI maps these onto its exit-code contract
// (usage/config -> 2, io/format/content -> 3, divergence -> 4).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class DivergenceError : public Error {
public:
    using Error::Error;
};

// Class codes of the segmentation problem.
inline constexpr std::uint8_t kBackground = 0;
inline constexpr std::uint8_t kBone = 1;
inline constexpr std::uint8_t kNerve = 2;
inline constexpr int kNumClasses = 3;

struct Shape3 {
    std::int64_t d = 0;
    std::int64_t h = 0;
    std::int64_t w = 0;

    std::int64_t voxels() const { return d * h * w; }
    bool operator==(const Shape3&) const = default;
};

struct Index3 {
    std::int64_t d = 0;
    std::int64_t h = 0;
    std::int64_t w = 0;

    bool operator==(const Index3&) const = default;
};

// Millimeters per voxel along depth, height, width.
struct Spacing {
    float sd = 1.0f;
    float sh = 1.0f;
    float sw = 1.0f;

    bool valid() const {
        return sd > 0.0f && sh > 0.0f && sw > 0.0f && std::isfinite(sd) &&
               std::isfinite(sh) && std::isfinite(sw);
    }
    bool operator==(const Spacing&) const = default;
};

// Depth-major row-major linearization: (d*H + h)*W + w.
inline std::int64_t linear_index(std::int64_t d, std::int64_t h, std::int64_t w,
                                 const Shape3& shape) {
    if (d < 0 || d >= shape.d || h < 0 || h >= shape.h || w < 0 || w >= shape.w) {
        throw UsageError("linear_index: coordinate (" + std::to_string(d) + "," +
                         std::to_string(h) + "," + std::to_string(w) +
                         ") out of bounds for shape (" + std::to_string(shape.d) + "," +
                         std::to_string(shape.h) + "," + std::to_string(shape.w) + ")");
    }
    return (d * shape.h + h) * shape.w + w;
}

// On-disk element type of a stored grid. Values match the SVOL dtype codes.
enum class VoxelType : std::uint32_t {
    Int16 = 0,
    Float32 = 1,
    Label8 = 2,
};

// Scalar CT-like grid. Values live in memory as float regardless of the
// storage dtype; int16 payloads round-trip exactly through float.
struct Volume {
    Shape3 shape;
    Spacing spacing;
    VoxelType stored = VoxelType::Float32;
    std::vector<float> data;

    float& at(std::int64_t d, std::int64_t h, std::int64_t w) {
        return data[static_cast<std::size_t>(linear_index(d, h, w, shape))];
    }
    float at(std::int64_t d, std::int64_t h, std::int64_t w) const {
        return data[static_cast<std::size_t>(linear_index(d, h, w, shape))];
    }
};

inline Volume make_volume(Shape3 shape, Spacing spacing, float fill = 0.0f) {
    if (shape.d < 1 || shape.h < 1 || shape.w < 1) {
        throw UsageError("make_volume: shape components must be positive");
    }
    if (!spacing.valid()) {
        throw UsageError("make_volume: spacing components must be positive and finite");
    }
    Volume v;
    v.shape = shape;
    v.spacing = spacing;
    v.data.assign(static_cast<std::size_t>(shape.voxels()), fill);
    return v;
}

// Per-voxel class codes in {0,1,2}, aligned to a Volume of the same shape.
struct LabelMask {
    Shape3 shape;
    Spacing spacing;
    std::vector<std::uint8_t> data;

    std::uint8_t& at(std::int64_t d, std::int64_t h, std::int64_t w) {
        return data[static_cast<std::size_t>(linear_index(d, h, w, shape))];
    }
    std::uint8_t at(std::int64_t d, std::int64_t h, std::int64_t w) const {
        return data[static_cast<std::size_t>(linear_index(d, h, w, shape))];
    }
};

inline LabelMask make_label_mask(Shape3 shape, Spacing spacing, std::uint8_t fill = 0) {
    if (shape.d < 1 || shape.h < 1 || shape.w < 1) {
        throw UsageError("make_label_mask: shape components must be positive");
    }
    if (!spacing.valid()) {
        throw UsageError("make_label_mask: spacing components must be positive and finite");
    }
    if (fill >= kNumClasses) {
        throw UsageError("make_label_mask: class code out of range");
    }
    LabelMask m;
    m.shape = shape;
    m.spacing = spacing;
    m.data.assign(static_cast<std::size_t>(shape.voxels()), fill);
    return m;
}

// Channel-last (D,H,W,3) grid of accumulated per-class scores.
struct ProbMask {
    static constexpr int kChannels = kNumClasses;

    Shape3 shape;
    std::vector<float> data;  // shape.voxels() * kChannels, channel fastest

    float& at(std::int64_t d, std::int64_t h, std::int64_t w, int c) {
        return data[static_cast<std::size_t>(linear_index(d, h, w, shape) * kChannels + c)];
    }
    float at(std::int64_t d, std::int64_t h, std::int64_t w, int c) const {
        return data[static_cast<std::size_t>(linear_index(d, h, w, shape) * kChannels + c)];
    }
};

inline ProbMask make_prob_mask(Shape3 shape, float fill = 0.0f) {
    if (shape.d < 1 || shape.h < 1 || shape.w < 1) {
        throw UsageError("make_prob_mask: shape components must be positive");
    }
    ProbMask p;
    p.shape = shape;
    p.data.assign(static_cast<std::size_t>(shape.voxels() * ProbMask::kChannels), fill);
    return p;
}

}  // namespace ctseg
