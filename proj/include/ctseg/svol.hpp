#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>

#include "ctseg/volume.hpp"

namespace ctseg {

// SVOL container (little-endian):
//   bytes 0-7   ASCII magic "SVOL0001"
//   uint32      dtype: 0=int16, 1=float32, 2=uint8 labels
//   uint32 x3   D, H, W
//   float32 x3  spacing sd, sh, sw
//   payload     D*H*W elements in (d*H+h)*W+w order
inline constexpr char kSvolMagic[8] = {'S', 'V', 'O', 'L', '0', '0', '0', '1'};

namespace detail {

inline void put_u32le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64le(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f32le(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32le(os, bits);
}

inline void put_f64le(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64le(os, bits);
}

inline void put_i16le(std::ostream& os, std::int16_t v) {
    const auto u = static_cast<std::uint16_t>(v);
    unsigned char b[2] = {static_cast<unsigned char>(u), static_cast<unsigned char>(u >> 8)};
    os.write(reinterpret_cast<const char*>(b), 2);
}

inline bool get_bytes(std::istream& is, void* out, std::size_t n) {
    is.read(static_cast<char*>(out), static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(is.gcount()) == n;
}

inline bool get_u32le(std::istream& is, std::uint32_t& v) {
    unsigned char b[4];
    if (!get_bytes(is, b, 4)) return false;
    v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
        (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    return true;
}

inline bool get_u64le(std::istream& is, std::uint64_t& v) {
    unsigned char b[8];
    if (!get_bytes(is, b, 8)) return false;
    v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return true;
}

inline bool get_f32le(std::istream& is, float& v) {
    std::uint32_t bits;
    if (!get_u32le(is, bits)) return false;
    std::memcpy(&v, &bits, 4);
    return true;
}

inline bool get_f64le(std::istream& is, double& v) {
    std::uint64_t bits;
    if (!get_u64le(is, bits)) return false;
    std::memcpy(&v, &bits, 8);
    return true;
}

inline bool get_i16le(std::istream& is, std::int16_t& v) {
    unsigned char b[2];
    if (!get_bytes(is, b, 2)) return false;
    v = static_cast<std::int16_t>(
        static_cast<std::uint16_t>(b[0]) | (static_cast<std::uint16_t>(b[1]) << 8));
    return true;
}

inline void write_svol_header(std::ostream& os, VoxelType dtype, const Shape3& shape,
                              const Spacing& spacing) {
    os.write(kSvolMagic, 8);
    put_u32le(os, static_cast<std::uint32_t>(dtype));
    put_u32le(os, static_cast<std::uint32_t>(shape.d));
    put_u32le(os, static_cast<std::uint32_t>(shape.h));
    put_u32le(os, static_cast<std::uint32_t>(shape.w));
    put_f32le(os, spacing.sd);
    put_f32le(os, spacing.sh);
    put_f32le(os, spacing.sw);
}

}  // namespace detail

inline void write_svol(std::ostream& os, const Volume& v) {
    if (v.shape.voxels() <= 0 ||
        v.data.size() != static_cast<std::size_t>(v.shape.voxels())) {
        throw UsageError("write_svol: volume data length does not match shape");
    }
    if (!v.spacing.valid()) {
        throw UsageError("write_svol: invalid spacing");
    }
    if (v.stored != VoxelType::Int16 && v.stored != VoxelType::Float32) {
        throw UsageError("write_svol: volume dtype must be int16 or float32");
    }
    detail::write_svol_header(os, v.stored, v.shape, v.spacing);
    if (v.stored == VoxelType::Float32) {
        for (float x : v.data) detail::put_f32le(os, x);
    } else {
        for (float x : v.data) {
            if (!(std::isfinite(x) && x == std::floor(x) && x >= -32768.0f && x <= 32767.0f)) {
                throw UsageError("write_svol: int16 volume holds a non-int16 value");
            }
            detail::put_i16le(os, static_cast<std::int16_t>(x));
        }
    }
    if (!os) throw IoError("write_svol: stream write failed");
}

inline void write_svol(std::ostream& os, const LabelMask& m) {
    if (m.shape.voxels() <= 0 ||
        m.data.size() != static_cast<std::size_t>(m.shape.voxels())) {
        throw UsageError("write_svol: mask data length does not match shape");
    }
    if (!m.spacing.valid()) {
        throw UsageError("write_svol: invalid spacing");
    }
    for (std::uint8_t c : m.data) {
        if (c >= kNumClasses) throw UsageError("write_svol: class code out of range");
    }
    detail::write_svol_header(os, VoxelType::Label8, m.shape, m.spacing);
    os.write(reinterpret_cast<const char*>(m.data.data()),
             static_cast<std::streamsize>(m.data.size()));
    if (!os) throw IoError("write_svol: stream write failed");
}

using SvolData = std::variant<Volume, LabelMask>;

inline SvolData read_svol(std::istream& is) {
    char magic[8];
    if (!detail::get_bytes(is, magic, 8) || std::memcmp(magic, kSvolMagic, 8) != 0) {
        throw FormatError("read_svol: bad magic, not an SVOL stream");
    }
    std::uint32_t dtype_raw = 0, d = 0, h = 0, w = 0;
    Spacing sp;
    if (!detail::get_u32le(is, dtype_raw) || !detail::get_u32le(is, d) ||
        !detail::get_u32le(is, h) || !detail::get_u32le(is, w) ||
        !detail::get_f32le(is, sp.sd) || !detail::get_f32le(is, sp.sh) ||
        !detail::get_f32le(is, sp.sw)) {
        throw FormatError("read_svol: truncated header");
    }
    if (dtype_raw > 2) {
        throw FormatError("read_svol: unknown dtype code " + std::to_string(dtype_raw));
    }
    if (d == 0 || h == 0 || w == 0) {
        throw FormatError("read_svol: zero dimension in header");
    }
    if (!sp.valid()) {
        throw FormatError("read_svol: non-positive or non-finite spacing");
    }
    const auto dtype = static_cast<VoxelType>(dtype_raw);
    const Shape3 shape{static_cast<std::int64_t>(d), static_cast<std::int64_t>(h),
                       static_cast<std::int64_t>(w)};
    const auto n = static_cast<std::size_t>(shape.voxels());

    SvolData result;
    if (dtype == VoxelType::Label8) {
        LabelMask m;
        m.shape = shape;
        m.spacing = sp;
        m.data.resize(n);
        if (!detail::get_bytes(is, m.data.data(), n)) {
            throw FormatError("read_svol: payload truncated");
        }
        for (std::uint8_t c : m.data) {
            if (c >= kNumClasses) {
                throw DataError("read_svol: label payload holds class code " +
                                std::to_string(int(c)) + " outside {0,1,2}");
            }
        }
        result = std::move(m);
    } else {
        Volume v;
        v.shape = shape;
        v.spacing = sp;
        v.stored = dtype;
        v.data.resize(n);
        if (dtype == VoxelType::Float32) {
            for (std::size_t i = 0; i < n; ++i) {
                if (!detail::get_f32le(is, v.data[i])) {
                    throw FormatError("read_svol: payload truncated");
                }
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                std::int16_t x;
                if (!detail::get_i16le(is, x)) {
                    throw FormatError("read_svol: payload truncated");
                }
                v.data[i] = static_cast<float>(x);
            }
        }
        for (float x : v.data) {
            if (!std::isfinite(x)) throw DataError("read_svol: non-finite voxel value");
        }
        result = std::move(v);
    }
    if (is.peek() != std::istream::traits_type::eof()) {
        throw FormatError("read_svol: trailing bytes after payload");
    }
    return result;
}

// Byte-string helpers, convenient for round-trip checks.
template <class Grid>
std::string svol_bytes(const Grid& g) {
    std::ostringstream os(std::ios::binary);
    write_svol(os, g);
    return os.str();
}

inline SvolData read_svol_bytes(const std::string& bytes) {
    std::istringstream is(bytes, std::ios::binary);
    return read_svol(is);
}

template <class Grid>
void save_svol(const std::filesystem::path& path, const Grid& g) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("save_svol: cannot open for writing: " + path.string());
    write_svol(os, g);
    os.flush();
    if (!os) throw IoError("save_svol: write failed: " + path.string());
}

inline SvolData load_svol(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("load_svol: cannot open: " + path.string());
    return read_svol(is);
}

inline Volume load_volume(const std::filesystem::path& path) {
    SvolData d = load_svol(path);
    if (!std::holds_alternative<Volume>(d)) {
        throw FormatError("load_volume: " + path.string() + " holds a label mask");
    }
    return std::get<Volume>(std::move(d));
}

inline LabelMask load_labels(const std::filesystem::path& path) {
    SvolData d = load_svol(path);
    if (!std::holds_alternative<LabelMask>(d)) {
        throw FormatError("load_labels: " + path.string() + " holds a scalar volume");
    }
    return std::get<LabelMask>(std::move(d));
}

}  // namespace ctseg
