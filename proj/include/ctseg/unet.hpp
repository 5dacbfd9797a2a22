#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ctseg/nn_ops.hpp"
#include "ctseg/rng.hpp"
#include "ctseg/svol.hpp"
#include "ctseg/tensor.hpp"
#include "ctseg/volume.hpp"

namespace ctseg {

struct ModelConfig {
    int in_channels = 1;
    int out_channels = kNumClasses;
    int levels = 4;  // number of downsamplings / skip connections
    int base_channels = 8;
    int convs_per_level = 2;
    int growth = 2;

    bool operator==(const ModelConfig&) const = default;

    void validate() const {
        if (in_channels < 1 || out_channels < 1 || levels < 1 || base_channels < 1 ||
            convs_per_level < 1 || growth < 1) {
            throw UsageError("ModelConfig: all fields must be positive");
        }
    }

    std::int64_t channels_at(int level) const {
        std::int64_t c = base_channels;
        for (int i = 0; i < level; ++i) c *= growth;
        return c;
    }
};

namespace detail {

enum class LayerKind { Conv3, Pool, Upconv, Concat, Conv1 };

struct LayerDesc {
    LayerKind kind;
    std::int64_t cin = 0;
    std::int64_t cout = 0;
    int skip_level = -1;  // Concat only
    std::string name;

    bool has_params() const {
        return kind == LayerKind::Conv3 || kind == LayerKind::Upconv || kind == LayerKind::Conv1;
    }
    std::int64_t kernel() const { return kind == LayerKind::Conv3 ? 3 : (kind == LayerKind::Upconv ? 2 : 1); }
};

// Deterministic layer enumeration shared by build, forward/backward,
// param_count, and checkpoint layout: encoder shallow->deep, bottleneck,
// decoder deep->shallow, final 1x1x1.
inline std::vector<LayerDesc> architecture_walk(const ModelConfig& cfg) {
    cfg.validate();
    std::vector<LayerDesc> walk;
    const int levels = cfg.levels;
    for (int lvl = 0; lvl < levels; ++lvl) {
        for (int v = 0; v < cfg.convs_per_level; ++v) {
            const std::int64_t cin = (v > 0) ? cfg.channels_at(lvl)
                                    : (lvl == 0 ? cfg.in_channels : cfg.channels_at(lvl - 1));
            walk.push_back({LayerKind::Conv3, cin, cfg.channels_at(lvl), -1,
                            "enc" + std::to_string(lvl) + ".conv" + std::to_string(v)});
        }
        walk.push_back({LayerKind::Pool, cfg.channels_at(lvl), cfg.channels_at(lvl), lvl,
                        "enc" + std::to_string(lvl) + ".pool"});
    }
    for (int v = 0; v < cfg.convs_per_level; ++v) {
        const std::int64_t cin = (v > 0) ? cfg.channels_at(levels) : cfg.channels_at(levels - 1);
        walk.push_back({LayerKind::Conv3, cin, cfg.channels_at(levels), -1,
                        "bottleneck.conv" + std::to_string(v)});
    }
    for (int lvl = levels - 1; lvl >= 0; --lvl) {
        const std::int64_t prev =
            (lvl == levels - 1) ? cfg.channels_at(levels) : cfg.channels_at(lvl + 1);
        walk.push_back({LayerKind::Upconv, prev, cfg.channels_at(lvl), -1,
                        "dec" + std::to_string(lvl) + ".up"});
        walk.push_back({LayerKind::Concat, cfg.channels_at(lvl), 2 * cfg.channels_at(lvl), lvl,
                        "dec" + std::to_string(lvl) + ".concat"});
        for (int v = 0; v < cfg.convs_per_level; ++v) {
            const std::int64_t cin = (v > 0) ? cfg.channels_at(lvl) : 2 * cfg.channels_at(lvl);
            walk.push_back({LayerKind::Conv3, cin, cfg.channels_at(lvl), -1,
                            "dec" + std::to_string(lvl) + ".conv" + std::to_string(v)});
        }
    }
    walk.push_back({LayerKind::Conv1, cfg.channels_at(0), cfg.out_channels, -1, "final"});
    return walk;
}

}  // namespace detail

// Exact number of trainable scalars for a configuration.
inline std::int64_t param_count(const ModelConfig& cfg) {
    std::int64_t n = 0;
    for (const auto& l : detail::architecture_walk(cfg)) {
        if (!l.has_params()) continue;
        const std::int64_t k = l.kernel();
        n += l.cin * l.cout * k * k * k + l.cout;
    }
    return n;
}

// Encoder-decoder with `levels` skip connections: each encoder level is
// convs_per_level x (conv3d_same + relu) then 2x max pool; the decoder
// mirrors with stride-2 transposed convolutions and channel concatenation
// of the equal-resolution encoder output; a 1x1x1 convolution maps to the
// class logits. softmax is applied outside the logits path.
template <class T>
struct UNetT {
    ModelConfig config;
    std::vector<ParameterT<T>> params;  // weight, bias per parameterized walk layer

    const ParameterT<T>& param(const std::string& name) const {
        for (const auto& p : params) {
            if (p.name == name) return p;
        }
        throw UsageError("UNet: no parameter named " + name);
    }
};

using UNet = UNetT<float>;

template <class T = float>
UNetT<T> build_unet(const ModelConfig& cfg, Rng& rng) {
    UNetT<T> m;
    m.config = cfg;
    for (const auto& l : detail::architecture_walk(cfg)) {
        if (!l.has_params()) continue;
        const std::int64_t k = l.kernel();
        const std::int64_t fan_in = l.cin * k * k * k;
        std::vector<std::int64_t> wshape =
            (l.kind == detail::LayerKind::Upconv)
                ? std::vector<std::int64_t>{l.cin, l.cout, k, k, k}
                : std::vector<std::int64_t>{l.cout, l.cin, k, k, k};
        m.params.emplace_back(l.name + ".weight", he_init<T>(wshape, fan_in, rng));
        m.params.emplace_back(l.name + ".bias", TensorT<T>({l.cout}));
    }
    return m;
}

// One record of a skip concatenation, for architecture assertions.
struct SkipJoin {
    int level = -1;
    std::vector<std::int64_t> decoder_shape;
    std::vector<std::int64_t> encoder_shape;
};

struct ForwardTrace {
    std::vector<SkipJoin> joins;
};

namespace detail {

template <class T>
struct LayerSaved {
    TensorT<T> input;    // conv/upconv input
    TensorT<T> preact;   // Conv3 output before relu
    Pool3dResult<T> pool;
    std::int64_t concat_ca = 0, concat_cb = 0;
};

}  // namespace detail

template <class T>
struct ForwardCacheT {
    std::vector<detail::LayerSaved<T>> layers;  // aligned with architecture walk
};

using ForwardCache = ForwardCacheT<float>;

template <class T>
TensorT<T> unet_forward_logits(const UNetT<T>& m, const TensorT<T>& x,
                               ForwardCacheT<T>* cache = nullptr,
                               ForwardTrace* trace = nullptr) {
    const ModelConfig& cfg = m.config;
    if (x.rank() != 5 || x.dim(1) != cfg.in_channels) {
        throw UsageError("unet_forward: input must be N x " + std::to_string(cfg.in_channels) +
                         " x D x H x W");
    }
    const std::int64_t div = std::int64_t{1} << cfg.levels;
    for (std::size_t i = 2; i < 5; ++i) {
        if (x.shape[i] % div != 0) {
            throw UsageError("unet_forward: spatial dims must be divisible by 2^levels = " +
                             std::to_string(div));
        }
    }
    const auto walk = detail::architecture_walk(cfg);
    if (cache != nullptr) cache->layers.assign(walk.size(), {});
    if (trace != nullptr) trace->joins.clear();

    std::vector<TensorT<T>> skips(static_cast<std::size_t>(cfg.levels));
    TensorT<T> cur = x;
    std::size_t pi = 0;
    for (std::size_t li = 0; li < walk.size(); ++li) {
        const auto& l = walk[li];
        if (l.kind == detail::LayerKind::Conv3) {
            TensorT<T> z = conv3d_same(cur, m.params[pi].value, m.params[pi + 1].value);
            if (cache != nullptr) {
                cache->layers[li].input = std::move(cur);
                cache->layers[li].preact = z;
            }
            cur = relu(z);
            pi += 2;
        } else if (l.kind == detail::LayerKind::Conv1) {
            TensorT<T> z = conv3d_1x1(cur, m.params[pi].value, m.params[pi + 1].value);
            if (cache != nullptr) cache->layers[li].input = std::move(cur);
            cur = std::move(z);
            pi += 2;
        } else if (l.kind == detail::LayerKind::Pool) {
            skips[static_cast<std::size_t>(l.skip_level)] = cur;
            Pool3dResult<T> pr = maxpool3d_2(cur);
            cur = pr.out;
            if (cache != nullptr) cache->layers[li].pool = std::move(pr);
        } else if (l.kind == detail::LayerKind::Upconv) {
            TensorT<T> z = upconv3d_2(cur, m.params[pi].value, m.params[pi + 1].value);
            if (cache != nullptr) cache->layers[li].input = std::move(cur);
            cur = std::move(z);
            pi += 2;
        } else if (l.kind == detail::LayerKind::Concat) {
            const TensorT<T>& skip = skips[static_cast<std::size_t>(l.skip_level)];
            for (std::size_t i : {std::size_t{0}, std::size_t{2}, std::size_t{3}, std::size_t{4}}) {
                if (cur.shape[i] != skip.shape[i]) {
                    throw UsageError("unet_forward: skip join at level " +
                                     std::to_string(l.skip_level) + " has unequal resolution");
                }
            }
            if (trace != nullptr) {
                trace->joins.push_back({l.skip_level, cur.shape, skip.shape});
            }
            if (cache != nullptr) {
                cache->layers[li].concat_ca = cur.dim(1);
                cache->layers[li].concat_cb = skip.dim(1);
            }
            cur = concat_channels(cur, skip);  // decoder features, then encoder skip
        }
    }
    return cur;
}

template <class T>
TensorT<T> unet_forward_probs(const UNetT<T>& m, const TensorT<T>& x,
                              ForwardTrace* trace = nullptr) {
    return softmax_channels(unet_forward_logits(m, x, static_cast<ForwardCacheT<T>*>(nullptr),
                                                trace));
}

// Accumulates parameter gradients for one forward pass recorded in `cache`.
template <class T>
void unet_backward(UNetT<T>& m, const ForwardCacheT<T>& cache, const TensorT<T>& dlogits) {
    const auto walk = detail::architecture_walk(m.config);
    if (cache.layers.size() != walk.size()) {
        throw UsageError("unet_backward: cache does not match architecture");
    }
    // Parameter index just past each layer, rebuilt by walking forward.
    std::vector<std::size_t> pi_at(walk.size());
    std::size_t pi = 0;
    for (std::size_t li = 0; li < walk.size(); ++li) {
        pi_at[li] = pi;
        if (walk[li].has_params()) pi += 2;
    }

    std::vector<TensorT<T>> dskips(static_cast<std::size_t>(m.config.levels));
    TensorT<T> dcur = dlogits;
    for (std::size_t ri = walk.size(); ri-- > 0;) {
        const auto& l = walk[ri];
        const auto& saved = cache.layers[ri];
        switch (l.kind) {
            case detail::LayerKind::Conv1: {
                TensorT<T> dx(saved.input.shape);
                conv3d_1x1_backward(saved.input, m.params[pi_at[ri]].value, dcur, &dx,
                                    &m.params[pi_at[ri]].grad, &m.params[pi_at[ri] + 1].grad);
                dcur = std::move(dx);
                break;
            }
            case detail::LayerKind::Conv3: {
                TensorT<T> dz(saved.preact.shape);
                relu_backward(saved.preact, dcur, &dz);
                TensorT<T> dx(saved.input.shape);
                conv3d_same_backward(saved.input, m.params[pi_at[ri]].value, dz, &dx,
                                     &m.params[pi_at[ri]].grad, &m.params[pi_at[ri] + 1].grad);
                dcur = std::move(dx);
                break;
            }
            case detail::LayerKind::Upconv: {
                TensorT<T> dx(saved.input.shape);
                upconv3d_2_backward(saved.input, m.params[pi_at[ri]].value, dcur, &dx,
                                    &m.params[pi_at[ri]].grad, &m.params[pi_at[ri] + 1].grad);
                dcur = std::move(dx);
                break;
            }
            case detail::LayerKind::Concat: {
                std::vector<std::int64_t> ashape = dcur.shape;
                ashape[1] = saved.concat_ca;
                std::vector<std::int64_t> bshape = dcur.shape;
                bshape[1] = saved.concat_cb;
                TensorT<T> da(ashape);
                TensorT<T> db(bshape);
                concat_channels_backward(dcur, saved.concat_ca, saved.concat_cb, &da, &db);
                dskips[static_cast<std::size_t>(l.skip_level)] = std::move(db);
                dcur = std::move(da);
                break;
            }
            case detail::LayerKind::Pool: {
                TensorT<T> dx(saved.pool.in_shape);
                maxpool3d_2_backward(saved.pool, dcur, &dx);
                TensorT<T>& ds = dskips[static_cast<std::size_t>(l.skip_level)];
                if (ds.numel() > 0) {
                    for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += ds.data[i];
                }
                dcur = std::move(dx);
                break;
            }
        }
    }
}

// Volume <-> tensor boundary. Internal compute layout is channel-first;
// the external probability mask is channel-last.
inline Tensor tensor_from_patch(const Volume& patch) {
    Tensor t({1, 1, patch.shape.d, patch.shape.h, patch.shape.w});
    std::copy(patch.data.begin(), patch.data.end(), t.data.begin());
    return t;
}

template <class T>
ProbMask probmask_from_channels_first(const TensorT<T>& t) {
    if (t.rank() != 5 || t.dim(0) != 1 || t.dim(1) != kNumClasses) {
        throw UsageError("probmask_from_channels_first: tensor must be 1 x 3 x D x H x W");
    }
    const Shape3 shape{t.dim(2), t.dim(3), t.dim(4)};
    ProbMask p = make_prob_mask(shape);
    const std::int64_t plane = shape.voxels();
    for (std::int64_t c = 0; c < kNumClasses; ++c) {
        const T* src = t.ptr() + c * plane;
        for (std::int64_t v = 0; v < plane; ++v) {
            p.data[static_cast<std::size_t>(v * kNumClasses + c)] = static_cast<float>(src[v]);
        }
    }
    return p;
}

// Full patch prediction: forward pass + softmax, returned channel-last.
inline ProbMask unet_predict(const UNet& m, const Volume& patch) {
    return probmask_from_channels_first(unet_forward_probs(m, tensor_from_patch(patch)));
}

// Checkpoint container: magic, version, config, progress metadata, flat
// float32 parameter payload in walk order.
inline constexpr char kCheckpointMagic[8] = {'S', 'P', 'C', 'K', 'P', 'T', '0', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
    std::uint64_t epoch = 0;
    std::uint64_t iteration = 0;
    double best_dice = -1.0;
};

inline void save_checkpoint(std::ostream& os, const UNet& m, const CheckpointMeta& meta) {
    os.write(kCheckpointMagic, 8);
    detail::put_u32le(os, kCheckpointVersion);
    const ModelConfig& c = m.config;
    for (int field : {c.in_channels, c.out_channels, c.levels, c.base_channels,
                      c.convs_per_level, c.growth}) {
        detail::put_u32le(os, static_cast<std::uint32_t>(field));
    }
    detail::put_u64le(os, meta.epoch);
    detail::put_u64le(os, meta.iteration);
    detail::put_f64le(os, meta.best_dice);
    detail::put_u64le(os, static_cast<std::uint64_t>(param_count(c)));
    for (const Parameter& p : m.params) {
        for (float v : p.value.data) detail::put_f32le(os, v);
    }
    if (!os) throw IoError("save_checkpoint: stream write failed");
}

struct LoadedCheckpoint {
    UNet model;
    CheckpointMeta meta;
};

inline LoadedCheckpoint load_checkpoint(std::istream& is) {
    char magic[8];
    if (!detail::get_bytes(is, magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
        throw FormatError("load_checkpoint: bad magic");
    }
    std::uint32_t version = 0;
    if (!detail::get_u32le(is, version)) throw FormatError("load_checkpoint: truncated header");
    if (version != kCheckpointVersion) {
        throw FormatError("load_checkpoint: unsupported version " + std::to_string(version));
    }
    std::uint32_t fields[6];
    for (auto& f : fields) {
        if (!detail::get_u32le(is, f)) throw FormatError("load_checkpoint: truncated config");
    }
    ModelConfig cfg;
    cfg.in_channels = static_cast<int>(fields[0]);
    cfg.out_channels = static_cast<int>(fields[1]);
    cfg.levels = static_cast<int>(fields[2]);
    cfg.base_channels = static_cast<int>(fields[3]);
    cfg.convs_per_level = static_cast<int>(fields[4]);
    cfg.growth = static_cast<int>(fields[5]);
    cfg.validate();

    LoadedCheckpoint lc;
    std::uint64_t declared = 0;
    if (!detail::get_u64le(is, lc.meta.epoch) || !detail::get_u64le(is, lc.meta.iteration) ||
        !detail::get_f64le(is, lc.meta.best_dice) || !detail::get_u64le(is, declared)) {
        throw FormatError("load_checkpoint: truncated metadata");
    }
    const std::int64_t expected = param_count(cfg);
    if (declared != static_cast<std::uint64_t>(expected)) {
        throw FormatError("load_checkpoint: payload length " + std::to_string(declared) +
                          " does not match config (" + std::to_string(expected) + ")");
    }

    lc.model.config = cfg;
    for (const auto& l : detail::architecture_walk(cfg)) {
        if (!l.has_params()) continue;
        const std::int64_t k = l.kernel();
        std::vector<std::int64_t> wshape =
            (l.kind == detail::LayerKind::Upconv)
                ? std::vector<std::int64_t>{l.cin, l.cout, k, k, k}
                : std::vector<std::int64_t>{l.cout, l.cin, k, k, k};
        lc.model.params.emplace_back(l.name + ".weight", Tensor(wshape));
        lc.model.params.emplace_back(l.name + ".bias", Tensor({l.cout}));
    }
    for (Parameter& p : lc.model.params) {
        for (float& v : p.value.data) {
            if (!detail::get_f32le(is, v)) {
                throw FormatError("load_checkpoint: payload truncated");
            }
        }
    }
    if (is.peek() != std::istream::traits_type::eof()) {
        throw FormatError("load_checkpoint: trailing bytes after payload");
    }
    return lc;
}

inline std::string checkpoint_bytes(const UNet& m, const CheckpointMeta& meta) {
    std::ostringstream os(std::ios::binary);
    save_checkpoint(os, m, meta);
    return os.str();
}

inline LoadedCheckpoint checkpoint_from_bytes(const std::string& bytes) {
    std::istringstream is(bytes, std::ios::binary);
    return load_checkpoint(is);
}

inline void save_checkpoint_file(const std::filesystem::path& path, const UNet& m,
                                 const CheckpointMeta& meta) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("save_checkpoint: cannot open " + path.string());
    save_checkpoint(os, m, meta);
    os.flush();
    if (!os) throw IoError("save_checkpoint: write failed: " + path.string());
}

inline LoadedCheckpoint load_checkpoint_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("load_checkpoint: cannot open " + path.string());
    return load_checkpoint(is);
}

}  // namespace ctseg
