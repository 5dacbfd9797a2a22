#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ctseg/rng.hpp"
#include "ctseg/tensor.hpp"

namespace ctseg {

namespace detail {

// Output-coordinate range for which input = output + (k - pad) stays in
// bounds along an axis of length `len`.
struct KRange {
    std::int64_t lo;
    std::int64_t hi;  // exclusive
};

inline KRange krange(std::int64_t len, std::int64_t k, std::int64_t pad) {
    return {std::max<std::int64_t>(0, pad - k), std::min(len, len + pad - k)};
}

inline void check_activation(const TensorT<float>&) {}

template <class T>
void check_conv_shapes(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                       std::int64_t k, const char* op) {
    if (x.rank() != 5) throw UsageError(std::string(op) + ": input must be N x C x D x H x W");
    if (w.rank() != 5 || w.dim(2) != k || w.dim(3) != k || w.dim(4) != k) {
        throw UsageError(std::string(op) + ": weight must be Cout x Cin x " + std::to_string(k) +
                         "^3");
    }
    if (x.dim(1) != w.dim(1)) {
        throw UsageError(std::string(op) + ": input channels do not match weight Cin");
    }
    if (b.rank() != 1 || b.dim(0) != w.dim(0)) {
        throw UsageError(std::string(op) + ": bias length must equal Cout");
    }
}

// Zero-padded cross-correlation with cubic kernel k and pad (k-1)/2 so the
// spatial extent is preserved. Shared by the 3x3x3 and 1x1x1 layers.
template <class T>
TensorT<T> conv3d_forward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                          std::int64_t k) {
    const std::int64_t pad = (k - 1) / 2;
    const std::int64_t n_batch = x.dim(0), cin = x.dim(1);
    const std::int64_t dd = x.dim(2), hh = x.dim(3), ww = x.dim(4);
    const std::int64_t cout = w.dim(0);
    TensorT<T> y({n_batch, cout, dd, hh, ww});
    const std::int64_t plane = dd * hh * ww;

    const std::int64_t jobs = n_batch * cout;
#pragma omp parallel for schedule(static) if (jobs > 1 && plane* cin > 2048)
    for (std::int64_t job = 0; job < jobs; ++job) {
        const std::int64_t n = job / cout;
        const std::int64_t co = job % cout;
        T* yc = y.ptr() + (n * cout + co) * plane;
        std::fill(yc, yc + plane, b.data[static_cast<std::size_t>(co)]);
        for (std::int64_t ci = 0; ci < cin; ++ci) {
            const T* xc = x.ptr() + (n * cin + ci) * plane;
            const T* wk = w.ptr() + (co * cin + ci) * k * k * k;
            for (std::int64_t kd = 0; kd < k; ++kd) {
                const KRange rd = krange(dd, kd, pad);
                for (std::int64_t kh = 0; kh < k; ++kh) {
                    const KRange rh = krange(hh, kh, pad);
                    for (std::int64_t kw = 0; kw < k; ++kw) {
                        const KRange rw = krange(ww, kw, pad);
                        const T wv = wk[(kd * k + kh) * k + kw];
                        for (std::int64_t d = rd.lo; d < rd.hi; ++d) {
                            const std::int64_t id = d + kd - pad;
                            for (std::int64_t h = rh.lo; h < rh.hi; ++h) {
                                const std::int64_t ih = h + kh - pad;
                                T* yrow = yc + (d * hh + h) * ww;
                                const T* xrow = xc + (id * hh + ih) * ww + (kw - pad);
                                for (std::int64_t wi = rw.lo; wi < rw.hi; ++wi) {
                                    yrow[wi] += wv * xrow[wi];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return y;
}

template <class T>
void conv3d_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& dy,
                     std::int64_t k, TensorT<T>* dx, TensorT<T>* dw, TensorT<T>* db) {
    const std::int64_t pad = (k - 1) / 2;
    const std::int64_t n_batch = x.dim(0), cin = x.dim(1);
    const std::int64_t dd = x.dim(2), hh = x.dim(3), ww = x.dim(4);
    const std::int64_t cout = w.dim(0);
    const std::int64_t plane = dd * hh * ww;

    if (dx != nullptr) {
        if (dx->shape != x.shape) throw UsageError("conv3d backward: dx shape mismatch");
        const std::int64_t jobs = n_batch * cin;
#pragma omp parallel for schedule(static) if (jobs > 1 && plane* cout > 2048)
        for (std::int64_t job = 0; job < jobs; ++job) {
            const std::int64_t n = job / cin;
            const std::int64_t ci = job % cin;
            T* gc = dx->ptr() + (n * cin + ci) * plane;
            for (std::int64_t co = 0; co < cout; ++co) {
                const T* dyc = dy.ptr() + (n * cout + co) * plane;
                const T* wk = w.ptr() + (co * cin + ci) * k * k * k;
                for (std::int64_t kd = 0; kd < k; ++kd) {
                    const KRange rd = krange(dd, 2 * pad - kd, pad);
                    for (std::int64_t kh = 0; kh < k; ++kh) {
                        const KRange rh = krange(hh, 2 * pad - kh, pad);
                        for (std::int64_t kw = 0; kw < k; ++kw) {
                            const KRange rw = krange(ww, 2 * pad - kw, pad);
                            const T wv = wk[(kd * k + kh) * k + kw];
                            for (std::int64_t d = rd.lo; d < rd.hi; ++d) {
                                const std::int64_t sd = d + pad - kd;
                                for (std::int64_t h = rh.lo; h < rh.hi; ++h) {
                                    const std::int64_t sh = h + pad - kh;
                                    T* grow = gc + (d * hh + h) * ww;
                                    const T* dyrow = dyc + (sd * hh + sh) * ww + (pad - kw);
                                    for (std::int64_t wi = rw.lo; wi < rw.hi; ++wi) {
                                        grow[wi] += wv * dyrow[wi];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    if (dw != nullptr || db != nullptr) {
        if (dw != nullptr && dw->shape != w.shape)
            throw UsageError("conv3d backward: dw shape mismatch");
        if (db != nullptr && (db->rank() != 1 || db->dim(0) != cout))
            throw UsageError("conv3d backward: db shape mismatch");
#pragma omp parallel for schedule(static) if (cout > 1 && plane* cin > 2048)
        for (std::int64_t co = 0; co < cout; ++co) {
            if (db != nullptr) {
                T acc{0};
                for (std::int64_t n = 0; n < n_batch; ++n) {
                    const T* dyc = dy.ptr() + (n * cout + co) * plane;
                    for (std::int64_t i = 0; i < plane; ++i) acc += dyc[i];
                }
                db->data[static_cast<std::size_t>(co)] += acc;
            }
            if (dw == nullptr) continue;
            for (std::int64_t ci = 0; ci < cin; ++ci) {
                T* gw = dw->ptr() + (co * cin + ci) * k * k * k;
                for (std::int64_t kd = 0; kd < k; ++kd) {
                    const KRange rd = krange(dd, kd, pad);
                    for (std::int64_t kh = 0; kh < k; ++kh) {
                        const KRange rh = krange(hh, kh, pad);
                        for (std::int64_t kw = 0; kw < k; ++kw) {
                            const KRange rw = krange(ww, kw, pad);
                            T acc{0};
                            for (std::int64_t n = 0; n < n_batch; ++n) {
                                const T* xc = x.ptr() + (n * cin + ci) * plane;
                                const T* dyc = dy.ptr() + (n * cout + co) * plane;
                                for (std::int64_t d = rd.lo; d < rd.hi; ++d) {
                                    const std::int64_t id = d + kd - pad;
                                    for (std::int64_t h = rh.lo; h < rh.hi; ++h) {
                                        const std::int64_t ih = h + kh - pad;
                                        const T* xrow = xc + (id * hh + ih) * ww + (kw - pad);
                                        const T* dyrow = dyc + (d * hh + h) * ww;
                                        for (std::int64_t wi = rw.lo; wi < rw.hi; ++wi) {
                                            acc += xrow[wi] * dyrow[wi];
                                        }
                                    }
                                }
                            }
                            gw[(kd * k + kh) * k + kw] += acc;
                        }
                    }
                }
            }
        }
    }
}

}  // namespace detail

// 3x3x3 convolution, zero pad 1: spatial dims preserved.
template <class T>
TensorT<T> conv3d_same(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
    detail::check_conv_shapes(x, w, b, 3, "conv3d_same");
    return detail::conv3d_forward(x, w, b, 3);
}

template <class T>
void conv3d_same_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& dy,
                          TensorT<T>* dx, TensorT<T>* dw, TensorT<T>* db) {
    detail::conv3d_backward(x, w, dy, 3, dx, dw, db);
}

// 1x1x1 convolution: per-voxel channel mixing.
template <class T>
TensorT<T> conv3d_1x1(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
    detail::check_conv_shapes(x, w, b, 1, "conv3d_1x1");
    return detail::conv3d_forward(x, w, b, 1);
}

template <class T>
void conv3d_1x1_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& dy,
                         TensorT<T>* dx, TensorT<T>* dw, TensorT<T>* db) {
    detail::conv3d_backward(x, w, dy, 1, dx, dw, db);
}

// Non-overlapping 2x2x2 max pooling. argmax holds, per output element, the
// linear index of the winning input element; ties go to the lowest index.
template <class T>
struct Pool3dResult {
    TensorT<T> out;
    std::vector<std::int64_t> argmax;
    std::vector<std::int64_t> in_shape;
};

template <class T>
Pool3dResult<T> maxpool3d_2(const TensorT<T>& x) {
    if (x.rank() != 5) throw UsageError("maxpool3d_2: input must be N x C x D x H x W");
    const std::int64_t n_batch = x.dim(0), c = x.dim(1);
    const std::int64_t dd = x.dim(2), hh = x.dim(3), ww = x.dim(4);
    if (dd % 2 != 0 || hh % 2 != 0 || ww % 2 != 0) {
        throw UsageError("maxpool3d_2: spatial dims must be even, got " + std::to_string(dd) +
                         "x" + std::to_string(hh) + "x" + std::to_string(ww));
    }
    Pool3dResult<T> r;
    r.out = TensorT<T>({n_batch, c, dd / 2, hh / 2, ww / 2});
    r.argmax.resize(static_cast<std::size_t>(r.out.numel()));
    r.in_shape = x.shape;
    const std::int64_t od = dd / 2, oh = hh / 2, ow = ww / 2;
    std::size_t oi = 0;
    for (std::int64_t n = 0; n < n_batch; ++n) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
            const std::int64_t base = (n * c + ch) * dd * hh * ww;
            for (std::int64_t d = 0; d < od; ++d) {
                for (std::int64_t h = 0; h < oh; ++h) {
                    for (std::int64_t w = 0; w < ow; ++w) {
                        T best{};
                        std::int64_t best_idx = -1;
                        for (std::int64_t zd = 0; zd < 2; ++zd) {
                            for (std::int64_t zh = 0; zh < 2; ++zh) {
                                for (std::int64_t zw = 0; zw < 2; ++zw) {
                                    const std::int64_t idx =
                                        base + ((2 * d + zd) * hh + 2 * h + zh) * ww + 2 * w + zw;
                                    const T v = x.data[static_cast<std::size_t>(idx)];
                                    if (best_idx < 0 || v > best) {
                                        best = v;
                                        best_idx = idx;
                                    }
                                }
                            }
                        }
                        r.out.data[oi] = best;
                        r.argmax[oi] = best_idx;
                        ++oi;
                    }
                }
            }
        }
    }
    return r;
}

template <class T>
void maxpool3d_2_backward(const Pool3dResult<T>& fw, const TensorT<T>& dy, TensorT<T>* dx) {
    if (dx->shape != fw.in_shape) throw UsageError("maxpool3d_2_backward: dx shape mismatch");
    if (dy.shape != fw.out.shape) throw UsageError("maxpool3d_2_backward: dy shape mismatch");
    for (std::size_t i = 0; i < fw.argmax.size(); ++i) {
        dx->data[static_cast<std::size_t>(fw.argmax[i])] += dy.data[i];
    }
}

// Transposed convolution, kernel 2, stride 2, no padding: doubles D, H, W.
// Weight layout is Cin x Cout x 2 x 2 x 2. Every output voxel receives
// exactly one kernel tap per input channel.
template <class T>
TensorT<T> upconv3d_2(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
    if (x.rank() != 5) throw UsageError("upconv3d_2: input must be N x C x D x H x W");
    if (w.rank() != 5 || w.dim(0) != x.dim(1) || w.dim(2) != 2 || w.dim(3) != 2 || w.dim(4) != 2) {
        throw UsageError("upconv3d_2: weight must be Cin x Cout x 2x2x2 with Cin matching input");
    }
    const std::int64_t n_batch = x.dim(0), cin = x.dim(1), cout = w.dim(1);
    if (b.rank() != 1 || b.dim(0) != cout) throw UsageError("upconv3d_2: bias length mismatch");
    const std::int64_t dd = x.dim(2), hh = x.dim(3), ww = x.dim(4);
    TensorT<T> y({n_batch, cout, 2 * dd, 2 * hh, 2 * ww});
    const std::int64_t in_plane = dd * hh * ww;
    const std::int64_t out_plane = 8 * in_plane;

    const std::int64_t jobs = n_batch * cout;
#pragma omp parallel for schedule(static) if (jobs > 1 && in_plane* cin > 2048)
    for (std::int64_t job = 0; job < jobs; ++job) {
        const std::int64_t n = job / cout;
        const std::int64_t co = job % cout;
        T* yc = y.ptr() + (n * cout + co) * out_plane;
        std::fill(yc, yc + out_plane, b.data[static_cast<std::size_t>(co)]);
        for (std::int64_t ci = 0; ci < cin; ++ci) {
            const T* xc = x.ptr() + (n * cin + ci) * in_plane;
            const T* wk = w.ptr() + (ci * cout + co) * 8;
            for (std::int64_t kd = 0; kd < 2; ++kd) {
                for (std::int64_t kh = 0; kh < 2; ++kh) {
                    for (std::int64_t kw = 0; kw < 2; ++kw) {
                        const T wv = wk[(kd * 2 + kh) * 2 + kw];
                        for (std::int64_t d = 0; d < dd; ++d) {
                            for (std::int64_t h = 0; h < hh; ++h) {
                                const T* xrow = xc + (d * hh + h) * ww;
                                T* yrow = yc + ((2 * d + kd) * 2 * hh + 2 * h + kh) * 2 * ww + kw;
                                for (std::int64_t wi = 0; wi < ww; ++wi) {
                                    yrow[2 * wi] += wv * xrow[wi];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return y;
}

template <class T>
void upconv3d_2_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& dy,
                         TensorT<T>* dx, TensorT<T>* dw, TensorT<T>* db) {
    const std::int64_t n_batch = x.dim(0), cin = x.dim(1), cout = w.dim(1);
    const std::int64_t dd = x.dim(2), hh = x.dim(3), ww = x.dim(4);
    const std::int64_t in_plane = dd * hh * ww;
    const std::int64_t out_plane = 8 * in_plane;

    if (dx != nullptr) {
        if (dx->shape != x.shape) throw UsageError("upconv3d_2_backward: dx shape mismatch");
#pragma omp parallel for schedule(static) if (n_batch* cin > 1 && in_plane* cout > 2048)
        for (std::int64_t job = 0; job < n_batch * cin; ++job) {
            const std::int64_t n = job / cin;
            const std::int64_t ci = job % cin;
            T* gc = dx->ptr() + (n * cin + ci) * in_plane;
            for (std::int64_t co = 0; co < cout; ++co) {
                const T* dyc = dy.ptr() + (n * cout + co) * out_plane;
                const T* wk = w.ptr() + (ci * cout + co) * 8;
                for (std::int64_t kd = 0; kd < 2; ++kd) {
                    for (std::int64_t kh = 0; kh < 2; ++kh) {
                        for (std::int64_t kw = 0; kw < 2; ++kw) {
                            const T wv = wk[(kd * 2 + kh) * 2 + kw];
                            for (std::int64_t d = 0; d < dd; ++d) {
                                for (std::int64_t h = 0; h < hh; ++h) {
                                    T* grow = gc + (d * hh + h) * ww;
                                    const T* dyrow =
                                        dyc + ((2 * d + kd) * 2 * hh + 2 * h + kh) * 2 * ww + kw;
                                    for (std::int64_t wi = 0; wi < ww; ++wi) {
                                        grow[wi] += wv * dyrow[2 * wi];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    if (dw != nullptr || db != nullptr) {
        if (dw != nullptr && dw->shape != w.shape)
            throw UsageError("upconv3d_2_backward: dw shape mismatch");
        if (db != nullptr && (db->rank() != 1 || db->dim(0) != cout))
            throw UsageError("upconv3d_2_backward: db shape mismatch");
#pragma omp parallel for schedule(static) if (cout > 1 && in_plane* cin > 2048)
        for (std::int64_t co = 0; co < cout; ++co) {
            if (db != nullptr) {
                T acc{0};
                for (std::int64_t n = 0; n < n_batch; ++n) {
                    const T* dyc = dy.ptr() + (n * cout + co) * out_plane;
                    for (std::int64_t i = 0; i < out_plane; ++i) acc += dyc[i];
                }
                db->data[static_cast<std::size_t>(co)] += acc;
            }
            if (dw == nullptr) continue;
            for (std::int64_t ci = 0; ci < cin; ++ci) {
                T* gw = dw->ptr() + (ci * cout + co) * 8;
                for (std::int64_t kd = 0; kd < 2; ++kd) {
                    for (std::int64_t kh = 0; kh < 2; ++kh) {
                        for (std::int64_t kw = 0; kw < 2; ++kw) {
                            T acc{0};
                            for (std::int64_t n = 0; n < n_batch; ++n) {
                                const T* xc = x.ptr() + (n * cin + ci) * in_plane;
                                const T* dyc = dy.ptr() + (n * cout + co) * out_plane;
                                for (std::int64_t d = 0; d < dd; ++d) {
                                    for (std::int64_t h = 0; h < hh; ++h) {
                                        const T* xrow = xc + (d * hh + h) * ww;
                                        const T* dyrow =
                                            dyc +
                                            ((2 * d + kd) * 2 * hh + 2 * h + kh) * 2 * ww + kw;
                                        for (std::int64_t wi = 0; wi < ww; ++wi) {
                                            acc += xrow[wi] * dyrow[2 * wi];
                                        }
                                    }
                                }
                            }
                            gw[(kd * 2 + kh) * 2 + kw] += acc;
                        }
                    }
                }
            }
        }
    }
}

// Elementwise max(x, 0); subgradient at 0 is 0.
template <class T>
TensorT<T> relu(const TensorT<T>& x) {
    TensorT<T> y(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        y.data[i] = x.data[i] > T{0} ? x.data[i] : T{0};
    }
    return y;
}

template <class T>
void relu_backward(const TensorT<T>& x, const TensorT<T>& dy, TensorT<T>* dx) {
    if (dx->shape != x.shape || dy.shape != x.shape) {
        throw UsageError("relu_backward: shape mismatch");
    }
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        if (x.data[i] > T{0}) dx->data[i] += dy.data[i];
    }
}

// Channel concatenation [a | b]; N and spatial dims must agree. Zero-channel
// inputs are allowed.
template <class T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.rank() != 5 || b.rank() != 5) {
        throw UsageError("concat_channels: inputs must be N x C x D x H x W");
    }
    for (std::size_t i : {std::size_t{0}, std::size_t{2}, std::size_t{3}, std::size_t{4}}) {
        if (a.shape[i] != b.shape[i]) {
            throw UsageError("concat_channels: batch/spatial dims differ");
        }
    }
    const std::int64_t n_batch = a.dim(0), ca = a.dim(1), cb = b.dim(1);
    const std::int64_t plane = a.dim(2) * a.dim(3) * a.dim(4);
    TensorT<T> y({n_batch, ca + cb, a.dim(2), a.dim(3), a.dim(4)});
    for (std::int64_t n = 0; n < n_batch; ++n) {
        std::copy(a.ptr() + n * ca * plane, a.ptr() + (n + 1) * ca * plane,
                  y.ptr() + n * (ca + cb) * plane);
        std::copy(b.ptr() + n * cb * plane, b.ptr() + (n + 1) * cb * plane,
                  y.ptr() + (n * (ca + cb) + ca) * plane);
    }
    return y;
}

template <class T>
void concat_channels_backward(const TensorT<T>& dy, std::int64_t ca, std::int64_t cb,
                              TensorT<T>* da, TensorT<T>* db) {
    if (dy.rank() != 5 || dy.dim(1) != ca + cb) {
        throw UsageError("concat_channels_backward: dy channel count mismatch");
    }
    const std::int64_t n_batch = dy.dim(0);
    const std::int64_t plane = dy.dim(2) * dy.dim(3) * dy.dim(4);
    for (std::int64_t n = 0; n < n_batch; ++n) {
        if (da != nullptr) {
            const T* src = dy.ptr() + n * (ca + cb) * plane;
            T* dst = da->ptr() + n * ca * plane;
            for (std::int64_t i = 0; i < ca * plane; ++i) dst[i] += src[i];
        }
        if (db != nullptr) {
            const T* src = dy.ptr() + (n * (ca + cb) + ca) * plane;
            T* dst = db->ptr() + n * cb * plane;
            for (std::int64_t i = 0; i < cb * plane; ++i) dst[i] += src[i];
        }
    }
}

// Per-voxel softmax over the channel axis, max-shifted for stability.
template <class T>
TensorT<T> softmax_channels(const TensorT<T>& x) {
    if (x.rank() != 5) throw UsageError("softmax_channels: input must be N x C x D x H x W");
    const std::int64_t n_batch = x.dim(0), c = x.dim(1);
    const std::int64_t plane = x.dim(2) * x.dim(3) * x.dim(4);
    TensorT<T> y(x.shape);
    for (std::int64_t n = 0; n < n_batch; ++n) {
        const T* xn = x.ptr() + n * c * plane;
        T* yn = y.ptr() + n * c * plane;
#pragma omp parallel for schedule(static) if (plane > 16384)
        for (std::int64_t v = 0; v < plane; ++v) {
            T m = xn[v];
            for (std::int64_t ch = 1; ch < c; ++ch) m = std::max(m, xn[ch * plane + v]);
            T sum{0};
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const T e = std::exp(xn[ch * plane + v] - m);
                yn[ch * plane + v] = e;
                sum += e;
            }
            const T inv = T{1} / sum;
            for (std::int64_t ch = 0; ch < c; ++ch) yn[ch * plane + v] *= inv;
        }
    }
    return y;
}

// He initialization: i.i.d. Gaussian, mean 0, std sqrt(2 / fan_in).
template <class T = float>
TensorT<T> he_init(const std::vector<std::int64_t>& shape, std::int64_t fan_in, Rng& rng) {
    if (fan_in <= 0) throw UsageError("he_init: fan_in must be positive");
    const double sigma = std::sqrt(2.0 / static_cast<double>(fan_in));
    TensorT<T> t(shape);
    for (auto& v : t.data) v = static_cast<T>(sigma * rng.normal());
    return t;
}

// Plain SGD: value -= lr * grad, then grad is zeroed. No momentum, no decay.
template <class T>
void sgd_step(std::vector<ParameterT<T>>& params, T lr) {
    if (!(lr > T{0})) throw UsageError("sgd_step: learning rate must be positive");
    for (ParameterT<T>& p : params) {
        if (!all_finite(p.grad)) {
            throw DivergenceError("sgd_step: non-finite gradient in parameter '" + p.name + "'");
        }
        for (std::size_t i = 0; i < p.value.data.size(); ++i) {
            p.value.data[i] -= lr * p.grad.data[i];
        }
        p.grad.fill(T{0});
    }
}

}  // namespace ctseg
