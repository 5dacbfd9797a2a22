#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "ctseg/tensor.hpp"
#include "ctseg/volume.hpp"

namespace ctseg {

struct ClassWeights {
    double background = 1.0;
    double bone = 1.0;
    double nerve = 1.0;

    double for_class(std::uint8_t c) const {
        switch (c) {
            case kBackground: return background;
            case kBone: return bone;
            default: return nerve;
        }
    }
    bool operator==(const ClassWeights&) const = default;

    void validate() const {
        if (!(background > 0.0 && bone > 0.0 && nerve > 0.0)) {
            throw UsageError("ClassWeights: all weights must be positive");
        }
    }
};

// Two-phase weight schedule: heavy nerve weighting early, reduced once
// training stabilizes.
struct WeightSchedule {
    ClassWeights early{1.0, 1.0, 20.0};
    ClassWeights late{1.0, 1.0, 2.0};
    int switch_epoch = 40;
    int total_epochs = 100;

    void validate() const {
        early.validate();
        late.validate();
        if (!(switch_epoch > 0 && switch_epoch < total_epochs)) {
            throw UsageError("WeightSchedule: need 0 < switch_epoch < total_epochs");
        }
    }
};

inline ClassWeights schedule_weights(int epoch, const WeightSchedule& s) {
    s.validate();
    if (epoch < 0 || epoch >= s.total_epochs) {
        throw UsageError("schedule_weights: epoch " + std::to_string(epoch) +
                         " outside [0, " + std::to_string(s.total_epochs) + ")");
    }
    return epoch < s.switch_epoch ? s.early : s.late;
}

template <class T>
struct LossResult {
    double loss = 0.0;
    TensorT<T> dlogits;
};

// Class-weighted softmax cross entropy, summed over every voxel of the batch.
// Per voxel the weight is that of the ground-truth class. Evaluated in
// log-sum-exp form; the gradient w.r.t. the logits is w * (softmax - onehot).
// `labels` holds one class code per voxel in N x D x H x W order.
template <class T>
LossResult<T> weighted_ce_loss(const TensorT<T>& logits, std::span<const std::uint8_t> labels,
                               const ClassWeights& weights, bool mean_reduction = false) {
    weights.validate();
    if (logits.rank() != 5 || logits.dim(1) != kNumClasses) {
        throw UsageError("weighted_ce_loss: logits must be N x 3 x D x H x W");
    }
    const std::int64_t n_batch = logits.dim(0);
    const std::int64_t plane = logits.dim(2) * logits.dim(3) * logits.dim(4);
    if (static_cast<std::int64_t>(labels.size()) != n_batch * plane) {
        throw UsageError("weighted_ce_loss: label count does not match logits");
    }

    LossResult<T> r;
    r.dlogits = TensorT<T>(logits.shape);
    double loss = 0.0;
    for (std::int64_t n = 0; n < n_batch; ++n) {
        const T* ln = logits.ptr() + n * kNumClasses * plane;
        T* gn = r.dlogits.ptr() + n * kNumClasses * plane;
        for (std::int64_t v = 0; v < plane; ++v) {
            const std::uint8_t cls = labels[static_cast<std::size_t>(n * plane + v)];
            if (cls >= kNumClasses) {
                throw DataError("weighted_ce_loss: label code " + std::to_string(int(cls)) +
                                " outside {0,1,2}");
            }
            const double w = weights.for_class(cls);
            double a[kNumClasses];
            double m = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < kNumClasses; ++c) {
                a[c] = static_cast<double>(ln[c * plane + v]);
                m = std::max(m, a[c]);
            }
            double sum = 0.0;
            for (int c = 0; c < kNumClasses; ++c) sum += std::exp(a[c] - m);
            const double lse = m + std::log(sum);
            loss += w * (lse - a[cls]);
            for (int c = 0; c < kNumClasses; ++c) {
                const double p = std::exp(a[c] - lse);
                gn[c * plane + v] =
                    static_cast<T>(w * (p - (c == static_cast<int>(cls) ? 1.0 : 0.0)));
            }
        }
    }
    if (mean_reduction) {
        const auto count = static_cast<double>(n_batch * plane);
        loss /= count;
        const T scale = static_cast<T>(1.0 / count);
        for (auto& g : r.dlogits.data) g *= scale;
    }
    r.loss = loss;
    return r;
}

}  // namespace ctseg
