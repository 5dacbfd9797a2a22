#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ctseg/volume.hpp"

namespace ctseg {

struct ClassCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
};

struct ConfusionCounts {
    std::array<ClassCounts, kNumClasses> per_class;
    std::int64_t total = 0;
};

inline ConfusionCounts confusion_counts(const LabelMask& pred, const LabelMask& gt) {
    if (pred.shape != gt.shape) {
        throw UsageError("confusion_counts: prediction and ground truth shapes differ");
    }
    ConfusionCounts c;
    c.total = pred.shape.voxels();
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const std::uint8_t p = pred.data[i];
        const std::uint8_t g = gt.data[i];
        if (p >= kNumClasses || g >= kNumClasses) {
            throw DataError("confusion_counts: class code outside {0,1,2}");
        }
        if (p == g) {
            c.per_class[p].tp++;
        } else {
            c.per_class[p].fp++;
            c.per_class[g].fn++;
        }
    }
    return c;
}

// Per-class pixel accuracy = recall TP/(TP+FN). A class absent from the
// ground truth scores 1 when it was never predicted, else 0.
inline double pixel_accuracy(const ConfusionCounts& c, int cls) {
    const ClassCounts& k = c.per_class.at(static_cast<std::size_t>(cls));
    if (k.tp + k.fn == 0) return k.fp == 0 ? 1.0 : 0.0;
    return static_cast<double>(k.tp) / static_cast<double>(k.tp + k.fn);
}

// Intersection over union; both masks empty of the class counts as 1.
inline double iou(const ConfusionCounts& c, int cls) {
    const ClassCounts& k = c.per_class.at(static_cast<std::size_t>(cls));
    const std::int64_t denom = k.tp + k.fp + k.fn;
    if (denom == 0) return 1.0;
    return static_cast<double>(k.tp) / static_cast<double>(denom);
}

// Dice = 2TP/(2TP+FP+FN); both masks empty of the class counts as 1.
inline double dice(const ConfusionCounts& c, int cls) {
    const ClassCounts& k = c.per_class.at(static_cast<std::size_t>(cls));
    const std::int64_t denom = 2 * k.tp + k.fp + k.fn;
    if (denom == 0) return 1.0;
    return static_cast<double>(2 * k.tp) / static_cast<double>(denom);
}

struct ClassMetrics {
    double pixel_accuracy = 0.0;
    double iou = 0.0;
    double dice = 0.0;
};

// Per-case metric row for the two foreground classes, plus the confusion
// counts that back the values.
struct MetricResult {
    ClassMetrics bone;
    ClassMetrics nerve;
    ConfusionCounts counts;
};

inline MetricResult metrics_from_counts(const ConfusionCounts& c) {
    MetricResult r;
    r.counts = c;
    r.bone = {pixel_accuracy(c, kBone), iou(c, kBone), dice(c, kBone)};
    r.nerve = {pixel_accuracy(c, kNerve), iou(c, kNerve), dice(c, kNerve)};
    return r;
}

inline MetricResult evaluate_masks(const LabelMask& pred, const LabelMask& gt) {
    return metrics_from_counts(confusion_counts(pred, gt));
}

// Unweighted arithmetic mean of each metric over the cases. Confusion counts
// are pooled sums, kept for reference.
inline MetricResult aggregate_mean(const std::vector<MetricResult>& per_case) {
    if (per_case.empty()) {
        throw UsageError("aggregate_mean: no cases to aggregate");
    }
    MetricResult mean;
    for (const MetricResult& r : per_case) {
        mean.bone.pixel_accuracy += r.bone.pixel_accuracy;
        mean.bone.iou += r.bone.iou;
        mean.bone.dice += r.bone.dice;
        mean.nerve.pixel_accuracy += r.nerve.pixel_accuracy;
        mean.nerve.iou += r.nerve.iou;
        mean.nerve.dice += r.nerve.dice;
        for (std::size_t c = 0; c < kNumClasses; ++c) {
            mean.counts.per_class[c].tp += r.counts.per_class[c].tp;
            mean.counts.per_class[c].fp += r.counts.per_class[c].fp;
            mean.counts.per_class[c].fn += r.counts.per_class[c].fn;
        }
        mean.counts.total += r.counts.total;
    }
    const auto n = static_cast<double>(per_case.size());
    mean.bone.pixel_accuracy /= n;
    mean.bone.iou /= n;
    mean.bone.dice /= n;
    mean.nerve.pixel_accuracy /= n;
    mean.nerve.iou /= n;
    mean.nerve.dice /= n;
    return mean;
}

}  // namespace ctseg
