#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ctseg/loss.hpp"
#include "ctseg/metrics.hpp"
#include "ctseg/rng.hpp"
#include "oracles.hpp"

using namespace ctseg;

namespace {

LabelMask random_mask(Rng& rng, Shape3 shape) {
    LabelMask m = make_label_mask(shape, {1, 1, 1});
    for (auto& c : m.data) c = static_cast<std::uint8_t>(rng.uniform_int(3));
    return m;
}

}  // namespace

TEST_CASE("weighted_ce_loss on hand-checked voxels") {
    SECTION("uniform logits, nerve ground truth, weight 20") {
        TensorT<double> logits({1, 3, 1, 1, 1});
        std::vector<std::uint8_t> labels{kNerve};
        auto r = weighted_ce_loss<double>(logits, labels, {1, 1, 20});
        CHECK(r.loss == Catch::Approx(20.0 * std::log(3.0)).epsilon(1e-12));
        CHECK(r.loss == Catch::Approx(21.9722).margin(1e-4));
    }
    SECTION("near-perfect prediction") {
        TensorT<double> logits({1, 3, 1, 1, 1});
        logits.data = {30.0, 0.0, 0.0};
        std::vector<std::uint8_t> labels{kBackground};
        auto r = weighted_ce_loss<double>(logits, labels, {1, 1, 1});
        CHECK(r.loss < 1e-9);
    }
    SECTION("two-voxel sum") {
        TensorT<double> logits({2, 3, 1, 1, 1});
        logits.data = {1.0, 2.0, 3.0, 0.0, 0.0, 0.0};
        std::vector<std::uint8_t> labels{kBone, kBackground};
        auto r = weighted_ce_loss<double>(logits, labels, {1, 1, 20});
        CHECK(r.loss == Catch::Approx(2.50622).margin(1e-4));
    }
}

TEST_CASE("weighted_ce_loss matches direct equation evaluation", "[property]") {
    Rng rng(101);
    for (int iter = 0; iter < 200; ++iter) {
        const std::int64_t n = rng.uniform_int(1, 2);
        const Shape3 sp{rng.uniform_int(1, 3), rng.uniform_int(1, 3), rng.uniform_int(1, 3)};
        TensorT<double> logits({n, 3, sp.d, sp.h, sp.w});
        for (auto& v : logits.data) v = rng.uniform(-5.0, 5.0);
        std::vector<std::uint8_t> labels(static_cast<std::size_t>(n * sp.voxels()));
        for (auto& l : labels) l = static_cast<std::uint8_t>(rng.uniform_int(3));
        const ClassWeights w{rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0), rng.uniform(0.5, 25.0)};

        const auto got = weighted_ce_loss<double>(logits, labels, w);
        const double want = oracle::weighted_ce_direct(logits, labels, w);
        CHECK(got.loss == Catch::Approx(want).epsilon(1e-6));
    }
}

TEST_CASE("weighted_ce_loss gradient matches finite differences") {
    Rng rng(103);
    for (int iter = 0; iter < 5; ++iter) {
        TensorT<double> logits({1, 3, 2, 2, 2});
        for (auto& v : logits.data) v = rng.uniform(-3.0, 3.0);
        std::vector<std::uint8_t> labels(8);
        for (auto& l : labels) l = static_cast<std::uint8_t>(rng.uniform_int(3));
        const ClassWeights w{1.0, 1.0, 20.0};

        auto analytic = weighted_ce_loss<double>(logits, labels, w).dlogits;
        auto eval = [&] { return weighted_ce_loss<double>(logits, labels, w).loss; };
        auto fd = oracle::finite_difference(logits, eval);
        CHECK(oracle::max_rel_error(analytic, fd) < 1e-4);
    }
}

TEST_CASE("weighted_ce_loss is shift invariant and weight homogeneous") {
    Rng rng(107);
    TensorT<double> logits({1, 3, 2, 2, 2});
    for (auto& v : logits.data) v = rng.uniform(-3.0, 3.0);
    std::vector<std::uint8_t> labels(8);
    for (auto& l : labels) l = static_cast<std::uint8_t>(rng.uniform_int(3));
    const ClassWeights w{1.0, 1.5, 20.0};
    const auto base = weighted_ce_loss<double>(logits, labels, w);

    SECTION("adding a constant to all logits of a voxel changes nothing") {
        TensorT<double> shifted = logits;
        const std::int64_t plane = 8;
        for (int c = 0; c < 3; ++c)
            for (std::int64_t v = 0; v < plane; ++v) shifted.data[static_cast<std::size_t>(c * plane + v)] += 7.25;
        const auto s = weighted_ce_loss<double>(shifted, labels, w);
        CHECK(s.loss == Catch::Approx(base.loss).epsilon(1e-6));
    }
    SECTION("scaling weights by k scales loss and gradient by k") {
        const double k = 3.5;
        const auto scaled = weighted_ce_loss<double>(logits, labels, {k * w.background, k * w.bone, k * w.nerve});
        CHECK(scaled.loss == Catch::Approx(k * base.loss).epsilon(1e-12));
        for (std::size_t i = 0; i < base.dlogits.data.size(); ++i) {
            CHECK(scaled.dlogits.data[i] == Catch::Approx(k * base.dlogits.data[i]).margin(1e-12));
        }
    }
    SECTION("mean reduction divides by the voxel count") {
        const auto m = weighted_ce_loss<double>(logits, labels, w, true);
        CHECK(m.loss == Catch::Approx(base.loss / 8.0).epsilon(1e-12));
    }
}

TEST_CASE("weighted_ce_loss rejects invalid class codes") {
    TensorT<double> logits({1, 3, 1, 1, 1});
    std::vector<std::uint8_t> labels{9};
    CHECK_THROWS_AS(weighted_ce_loss<double>(logits, labels, {1, 1, 1}), DataError);
}

TEST_CASE("schedule_weights is a step function switching at epoch 40") {
    const WeightSchedule s;
    CHECK(schedule_weights(0, s) == ClassWeights{1, 1, 20});
    CHECK(schedule_weights(39, s) == ClassWeights{1, 1, 20});
    CHECK(schedule_weights(40, s) == ClassWeights{1, 1, 2});
    CHECK(schedule_weights(99, s) == ClassWeights{1, 1, 2});

    int switches = 0;
    ClassWeights prev = schedule_weights(0, s);
    for (int e = 1; e < s.total_epochs; ++e) {
        const ClassWeights cur = schedule_weights(e, s);
        if (!(cur == prev)) {
            ++switches;
            CHECK(e == 40);
        }
        prev = cur;
    }
    CHECK(switches == 1);

    CHECK_THROWS_AS(schedule_weights(-1, s), UsageError);
    CHECK_THROWS_AS(schedule_weights(100, s), UsageError);
}

TEST_CASE("confusion_counts matches the per-voxel loop oracle", "[property]") {
    Rng rng(109);
    for (int iter = 0; iter < 50; ++iter) {
        const Shape3 shape{rng.uniform_int(1, 8), rng.uniform_int(1, 8), rng.uniform_int(1, 8)};
        const LabelMask pred = random_mask(rng, shape);
        const LabelMask gt = random_mask(rng, shape);
        const ConfusionCounts got = confusion_counts(pred, gt);
        const ConfusionCounts want = oracle::confusion(pred, gt);
        for (int c = 0; c < kNumClasses; ++c) {
            CHECK(got.per_class[static_cast<std::size_t>(c)].tp == want.per_class[static_cast<std::size_t>(c)].tp);
            CHECK(got.per_class[static_cast<std::size_t>(c)].fp == want.per_class[static_cast<std::size_t>(c)].fp);
            CHECK(got.per_class[static_cast<std::size_t>(c)].fn == want.per_class[static_cast<std::size_t>(c)].fn);
        }
    }
}

TEST_CASE("confusion_counts edge cases") {
    Rng rng(113);
    const LabelMask m = random_mask(rng, {3, 3, 3});
    const ConfusionCounts self = confusion_counts(m, m);
    for (int c = 0; c < kNumClasses; ++c) {
        CHECK(self.per_class[static_cast<std::size_t>(c)].fp == 0);
        CHECK(self.per_class[static_cast<std::size_t>(c)].fn == 0);
    }

    LabelMask empty = make_label_mask({2, 2, 2}, {1, 1, 1}, kBackground);
    LabelMask bone = make_label_mask({2, 2, 2}, {1, 1, 1}, kBone);
    const ConfusionCounts c = confusion_counts(empty, bone);
    CHECK(c.per_class[kBone].tp == 0);
    CHECK(c.per_class[kBone].fn == 8);

    LabelMask other = make_label_mask({2, 2, 3}, {1, 1, 1});
    CHECK_THROWS_AS(confusion_counts(empty, other), UsageError);
}

TEST_CASE("pixel accuracy, IoU, and Dice definitions") {
    ConfusionCounts c;
    c.per_class[kBone] = {3, 0, 1};  // 3 of 4 gt voxels hit
    CHECK(pixel_accuracy(c, kBone) == Catch::Approx(0.75));

    ConfusionCounts d;
    d.per_class[kBone] = {2, 2, 2};  // pred 4, gt 4, intersection 2
    CHECK(iou(d, kBone) == Catch::Approx(2.0 / 6.0));
    CHECK(dice(d, kBone) == Catch::Approx(0.5));

    ConfusionCounts disj;
    disj.per_class[kNerve] = {0, 4, 4};
    CHECK(iou(disj, kNerve) == 0.0);
    CHECK(dice(disj, kNerve) == 0.0);

    // empty-empty convention
    ConfusionCounts none;
    CHECK(pixel_accuracy(none, kNerve) == 1.0);
    CHECK(iou(none, kNerve) == 1.0);
    CHECK(dice(none, kNerve) == 1.0);

    // class absent from gt but predicted
    ConfusionCounts fp_only;
    fp_only.per_class[kNerve] = {0, 5, 0};
    CHECK(pixel_accuracy(fp_only, kNerve) == 0.0);
    CHECK(iou(fp_only, kNerve) == 0.0);
}

TEST_CASE("dice equals 2*iou/(1+iou) on random masks", "[property]") {
    Rng rng(127);
    for (int iter = 0; iter < 50; ++iter) {
        const Shape3 shape{rng.uniform_int(1, 8), rng.uniform_int(1, 8), rng.uniform_int(1, 8)};
        const ConfusionCounts c = confusion_counts(random_mask(rng, shape), random_mask(rng, shape));
        for (int cls = 0; cls < kNumClasses; ++cls) {
            const double i = iou(c, cls);
            CHECK(std::abs(dice(c, cls) - 2.0 * i / (1.0 + i)) < 1e-9);
        }
    }
}

TEST_CASE("aggregate_mean reproduces published per-case table means") {
    auto rows_to_results = [](const std::vector<double>& bone, const std::vector<double>& nerve) {
        std::vector<MetricResult> rs(bone.size());
        for (std::size_t i = 0; i < bone.size(); ++i) {
            rs[i].bone.dice = bone[i];
            rs[i].nerve.dice = nerve[i];
        }
        return rs;
    };

    SECTION("IoU table") {
        const std::vector<double> bone{89.7, 85.7, 82.0, 94.1, 85.2, 89.4, 90.1, 92.0, 93.9, 95.2};
        const std::vector<double> nerve{84.8, 81.3, 83.4, 82.9, 76.3, 82.4, 81.4, 86.9, 80.3, 87.4};
        const MetricResult mean = aggregate_mean(rows_to_results(bone, nerve));
        CHECK(mean.bone.dice == Catch::Approx(89.7).margin(0.05));
        CHECK(mean.nerve.dice == Catch::Approx(82.7).margin(0.05));
    }
    SECTION("Dice table") {
        const std::vector<double> bone{94.6, 92.3, 90.1, 97.0, 92.0, 94.4, 94.8, 95.8, 96.9, 97.5};
        const std::vector<double> nerve{91.8, 89.7, 91.0, 90.7, 86.6, 90.3, 89.7, 93.0, 89.1, 93.2};
        const MetricResult mean = aggregate_mean(rows_to_results(bone, nerve));
        CHECK(mean.bone.dice == Catch::Approx(94.5).margin(0.05));
        CHECK(mean.nerve.dice == Catch::Approx(90.51).margin(0.05));
    }
    SECTION("single case mean equals the case") {
        MetricResult r;
        r.bone = {0.9, 0.8, 0.85};
        r.nerve = {0.7, 0.6, 0.65};
        const MetricResult mean = aggregate_mean({r});
        CHECK(mean.bone.dice == r.bone.dice);
        CHECK(mean.nerve.iou == r.nerve.iou);
    }
    SECTION("empty input is a usage error") {
        CHECK_THROWS_AS(aggregate_mean({}), UsageError);
    }
}
