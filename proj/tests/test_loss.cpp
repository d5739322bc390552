#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "fastext/loss.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace fastext;

namespace {

std::size_t count_care_samples(const GroundTruthTargets& gt, bool positive) {
    std::size_t n = 0;
    for (const auto& t : gt.scales) {
        for (std::size_t p = 0; p < t.label.size(); ++p) n += t.care[p] && (t.label[p] == 1) == positive;
        for (std::size_t k = 0; k < t.link_label.size(); ++k) n += t.link_care[k] && (t.link_label[k] == 1) == positive;
        for (std::size_t k = 0; k < t.cross_label.size(); ++k)
            n += t.cross_care[k] && (t.cross_label[k] == 1) == positive;
    }
    return n;
}

} // namespace

TEST(HardNegativeCount, TableValues) {
    EXPECT_EQ(hard_negative_count(3, 100), 10u);
    EXPECT_EQ(hard_negative_count(50, 20), 20u);
    EXPECT_EQ(hard_negative_count(0, 5), 5u);
    EXPECT_EQ(hard_negative_count(7, 100), 14u);
}

TEST(HardNegativeCount, MonotoneInBothArguments) {
    for (std::size_t p = 0; p < 40; ++p)
        for (std::size_t n = 0; n < 80; ++n) {
            EXPECT_LE(hard_negative_count(p, n), hard_negative_count(p + 1, n));
            EXPECT_LE(hard_negative_count(p, n), hard_negative_count(p, n + 1));
            EXPECT_LE(hard_negative_count(p, n), n);
        }
}

TEST(OhemSelect, TiesPickLowerIndices) {
    const std::vector<double> loss(6, 0.7);
    const std::vector<std::uint8_t> lab(6, 0), care(6, 1);
    const auto part = ohem_select(loss, lab, care, 2);
    EXPECT_EQ(part.hard_negatives, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(part.other_negatives, (std::vector<std::size_t>{2, 3, 4, 5}));
}

TEST(OhemSelect, TopKAndMaskExclusion) {
    const std::vector<double> loss{5, 1, 4};
    const std::vector<std::uint8_t> lab{0, 0, 0}, care{1, 1, 1};
    EXPECT_EQ(ohem_select(loss, lab, care, 2).hard_negatives, (std::vector<std::size_t>{0, 2}));

    const std::vector<double> loss2{9, 5, 1, 4, 3};
    const std::vector<std::uint8_t> lab2{0, 0, 0, 0, 1}, care2{0, 1, 1, 1, 1};
    const auto part = ohem_select(loss2, lab2, care2, 2);
    EXPECT_EQ(part.hard_negatives, (std::vector<std::size_t>{1, 3}));
    EXPECT_EQ(part.other_negatives, (std::vector<std::size_t>{2}));
    EXPECT_EQ(part.positives, (std::vector<std::size_t>{4}));

    EXPECT_THROW(ohem_select(loss, lab2, care, 1), shape_error);
}

TEST(OhemSelect, PermutationEquivariant) {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0, 5);
    std::vector<double> loss(40);
    for (auto& x : loss) x = u(rng);
    const std::vector<std::uint8_t> lab(40, 0), care(40, 1);
    std::vector<std::size_t> perm(40);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> shuffled(40);
    for (std::size_t i = 0; i < 40; ++i) shuffled[i] = loss[perm[i]];
    const auto a = ohem_select(loss, lab, care, 12);
    const auto b = ohem_select(shuffled, lab, care, 12);
    std::vector<std::size_t> mapped;
    for (std::size_t i : b.hard_negatives) mapped.push_back(perm[i]);
    std::sort(mapped.begin(), mapped.end());
    EXPECT_EQ(mapped, a.hard_negatives);
}

TEST(CombinedLoss, PerfectPredictionVanishes) {
    const std::vector<WordQuad> words{WordQuad::axis_aligned(16, 16, 112, 40), WordQuad::axis_aligned(20, 70, 90, 90)};
    const auto maps0 = support::standard_maps(128, 128);
    const auto gt = encode_ground_truth(words, maps0);
    const auto maps = maps_from_targets(gt, 15.0f);
    const auto b = combined_loss(maps, gt);
    EXPECT_LT(b.total, 1e-4);
    EXPECT_LT(b.geometry, 1e-12); // targets round-trip through float channels
    EXPECT_GT(b.positives, 0u);
    EXPECT_GE(b.total, 0.0);
}

TEST(CombinedLoss, UniformLogitsGiveLog2PerSample) {
    const std::vector<WordQuad> words{WordQuad::axis_aligned(16, 16, 112, 40)};
    const auto maps = support::standard_maps(128, 128);
    const auto gt = encode_ground_truth(words, maps);
    const auto b = combined_loss(maps, gt);
    const double ln2 = std::numbers::ln2;
    const std::size_t pt = count_care_samples(gt, true), nt = count_care_samples(gt, false);
    const std::size_t nh = hard_negative_count(pt, nt);
    EXPECT_EQ(b.positives, pt);
    EXPECT_EQ(b.negatives, nt);
    EXPECT_EQ(b.hard_negatives, nh);
    EXPECT_NEAR(b.positive, pt * ln2, 1e-9);
    EXPECT_NEAR(b.hard, nh * ln2, 1e-9);
    EXPECT_NEAR(b.negative, (nt - nh) * ln2, 1e-9);
    // geometry channels are 0, so the geometry term is the Huber of the targets
    double geo = 0.0;
    for (const auto& t : gt.scales)
        for (std::size_t p = 0; p < t.label.size(); ++p)
            if (t.label[p] && t.care[p])
                for (double g : t.geometry[p].as_array()) geo += huber(-g, 1.0);
    EXPECT_NEAR(b.geometry, geo, 1e-9);
    const double expect = ln2 + (nt - nh) * ln2 / nt + 2.0 / (3.0 * nh) * nh * ln2 + geo / pt;
    EXPECT_NEAR(b.total, expect, 1e-9);
}

TEST(CombinedLoss, NoPositivesDropsPositiveTerms) {
    const auto maps = support::standard_maps(128, 128);
    const auto gt = encode_ground_truth({}, maps);
    const auto b = combined_loss(maps, gt);
    EXPECT_EQ(b.positives, 0u);
    EXPECT_TRUE(std::isfinite(b.total));
    const double ln2 = std::numbers::ln2;
    EXPECT_NEAR(b.total, (b.negatives - 10) * ln2 / b.negatives + 2.0 / 3.0 * ln2, 1e-9);
}

TEST(CombinedLoss, MatchesScalarOracle) {
    std::mt19937 rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        auto inst = support::random_instance(rng, 4, 4, 1 + trial % 3);
        const double lib = combined_loss(inst.maps, inst.gt).total;
        const double ref = oracle::scalar_loss(inst.maps, inst.gt, 1.0);
        EXPECT_NEAR(lib, ref, 1e-6) << trial;
    }
}

TEST(CombinedLoss, GridMismatchThrows) {
    std::mt19937 rng(9);
    auto inst = support::random_instance(rng, 4, 4, 2);
    inst.gt.scales[1].cols = 3;
    EXPECT_THROW(combined_loss(inst.maps, inst.gt), shape_error);
    auto short_gt = support::random_instance(rng, 4, 4, 1);
    EXPECT_THROW(combined_loss(inst.maps, short_gt.gt), shape_error);
}

TEST(LossGradient, ClosedFormOnUniformLogits) {
    const std::vector<WordQuad> words{WordQuad::axis_aligned(16, 16, 32, 32)};
    auto maps = make_scale_maps({{4, 4}}, {16.0});
    const auto gt = encode_ground_truth(words, maps);
    // zero geometry residual at the matched anchor
    const auto b = combined_loss(maps, gt);
    const auto g = loss_gradient(maps, gt);
    ASSERT_EQ(b.positives, 1u); // the class sample; all its links are negative
    const double w = 1.0 / double(b.positives);
    EXPECT_NEAR(g[0].channel(class_offset, 1, 1), (0.5 - 0.0) * w, 1e-7);
    EXPECT_NEAR(g[0].channel(class_offset + 1, 1, 1), (0.5 - 1.0) * w, 1e-7);
    for (std::size_t k = 0; k < geometry_channels; ++k) EXPECT_EQ(g[0].channel(geometry_offset + k, 1, 1), 0.0f);
    // no geometry gradient at negatives
    for (std::size_t k = 0; k < geometry_channels; ++k) EXPECT_EQ(g[0].channel(geometry_offset + k, 0, 0), 0.0f);
}

TEST(LossGradient, MatchesCentralDifferences) {
    std::mt19937 rng(77);
    support::GradientCheck total;
    for (int trial = 0; trial < 100; ++trial) {
        const auto c = support::check_gradient(support::random_instance(rng, 4, 4, 1 + trial % 2));
        EXPECT_EQ(c.failures, 0u) << "trial " << trial << " max relative error " << c.max_relative_error;
        total.max_relative_error = std::max(total.max_relative_error, c.max_relative_error);
        total.checked += c.checked;
        total.kinks_skipped += c.kinks_skipped;
    }
    RecordProperty("max_relative_error", std::to_string(total.max_relative_error));
    RecordProperty("kinks_skipped", std::to_string(total.kinks_skipped));
    EXPECT_GT(total.checked, 10000u);
}
