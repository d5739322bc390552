#pragma once

// Training loss with online hard example mining.
//
// Every cared-for class, link and cross-link prediction is one two-way
// softmax cross-entropy sample. With P_t positives, N_t negatives and the
// N_h = min(N_t, max(10, 2 P_t)) highest-loss negatives marked hard:
//
//   L = L_p / P_t + L_n / N_t + 2 / (3 N_h) * L_h + L_geo / P_t
//
// where L_n sums the non-hard negatives and L_geo is the Huber loss of the
// five geometry channels at positive pixels. Terms with a zero count vanish.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fastext/codec.hpp"
#include "fastext/error.hpp"
#include "fastext/scale_maps.hpp"

namespace fastext {

inline std::size_t hard_negative_count(std::size_t positives, std::size_t negatives) {
    return std::min(negatives, std::max<std::size_t>(10, 2 * positives));
}

struct OhemPartition {
    std::vector<std::size_t> positives;
    std::vector<std::size_t> hard_negatives;
    std::vector<std::size_t> other_negatives;
};

// Hard negatives are the `hard_count` cared-for negatives with the largest
// loss, earlier indices first among equal losses. Index lists are ascending.
inline OhemPartition ohem_select(std::span<const double> losses, std::span<const std::uint8_t> labels,
                                 std::span<const std::uint8_t> care, std::size_t hard_count) {
    if (losses.size() != labels.size() || losses.size() != care.size()) {
        throw shape_error("ohem_select: losses, labels and care mask differ in length");
    }
    OhemPartition part;
    std::vector<std::size_t> negatives;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        if (!care[i]) continue;
        (labels[i] ? part.positives : negatives).push_back(i);
    }
    hard_count = std::min(hard_count, negatives.size());
    std::vector<std::size_t> ranked = negatives;
    std::stable_sort(ranked.begin(), ranked.end(),
                     [&losses](std::size_t a, std::size_t b) { return losses[a] > losses[b]; });
    std::vector<std::uint8_t> hard(losses.size(), 0);
    for (std::size_t k = 0; k < hard_count; ++k) hard[ranked[k]] = 1;
    for (std::size_t i : negatives) (hard[i] ? part.hard_negatives : part.other_negatives).push_back(i);
    return part;
}

// Same, with the hard-negative count taken from the sample counts.
inline OhemPartition ohem_select(std::span<const double> losses, std::span<const std::uint8_t> labels,
                                 std::span<const std::uint8_t> care) {
    std::size_t pos = 0, neg = 0;
    for (std::size_t i = 0; i < labels.size() && i < care.size(); ++i) {
        if (care[i]) (labels[i] ? pos : neg)++;
    }
    return ohem_select(losses, labels, care, hard_negative_count(pos, neg));
}

struct LossOptions {
    double huber_delta = 1.0;
};

struct LossBreakdown {
    double total = 0.0;
    double positive = 0.0;      // L_p
    double negative = 0.0;      // L_n, non-hard negatives
    double hard = 0.0;          // L_h
    double geometry = 0.0;      // L_geo
    std::size_t positives = 0;  // P_t
    std::size_t negatives = 0;  // N_t
    std::size_t hard_negatives = 0; // N_h
};

inline double huber(double r, double delta) {
    const double a = std::abs(r);
    return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

namespace detail {

struct LossSample {
    std::size_t scale;
    std::size_t channel; // first of the two logits
    std::size_t row;
    std::size_t col;
    std::uint8_t label;
};

inline void check_grids(const ScaleMaps& maps, const GroundTruthTargets& gt) {
    maps.validate();
    if (maps.size() != gt.scales.size()) throw shape_error("loss: maps and targets have different scale counts");
    for (std::size_t s = 0; s < maps.size(); ++s) {
        const auto& t = gt.scales[s];
        if (maps[s].rows() != t.rows || maps[s].cols() != t.cols || maps[s].has_cross_links() != t.has_cross_links()) {
            throw shape_error("loss: grid mismatch at scale " + std::to_string(s));
        }
    }
}

// Cared-for samples in canonical order: scale, pixel, then class, links 0..7,
// cross-links 0..3.
inline std::vector<LossSample> collect_samples(const GroundTruthTargets& gt) {
    std::vector<LossSample> out;
    for (std::size_t s = 0; s < gt.scales.size(); ++s) {
        const auto& t = gt.scales[s];
        for (std::size_t r = 0; r < t.rows; ++r) {
            for (std::size_t c = 0; c < t.cols; ++c) {
                const std::size_t p = t.pixel(r, c);
                if (t.care[p]) out.push_back({s, class_offset, r, c, t.label[p]});
                for (std::size_t k = 0; k < neighbor_count; ++k) {
                    if (t.link_care[p * neighbor_count + k])
                        out.push_back({s, link_offset + 2 * k, r, c, t.link_label[p * neighbor_count + k]});
                }
                if (!t.has_cross_links()) continue;
                for (std::size_t j = 0; j < child_count; ++j) {
                    if (t.cross_care[p * child_count + j])
                        out.push_back({s, cross_link_offset + 2 * j, r, c, t.cross_label[p * child_count + j]});
                }
            }
        }
    }
    return out;
}

inline double cross_entropy(double z0, double z1, bool positive) {
    const double m = std::max(z0, z1);
    const double lse = m + std::log(std::exp(z0 - m) + std::exp(z1 - m));
    return lse - (positive ? z1 : z0);
}

inline double safe_inverse(std::size_t n) { return n == 0 ? 0.0 : 1.0 / static_cast<double>(n); }

// Loss and, when `grad` is non-null, its gradient w.r.t. every head value.
// OHEM selection is treated as fixed when differentiating.
inline LossBreakdown evaluate_loss(const ScaleMaps& maps, const GroundTruthTargets& gt, const LossOptions& opt,
                                   ScaleMaps* grad) {
    check_grids(maps, gt);
    const auto samples = collect_samples(gt);
    std::vector<double> losses(samples.size());
    std::vector<std::uint8_t> labels(samples.size()), care(samples.size(), 1);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& sm = samples[i];
        const auto& m = maps[sm.scale];
        losses[i] = cross_entropy(m.channel(sm.channel, sm.row, sm.col), m.channel(sm.channel + 1, sm.row, sm.col),
                                  sm.label != 0);
        labels[i] = sm.label;
    }
    const auto part = ohem_select(losses, labels, care);

    LossBreakdown b;
    b.positives = part.positives.size();
    b.negatives = part.hard_negatives.size() + part.other_negatives.size();
    b.hard_negatives = part.hard_negatives.size();
    for (std::size_t i : part.positives) b.positive += losses[i];
    for (std::size_t i : part.other_negatives) b.negative += losses[i];
    for (std::size_t i : part.hard_negatives) b.hard += losses[i];

    const double w_pos = safe_inverse(b.positives);
    const double w_neg = safe_inverse(b.negatives);
    const double w_hard = b.hard_negatives == 0 ? 0.0 : 2.0 / (3.0 * static_cast<double>(b.hard_negatives));

    if (grad != nullptr) {
        grad->scales.clear();
        for (const auto& m : maps.scales) grad->scales.push_back(ScaleMap{m.receptive_field, Tensor4(m.raw.shape())});
        auto accumulate = [&](const std::vector<std::size_t>& idx, double w) {
            for (std::size_t i : idx) {
                const auto& sm = samples[i];
                const auto& m = maps[sm.scale];
                const double p1 = pair_softmax_second(m.channel(sm.channel, sm.row, sm.col),
                                                      m.channel(sm.channel + 1, sm.row, sm.col));
                const double y1 = sm.label ? 1.0 : 0.0;
                auto& g = (*grad)[sm.scale];
                g.channel(sm.channel, sm.row, sm.col) += static_cast<float>(w * ((1.0 - p1) - (1.0 - y1)));
                g.channel(sm.channel + 1, sm.row, sm.col) += static_cast<float>(w * (p1 - y1));
            }
        };
        accumulate(part.positives, w_pos);
        accumulate(part.other_negatives, w_neg);
        accumulate(part.hard_negatives, w_hard);
    }

    for (std::size_t s = 0; s < gt.scales.size(); ++s) {
        const auto& t = gt.scales[s];
        const auto& m = maps[s];
        for (std::size_t r = 0; r < t.rows; ++r) {
            for (std::size_t c = 0; c < t.cols; ++c) {
                const std::size_t p = t.pixel(r, c);
                if (!t.care[p] || !t.label[p]) continue;
                const auto target = t.geometry[p].as_array();
                for (std::size_t k = 0; k < geometry_channels; ++k) {
                    const double res = static_cast<double>(m.geometry(r, c, k)) - target[k];
                    b.geometry += huber(res, opt.huber_delta);
                    if (grad != nullptr) {
                        (*grad)[s].channel(geometry_offset + k, r, c) +=
                            static_cast<float>(w_pos * std::clamp(res, -opt.huber_delta, opt.huber_delta));
                    }
                }
            }
        }
    }

    b.total = w_pos * b.positive + w_neg * b.negative + w_hard * b.hard + w_pos * b.geometry;
    return b;
}

} // namespace detail

inline LossBreakdown combined_loss(const ScaleMaps& maps, const GroundTruthTargets& gt, const LossOptions& opt = {}) {
    return detail::evaluate_loss(maps, gt, opt, nullptr);
}

// d(combined_loss.total) / d(head value), shaped like `maps`.
inline ScaleMaps loss_gradient(const ScaleMaps& maps, const GroundTruthTargets& gt, const LossOptions& opt = {}) {
    ScaleMaps grad;
    detail::evaluate_loss(maps, gt, opt, &grad);
    return grad;
}

} // namespace fastext
