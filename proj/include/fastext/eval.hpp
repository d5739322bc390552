#pragma once

// Detection scoring against ground-truth quads.
//
// 1. Detections covered more than half by a do-not-care box are dropped.
// 2. One-to-one: pairs with IoU > 0.5, greedily by descending IoU.
// 3. One-to-many: an unmatched GT claimed by >= 2 unmatched detections that
//    each lie mostly inside it and together cover more than half of it.
// 4. Many-to-one: the same with the roles swapped.
// Each participant of a split/merge match earns `split_credit`.

#include <algorithm>
#include <cstddef>
#include <tuple>
#include <utility>
#include <vector>

#include "fastext/codec.hpp"
#include "fastext/geometry.hpp"
#include "fastext/linker.hpp"

namespace fastext {

struct MatchOptions {
    double iou_threshold = 0.5;
    double coverage_threshold = 0.5;
    double split_credit = 1.0;
};

struct OneToMany {
    std::size_t gt;
    std::vector<std::size_t> detections;
};

struct ManyToOne {
    std::size_t detection;
    std::vector<std::size_t> gts;
};

struct MatchReport {
    double precision = 1.0;
    double recall = 1.0;
    double f_measure = 1.0;

    std::vector<std::pair<std::size_t, std::size_t>> one_to_one; // (gt, detection)
    std::vector<OneToMany> one_to_many;
    std::vector<ManyToOne> many_to_one;
    std::vector<std::size_t> unmatched_gt;        // care GTs only
    std::vector<std::size_t> unmatched_detections; // scored detections only
    std::vector<std::size_t> ignored_detections;   // inside do-not-care boxes

    std::size_t care_gt_count = 0;
    std::size_t scored_detection_count = 0;
    double gt_credit = 0.0;
    double detection_credit = 0.0;
    bool precision_empty = false; // no scored detections, precision reported as 1
    bool recall_empty = false;    // no care GTs, recall reported as 1

    void finalize() {
        precision_empty = scored_detection_count == 0;
        recall_empty = care_gt_count == 0;
        precision = precision_empty ? 1.0 : detection_credit / static_cast<double>(scored_detection_count);
        recall = recall_empty ? 1.0 : gt_credit / static_cast<double>(care_gt_count);
        f_measure = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    }
};

inline MatchReport match_detections(const std::vector<WordQuad>& gt, const std::vector<ConvexPoly>& det,
                                    const MatchOptions& opt = {}) {
    std::vector<ConvexPoly> gt_poly;
    gt_poly.reserve(gt.size());
    for (const auto& g : gt) gt_poly.push_back(g.polygon());

    MatchReport rep;
    std::vector<bool> gt_free(gt.size(), false), det_free(det.size(), true);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt[i].care) {
            gt_free[i] = true;
            ++rep.care_gt_count;
        }
    }
    for (std::size_t j = 0; j < det.size(); ++j) {
        for (std::size_t i = 0; i < gt.size(); ++i) {
            if (gt[i].care) continue;
            if (intersection_area(det[j], gt_poly[i]) / det[j].area() > opt.coverage_threshold) {
                det_free[j] = false;
                rep.ignored_detections.push_back(j);
                break;
            }
        }
    }
    rep.scored_detection_count = det.size() - rep.ignored_detections.size();

    std::vector<std::vector<double>> inter(gt.size(), std::vector<double>(det.size(), 0.0));
    std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (!gt_free[i]) continue;
        for (std::size_t j = 0; j < det.size(); ++j) {
            if (!det_free[j]) continue;
            inter[i][j] = intersection_area(gt_poly[i], det[j]);
            const double uni = gt_poly[i].area() + det[j].area() - inter[i][j];
            const double v = uni > 0.0 ? inter[i][j] / uni : 0.0;
            if (v > opt.iou_threshold) candidates.emplace_back(v, i, j);
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
        if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
        return std::get<2>(a) < std::get<2>(b);
    });
    for (const auto& [v, i, j] : candidates) {
        if (!gt_free[i] || !det_free[j]) continue;
        gt_free[i] = det_free[j] = false;
        rep.one_to_one.emplace_back(i, j);
        rep.gt_credit += 1.0;
        rep.detection_credit += 1.0;
    }

    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (!gt_free[i]) continue;
        std::vector<std::size_t> parts;
        double covered = 0.0;
        for (std::size_t j = 0; j < det.size(); ++j) {
            if (!det_free[j] || inter[i][j] / det[j].area() <= opt.coverage_threshold) continue;
            parts.push_back(j);
            covered += inter[i][j];
        }
        if (parts.size() < 2 || covered <= opt.coverage_threshold * gt_poly[i].area()) continue;
        gt_free[i] = false;
        for (std::size_t j : parts) det_free[j] = false;
        rep.gt_credit += opt.split_credit;
        rep.detection_credit += opt.split_credit * static_cast<double>(parts.size());
        rep.one_to_many.push_back({i, std::move(parts)});
    }

    for (std::size_t j = 0; j < det.size(); ++j) {
        if (!det_free[j]) continue;
        std::vector<std::size_t> parts;
        double covered = 0.0;
        for (std::size_t i = 0; i < gt.size(); ++i) {
            if (!gt_free[i] || inter[i][j] / gt_poly[i].area() <= opt.coverage_threshold) continue;
            parts.push_back(i);
            covered += inter[i][j];
        }
        if (parts.size() < 2 || covered <= opt.coverage_threshold * det[j].area()) continue;
        det_free[j] = false;
        for (std::size_t i : parts) gt_free[i] = false;
        rep.detection_credit += opt.split_credit;
        rep.gt_credit += opt.split_credit * static_cast<double>(parts.size());
        rep.many_to_one.push_back({j, std::move(parts)});
    }

    for (std::size_t i = 0; i < gt.size(); ++i)
        if (gt_free[i]) rep.unmatched_gt.push_back(i);
    for (std::size_t j = 0; j < det.size(); ++j)
        if (det_free[j]) rep.unmatched_detections.push_back(j);
    rep.finalize();
    return rep;
}

inline MatchReport match_detections(const std::vector<WordQuad>& gt, const std::vector<WordBox>& det,
                                    const MatchOptions& opt = {}) {
    std::vector<ConvexPoly> polys;
    polys.reserve(det.size());
    for (const auto& d : det) polys.push_back(d.polygon());
    return match_detections(gt, polys, opt);
}

// Corpus score: credits and denominators are summed over images before
// precision and recall are formed.
inline MatchReport reduce_reports(const std::vector<MatchReport>& reports) {
    MatchReport total;
    for (const auto& r : reports) {
        total.care_gt_count += r.care_gt_count;
        total.scored_detection_count += r.scored_detection_count;
        total.gt_credit += r.gt_credit;
        total.detection_credit += r.detection_credit;
    }
    total.finalize();
    return total;
}

} // namespace fastext
