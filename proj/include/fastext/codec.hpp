#pragma once

// Conversion between head outputs and segments.
//
// A pixel (row, col) at a scale with anchor size a owns the anchor square
// centred at ((col + 0.5) a, (row + 0.5) a). Its five geometry channels
// describe a segment relative to that anchor:
//
//   cx = ax + a dx     w = a exp(dw)     theta = dtheta
//   cy = ay + a dy     h = a exp(dh)
//
// encode_ground_truth produces the inverse: per-scale class, geometry, link
// and cross-link targets for a set of word quadrilaterals.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "fastext/error.hpp"
#include "fastext/geometry.hpp"
#include "fastext/scale_maps.hpp"

namespace fastext {

struct Segment {
    double cx = 0.0;
    double cy = 0.0;
    double w = 1.0;
    double h = 1.0;
    double theta = 0.0;
    double score = 1.0;
    std::size_t scale_index = 0;
    std::size_t row = 0;
    std::size_t col = 0;

    Point center() const { return {cx, cy}; }
};

struct GeometryDelta {
    double dx = 0.0;
    double dy = 0.0;
    double dw = 0.0;
    double dh = 0.0;
    double dtheta = 0.0;

    std::array<double, geometry_channels> as_array() const { return {dx, dy, dw, dh, dtheta}; }
};

struct Anchor {
    Point center;
    double size;
};

inline Anchor anchor_at(std::size_t row, std::size_t col, double size) {
    return {{(static_cast<double>(col) + 0.5) * size, (static_cast<double>(row) + 0.5) * size}, size};
}

inline GeometryDelta encode_segment(const Segment& s, const Anchor& a) {
    if (!(s.w > 0.0) || !(s.h > 0.0)) throw shape_error("encode_segment: segment size must be positive");
    return {(s.cx - a.center.x) / a.size, (s.cy - a.center.y) / a.size, std::log(s.w / a.size),
            std::log(s.h / a.size), normalize_angle(s.theta)};
}

// Size deltas are clamped so that exp() stays finite and positive.
inline constexpr double max_log_size_delta = 30.0;

inline Segment decode_delta(const GeometryDelta& d, const Anchor& a) {
    Segment s;
    s.cx = a.center.x + a.size * d.dx;
    s.cy = a.center.y + a.size * d.dy;
    s.w = a.size * std::exp(std::clamp(d.dw, -max_log_size_delta, max_log_size_delta));
    s.h = a.size * std::exp(std::clamp(d.dh, -max_log_size_delta, max_log_size_delta));
    s.theta = normalize_angle(d.dtheta);
    return s;
}

// Every pixel whose text score is >= seg_threshold becomes a segment. Output
// is ordered by scale, then row, then column. Centres are clamped to the
// padded image covered by the grid.
inline std::vector<Segment> decode_segments(const ScaleMaps& maps, double seg_threshold) {
    maps.validate();
    std::vector<Segment> out;
    for (std::size_t s = 0; s < maps.size(); ++s) {
        const auto& m = maps[s];
        const double a = m.receptive_field;
        const double max_x = a * static_cast<double>(m.cols());
        const double max_y = a * static_cast<double>(m.rows());
        for (std::size_t r = 0; r < m.rows(); ++r) {
            for (std::size_t c = 0; c < m.cols(); ++c) {
                const double score = m.text_score(r, c);
                if (score < seg_threshold) continue;
                GeometryDelta d{m.geometry(r, c, 0), m.geometry(r, c, 1), m.geometry(r, c, 2), m.geometry(r, c, 3),
                                m.geometry(r, c, 4)};
                Segment seg = decode_delta(d, anchor_at(r, c, a));
                seg.cx = std::clamp(seg.cx, 0.0, max_x);
                seg.cy = std::clamp(seg.cy, 0.0, max_y);
                seg.score = score;
                seg.scale_index = s;
                seg.row = r;
                seg.col = c;
                out.push_back(seg);
            }
        }
    }
    return out;
}

// A ground-truth word: four vertices, screen-clockwise from the top-left.
struct WordQuad {
    std::array<Point, 4> vertices;
    bool care = true;

    ConvexPoly polygon() const { return ConvexPoly(vertices); }

    static WordQuad axis_aligned(double x0, double y0, double x1, double y1, bool care = true) {
        return {{{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}}, care};
    }
};

struct OrientedRect {
    Point center;
    double width = 0.0;
    double height = 0.0;
    double theta = 0.0;

    std::array<Point, 4> corners() const { return rect_corners(center, width, height, theta); }
    ConvexPoly polygon() const { return ConvexPoly(corners()); }

    // Coordinates of p along the width and height axes, relative to the centre.
    Point local(Point p) const {
        const Point d = p - center;
        return {dot(d, width_axis(theta)), dot(d, height_axis(theta))};
    }
    bool contains(Point p) const {
        const Point l = local(p);
        return std::abs(l.x) <= 0.5 * width && std::abs(l.y) <= 0.5 * height;
    }
};

// Smallest rectangle aligned with the word's reading direction (the mean of
// its top and bottom edges) that covers all four vertices.
inline OrientedRect word_rect(const WordQuad& q) {
    q.polygon(); // rejects degenerate or non-convex quads
    const auto& v = q.vertices;
    const Point dir = (v[1] - v[0]) + (v[2] - v[3]);
    const double theta = normalize_angle(std::atan2(-dir.y, dir.x));
    const Point u = width_axis(theta), n = height_axis(theta);
    double umin = std::numeric_limits<double>::infinity(), umax = -umin, vmin = umin, vmax = -umin;
    for (const auto& p : v) {
        umin = std::min(umin, dot(p, u));
        umax = std::max(umax, dot(p, u));
        vmin = std::min(vmin, dot(p, n));
        vmax = std::max(vmax, dot(p, n));
    }
    const Point center = (0.5 * (umin + umax)) * u + (0.5 * (vmin + vmax)) * n;
    return {center, umax - umin, vmax - vmin, theta};
}

struct EncodeOptions {
    // A word of height h is assigned to anchor size a when max(a/h, h/a) <= this.
    double size_ratio = 1.5;
};

// Training targets for one scale. Per-pixel arrays are row-major; link arrays
// hold neighbor_count (or child_count) entries per pixel.
struct ScaleTargets {
    std::size_t rows = 0;
    std::size_t cols = 0;
    double receptive_field = 8.0;
    std::vector<std::uint8_t> label;  // 1 text, 0 background
    std::vector<std::uint8_t> care;   // 0 excluded from the loss
    std::vector<int> word;            // owning word index, -1 for none
    std::vector<GeometryDelta> geometry;
    std::vector<std::uint8_t> link_label;
    std::vector<std::uint8_t> link_care;
    std::vector<std::uint8_t> cross_label; // empty at the finest scale
    std::vector<std::uint8_t> cross_care;

    std::size_t pixel(std::size_t r, std::size_t c) const { return r * cols + c; }
    bool has_cross_links() const { return !cross_label.empty(); }
};

struct GroundTruthTargets {
    std::vector<ScaleTargets> scales;
};

namespace detail {

inline double anchor_overlap(const Anchor& a, const ConvexPoly& word) {
    const double h = 0.5 * a.size;
    const ConvexPoly square(std::array<Point, 4>{{{a.center.x - h, a.center.y - h},
                                                  {a.center.x + h, a.center.y - h},
                                                  {a.center.x + h, a.center.y + h},
                                                  {a.center.x - h, a.center.y + h}}});
    return intersection_area(square, word);
}

// Part of the word's centre line that falls inside the anchor's extent
// along the reading direction.
inline Segment segment_for_anchor(const OrientedRect& word, const Anchor& a) {
    const double t = word.local(a.center).x;
    const double lo = std::max(t - 0.5 * a.size, -0.5 * word.width);
    const double hi = std::min(t + 0.5 * a.size, 0.5 * word.width);
    Segment s;
    const Point c = word.center + (0.5 * (lo + hi)) * width_axis(word.theta);
    s.cx = c.x;
    s.cy = c.y;
    s.w = std::max(hi - lo, 1e-6 * a.size);
    s.h = word.height;
    s.theta = word.theta;
    return s;
}

} // namespace detail

// Targets for `words` on the given grids. grids[i] is (rows, cols) for the
// scale with anchor size receptive_fields[i]; scale i + 1 must be the 2x
// coarser grid of scale i for cross-links to line up.
inline GroundTruthTargets encode_ground_truth(const std::vector<WordQuad>& words,
                                              const std::vector<double>& receptive_fields,
                                              const std::vector<std::pair<std::size_t, std::size_t>>& grids,
                                              const EncodeOptions& options = {}) {
    if (receptive_fields.size() != grids.size()) throw shape_error("encode_ground_truth: scale/grid count mismatch");
    std::vector<OrientedRect> rects;
    std::vector<ConvexPoly> polys;
    for (const auto& w : words) {
        rects.push_back(word_rect(w));
        polys.push_back(rects.back().polygon());
    }

    GroundTruthTargets gt;
    for (std::size_t s = 0; s < grids.size(); ++s) {
        ScaleTargets t;
        t.rows = grids[s].first;
        t.cols = grids[s].second;
        t.receptive_field = receptive_fields[s];
        const std::size_t n = t.rows * t.cols;
        t.label.assign(n, 0);
        t.care.assign(n, 1);
        t.word.assign(n, -1);
        t.geometry.assign(n, GeometryDelta{});
        for (std::size_t r = 0; r < t.rows; ++r) {
            for (std::size_t c = 0; c < t.cols; ++c) {
                const Anchor a = anchor_at(r, c, t.receptive_field);
                int best = -1;
                double best_overlap = -1.0;
                bool in_dont_care = false;
                for (std::size_t k = 0; k < words.size(); ++k) {
                    if (!rects[k].contains(a.center)) continue;
                    if (!words[k].care) in_dont_care = true;
                    const double h = rects[k].height;
                    if (std::max(a.size / h, h / a.size) > options.size_ratio) continue;
                    const double ov = detail::anchor_overlap(a, polys[k]);
                    if (ov > best_overlap) {
                        best_overlap = ov;
                        best = static_cast<int>(k);
                    }
                }
                const std::size_t p = t.pixel(r, c);
                if (best >= 0 && words[static_cast<std::size_t>(best)].care) {
                    t.label[p] = 1;
                    t.word[p] = best;
                    t.geometry[p] = encode_segment(detail::segment_for_anchor(rects[best], a), a);
                } else if (best >= 0 || in_dont_care) {
                    t.care[p] = 0;
                }
            }
        }

        t.link_label.assign(n * neighbor_count, 0);
        t.link_care.assign(n * neighbor_count, 0);
        for (std::size_t r = 0; r < t.rows; ++r) {
            for (std::size_t c = 0; c < t.cols; ++c) {
                const std::size_t p = t.pixel(r, c);
                for (std::size_t k = 0; k < neighbor_count; ++k) {
                    const long nr = static_cast<long>(r) + neighbor_offsets[k].dr;
                    const long nc = static_cast<long>(c) + neighbor_offsets[k].dc;
                    if (nr < 0 || nc < 0 || nr >= static_cast<long>(t.rows) || nc >= static_cast<long>(t.cols)) continue;
                    const std::size_t q = t.pixel(static_cast<std::size_t>(nr), static_cast<std::size_t>(nc));
                    t.link_care[p * neighbor_count + k] = t.care[p] && t.care[q];
                    t.link_label[p * neighbor_count + k] = t.label[p] && t.label[q] && t.word[p] == t.word[q];
                }
            }
        }
        gt.scales.push_back(std::move(t));
    }

    for (std::size_t s = 1; s < gt.scales.size(); ++s) {
        auto& t = gt.scales[s];
        const auto& fine = gt.scales[s - 1];
        const std::size_t n = t.rows * t.cols;
        t.cross_label.assign(n * child_count, 0);
        t.cross_care.assign(n * child_count, 0);
        for (std::size_t r = 0; r < t.rows; ++r) {
            for (std::size_t c = 0; c < t.cols; ++c) {
                const std::size_t p = t.pixel(r, c);
                for (std::size_t j = 0; j < child_count; ++j) {
                    const std::size_t fr = 2 * r + static_cast<std::size_t>(child_offsets[j].dr);
                    const std::size_t fc = 2 * c + static_cast<std::size_t>(child_offsets[j].dc);
                    if (fr >= fine.rows || fc >= fine.cols) continue;
                    const std::size_t q = fine.pixel(fr, fc);
                    t.cross_care[p * child_count + j] = t.care[p] && fine.care[q];
                    t.cross_label[p * child_count + j] = t.label[p] && fine.label[q] && t.word[p] == fine.word[q];
                }
            }
        }
    }
    return gt;
}

inline GroundTruthTargets encode_ground_truth(const std::vector<WordQuad>& words, const ScaleMaps& like,
                                              const EncodeOptions& options = {}) {
    std::vector<double> rf;
    std::vector<std::pair<std::size_t, std::size_t>> grids;
    for (const auto& m : like.scales) {
        rf.push_back(m.receptive_field);
        grids.emplace_back(m.rows(), m.cols());
    }
    return encode_ground_truth(words, rf, grids, options);
}

// Head maps that reproduce the targets exactly: class and link logits are
// +/- margin and geometry channels carry the encoded deltas.
inline ScaleMaps maps_from_targets(const GroundTruthTargets& gt, float margin = 10.0f) {
    ScaleMaps maps;
    for (std::size_t s = 0; s < gt.scales.size(); ++s) {
        const auto& t = gt.scales[s];
        const std::size_t ch = s == 0 ? head_channels_first : head_channels;
        ScaleMap m{t.receptive_field, Tensor4(Shape4{1, ch, t.rows, t.cols})};
        auto set_pair = [&](std::size_t ch0, std::size_t r, std::size_t c, bool positive) {
            m.channel(ch0, r, c) = positive ? -margin : margin;
            m.channel(ch0 + 1, r, c) = positive ? margin : -margin;
        };
        for (std::size_t r = 0; r < t.rows; ++r) {
            for (std::size_t c = 0; c < t.cols; ++c) {
                const std::size_t p = t.pixel(r, c);
                set_pair(class_offset, r, c, t.label[p] != 0);
                const auto g = t.geometry[p].as_array();
                for (std::size_t k = 0; k < geometry_channels; ++k)
                    m.channel(geometry_offset + k, r, c) = static_cast<float>(g[k]);
                for (std::size_t k = 0; k < neighbor_count; ++k)
                    set_pair(link_offset + 2 * k, r, c, t.link_label[p * neighbor_count + k] != 0);
                if (t.has_cross_links()) {
                    for (std::size_t j = 0; j < child_count; ++j)
                        set_pair(cross_link_offset + 2 * j, r, c, t.cross_label[p * child_count + j] != 0);
                }
            }
        }
        maps.scales.push_back(std::move(m));
    }
    return maps;
}

} // namespace fastext
