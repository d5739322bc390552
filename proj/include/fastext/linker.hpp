#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "fastext/codec.hpp"
#include "fastext/geometry.hpp"
#include "fastext/scale_maps.hpp"

namespace fastext {

struct GraphEdge {
    std::size_t a = 0;
    std::size_t b = 0;
    double score = 0.0;
};

struct SegmentGraph {
    std::vector<Segment> nodes;
    std::vector<GraphEdge> edges; // undirected, a < b, no duplicates
};

struct WordBox {
    Point center;
    double width = 0.0;
    double height = 0.0;
    double theta = 0.0;
    double score = 0.0;

    std::array<Point, 4> corners() const { return rect_corners(center, width, height, theta); }
    ConvexPoly polygon() const { return ConvexPoly(corners()); }
};

// Links segments that both passed the segment threshold. A pair is joined
// when the link predicted from either endpoint toward the other scores at
// least link_threshold; cross-scale links run from a coarse pixel to its
// four children on the next finer grid.
inline SegmentGraph build_graph(std::vector<Segment> segments, const ScaleMaps& maps, double link_threshold) {
    maps.validate();
    std::vector<std::vector<long>> lookup(maps.size());
    for (std::size_t s = 0; s < maps.size(); ++s) lookup[s].assign(maps[s].rows() * maps[s].cols(), -1);
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& seg = segments[i];
        lookup.at(seg.scale_index).at(seg.row * maps[seg.scale_index].cols() + seg.col) = static_cast<long>(i);
    }
    auto node_at = [&](std::size_t s, long r, long c) -> long {
        if (!maps[s].contains(r, c)) return -1;
        return lookup[s][static_cast<std::size_t>(r) * maps[s].cols() + static_cast<std::size_t>(c)];
    };

    std::map<std::pair<std::size_t, std::size_t>, double> edges;
    auto connect = [&edges](std::size_t a, std::size_t b, double score) {
        const auto key = std::minmax(a, b);
        auto [it, inserted] = edges.emplace(key, score);
        if (!inserted) it->second = std::max(it->second, score);
    };

    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& seg = segments[i];
        const auto& m = maps[seg.scale_index];
        const auto r = static_cast<long>(seg.row), c = static_cast<long>(seg.col);
        for (std::size_t k = 0; k < neighbor_count; ++k) {
            const long j = node_at(seg.scale_index, r + neighbor_offsets[k].dr, c + neighbor_offsets[k].dc);
            if (j < 0) continue;
            const double score = m.link_score(seg.row, seg.col, k);
            if (score >= link_threshold) connect(i, static_cast<std::size_t>(j), score);
        }
        if (seg.scale_index == 0 || !m.has_cross_links()) continue;
        for (std::size_t k = 0; k < child_count; ++k) {
            const long j = node_at(seg.scale_index - 1, 2 * r + child_offsets[k].dr, 2 * c + child_offsets[k].dc);
            if (j < 0) continue;
            const double score = m.cross_score(seg.row, seg.col, k);
            if (score >= link_threshold) connect(i, static_cast<std::size_t>(j), score);
        }
    }

    SegmentGraph g;
    g.nodes = std::move(segments);
    for (const auto& [key, score] : edges) g.edges.push_back({key.first, key.second, score});
    return g;
}

// Connected components by iterative depth-first search. Each component is
// sorted ascending; components are ordered by their smallest node.
inline std::vector<std::vector<std::size_t>> connected_components(std::size_t node_count,
                                                                  const std::vector<GraphEdge>& edges) {
    std::vector<std::vector<std::size_t>> adjacency(node_count);
    for (const auto& e : edges) {
        if (e.a >= node_count || e.b >= node_count) throw shape_error("graph edge references a missing node");
        if (e.a == e.b) continue;
        adjacency[e.a].push_back(e.b);
        adjacency[e.b].push_back(e.a);
    }
    std::vector<std::vector<std::size_t>> components;
    std::vector<bool> visited(node_count, false);
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < node_count; ++start) {
        if (visited[start]) continue;
        auto& comp = components.emplace_back();
        visited[start] = true;
        stack.assign(1, start);
        while (!stack.empty()) {
            const std::size_t v = stack.back();
            stack.pop_back();
            comp.push_back(v);
            for (std::size_t w : adjacency[v]) {
                if (!visited[w]) {
                    visited[w] = true;
                    stack.push_back(w);
                }
            }
        }
        std::sort(comp.begin(), comp.end());
    }
    return components;
}

inline std::vector<std::vector<std::size_t>> connected_components(const SegmentGraph& graph) {
    return connected_components(graph.nodes.size(), graph.edges);
}

// Merges the segments of one word. The box direction is the mean segment
// angle (averaged on doubled angles so theta and theta + pi agree); a line
// with that direction is fitted through the segment centres, and the box
// runs between the outermost projected centres, extended by half the width
// of the segment at each end.
inline WordBox combine_segments(const std::vector<Segment>& component) {
    if (component.empty()) throw shape_error("combine_segments: empty component");
    if (component.size() == 1) {
        const auto& s = component.front();
        return {s.center(), s.w, s.h, s.theta, s.score};
    }
    double sin_sum = 0.0, cos_sum = 0.0;
    for (const auto& s : component) {
        sin_sum += std::sin(2.0 * s.theta);
        cos_sum += std::cos(2.0 * s.theta);
    }
    const double theta = normalize_angle(0.5 * std::atan2(sin_sum, cos_sum));
    const Point u = width_axis(theta), v = height_axis(theta);

    double offset = 0.0, height = 0.0, score = 0.0;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    double lo_end = 0.0, hi_end = 0.0;
    for (const auto& s : component) {
        offset += dot(s.center(), v);
        height += s.h;
        score += s.score;
        const double t = dot(s.center(), u);
        if (t < lo) {
            lo = t;
            lo_end = t - 0.5 * s.w;
        }
        if (t > hi) {
            hi = t;
            hi_end = t + 0.5 * s.w;
        }
    }
    const auto n = static_cast<double>(component.size());
    offset /= n;
    const Point center = (0.5 * (lo_end + hi_end)) * u + offset * v;
    return {center, hi_end - lo_end, height / n, theta, score / n};
}

struct LinkOptions {
    double seg_threshold = 0.5;
    double link_threshold = 0.5;
    std::size_t min_component_size = 1;
};

// decode -> graph -> components -> boxes.
inline std::vector<WordBox> detect_words(const ScaleMaps& maps, const LinkOptions& options = {}) {
    auto graph = build_graph(decode_segments(maps, options.seg_threshold), maps, options.link_threshold);
    std::vector<WordBox> boxes;
    for (const auto& comp : connected_components(graph)) {
        if (comp.size() < options.min_component_size) continue;
        std::vector<Segment> segs;
        segs.reserve(comp.size());
        for (std::size_t i : comp) segs.push_back(graph.nodes[i]);
        boxes.push_back(combine_segments(segs));
    }
    return boxes;
}

} // namespace fastext
