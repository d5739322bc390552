#pragma once

// Raw per-scale head outputs and the channel layout shared by the decoder,
// the linker and the loss.
//
//   channels 0..1    class logits (background, text)
//   channels 2..6    geometry deltas (dx, dy, dw, dh, dtheta)
//   channels 7..22   8 within-scale links, 2 logits each (no-link, link)
//   channels 23..30  4 cross-scale links to the finer scale, 2 logits each
//
// The finest scale has no cross-scale links and therefore 23 channels.

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "fastext/error.hpp"
#include "fastext/tensor.hpp"

namespace fastext {

inline constexpr std::size_t class_offset = 0;
inline constexpr std::size_t geometry_offset = 2;
inline constexpr std::size_t link_offset = 7;
inline constexpr std::size_t cross_link_offset = 23;
inline constexpr std::size_t geometry_channels = 5;
inline constexpr std::size_t neighbor_count = 8;
inline constexpr std::size_t child_count = 4;
inline constexpr std::size_t head_channels_first = 23;
inline constexpr std::size_t head_channels = 31;
inline constexpr std::size_t scale_count = 5;

struct GridOffset {
    int dr;
    int dc;
};

// Neighbor n of pixel (r, c) is (r + dr, c + dc); row-major order.
inline constexpr std::array<GridOffset, neighbor_count> neighbor_offsets{{
    {-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1},
}};

// The neighbor index pointing back from the neighbor to the pixel.
inline constexpr std::size_t opposite_neighbor(std::size_t n) { return neighbor_count - 1 - n; }

// Child j of coarse pixel (r, c) is (2r + dr, 2c + dc) on the next finer grid.
inline constexpr std::array<GridOffset, child_count> child_offsets{{{0, 0}, {0, 1}, {1, 0}, {1, 1}}};

struct ScaleMap {
    double receptive_field = 8.0;
    Tensor4 raw; // 1 x C x rows x cols

    std::size_t rows() const { return raw.height(); }
    std::size_t cols() const { return raw.width(); }
    bool has_cross_links() const { return raw.channels() == head_channels; }
    bool contains(long r, long c) const {
        return r >= 0 && c >= 0 && r < static_cast<long>(rows()) && c < static_cast<long>(cols());
    }

    float channel(std::size_t ch, std::size_t r, std::size_t c) const { return raw.at(0, ch, r, c); }
    float& channel(std::size_t ch, std::size_t r, std::size_t c) { return raw.at(0, ch, r, c); }

    float class_logit(std::size_t r, std::size_t c, std::size_t k) const { return channel(class_offset + k, r, c); }
    float geometry(std::size_t r, std::size_t c, std::size_t g) const { return channel(geometry_offset + g, r, c); }
    float link_logit(std::size_t r, std::size_t c, std::size_t n, std::size_t k) const {
        return channel(link_offset + 2 * n + k, r, c);
    }
    float cross_logit(std::size_t r, std::size_t c, std::size_t j, std::size_t k) const {
        return channel(cross_link_offset + 2 * j + k, r, c);
    }

    double text_score(std::size_t r, std::size_t c) const {
        return pair_softmax_second(class_logit(r, c, 0), class_logit(r, c, 1));
    }
    double link_score(std::size_t r, std::size_t c, std::size_t n) const {
        return pair_softmax_second(link_logit(r, c, n, 0), link_logit(r, c, n, 1));
    }
    double cross_score(std::size_t r, std::size_t c, std::size_t j) const {
        return pair_softmax_second(cross_logit(r, c, j, 0), cross_logit(r, c, j, 1));
    }
};

struct ScaleMaps {
    std::vector<ScaleMap> scales;

    std::size_t size() const { return scales.size(); }
    const ScaleMap& operator[](std::size_t i) const { return scales[i]; }
    ScaleMap& operator[](std::size_t i) { return scales[i]; }

    void validate() const {
        for (std::size_t s = 0; s < scales.size(); ++s) {
            const auto& m = scales[s];
            const std::size_t want = s == 0 ? head_channels_first : head_channels;
            if (m.raw.batch() != 1 || m.raw.channels() != want) {
                throw shape_error("scale " + std::to_string(s) + ": head tensor " + to_string(m.raw.shape()) +
                                  " expected " + std::to_string(want) + " channels and batch 1");
            }
        }
    }
};

// Zero-valued maps with the given grid sizes, one receptive field per scale.
inline ScaleMaps make_scale_maps(const std::vector<std::pair<std::size_t, std::size_t>>& grids,
                                 const std::vector<double>& receptive_fields) {
    if (grids.size() != receptive_fields.size()) throw shape_error("make_scale_maps: grid/field count mismatch");
    ScaleMaps maps;
    for (std::size_t s = 0; s < grids.size(); ++s) {
        const std::size_t ch = s == 0 ? head_channels_first : head_channels;
        maps.scales.push_back(ScaleMap{receptive_fields[s], Tensor4(Shape4{1, ch, grids[s].first, grids[s].second})});
    }
    return maps;
}

} // namespace fastext
