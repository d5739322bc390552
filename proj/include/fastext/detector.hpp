#pragma once

// Image in, word boxes out.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fastext/image.hpp"
#include "fastext/linker.hpp"
#include "fastext/model.hpp"
#include "fastext/text_io.hpp"

namespace fastext {

struct RunConfig {
    double seg_threshold = 0.5;
    double link_threshold = 0.5;
    std::size_t min_side = 512;
    std::size_t pad_multiple = 128;
    std::size_t min_component_size = 1;

    void validate() const {
        if (!(seg_threshold >= 0.0 && seg_threshold <= 1.0)) throw shape_error("segment threshold must be in [0, 1]");
        if (!(link_threshold >= 0.0 && link_threshold <= 1.0)) throw shape_error("link threshold must be in [0, 1]");
        if (min_side < 128) throw shape_error("smallest side must be at least 128");
        if (pad_multiple == 0) throw shape_error("pad multiple must be positive");
    }
};

// Maps a word box from network-input coordinates back onto the original image.
inline Detection to_original(const WordBox& box, const ResizePlan& plan) {
    Detection d;
    const auto corners = box.corners();
    for (std::size_t k = 0; k < 4; ++k) {
        d.corners[k] = {corners[k].x / plan.scale_x(), corners[k].y / plan.scale_y()};
    }
    d.score = box.score;
    return d;
}

inline std::vector<Detection> detect(const Network& net, const Image& image, const RunConfig& config = {}) {
    config.validate();
    const ResizePlan plan = plan_resize(image.width, image.height, config.min_side, config.pad_multiple);
    const ScaleMaps maps = net.forward(prepare_input(image, plan));
    LinkOptions link{config.seg_threshold, config.link_threshold, config.min_component_size};
    std::vector<Detection> out;
    for (const auto& box : detect_words(maps, link)) out.push_back(to_original(box, plan));
    return out;
}

// Draws detection outlines onto a copy of the image.
inline Image annotate(Image image, const std::vector<Detection>& dets) {
    auto plot = [&image](long x, long y) {
        if (x < 0 || y < 0 || x >= static_cast<long>(image.width) || y >= static_cast<long>(image.height)) return;
        const auto ux = static_cast<std::size_t>(x), uy = static_cast<std::size_t>(y);
        image.at(ux, uy, 0) = 0;
        image.at(ux, uy, 1) = 255;
        image.at(ux, uy, 2) = 0;
    };
    for (const auto& d : dets) {
        for (std::size_t k = 0; k < 4; ++k) {
            const Point a = d.corners[k], b = d.corners[(k + 1) % 4];
            const double len = std::max(std::abs(b.x - a.x), std::abs(b.y - a.y));
            const auto steps = static_cast<long>(std::ceil(len)) + 1;
            for (long i = 0; i <= steps; ++i) {
                const double t = static_cast<double>(i) / static_cast<double>(steps);
                plot(std::lround(a.x + t * (b.x - a.x)), std::lround(a.y + t * (b.y - a.y)));
            }
        }
    }
    return image;
}

} // namespace fastext
