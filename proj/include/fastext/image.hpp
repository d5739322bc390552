#pragma once

// Binary PPM (P6) images, bilinear resizing and network input preparation.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <iterator>
#include <string>
#include <vector>

#include "fastext/error.hpp"
#include "fastext/tensor.hpp"

namespace fastext {

struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> rgb; // interleaved, row-major

    std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) { return rgb[(y * width + x) * 3 + c]; }
    std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const { return rgb[(y * width + x) * 3 + c]; }
};

namespace detail {

inline void skip_ppm_space(std::istream& in) {
    while (true) {
        const int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            in.get();
        } else {
            return;
        }
    }
}

inline std::size_t read_ppm_number(std::istream& in) {
    skip_ppm_space(in);
    std::size_t v = 0;
    bool any = false;
    while (std::isdigit(in.peek())) {
        v = v * 10 + static_cast<std::size_t>(in.get() - '0');
        any = true;
        if (v > 1u << 24) throw format_error("PPM header value too large");
    }
    if (!any) throw format_error("malformed PPM header");
    return v;
}

} // namespace detail

inline Image read_ppm(std::istream& in) {
    char magic[2] = {};
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || magic[1] != '6') throw format_error("not a binary PPM (P6) image");
    Image img;
    img.width = detail::read_ppm_number(in);
    img.height = detail::read_ppm_number(in);
    const std::size_t maxval = detail::read_ppm_number(in);
    if (img.width == 0 || img.height == 0) throw format_error("PPM image has zero size");
    if (maxval == 0 || maxval > 255) throw format_error("only 8-bit PPM images are supported");
    if (!std::isspace(in.get())) throw format_error("malformed PPM header");
    img.rgb.resize(img.width * img.height * 3);
    in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.rgb.size())) throw format_error("PPM pixel data truncated");
    if (maxval != 255) {
        for (auto& v : img.rgb) v = static_cast<std::uint8_t>(std::min<std::size_t>(255, (v * 255 + maxval / 2) / maxval));
    }
    return img;
}

inline Image read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open image " + path);
    try {
        return read_ppm(in);
    } catch (const format_error& e) {
        throw format_error(path + ": " + e.what());
    }
}

inline void write_ppm(const std::string& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (!out) throw io_error("failed writing " + path);
}

// Planar float image, channel-major.
struct FloatImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 3;
    std::vector<float> data;

    float at(std::size_t c, std::size_t y, std::size_t x) const { return data[(c * height + y) * width + x]; }
};

inline FloatImage to_float(const Image& img) {
    FloatImage f{img.width, img.height, 3, std::vector<float>(img.width * img.height * 3)};
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            for (std::size_t c = 0; c < 3; ++c) f.data[(c * img.height + y) * img.width + x] = img.at(x, y, c);
    return f;
}

// Bilinear resampling with pixel centres at half-integer coordinates and
// edge samples clamped to the border.
inline FloatImage resize_bilinear(const FloatImage& src, std::size_t out_w, std::size_t out_h) {
    if (out_w == 0 || out_h == 0) throw shape_error("resize target must be non-empty");
    FloatImage dst{out_w, out_h, src.channels, std::vector<float>(out_w * out_h * src.channels)};
    const double sx = static_cast<double>(src.width) / static_cast<double>(out_w);
    const double sy = static_cast<double>(src.height) / static_cast<double>(out_h);
    struct Tap {
        std::size_t i0, i1;
        float f;
    };
    auto taps = [](std::size_t n_out, std::size_t n_in, double scale) {
        std::vector<Tap> t(n_out);
        for (std::size_t i = 0; i < n_out; ++i) {
            const double s = std::clamp((static_cast<double>(i) + 0.5) * scale - 0.5, 0.0,
                                        static_cast<double>(n_in - 1));
            const auto i0 = static_cast<std::size_t>(std::floor(s));
            t[i] = {i0, std::min(i0 + 1, n_in - 1), static_cast<float>(s - static_cast<double>(i0))};
        }
        return t;
    };
    const auto tx = taps(out_w, src.width, sx);
    const auto ty = taps(out_h, src.height, sy);
    for (std::size_t c = 0; c < src.channels; ++c) {
        for (std::size_t y = 0; y < out_h; ++y) {
            const auto& a = ty[y];
            for (std::size_t x = 0; x < out_w; ++x) {
                const auto& b = tx[x];
                const float top = src.at(c, a.i0, b.i0) * (1 - b.f) + src.at(c, a.i0, b.i1) * b.f;
                const float bot = src.at(c, a.i1, b.i0) * (1 - b.f) + src.at(c, a.i1, b.i1) * b.f;
                dst.data[(c * out_h + y) * out_w + x] = top * (1 - a.f) + bot * a.f;
            }
        }
    }
    return dst;
}

inline constexpr std::size_t min_image_side = 32;

struct ResizePlan {
    std::size_t original_width = 0;
    std::size_t original_height = 0;
    std::size_t resized_width = 0;
    std::size_t resized_height = 0;
    std::size_t padded_width = 0;
    std::size_t padded_height = 0;

    double scale_x() const { return static_cast<double>(resized_width) / static_cast<double>(original_width); }
    double scale_y() const { return static_cast<double>(resized_height) / static_cast<double>(original_height); }
};

// The shorter side becomes `min_side`, the longer one keeps the aspect
// ratio (rounded to the nearest pixel); both are then padded up to a
// multiple of `pad_multiple`.
inline ResizePlan plan_resize(std::size_t width, std::size_t height, std::size_t min_side, std::size_t pad_multiple) {
    if (width < min_image_side || height < min_image_side) {
        throw shape_error("image " + std::to_string(width) + "x" + std::to_string(height) + " is smaller than " +
                          std::to_string(min_image_side) + " px");
    }
    if (pad_multiple == 0) throw shape_error("pad multiple must be positive");
    ResizePlan p{width, height, width, height, 0, 0};
    const double scale = static_cast<double>(min_side) / static_cast<double>(std::min(width, height));
    if (width <= height) {
        p.resized_width = min_side;
        p.resized_height = static_cast<std::size_t>(std::lround(static_cast<double>(height) * scale));
    } else {
        p.resized_height = min_side;
        p.resized_width = static_cast<std::size_t>(std::lround(static_cast<double>(width) * scale));
    }
    auto round_up = [pad_multiple](std::size_t v) { return (v + pad_multiple - 1) / pad_multiple * pad_multiple; };
    p.padded_width = round_up(p.resized_width);
    p.padded_height = round_up(p.resized_height);
    return p;
}

// Resized, normalised to x / 127.5 - 1 and zero-padded at the bottom/right.
inline Tensor4 prepare_input(const Image& img, const ResizePlan& plan) {
    FloatImage f = to_float(img);
    if (plan.resized_width != img.width || plan.resized_height != img.height) {
        f = resize_bilinear(f, plan.resized_width, plan.resized_height);
    }
    Tensor4 t(Shape4{1, 3, plan.padded_height, plan.padded_width});
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < plan.resized_height; ++y)
            for (std::size_t x = 0; x < plan.resized_width; ++x) t.at(0, c, y, x) = f.at(c, y, x) / 127.5f - 1.0f;
    return t;
}

} // namespace fastext
