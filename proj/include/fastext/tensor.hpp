#pragma once

// Dense NCHW float tensors and the handful of kernels the detector needs:
// 3x3 / 1x1 convolution (full, grouped, depthwise), batch-norm folding,
// ReLU6, element-wise add and two-channel softmax.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fastext/error.hpp"

namespace fastext {

struct Shape4 {
    std::size_t n = 1;
    std::size_t c = 1;
    std::size_t h = 1;
    std::size_t w = 1;

    std::size_t size() const { return n * c * h * w; }
    friend bool operator==(const Shape4&, const Shape4&) = default;
};

inline std::string to_string(const Shape4& s) {
    return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) + "," +
           std::to_string(s.w) + ")";
}

class Tensor4 {
public:
    Tensor4() = default;

    explicit Tensor4(Shape4 shape, float fill = 0.0f) : shape_(shape) {
        check_dims();
        data_.assign(shape_.size(), fill);
    }

    Tensor4(Shape4 shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
        check_dims();
        if (data_.size() != shape_.size()) {
            throw shape_error("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                              to_string(shape_));
        }
    }

    const Shape4& shape() const { return shape_; }
    std::size_t batch() const { return shape_.n; }
    std::size_t channels() const { return shape_.c; }
    std::size_t height() const { return shape_.h; }
    std::size_t width() const { return shape_.w; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<const float> data() const { return data_; }
    std::span<float> data() { return data_; }

    std::size_t index(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
        return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
    }
    float at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const { return data_[index(n, c, y, x)]; }
    float& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) { return data_[index(n, c, y, x)]; }

    // Contiguous H*W plane of one channel.
    std::span<const float> plane(std::size_t n, std::size_t c) const {
        return std::span<const float>(data_).subspan(index(n, c, 0, 0), shape_.h * shape_.w);
    }
    std::span<float> plane(std::size_t n, std::size_t c) {
        return std::span<float>(data_).subspan(index(n, c, 0, 0), shape_.h * shape_.w);
    }

    friend bool operator==(const Tensor4&, const Tensor4&) = default;

private:
    void check_dims() const {
        if (shape_.n == 0 || shape_.c == 0 || shape_.h == 0 || shape_.w == 0) {
            throw shape_error("tensor dimensions must be >= 1, got " + to_string(shape_));
        }
    }

    Shape4 shape_{};
    std::vector<float> data_;
};

// Convolution weights. Kernel layout is (out_ch, in_ch / groups, k, k).
struct ConvParams {
    std::string name;
    std::size_t in_ch = 0;
    std::size_t out_ch = 0;
    std::size_t kernel_size = 3;
    std::size_t stride = 1;
    std::size_t groups = 1;
    std::vector<float> kernel;
    std::vector<float> bias;

    static ConvParams make(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t kernel_size,
                           std::size_t stride, std::size_t groups = 1) {
        ConvParams p;
        p.name = std::move(name);
        p.in_ch = in_ch;
        p.out_ch = out_ch;
        p.kernel_size = kernel_size;
        p.stride = stride;
        p.groups = groups;
        p.validate_layout();
        p.kernel.assign(p.kernel_len(), 0.0f);
        p.bias.assign(out_ch, 0.0f);
        return p;
    }

    std::size_t in_per_group() const { return in_ch / groups; }
    std::size_t out_per_group() const { return out_ch / groups; }
    std::size_t kernel_len() const { return out_ch * in_per_group() * kernel_size * kernel_size; }
    bool is_depthwise() const { return groups == in_ch && groups == out_ch && groups > 1; }

    float& weight(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) {
        return kernel[((o * in_per_group() + i) * kernel_size + ky) * kernel_size + kx];
    }
    float weight(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) const {
        return kernel[((o * in_per_group() + i) * kernel_size + ky) * kernel_size + kx];
    }

    void validate_layout() const {
        if (stride != 1 && stride != 2) {
            throw shape_error(name + ": stride must be 1 or 2, got " + std::to_string(stride));
        }
        if (kernel_size != 1 && kernel_size != 3) {
            throw shape_error(name + ": kernel size must be 1 or 3, got " + std::to_string(kernel_size));
        }
        if (in_ch == 0 || out_ch == 0 || groups == 0) {
            throw shape_error(name + ": channel and group counts must be positive");
        }
        if (in_ch % groups != 0 || out_ch % groups != 0) {
            throw shape_error(name + ": channels (" + std::to_string(in_ch) + " -> " + std::to_string(out_ch) +
                              ") not divisible by groups " + std::to_string(groups));
        }
    }

    void validate() const {
        validate_layout();
        if (kernel.size() != kernel_len()) {
            throw shape_error(name + ": kernel has " + std::to_string(kernel.size()) + " values, expected " +
                              std::to_string(kernel_len()));
        }
        if (bias.size() != out_ch) {
            throw shape_error(name + ": bias has " + std::to_string(bias.size()) + " values, expected " +
                              std::to_string(out_ch));
        }
    }
};

// "Same" padding: output = ceil(in / stride). When the total padding is odd
// the extra row/column goes to the bottom/right.
inline std::size_t conv_output_dim(std::size_t in, std::size_t stride) { return (in + stride - 1) / stride; }

inline std::size_t same_pad_before(std::size_t in, std::size_t kernel, std::size_t stride) {
    const std::size_t out = conv_output_dim(in, stride);
    const std::size_t needed = (out - 1) * stride + kernel;
    const std::size_t total = needed > in ? needed - in : 0;
    return total / 2;
}

namespace detail {

inline void conv_pointwise(const Tensor4& in, const ConvParams& p, Tensor4& out) {
    const std::size_t oh = out.height(), ow = out.width();
    const std::size_t hw = oh * ow;
    const std::size_t s = p.stride;
    std::vector<float> gathered;
    for (std::size_t n = 0; n < in.batch(); ++n) {
        // stride 2 with a 1x1 kernel just subsamples the input
        const float* src = in.plane(n, 0).data();
        std::size_t src_plane = in.height() * in.width();
        if (s != 1) {
            gathered.resize(in.channels() * hw);
            for (std::size_t c = 0; c < in.channels(); ++c) {
                auto plane = in.plane(n, c);
                for (std::size_t y = 0; y < oh; ++y)
                    for (std::size_t x = 0; x < ow; ++x)
                        gathered[c * hw + y * ow + x] = plane[(y * s) * in.width() + x * s];
            }
            src = gathered.data();
            src_plane = hw;
        }
        for (std::size_t o = 0; o < p.out_ch; ++o) {
            float* dst = out.plane(n, o).data();
            std::fill(dst, dst + hw, p.bias[o]);
            const float* wrow = &p.kernel[o * p.in_ch];
            for (std::size_t i = 0; i < p.in_ch; ++i) {
                const float w = wrow[i];
                const float* x = src + i * src_plane;
                for (std::size_t j = 0; j < hw; ++j) dst[j] += w * x[j];
            }
        }
    }
}

inline void conv_depthwise3x3(const Tensor4& in, const ConvParams& p, Tensor4& out) {
    const std::size_t ih = in.height(), iw = in.width();
    const std::size_t oh = out.height(), ow = out.width();
    const std::size_t s = p.stride;
    const auto pad_y = static_cast<std::ptrdiff_t>(same_pad_before(ih, 3, s));
    const auto pad_x = static_cast<std::ptrdiff_t>(same_pad_before(iw, 3, s));
    for (std::size_t n = 0; n < in.batch(); ++n) {
        for (std::size_t c = 0; c < p.out_ch; ++c) {
            const float* src = in.plane(n, c).data();
            float* dst = out.plane(n, c).data();
            const float* k = &p.kernel[c * 9];
            for (std::size_t y = 0; y < oh; ++y) {
                const std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(y * s) - pad_y;
                for (std::size_t x = 0; x < ow; ++x) {
                    const std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(x * s) - pad_x;
                    float acc = 0.0f;
                    for (std::ptrdiff_t ky = 0; ky < 3; ++ky) {
                        const std::ptrdiff_t yy = y0 + ky;
                        if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(ih)) continue;
                        const float* row = src + yy * static_cast<std::ptrdiff_t>(iw);
                        for (std::ptrdiff_t kx = 0; kx < 3; ++kx) {
                            const std::ptrdiff_t xx = x0 + kx;
                            if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(iw)) continue;
                            acc += k[ky * 3 + kx] * row[xx];
                        }
                    }
                    dst[y * ow + x] = acc + p.bias[c];
                }
            }
        }
    }
}

inline void conv_generic(const Tensor4& in, const ConvParams& p, Tensor4& out) {
    const std::size_t ih = in.height(), iw = in.width();
    const std::size_t oh = out.height(), ow = out.width();
    const std::size_t k = p.kernel_size, s = p.stride;
    const auto pad_y = static_cast<std::ptrdiff_t>(same_pad_before(ih, k, s));
    const auto pad_x = static_cast<std::ptrdiff_t>(same_pad_before(iw, k, s));
    const std::size_t ipg = p.in_per_group(), opg = p.out_per_group();
    for (std::size_t n = 0; n < in.batch(); ++n) {
        for (std::size_t o = 0; o < p.out_ch; ++o) {
            const std::size_t g = o / opg;
            float* dst = out.plane(n, o).data();
            std::fill(dst, dst + oh * ow, 0.0f);
            for (std::size_t i = 0; i < ipg; ++i) {
                const float* src = in.plane(n, g * ipg + i).data();
                for (std::size_t ky = 0; ky < k; ++ky) {
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const float w = p.weight(o, i, ky, kx);
                        for (std::size_t y = 0; y < oh; ++y) {
                            const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y * s + ky) - pad_y;
                            if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(ih)) continue;
                            for (std::size_t x = 0; x < ow; ++x) {
                                const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x * s + kx) - pad_x;
                                if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(iw)) continue;
                                dst[y * ow + x] += w * src[yy * static_cast<std::ptrdiff_t>(iw) + xx];
                            }
                        }
                    }
                }
            }
            for (std::size_t j = 0; j < oh * ow; ++j) dst[j] += p.bias[o];
        }
    }
}

} // namespace detail

inline Tensor4 conv2d(const Tensor4& input, const ConvParams& params) {
    params.validate();
    if (input.channels() != params.in_ch) {
        throw shape_error(params.name + ": input has " + std::to_string(input.channels()) + " channels, expected " +
                          std::to_string(params.in_ch));
    }
    Tensor4 out(Shape4{input.batch(), params.out_ch, conv_output_dim(input.height(), params.stride),
                       conv_output_dim(input.width(), params.stride)});
    if (params.kernel_size == 1 && params.groups == 1) {
        detail::conv_pointwise(input, params, out);
    } else if (params.kernel_size == 3 && params.is_depthwise()) {
        detail::conv_depthwise3x3(input, params, out);
    } else {
        detail::conv_generic(input, params, out);
    }
    return out;
}

struct BatchNormStats {
    std::vector<float> gamma;
    std::vector<float> beta;
    std::vector<float> mean;
    std::vector<float> var;
};

inline constexpr float default_bn_eps = 1e-3f;

// Folds y = gamma * (conv(x) - mean) / sqrt(var + eps) + beta into the
// convolution weights.
inline ConvParams batchnorm_fold(const ConvParams& params, const BatchNormStats& bn, float eps = default_bn_eps) {
    params.validate();
    const std::size_t c = params.out_ch;
    if (bn.gamma.size() != c || bn.beta.size() != c || bn.mean.size() != c || bn.var.size() != c) {
        throw shape_error(params.name + ": batch-norm statistics do not have " + std::to_string(c) + " channels");
    }
    ConvParams folded = params;
    const std::size_t per_out = params.kernel_len() / c;
    for (std::size_t o = 0; o < c; ++o) {
        if (bn.var[o] < 0.0f) throw shape_error(params.name + ": negative batch-norm variance");
        const float scale = bn.gamma[o] / std::sqrt(bn.var[o] + eps);
        for (std::size_t j = 0; j < per_out; ++j) folded.kernel[o * per_out + j] *= scale;
        folded.bias[o] = (params.bias[o] - bn.mean[o]) * scale + bn.beta[o];
    }
    return folded;
}

inline float relu6(float x) { return std::min(std::max(x, 0.0f), 6.0f); }

inline void relu6_inplace(Tensor4& t) {
    for (float& v : t.data()) v = relu6(v);
}

inline Tensor4 relu6(Tensor4 input) {
    relu6_inplace(input);
    return input;
}

inline Tensor4 add(const Tensor4& a, const Tensor4& b) {
    if (a.shape() != b.shape()) {
        throw shape_error("add: shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    }
    Tensor4 out = a;
    auto dst = out.data();
    auto src = b.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    return out;
}

// Two-way softmax, returns the probability of the second logit.
inline double pair_softmax_second(double first, double second) {
    const double m = std::max(first, second);
    const double e0 = std::exp(first - m);
    const double e1 = std::exp(second - m);
    return e1 / (e0 + e1);
}

// Replaces channels (pair_offset, pair_offset + 1) by their per-pixel softmax.
inline Tensor4 channel_pair_softmax(const Tensor4& input, std::size_t pair_offset) {
    if (pair_offset + 1 >= input.channels()) {
        throw shape_error("channel_pair_softmax: offset " + std::to_string(pair_offset) + " out of range for " +
                          std::to_string(input.channels()) + " channels");
    }
    Tensor4 out = input;
    for (std::size_t n = 0; n < input.batch(); ++n) {
        auto a = out.plane(n, pair_offset);
        auto b = out.plane(n, pair_offset + 1);
        for (std::size_t j = 0; j < a.size(); ++j) {
            const float m = std::max(a[j], b[j]);
            const float e0 = std::exp(a[j] - m);
            const float e1 = std::exp(b[j] - m);
            const float sum = e0 + e1;
            a[j] = e0 / sum;
            b[j] = e1 / sum;
        }
    }
    return out;
}

} // namespace fastext
