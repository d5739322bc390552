#pragma once

// The detector network: a MobileNetV2-style stem and 21 inverted-residual
// bottlenecks with five 1x1 prediction heads at receptive fields
// 8, 16, 32, 64 and 128 px. The 8 px head reads from two extra bottlenecks
// that branch off bottleneck5 and are not shared with the main trunk.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fastext/error.hpp"
#include "fastext/scale_maps.hpp"
#include "fastext/tensor.hpp"

namespace fastext {

struct ScaleSpec {
    std::size_t receptive_field = 8;
    std::size_t stride = 8;
    std::size_t head_channels = 31;
};

inline std::vector<ScaleSpec> default_scales() {
    std::vector<ScaleSpec> out;
    for (std::size_t i = 0; i < scale_count; ++i) {
        const std::size_t rf = std::size_t{8} << i;
        out.push_back({rf, rf, i == 0 ? head_channels_first : head_channels});
    }
    return out;
}

struct NetworkConfig {
    double alpha = 1.0;
    std::size_t expansion_factor = 6;
    std::size_t input_channels = 3;
    float bn_eps = default_bn_eps;
    std::vector<ScaleSpec> scales = default_scales();

    void validate() const {
        if (!(alpha > 0.0) || !std::isfinite(alpha)) throw shape_error("alpha must be positive");
        if (expansion_factor == 0) throw shape_error("expansion factor must be positive");
        if (input_channels != 3) throw shape_error("network expects 3 input channels");
        if (scales.size() != scale_count) throw shape_error("network has exactly 5 scales");
        for (std::size_t i = 0; i < scales.size(); ++i) {
            const auto& s = scales[i];
            const std::size_t want_ch = i == 0 ? head_channels_first : head_channels;
            if (s.receptive_field != (std::size_t{8} << i) || s.stride != s.receptive_field ||
                s.head_channels != want_ch) {
                throw shape_error("scale " + std::to_string(i) + " does not match the 8..128 px head layout");
            }
        }
    }
};

// Width-multiplied channel count: nearest multiple of 8, at least 8, and
// never more than 10% below c * alpha.
inline std::size_t scaled_channels(std::size_t base, double alpha) {
    const double v = static_cast<double>(base) * alpha;
    auto rounded = static_cast<std::size_t>(std::max(8.0, std::floor((v + 4.0) / 8.0) * 8.0));
    if (static_cast<double>(rounded) < 0.9 * v) rounded += 8;
    return rounded;
}

struct BottleneckRow {
    std::size_t channels;
    std::size_t stride;
    int head = -1; // scale index fed by this block's output, if any
};

// Bottlenecks 1..21 (channels before width scaling).
inline constexpr std::array<BottleneckRow, 21> bottleneck_table{{
    {24, 2},  {24, 1},  {32, 2},  {32, 1},  {32, 1, 0}, {64, 2},  {64, 1},
    {64, 1},  {64, 1},  {96, 1},  {96, 1},  {96, 1, 1}, {140, 2}, {140, 1},
    {140, 1}, {140, 1, 2}, {140, 2}, {140, 1}, {140, 1, 3}, {140, 2}, {140, 1, 4},
}};
inline constexpr std::size_t stem_channels = 32;
inline constexpr std::size_t refine_channels = 16;
inline constexpr std::size_t extra_block_channels = 32;
inline constexpr std::size_t extra_block_count = 2;
inline constexpr std::size_t extra_after_bottleneck = 5;

enum class LayerKind { full, depthwise, pointwise, head };

// One convolution of the graph. Non-head layers carry batch-norm statistics
// and no bias; heads carry a bias and no batch norm.
struct LayerSpec {
    std::string name;
    LayerKind kind;
    std::size_t in_ch;
    std::size_t out_ch;
    std::size_t kernel_size;
    std::size_t stride;

    std::size_t groups() const { return kind == LayerKind::depthwise ? in_ch : 1; }
    std::vector<std::uint32_t> kernel_dims() const {
        const auto k = static_cast<std::uint32_t>(kernel_size);
        return {static_cast<std::uint32_t>(out_ch), static_cast<std::uint32_t>(in_ch / groups()), k, k};
    }
    std::size_t kernel_len() const { return out_ch * (in_ch / groups()) * kernel_size * kernel_size; }
    std::size_t parameter_count() const { return kernel_len() + (kind == LayerKind::head ? out_ch : 4 * out_ch); }
};

namespace detail {

inline void push_bottleneck(std::vector<LayerSpec>& out, const std::string& name, std::size_t in, std::size_t co,
                            std::size_t stride, std::size_t t) {
    const std::size_t e = in * t;
    out.push_back({name + ".expand", LayerKind::pointwise, in, e, 1, 1});
    out.push_back({name + ".dw", LayerKind::depthwise, e, e, 3, stride});
    out.push_back({name + ".project", LayerKind::pointwise, e, co, 1, 1});
}

} // namespace detail

// Every convolution of the network in deterministic order; this order is
// also the tensor order of weight files.
inline std::vector<LayerSpec> network_layers(const NetworkConfig& config) {
    config.validate();
    const double a = config.alpha;
    const std::size_t t = config.expansion_factor;
    std::vector<LayerSpec> layers;
    const std::size_t c0 = scaled_channels(stem_channels, a);
    const std::size_t c1 = scaled_channels(refine_channels, a);
    layers.push_back({"stem", LayerKind::full, config.input_channels, c0, 3, 2});
    layers.push_back({"refine.dw", LayerKind::depthwise, c0, c0, 3, 1});
    layers.push_back({"refine.pw", LayerKind::pointwise, c0, c1, 1, 1});

    std::array<std::size_t, scale_count> head_in{};
    std::size_t in = c1;
    for (std::size_t i = 0; i < bottleneck_table.size(); ++i) {
        const auto& row = bottleneck_table[i];
        const std::size_t co = scaled_channels(row.channels, a);
        detail::push_bottleneck(layers, "b" + std::to_string(i + 1), in, co, row.stride, t);
        in = co;
        if (i + 1 == extra_after_bottleneck) {
            std::size_t e_in = in;
            const std::size_t e_out = scaled_channels(extra_block_channels, a);
            for (std::size_t k = 0; k < extra_block_count; ++k) {
                detail::push_bottleneck(layers, "extra" + std::to_string(k + 1), e_in, e_out, 1, t);
                e_in = e_out;
            }
        }
        if (row.head >= 0) head_in[static_cast<std::size_t>(row.head)] = co;
    }
    head_in[0] = scaled_channels(extra_block_channels, a);
    for (std::size_t s = 0; s < scale_count; ++s) {
        layers.push_back({"head" + std::to_string(s), LayerKind::head, head_in[s], config.scales[s].head_channels, 1, 1});
    }
    return layers;
}

// Kernels, biases and batch-norm scalars (gamma, beta, mean, variance).
inline std::size_t count_parameters(const NetworkConfig& config) {
    std::size_t total = 0;
    for (const auto& l : network_layers(config)) total += l.parameter_count();
    return total;
}

struct NamedTensor {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> values;

    std::size_t element_count() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
    friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

class WeightStore {
public:
    double alpha = 1.0;
    std::uint32_t expansion_factor = 6;
    float bn_eps = default_bn_eps;

    void add(NamedTensor t) {
        if (t.values.size() != t.element_count()) {
            throw shape_error(t.name + ": payload has " + std::to_string(t.values.size()) + " values, dims imply " +
                              std::to_string(t.element_count()));
        }
        if (index_.contains(t.name)) throw shape_error("duplicate weight tensor " + t.name);
        index_.emplace(t.name, tensors_.size());
        tensors_.push_back(std::move(t));
    }

    const NamedTensor* find(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : &tensors_[it->second];
    }

    const NamedTensor& get(const std::string& name, const std::vector<std::uint32_t>& dims) const {
        const NamedTensor* t = find(name);
        if (t == nullptr) throw shape_error("missing weight tensor " + name);
        if (t->dims != dims) throw shape_error(name + ": mis-shaped weight tensor");
        return *t;
    }

    const std::vector<NamedTensor>& tensors() const { return tensors_; }
    std::size_t total_values() const {
        std::size_t n = 0;
        for (const auto& t : tensors_) n += t.values.size();
        return n;
    }

    NetworkConfig config() const {
        NetworkConfig c;
        c.alpha = alpha;
        c.expansion_factor = expansion_factor;
        c.bn_eps = bn_eps;
        return c;
    }

    friend bool operator==(const WeightStore& a, const WeightStore& b) {
        return a.alpha == b.alpha && a.expansion_factor == b.expansion_factor && a.bn_eps == b.bn_eps &&
               a.tensors_ == b.tensors_;
    }

private:
    std::vector<NamedTensor> tensors_;
    std::map<std::string, std::size_t> index_;
};

inline constexpr std::array<const char*, 4> bn_suffixes{".bn.gamma", ".bn.beta", ".bn.mean", ".bn.var"};

// Deterministic weights. The generator is std::mt19937 seeded with `seed`;
// each 32-bit draw u becomes (u >> 8) * 2^-24 in [0, 1) and is mapped
// affinely, so bytes are reproducible on every conforming platform.
// Kernels: U(-b, b) with b = sqrt(3 / fan_in). Batch norm: gamma and
// variance U(0.8, 1.2), beta and mean U(-0.1, 0.1). Head bias U(-0.1, 0.1).
inline WeightStore generate_weights(const NetworkConfig& config, std::uint32_t seed) {
    std::mt19937 rng(seed);
    auto uniform = [&rng](double lo, double hi) {
        const double u = static_cast<double>(rng() >> 8) * (1.0 / 16777216.0);
        return static_cast<float>(lo + (hi - lo) * u);
    };
    WeightStore store;
    store.alpha = config.alpha;
    store.expansion_factor = static_cast<std::uint32_t>(config.expansion_factor);
    store.bn_eps = config.bn_eps;
    for (const auto& l : network_layers(config)) {
        NamedTensor k{l.name + ".kernel", l.kernel_dims(), {}};
        const double fan_in = static_cast<double>(k.element_count() / l.out_ch);
        const double b = std::sqrt(3.0 / fan_in);
        k.values.resize(k.element_count());
        for (auto& v : k.values) v = uniform(-b, b);
        store.add(std::move(k));
        const auto c = static_cast<std::uint32_t>(l.out_ch);
        if (l.kind == LayerKind::head) {
            NamedTensor bias{l.name + ".bias", {c}, std::vector<float>(c)};
            for (auto& v : bias.values) v = uniform(-0.1, 0.1);
            store.add(std::move(bias));
            continue;
        }
        for (std::size_t s = 0; s < bn_suffixes.size(); ++s) {
            NamedTensor t{l.name + bn_suffixes[s], {c}, std::vector<float>(c)};
            const bool positive = s == 0 || s == 3;
            for (auto& v : t.values) v = positive ? uniform(0.8, 1.2) : uniform(-0.1, 0.1);
            store.add(std::move(t));
        }
    }
    return store;
}

// All kernels, biases and batch-norm statistics zero.
inline WeightStore zero_weights(const NetworkConfig& config) {
    WeightStore store;
    store.alpha = config.alpha;
    store.expansion_factor = static_cast<std::uint32_t>(config.expansion_factor);
    store.bn_eps = config.bn_eps;
    for (const auto& l : network_layers(config)) {
        store.add({l.name + ".kernel", l.kernel_dims(), std::vector<float>(l.kernel_len())});
        const auto c = static_cast<std::uint32_t>(l.out_ch);
        if (l.kind == LayerKind::head) {
            store.add({l.name + ".bias", {c}, std::vector<float>(c)});
        } else {
            for (const char* s : bn_suffixes) store.add({l.name + s, {c}, std::vector<float>(c)});
        }
    }
    return store;
}

struct NetworkOptions {
    // Feed the 8 px head from bottleneck5 directly instead of through the two
    // extra blocks. Only used to check that the extra branch is detached.
    bool skip_extra_blocks = false;
};

class Network {
public:
    struct Bottleneck {
        ConvParams expand;
        ConvParams depthwise;
        ConvParams project;
        bool residual = false;
    };

    const NetworkConfig& config() const { return config_; }

    ScaleMaps forward(const Tensor4& image) const {
        if (image.batch() != 1 || image.channels() != config_.input_channels) {
            throw shape_error("forward: expected a 1x3xHxW image, got " + to_string(image.shape()));
        }
        if (image.height() < 128 || image.width() < 128) {
            throw shape_error("forward: input must be at least 128x128, got " + std::to_string(image.height()) + "x" +
                              std::to_string(image.width()));
        }
        Tensor4 x = conv2d(image, stem_);
        relu6_inplace(x);
        x = conv2d(x, refine_dw_);
        relu6_inplace(x);
        x = conv2d(x, refine_pw_);

        std::array<std::optional<Tensor4>, scale_count> features;
        for (std::size_t i = 0; i < trunk_.size(); ++i) {
            x = run(trunk_[i], x);
            if (i + 1 == extra_after_bottleneck) {
                Tensor4 branch = x;
                if (!options_.skip_extra_blocks) {
                    for (const auto& b : extra_) branch = run(b, branch);
                }
                features[0] = std::move(branch);
            }
            const int head = bottleneck_table[i].head;
            if (head > 0) features[static_cast<std::size_t>(head)] = x;
        }
        ScaleMaps maps;
        for (std::size_t s = 0; s < scale_count; ++s) {
            maps.scales.push_back(
                ScaleMap{static_cast<double>(config_.scales[s].receptive_field), conv2d(*features[s], heads_[s])});
        }
        return maps;
    }

private:
    friend Network build_network(const NetworkConfig&, const WeightStore&, NetworkOptions);

    static Tensor4 run(const Bottleneck& b, const Tensor4& in) {
        Tensor4 y = conv2d(in, b.expand);
        relu6_inplace(y);
        y = conv2d(y, b.depthwise);
        relu6_inplace(y);
        y = conv2d(y, b.project);
        return b.residual ? add(y, in) : y;
    }

    NetworkConfig config_;
    NetworkOptions options_;
    ConvParams stem_, refine_dw_, refine_pw_;
    std::vector<Bottleneck> trunk_;
    std::vector<Bottleneck> extra_;
    std::vector<ConvParams> heads_;
};

namespace detail {

inline ConvParams load_layer(const LayerSpec& l, const WeightStore& w, float eps) {
    ConvParams p = ConvParams::make(l.name, l.in_ch, l.out_ch, l.kernel_size, l.stride, l.groups());
    p.kernel = w.get(l.name + ".kernel", l.kernel_dims()).values;
    const std::vector<std::uint32_t> vec_dims{static_cast<std::uint32_t>(l.out_ch)};
    if (l.kind == LayerKind::head) {
        p.bias = w.get(l.name + ".bias", vec_dims).values;
        return p;
    }
    BatchNormStats bn{w.get(l.name + bn_suffixes[0], vec_dims).values, w.get(l.name + bn_suffixes[1], vec_dims).values,
                      w.get(l.name + bn_suffixes[2], vec_dims).values, w.get(l.name + bn_suffixes[3], vec_dims).values};
    return batchnorm_fold(p, bn, eps);
}

} // namespace detail

// Builds an immutable, batch-norm-folded network from a weight store.
inline Network build_network(const NetworkConfig& config, const WeightStore& weights, NetworkOptions options = {}) {
    const auto layers = network_layers(config);
    std::map<std::string, ConvParams> loaded;
    for (const auto& l : layers) loaded.emplace(l.name, detail::load_layer(l, weights, config.bn_eps));
    auto take = [&loaded](const std::string& name) { return std::move(loaded.at(name)); };
    auto bottleneck = [&](const std::string& name) {
        Network::Bottleneck b{take(name + ".expand"), take(name + ".dw"), take(name + ".project"), false};
        b.residual = b.depthwise.stride == 1 && b.expand.in_ch == b.project.out_ch;
        return b;
    };

    Network net;
    net.config_ = config;
    net.options_ = options;
    net.stem_ = take("stem");
    net.refine_dw_ = take("refine.dw");
    net.refine_pw_ = take("refine.pw");
    for (std::size_t i = 0; i < bottleneck_table.size(); ++i) net.trunk_.push_back(bottleneck("b" + std::to_string(i + 1)));
    for (std::size_t k = 0; k < extra_block_count; ++k) net.extra_.push_back(bottleneck("extra" + std::to_string(k + 1)));
    for (std::size_t s = 0; s < scale_count; ++s) {
        ConvParams h = take("head" + std::to_string(s));
        if (h.out_ch != config.scales[s].head_channels) {
            throw shape_error(h.name + ": head has " + std::to_string(h.out_ch) + " channels, expected " +
                              std::to_string(config.scales[s].head_channels));
        }
        net.heads_.push_back(std::move(h));
    }
    return net;
}

} // namespace fastext
