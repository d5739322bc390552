#pragma once

// Binary weight file, all integers and floats little-endian:
//
//   "FSTX"  u32 version  f32 alpha  u32 expansion_factor  f32 bn_eps
//   u32 tensor_count
//   per tensor: u32 name_len, name bytes (UTF-8), u32 rank, u32 dims[rank],
//               f32 payload[product(dims)]

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <vector>

#include "fastext/error.hpp"
#include "fastext/model.hpp"

namespace fastext {

inline constexpr std::array<char, 4> weight_magic{'F', 'S', 'T', 'X'};
inline constexpr std::uint32_t weight_format_version = 1;

namespace detail {

class ByteWriter {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
    const std::vector<char>& bytes() const { return bytes_; }

private:
    std::vector<char> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(const std::vector<char>& b) : bytes_(b) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string str(std::size_t n) {
        need(n);
        std::string s(bytes_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw format_error("weight file truncated");
    }

    const std::vector<char>& bytes_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline std::vector<char> serialize_weights(const WeightStore& store) {
    detail::ByteWriter w;
    w.raw(weight_magic.data(), weight_magic.size());
    w.u32(weight_format_version);
    w.f32(static_cast<float>(store.alpha));
    w.u32(store.expansion_factor);
    w.f32(store.bn_eps);
    w.u32(static_cast<std::uint32_t>(store.tensors().size()));
    for (const auto& t : store.tensors()) {
        w.u32(static_cast<std::uint32_t>(t.name.size()));
        w.raw(t.name.data(), t.name.size());
        w.u32(static_cast<std::uint32_t>(t.dims.size()));
        for (auto d : t.dims) w.u32(d);
        for (float v : t.values) w.f32(v);
    }
    return w.bytes();
}

inline WeightStore deserialize_weights(const std::vector<char>& bytes) {
    detail::ByteReader r(bytes);
    if (r.str(4) != std::string(weight_magic.data(), weight_magic.size())) throw format_error("bad weight file magic");
    const std::uint32_t version = r.u32();
    if (version != weight_format_version) {
        throw format_error("unsupported weight file version " + std::to_string(version));
    }
    WeightStore store;
    store.alpha = r.f32();
    store.expansion_factor = r.u32();
    store.bn_eps = r.f32();
    const std::uint32_t count = r.u32();
    for (std::uint32_t k = 0; k < count; ++k) {
        NamedTensor t;
        t.name = r.str(r.u32());
        const std::uint32_t rank = r.u32();
        if (rank > 8) throw format_error(t.name + ": implausible tensor rank " + std::to_string(rank));
        std::uint64_t n = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            t.dims.push_back(r.u32());
            n *= t.dims.back();
            if (n > r.remaining()) throw format_error(t.name + ": payload larger than file");
        }
        t.values.resize(static_cast<std::size_t>(n));
        for (auto& v : t.values) v = r.f32();
        try {
            store.add(std::move(t));
        } catch (const shape_error& e) {
            throw format_error(e.what());
        }
    }
    if (!r.done()) throw format_error("trailing bytes after last weight tensor");
    return store;
}

inline void write_weight_file(const std::string& path, const WeightStore& store) {
    const auto bytes = serialize_weights(store);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw io_error("failed writing " + path);
}

inline WeightStore read_weight_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_weights(bytes);
}

} // namespace fastext
