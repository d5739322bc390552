#pragma once

// Ground-truth and detection text files.
//
// Ground truth, one word per line:
//   x1,y1,x2,y2,x3,y3,x4,y4,transcription     ("###" marks do-not-care)
//   x1,y1,x2,y2,"transcription"               (axis-aligned, also space separated)
// Detections, one box per line:
//   x1,y1,x2,y2,x3,y3,x4,y4,score

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "fastext/codec.hpp"
#include "fastext/error.hpp"
#include "fastext/geometry.hpp"

namespace fastext {

namespace detail {

inline std::string_view trim(std::string_view s) {
    if (s.starts_with("\xEF\xBB\xBF")) s.remove_prefix(3);
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || end != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep, std::size_t max_fields) {
    std::vector<std::string_view> out;
    while (out.size() + 1 < max_fields) {
        const auto p = s.find(sep);
        if (p == std::string_view::npos) break;
        out.push_back(s.substr(0, p));
        s = s.substr(p + 1);
    }
    out.push_back(s);
    return out;
}

inline std::string_view strip_quotes(std::string_view s) {
    s = trim(s);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

inline std::string strip_bom(std::string line) {
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    return line;
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(lines.empty() ? strip_bom(line) : line);
    return lines;
}

} // namespace detail

// Returns nullopt for blank lines; throws format_error for anything else
// that is not a valid word.
inline std::optional<WordQuad> parse_gt_line(std::string_view line) {
    line = detail::trim(line);
    if (line.empty()) return std::nullopt;

    const auto fields = detail::split(line, ',', 9);
    if (fields.size() >= 8) {
        std::array<double, 8> v{};
        bool ok = true;
        for (std::size_t k = 0; k < 8 && ok; ++k) {
            auto n = detail::parse_number(fields[k]);
            ok = n.has_value();
            if (ok) v[k] = *n;
        }
        if (ok) {
            const std::string_view text = fields.size() > 8 ? detail::strip_quotes(fields[8]) : std::string_view{};
            WordQuad q{{{{v[0], v[1]}, {v[2], v[3]}, {v[4], v[5]}, {v[6], v[7]}}}, text != "###"};
            q.polygon();
            return q;
        }
    }

    // axis-aligned: four numbers then the transcription, comma or space separated
    std::vector<std::string_view> parts = detail::split(line, ',', 5);
    if (parts.size() < 4) {
        parts.clear();
        std::string_view rest = line;
        for (int k = 0; k < 4; ++k) {
            rest = detail::trim(rest);
            const auto p = rest.find_first_of(" \t");
            parts.push_back(rest.substr(0, p));
            rest = p == std::string_view::npos ? std::string_view{} : rest.substr(p);
        }
        parts.push_back(rest);
    }
    std::array<double, 4> b{};
    for (std::size_t k = 0; k < 4; ++k) {
        auto n = k < parts.size() ? detail::parse_number(parts[k]) : std::nullopt;
        if (!n) throw format_error("expected 8 or 4 coordinates");
        b[k] = *n;
    }
    const std::string_view text = parts.size() > 4 ? detail::strip_quotes(parts[4]) : std::string_view{};
    if (!(b[2] > b[0]) || !(b[3] > b[1])) throw format_error("degenerate axis-aligned box");
    return WordQuad::axis_aligned(b[0], b[1], b[2], b[3], text != "###");
}

inline std::vector<WordQuad> read_gt_file(const std::string& path) {
    const auto lines = detail::read_lines(path);
    std::vector<WordQuad> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        try {
            if (auto q = parse_gt_line(lines[i])) out.push_back(*q);
        } catch (const format_error& e) {
            throw format_error(path + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

struct Detection {
    std::array<Point, 4> corners;
    double score = 1.0;

    ConvexPoly polygon() const { return ConvexPoly(corners); }
};

inline std::optional<Detection> parse_detection_line(std::string_view line) {
    line = detail::trim(line);
    if (line.empty()) return std::nullopt;
    const auto fields = detail::split(line, ',', 10);
    if (fields.size() < 8 || fields.size() > 9) throw format_error("expected 8 coordinates and an optional score");
    std::array<double, 9> v{};
    v[8] = 1.0;
    for (std::size_t k = 0; k < fields.size(); ++k) {
        auto n = detail::parse_number(fields[k]);
        if (!n) throw format_error("bad number '" + std::string(detail::trim(fields[k])) + "'");
        v[k] = *n;
    }
    Detection d{{{{v[0], v[1]}, {v[2], v[3]}, {v[4], v[5]}, {v[6], v[7]}}}, v[8]};
    d.polygon();
    return d;
}

inline std::vector<Detection> read_detection_file(const std::string& path) {
    const auto lines = detail::read_lines(path);
    std::vector<Detection> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        try {
            if (auto d = parse_detection_line(lines[i])) out.push_back(*d);
        } catch (const format_error& e) {
            throw format_error(path + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

inline std::string format_detection(const Detection& d) {
    std::string out;
    char buf[64];
    for (const auto& p : d.corners) {
        std::snprintf(buf, sizeof buf, "%.2f,%.2f,", p.x, p.y);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "%.2f", d.score);
    out += buf;
    return out;
}

inline void write_detection_file(const std::string& path, const std::vector<Detection>& dets) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open " + path + " for writing");
    for (const auto& d : dets) out << format_detection(d) << '\n';
    if (!out) throw io_error("failed writing " + path);
}

} // namespace fastext
