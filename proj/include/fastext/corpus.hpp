#pragma once

// Directory-level evaluation and forward-pass timing.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fastext/eval.hpp"
#include "fastext/model.hpp"
#include "fastext/text_io.hpp"

namespace fastext {

struct ImageReport {
    std::string stem;
    MatchReport report;
};

struct CorpusReport {
    std::vector<ImageReport> images; // sorted by stem
    MatchReport total;
};

namespace detail {

inline std::map<std::string, std::filesystem::path> text_files_by_stem(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw io_error("not a directory: " + dir.string());
    std::map<std::string, std::filesystem::path> out;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".txt") out.emplace(e.path().stem().string(), e.path());
    }
    return out;
}

} // namespace detail

// Pairs GT and detection files by identical stem. A GT file without a
// detection file counts as an image with no detections; detection files
// without GT are ignored. Throws io_error when no GT files exist.
inline CorpusReport evaluate_corpus(const std::string& gt_dir, const std::string& det_dir,
                                    const MatchOptions& opt = {}) {
    const auto gts = detail::text_files_by_stem(gt_dir);
    const auto dets = detail::text_files_by_stem(det_dir);
    if (gts.empty()) throw io_error("no ground-truth files in " + gt_dir);
    CorpusReport corpus;
    std::vector<MatchReport> reports;
    for (const auto& [stem, gt_path] : gts) {
        const auto gt = read_gt_file(gt_path.string());
        std::vector<ConvexPoly> polys;
        if (auto it = dets.find(stem); it != dets.end()) {
            for (const auto& d : read_detection_file(it->second.string())) polys.push_back(d.polygon());
        }
        corpus.images.push_back({stem, match_detections(gt, polys, opt)});
        reports.push_back(corpus.images.back().report);
    }
    corpus.total = reduce_reports(reports);
    return corpus;
}

struct BenchStats {
    std::size_t iterations = 0;
    double median_ms = 0.0;
    double p95_ms = 0.0;
    double min_ms = 0.0;
    double mean_ms = 0.0;
};

inline BenchStats summarize_times(std::vector<double> ms) {
    BenchStats s;
    if (ms.empty()) return s;
    std::sort(ms.begin(), ms.end());
    s.iterations = ms.size();
    const std::size_t n = ms.size();
    s.median_ms = n % 2 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
    // nearest-rank percentile
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
    s.p95_ms = ms[std::max<std::size_t>(rank, 1) - 1];
    s.min_ms = ms.front();
    double sum = 0.0;
    for (double v : ms) sum += v;
    s.mean_ms = sum / static_cast<double>(n);
    return s;
}

// Times `iterations` forward passes on a fixed mid-grey input after `warmup`
// untimed passes.
inline BenchStats benchmark_forward(const Network& net, std::size_t width, std::size_t height, std::size_t iterations,
                                    std::size_t warmup = 3) {
    if (iterations < 10) throw shape_error("benchmark needs at least 10 iterations");
    if (warmup < 3) throw shape_error("benchmark needs at least 3 warm-up passes");
    Tensor4 input(Shape4{1, 3, height, width});
    auto data = input.data();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(i % 255) / 127.5f - 1.0f;
    for (std::size_t i = 0; i < warmup; ++i) (void)net.forward(input);
    std::vector<double> ms;
    for (std::size_t i = 0; i < iterations; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto maps = net.forward(input);
        const auto t1 = std::chrono::steady_clock::now();
        ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        (void)maps;
    }
    return summarize_times(std::move(ms));
}

} // namespace fastext
