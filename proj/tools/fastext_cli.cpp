// fastext: command-line front end.
//
//   fastext detect --weights w.fstx --image in.ppm --out boxes.txt [--annotate out.ppm]
//   fastext eval --gt-dir gt/ --det-dir det/ [--json report.json]
//   fastext bench (--weights w.fstx | --alpha 1.0) [--width 768 --height 512 --iters 20]
//   fastext params --alpha 1.0
//   fastext gen-weights --alpha 1.0 --seed 42 --out w.fstx
//
// Exit codes: 0 success, 1 usage error, 2 I/O or format error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fastext/fastext.hpp"

namespace {

constexpr int exit_usage = 1;
constexpr int exit_io = 2;

nlohmann::json report_json(const fastext::MatchReport& r) {
    return {{"precision", r.precision},
            {"recall", r.recall},
            {"f_measure", r.f_measure},
            {"care_gt", r.care_gt_count},
            {"scored_detections", r.scored_detection_count},
            {"gt_credit", r.gt_credit},
            {"detection_credit", r.detection_credit},
            {"one_to_one", r.one_to_one.size()},
            {"one_to_many", r.one_to_many.size()},
            {"many_to_one", r.many_to_one.size()},
            {"precision_empty", r.precision_empty},
            {"recall_empty", r.recall_empty}};
}

void print_report(const std::string& label, const fastext::MatchReport& r) {
    std::printf("%-24s P=%.4f R=%.4f F=%.4f  (gt %zu, det %zu%s%s)\n", label.c_str(), r.precision, r.recall,
                r.f_measure, r.care_gt_count, r.scored_detection_count, r.precision_empty ? ", no detections" : "",
                r.recall_empty ? ", no ground truth" : "");
}

fastext::Network load_network(const std::string& weights_path) {
    const auto store = fastext::read_weight_file(weights_path);
    return fastext::build_network(store.config(), store);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Segment-and-link scene text detector"};
    app.require_subcommand(1);

    std::string weights, image_path, out_path, annotate_path, gt_dir, det_dir, json_path;
    double alpha = 1.0;
    std::uint32_t seed = 0;
    std::size_t iters = 20, width = 768, height = 512, expansion = 6;
    fastext::RunConfig run;

    auto* detect = app.add_subcommand("detect", "Detect words in a PPM image");
    detect->add_option("--weights", weights, "Weight file")->required();
    detect->add_option("--image", image_path, "Input image (binary PPM)")->required();
    detect->add_option("--out", out_path, "Detection file to write (default: stdout)");
    detect->add_option("--annotate", annotate_path, "Write a copy of the image with boxes drawn");
    detect->add_option("--seg-thresh", run.seg_threshold, "Segment score threshold")->check(CLI::Range(0.0, 1.0));
    detect->add_option("--link-thresh", run.link_threshold, "Link score threshold")->check(CLI::Range(0.0, 1.0));
    detect->add_option("--min-side", run.min_side, "Shorter image side after resizing")
        ->check(CLI::Range(std::size_t{128}, std::size_t{8192}));

    auto* eval = app.add_subcommand("eval", "Score a detection directory against ground truth");
    eval->add_option("--gt-dir", gt_dir, "Ground-truth directory")->required();
    eval->add_option("--det-dir", det_dir, "Detection directory")->required();
    eval->add_option("--json", json_path, "Also write the report as JSON");

    auto* bench = app.add_subcommand("bench", "Time forward passes");
    auto* bench_weights = bench->add_option("--weights", weights, "Weight file");
    bench->add_option("--alpha", alpha, "Width multiplier for generated weights")
        ->check(CLI::PositiveNumber)
        ->excludes(bench_weights);
    bench->add_option("--seed", seed, "Seed for generated weights");
    bench->add_option("--width", width, "Input width")->check(CLI::Range(std::size_t{128}, std::size_t{8192}));
    bench->add_option("--height", height, "Input height")->check(CLI::Range(std::size_t{128}, std::size_t{8192}));
    bench->add_option("--iters", iters, "Timed iterations")->check(CLI::Range(std::size_t{10}, std::size_t{100000}));

    auto* params = app.add_subcommand("params", "Print the parameter count");
    params->add_option("--alpha", alpha, "Width multiplier")->check(CLI::PositiveNumber);
    params->add_option("--expansion", expansion, "Bottleneck expansion factor")->check(CLI::PositiveNumber);

    auto* gen = app.add_subcommand("gen-weights", "Write deterministic pseudo-random weights");
    gen->add_option("--alpha", alpha, "Width multiplier")->check(CLI::PositiveNumber);
    gen->add_option("--seed", seed, "Generator seed");
    gen->add_option("--out", out_path, "Output weight file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_usage;
    }

    try {
        if (detect->parsed()) {
            const auto net = load_network(weights);
            const auto image = fastext::read_ppm(image_path);
            const auto dets = fastext::detect(net, image, run);
            if (out_path.empty()) {
                for (const auto& d : dets) std::cout << fastext::format_detection(d) << '\n';
            } else {
                fastext::write_detection_file(out_path, dets);
            }
            if (!annotate_path.empty()) fastext::write_ppm(annotate_path, fastext::annotate(image, dets));
            std::cerr << dets.size() << " words\n";
        } else if (eval->parsed()) {
            const auto corpus = fastext::evaluate_corpus(gt_dir, det_dir);
            for (const auto& img : corpus.images) print_report(img.stem, img.report);
            print_report("TOTAL", corpus.total);
            if (!json_path.empty()) {
                nlohmann::json j;
                j["total"] = report_json(corpus.total);
                for (const auto& img : corpus.images) j["images"][img.stem] = report_json(img.report);
                std::ofstream out(json_path);
                if (!out) throw fastext::io_error("cannot open " + json_path + " for writing");
                out << j.dump(2) << '\n';
            }
        } else if (bench->parsed()) {
            fastext::NetworkConfig cfg;
            fastext::WeightStore store;
            if (!weights.empty()) {
                store = fastext::read_weight_file(weights);
                cfg = store.config();
            } else {
                cfg.alpha = alpha;
                store = fastext::generate_weights(cfg, seed);
            }
            const auto net = fastext::build_network(cfg, store);
            const auto stats = fastext::benchmark_forward(net, width, height, iters);
            std::printf("alpha=%.2f input=%zux%zu iters=%zu median=%.2f ms p95=%.2f ms min=%.2f ms\n", cfg.alpha,
                        width, height, stats.iterations, stats.median_ms, stats.p95_ms, stats.min_ms);
        } else if (params->parsed()) {
            fastext::NetworkConfig cfg;
            cfg.alpha = alpha;
            cfg.expansion_factor = expansion;
            const auto n = fastext::count_parameters(cfg);
            std::printf("alpha=%.2f parameters=%zu (%.2fM)\n", alpha, n, static_cast<double>(n) / 1e6);
        } else if (gen->parsed()) {
            fastext::NetworkConfig cfg;
            cfg.alpha = alpha;
            fastext::write_weight_file(out_path, fastext::generate_weights(cfg, seed));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_io;
    }
    return 0;
}
