#pragma once

// Fixture builders shared by the test programs.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fastext/codec.hpp"
#include "fastext/loss.hpp"
#include "fastext/scale_maps.hpp"
#include "oracles.hpp"

namespace support {

inline std::vector<double> standard_fields() { return {8, 16, 32, 64, 128}; }

// Grids for a padded image of height x width (both multiples of 128).
inline std::vector<std::pair<std::size_t, std::size_t>> standard_grids(std::size_t height, std::size_t width) {
    std::vector<std::pair<std::size_t, std::size_t>> g;
    for (double a : standard_fields())
        g.emplace_back(height / static_cast<std::size_t>(a), width / static_cast<std::size_t>(a));
    return g;
}

inline fastext::ScaleMaps standard_maps(std::size_t height, std::size_t width) {
    return fastext::make_scale_maps(standard_grids(height, width), standard_fields());
}

// Random logits and geometry plus random labels and care masks on small
// grids. Geometry targets stay within +/-2 so residuals land on both sides
// of the Huber threshold.
struct RandomInstance {
    fastext::ScaleMaps maps;
    fastext::GroundTruthTargets gt;
};

inline RandomInstance random_instance(std::mt19937& rng, std::size_t rows = 4, std::size_t cols = 4,
                                      std::size_t scales = 2) {
    std::uniform_real_distribution<float> logit(-3.0f, 3.0f);
    std::uniform_real_distribution<double> target(-2.0, 2.0);
    std::bernoulli_distribution coin(0.35), masked(0.1);
    RandomInstance inst;
    std::vector<std::pair<std::size_t, std::size_t>> grids;
    std::vector<double> fields;
    for (std::size_t s = 0; s < scales; ++s) {
        grids.emplace_back(std::max<std::size_t>(1, rows >> s), std::max<std::size_t>(1, cols >> s));
        fields.push_back(8.0 * static_cast<double>(1u << s));
    }
    inst.maps = fastext::make_scale_maps(grids, fields);
    for (auto& m : inst.maps.scales)
        for (auto& v : m.raw.data()) v = logit(rng);
    for (std::size_t s = 0; s < scales; ++s) {
        fastext::ScaleTargets t;
        t.rows = grids[s].first;
        t.cols = grids[s].second;
        t.receptive_field = fields[s];
        const std::size_t n = t.rows * t.cols;
        for (std::size_t p = 0; p < n; ++p) {
            const bool pos = coin(rng);
            t.label.push_back(pos);
            t.care.push_back(!masked(rng));
            t.word.push_back(pos ? 0 : -1);
            t.geometry.push_back(pos ? fastext::GeometryDelta{target(rng), target(rng), target(rng), target(rng),
                                                              target(rng)}
                                     : fastext::GeometryDelta{});
        }
        for (std::size_t k = 0; k < n * fastext::neighbor_count; ++k) {
            t.link_label.push_back(coin(rng));
            t.link_care.push_back(!masked(rng));
        }
        if (s > 0) {
            for (std::size_t k = 0; k < n * fastext::child_count; ++k) {
                t.cross_label.push_back(coin(rng));
                t.cross_care.push_back(!masked(rng));
            }
        }
        inst.gt.scales.push_back(std::move(t));
    }
    return inst;
}

// Central differences of the scalar-loop oracle against loss_gradient on
// every head value. Geometry entries within 1e-2 of the Huber kink are
// skipped. Relative error uses max(|numeric|, |analytic|, floor).
struct GradientCheck {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    std::size_t kinks_skipped = 0;
    std::size_t failures = 0;
};

inline GradientCheck check_gradient(RandomInstance inst, double step = 1e-3, double delta = 1.0,
                                    double tolerance = 1e-4, double floor = 1e-6) {
    using namespace fastext;
    GradientCheck out;
    const auto grad = loss_gradient(inst.maps, inst.gt, LossOptions{delta});
    for (std::size_t s = 0; s < inst.maps.size(); ++s) {
        auto& raw = inst.maps[s].raw;
        const auto& t = inst.gt.scales[s];
        for (std::size_t ch = 0; ch < raw.channels(); ++ch)
            for (std::size_t r = 0; r < raw.height(); ++r)
                for (std::size_t c = 0; c < raw.width(); ++c) {
                    float& x = raw.at(0, ch, r, c);
                    const float x0 = x;
                    if (ch >= geometry_offset && ch < geometry_offset + geometry_channels) {
                        const std::size_t p = t.pixel(r, c);
                        if (t.label[p] && t.care[p]) {
                            const double res = x0 - t.geometry[p].as_array()[ch - geometry_offset];
                            if (std::abs(std::abs(res) - delta) < 1e-2) {
                                ++out.kinks_skipped;
                                continue;
                            }
                        }
                    }
                    // the step actually taken after rounding to float
                    x = x0 + static_cast<float>(step);
                    const double hp = double(x) - double(x0);
                    const double fp = oracle::scalar_loss(inst.maps, inst.gt, delta);
                    x = x0 - static_cast<float>(step);
                    const double hm = double(x0) - double(x);
                    const double fm = oracle::scalar_loss(inst.maps, inst.gt, delta);
                    x = x0;
                    const double numeric = (fp - fm) / (hp + hm);
                    const double analytic = grad[s].raw.at(0, ch, r, c);
                    const double rel =
                        std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), floor});
                    out.max_relative_error = std::max(out.max_relative_error, rel);
                    ++out.checked;
                    if (!(rel < tolerance)) ++out.failures;
                }
    }
    return out;
}

// A fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("fastext_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace support
