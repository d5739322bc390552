#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "fastext/detector.hpp"
#include "fastext/image.hpp"
#include "fastext/text_io.hpp"
#include "fastext/weight_file.hpp"
#include "support.hpp"

using namespace fastext;

namespace {

std::vector<char> slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

Image gradient_image(std::size_t w, std::size_t h) {
    Image img{w, h, std::vector<std::uint8_t>(w * h * 3)};
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<std::uint8_t>((x * 7 + y * 3 + c * 50) % 256);
    return img;
}

} // namespace

TEST(WeightFile, RoundTripIsBitExact) {
    NetworkConfig cfg;
    cfg.alpha = 0.75;
    const auto w = generate_weights(cfg, 17);
    const auto bytes = serialize_weights(w);
    EXPECT_EQ(deserialize_weights(bytes), w);
    const auto dir = support::scratch_dir("weights");
    write_weight_file((dir / "w.fstx").string(), w);
    EXPECT_EQ(read_weight_file((dir / "w.fstx").string()), w);
    EXPECT_EQ(slurp(dir / "w.fstx"), bytes);
}

TEST(WeightFile, HeaderLayout) {
    NetworkConfig cfg;
    cfg.alpha = 0.75;
    const auto bytes = serialize_weights(zero_weights(cfg));
    ASSERT_GT(bytes.size(), 24u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FSTX");
    auto u32 = [&](std::size_t off) {
        std::uint32_t v = 0;
        for (int k = 3; k >= 0; --k) v = (v << 8) | static_cast<unsigned char>(bytes[off + k]);
        return v;
    };
    EXPECT_EQ(u32(4), 1u);                 // version
    EXPECT_EQ(u32(8), 0x3F400000u);        // 0.75f
    EXPECT_EQ(u32(12), 6u);                // expansion factor
    EXPECT_EQ(u32(16), 0x3A83126Fu);       // 1e-3f
    EXPECT_EQ(u32(20), zero_weights(cfg).tensors().size());
}

TEST(WeightFile, GeneratedIsDeterministicAndSized) {
    NetworkConfig cfg;
    EXPECT_EQ(serialize_weights(generate_weights(cfg, 42)), serialize_weights(generate_weights(cfg, 42)));
    const auto a = generate_weights(cfg, 1), b = generate_weights(cfg, 2);
    ASSERT_EQ(a.tensors().size(), b.tensors().size());
    for (std::size_t i = 0; i < a.tensors().size(); ++i) EXPECT_EQ(a.tensors()[i].dims, b.tensors()[i].dims);
    EXPECT_NE(serialize_weights(a), serialize_weights(b));
    EXPECT_NEAR(static_cast<double>(a.total_values()) / 2.87e6, 1.0, 0.02);
}

TEST(WeightFile, CorruptInputsRejected) {
    NetworkConfig cfg;
    cfg.alpha = 0.75;
    auto bytes = serialize_weights(zero_weights(cfg));
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(deserialize_weights(bad_magic), format_error);
    auto bad_version = bytes;
    bad_version[4] = 9;
    EXPECT_THROW(deserialize_weights(bad_version), format_error);
    auto truncated = bytes;
    truncated.resize(bytes.size() - 3);
    EXPECT_THROW(deserialize_weights(truncated), format_error);
    auto trailing = bytes;
    trailing.push_back(0);
    EXPECT_THROW(deserialize_weights(trailing), format_error);
    EXPECT_THROW(deserialize_weights({}), format_error);
    EXPECT_THROW(read_weight_file("/nonexistent/w.fstx"), io_error);
}

TEST(Ppm, RoundTripAndComments) {
    const auto img = gradient_image(37, 23);
    const auto dir = support::scratch_dir("ppm");
    write_ppm((dir / "a.ppm").string(), img);
    const auto back = read_ppm((dir / "a.ppm").string());
    EXPECT_EQ(back.width, 37u);
    EXPECT_EQ(back.height, 23u);
    EXPECT_EQ(back.rgb, img.rgb);

    std::string text = "P6\n# a comment\n2 1\n255\n";
    text += std::string("\x01\x02\x03\x04\x05\x06", 6);
    std::istringstream in(text);
    const auto small = read_ppm(in);
    EXPECT_EQ(small.width, 2u);
    EXPECT_EQ(small.at(1, 0, 2), 6);
}

TEST(Ppm, RejectsBadInput) {
    auto parse = [](const std::string& s) {
        std::istringstream in(s);
        return read_ppm(in);
    };
    EXPECT_THROW(parse("P3\n1 1\n255\n0 0 0\n"), format_error);
    EXPECT_THROW(parse("P6\n2 2\n255\n\x01\x02"), format_error);
    EXPECT_THROW(parse("P6\n1 1\n65535\n\x01\x02\x03\x04\x05\x06"), format_error);
    EXPECT_THROW(parse("P6\n0 1\n255\n"), format_error);
    EXPECT_THROW(read_ppm(std::string("/nonexistent.ppm")), io_error);
}

TEST(Resize, PlanFollowsShortSideRule) {
    const auto p = plan_resize(1024, 768, 512, 128);
    EXPECT_EQ(p.resized_width, 683u);
    EXPECT_EQ(p.resized_height, 512u);
    EXPECT_EQ(p.padded_width, 768u);
    EXPECT_EQ(p.padded_height, 512u);

    const auto sq = plan_resize(512, 512, 512, 128);
    EXPECT_EQ(sq.resized_width, 512u);
    EXPECT_EQ(sq.padded_width, 512u);
    EXPECT_EQ(sq.padded_height, 512u);

    const auto tall = plan_resize(300, 1000, 512, 128);
    EXPECT_EQ(tall.resized_width, 512u);
    EXPECT_EQ(tall.resized_height, 1707u);
    EXPECT_EQ(tall.padded_height, 1792u);

    EXPECT_THROW(plan_resize(31, 400, 512, 128), shape_error);
}

TEST(Resize, IdentityAndConstantImages) {
    const auto img = gradient_image(40, 30);
    const auto f = to_float(img);
    EXPECT_EQ(resize_bilinear(f, 40, 30).data, f.data);
    Image flat{50, 40, std::vector<std::uint8_t>(50 * 40 * 3, 200)};
    for (float v : resize_bilinear(to_float(flat), 77, 61).data) EXPECT_FLOAT_EQ(v, 200.0f);
}

TEST(Resize, PrepareInputNormalisesAndPads) {
    Image img{512, 300, std::vector<std::uint8_t>(512 * 300 * 3, 255)};
    img.at(0, 0, 0) = 0;
    const auto plan = plan_resize(img.width, img.height, 300, 128);
    const auto t = prepare_input(img, plan);
    EXPECT_EQ(t.shape(), (Shape4{1, 3, 384, 512}));
    EXPECT_FLOAT_EQ(t.at(0, 0, 0, 0), -1.0f);
    EXPECT_FLOAT_EQ(t.at(0, 1, 0, 0), 1.0f);
    EXPECT_FLOAT_EQ(t.at(0, 1, 299, 511), 1.0f);
    EXPECT_EQ(t.at(0, 1, 300, 0), 0.0f);
    EXPECT_EQ(t.at(0, 2, 383, 511), 0.0f);
}

TEST(Resize, CoordinateRoundTripUnderHalfPixel) {
    std::mt19937 rng(8);
    std::uniform_int_distribution<std::size_t> side(40, 1500);
    std::uniform_real_distribution<double> unit(0.05, 0.95);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t w = side(rng), h = side(rng);
        const auto plan = plan_resize(w, h, 512, 128);
        // a box in original coordinates, taken to resized space with pixel
        // snapping and back
        const double x = unit(rng) * double(w), y = unit(rng) * double(h);
        const auto exact = to_original(WordBox{{x * plan.scale_x(), y * plan.scale_y()}, 4, 2, 0, 1}, plan);
        const Point e = 0.25 * (exact.corners[0] + exact.corners[1] + exact.corners[2] + exact.corners[3]);
        EXPECT_LT(std::abs(e.x - x), 0.51);
        EXPECT_LT(std::abs(e.y - y), 0.51);
        const double rx = std::round(x * plan.scale_x()), ry = std::round(y * plan.scale_y());
        const WordBox box{{rx, ry}, 4, 2, 0, 1};
        const auto d = to_original(box, plan);
        const Point c = 0.25 * (d.corners[0] + d.corners[1] + d.corners[2] + d.corners[3]);
        // one resized pixel is 1 / scale original pixels; snapping costs at
        // most half of it, so compare in resized units
        EXPECT_LT(std::abs(c.x - x) * plan.scale_x(), 0.51);
        EXPECT_LT(std::abs(c.y - y) * plan.scale_y(), 0.51);
    }
}

TEST(GroundTruth, ParsesQuadsAndAxisAligned) {
    auto q = parse_gt_line("377,117,463,117,465,130,378,130,Genaxis Theatre");
    ASSERT_TRUE(q);
    EXPECT_TRUE(q->care);
    EXPECT_EQ(q->vertices[2].x, 465);
    q = parse_gt_line("\xEF\xBB\xBF" "0,0,10,0,10,5,0,5,###");
    ASSERT_TRUE(q);
    EXPECT_FALSE(q->care);
    q = parse_gt_line("38, 43, 920, 215, \"Tiredness\"");
    ASSERT_TRUE(q);
    EXPECT_EQ(q->vertices[2].x, 920);
    EXPECT_EQ(q->vertices[2].y, 215);
    q = parse_gt_line("38 43 920 215 \"Tiredness\"");
    ASSERT_TRUE(q);
    EXPECT_EQ(q->vertices[1].x, 920);
    q = parse_gt_line("0,0,10,0,10,5,0,5,a,b,###");
    ASSERT_TRUE(q);
    EXPECT_TRUE(q->care); // commas stay inside the transcription
    EXPECT_FALSE(parse_gt_line("   ").has_value());
    EXPECT_THROW(parse_gt_line("1,2,x,4"), format_error);
    EXPECT_THROW(parse_gt_line("10,10,5,20,word"), format_error);
}

TEST(GroundTruth, FileErrorsCarryLocation) {
    const auto dir = support::scratch_dir("gt");
    spit(dir / "gt_1.txt", "0,0,10,0,10,5,0,5,ok\n\nnot a box\n");
    try {
        read_gt_file((dir / "gt_1.txt").string());
        FAIL();
    } catch (const format_error& e) {
        EXPECT_NE(std::string(e.what()).find("gt_1.txt:3"), std::string::npos) << e.what();
    }
    EXPECT_THROW(read_gt_file((dir / "missing.txt").string()), io_error);
}

TEST(Detections, FormatAndParse) {
    Detection d{{{{1, 2}, {30.005, 4}, {28.5, 6.25}, {0, 8}}}, 0.123456};
    const auto line = format_detection(d);
    EXPECT_EQ(line.substr(0, 10), "1.00,2.00,");
    EXPECT_EQ(line.substr(line.rfind(',') + 1), "0.12");
    const auto back = parse_detection_line("0,0,10,0,10,5,0,5,0.75");
    ASSERT_TRUE(back);
    EXPECT_EQ(back->score, 0.75);
    EXPECT_EQ(parse_detection_line("0,0,10,0,10,5,0,5")->score, 1.0);
    EXPECT_THROW(parse_detection_line("0,0,10,0,10,5"), format_error);
    EXPECT_THROW(parse_detection_line("0,0,10,0,10,5,0,zz,1"), format_error);

    const auto dir = support::scratch_dir("det");
    write_detection_file((dir / "a.txt").string(), {d, d});
    const auto read = read_detection_file((dir / "a.txt").string());
    ASSERT_EQ(read.size(), 2u);
    EXPECT_NEAR(read[0].corners[2].y, 6.25, 1e-12);
    spit(dir / "b.txt", "0,0,10,0,10,5,0,5,1\n1,1,1,1,1,1,1,1,1\n");
    try {
        read_detection_file((dir / "b.txt").string());
        FAIL();
    } catch (const format_error& e) {
        EXPECT_NE(std::string(e.what()).find("b.txt:2"), std::string::npos) << e.what();
    }
}

TEST(Detector, ZeroWeightsFireEverywhereAtHalf) {
    NetworkConfig cfg;
    cfg.alpha = 0.75;
    const auto net = build_network(cfg, zero_weights(cfg));
    const auto img = gradient_image(160, 128);
    RunConfig run;
    run.min_side = 128;
    const auto all = detect(net, img, run);
    // every pixel is a segment and every link fires, so everything is one word
    ASSERT_EQ(all.size(), 1u);
    EXPECT_NEAR(all[0].score, 0.5, 1e-12);
    run.seg_threshold = 0.51;
    EXPECT_TRUE(detect(net, img, run).empty());
    run.min_side = 100;
    EXPECT_THROW(detect(net, img, run), shape_error);
}
