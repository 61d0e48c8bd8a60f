#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "fabloop/detection.hpp"
#include "fabloop/errors.hpp"
#include "fabloop/vision.hpp"

using namespace fabloop;

namespace {

/// Reference labeling: repeated flood fill, labels assigned in raster order.
std::vector<int> flood_fill_labels(const BinaryImage& bin, Connectivity conn) {
    const int w = bin.width, h = bin.height;
    std::vector<int> labels(static_cast<std::size_t>(w) * h, 0);
    int next = 0;
    std::vector<std::pair<int, int>> stack;
    for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
            if (!bin.at(u, v) || labels[static_cast<std::size_t>(v) * w + u]) continue;
            ++next;
            stack.push_back({u, v});
            labels[static_cast<std::size_t>(v) * w + u] = next;
            while (!stack.empty()) {
                auto [cu, cv] = stack.back();
                stack.pop_back();
                for (int dv = -1; dv <= 1; ++dv) {
                    for (int du = -1; du <= 1; ++du) {
                        if (du == 0 && dv == 0) continue;
                        if (conn == Connectivity::Four && du != 0 && dv != 0) continue;
                        const int nu = cu + du, nv = cv + dv;
                        if (nu < 0 || nu >= w || nv < 0 || nv >= h) continue;
                        auto& l = labels[static_cast<std::size_t>(nv) * w + nu];
                        if (bin.at(nu, nv) && !l) {
                            l = next;
                            stack.push_back({nu, nv});
                        }
                    }
                }
            }
        }
    }
    return labels;
}

/// Exhaustive maximization of between-class variance, lowest winner on ties.
int brute_force_otsu(const std::array<std::uint64_t, 256>& hist) {
    std::uint64_t total = 0;
    double total_sum = 0.0;
    for (int i = 0; i < 256; ++i) {
        total += hist[i];
        total_sum += static_cast<double>(i) * hist[i];
    }
    if (total == 0) return -1;
    int best_t = -1;
    double best_var = 0.0;
    std::uint64_t w0 = 0;
    double sum0 = 0.0;
    for (int t = 0; t < 256; ++t) {
        w0 += hist[t];
        sum0 += static_cast<double>(t) * hist[t];
        const std::uint64_t w1 = total - w0;
        if (w0 == 0 || w1 == 0) continue;
        const double m0 = sum0 / w0;
        const double m1 = (total_sum - sum0) / w1;
        const double var =
            static_cast<double>(w0) * static_cast<double>(w1) * (m0 - m1) * (m0 - m1);
        if (var > best_var) {
            best_var = var;
            best_t = t;
        }
    }
    return best_t;
}

BinaryImage random_binary(std::mt19937_64& rng, int w, int h, double density) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    BinaryImage bin(w, h);
    for (auto& m : bin.mask) m = coin(rng) < density ? 1 : 0;
    return bin;
}

const Homography kIdentity = Homography::from_matrix(Eigen::Matrix3d::Identity());

}  // namespace

TEST_CASE("contrast stretch formula") {
    GrayImage img(3, 1);
    img.at(0, 0) = 50;
    img.at(1, 0) = 100;
    img.at(2, 0) = 150;
    const GrayImage out = enhance_contrast(img);
    CHECK(out.at(0, 0) == 0);
    CHECK(out.at(1, 0) == 128);  // 127.5 rounds half up
    CHECK(out.at(2, 0) == 255);
}

TEST_CASE("contrast stretch degenerate and identity cases") {
    GrayImage flat(4, 4, 77);
    CHECK(enhance_contrast(flat) == flat);

    GrayImage full(2, 1);
    full.at(0, 0) = 0;
    full.at(1, 0) = 255;
    CHECK(enhance_contrast(full) == full);

    // Full-range image keeps every value fixed.
    GrayImage ramp(16, 16);
    for (int v = 0; v < 16; ++v)
        for (int u = 0; u < 16; ++u) ramp.at(u, v) = static_cast<std::uint8_t>(v * 16 + u);
    CHECK(enhance_contrast(ramp) == ramp);
}

TEST_CASE("otsu on a two-level histogram") {
    std::array<std::uint64_t, 256> hist{};
    hist[50] = 60;
    hist[200] = 40;
    const int t = otsu_threshold(hist);
    CHECK(t >= 50);
    CHECK(t < 200);
    CHECK(t == brute_force_otsu(hist));
    CHECK(t == 50);  // lowest maximizer wins the [50,199] tie

    std::array<std::uint64_t, 256> empty{};
    CHECK(otsu_threshold(empty) == -1);
    std::array<std::uint64_t, 256> constant{};
    constant[128] = 1000;
    CHECK(otsu_threshold(constant) == -1);
}

TEST_CASE("otsu equals the exhaustive scan on random histograms") {
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<int> count(0, 500);
    std::uniform_int_distribution<int> bins(1, 40);
    std::uniform_int_distribution<int> level(0, 255);
    for (int trial = 0; trial < 100; ++trial) {
        std::array<std::uint64_t, 256> hist{};
        const int n = bins(rng);
        for (int i = 0; i < n; ++i) hist[level(rng)] += count(rng);
        CHECK(otsu_threshold(hist) == brute_force_otsu(hist));
    }
}

TEST_CASE("threshold polarity") {
    GrayImage img(4, 1);
    img.at(0, 0) = 10;
    img.at(1, 0) = 50;
    img.at(2, 0) = 200;
    img.at(3, 0) = 250;

    DetectConfig dark;
    dark.polarity = Polarity::DefectsDark;
    const BinaryImage bd = threshold(img, dark);
    CHECK(bd.at(0, 0) == 1);
    CHECK(bd.at(1, 0) == 1);
    CHECK(bd.at(2, 0) == 0);
    CHECK(bd.at(3, 0) == 0);

    DetectConfig bright;
    bright.polarity = Polarity::DefectsBright;
    const BinaryImage bb = threshold(img, bright);
    CHECK(bb.at(0, 0) == 0);
    CHECK(bb.at(1, 0) == 0);
    CHECK(bb.at(2, 0) == 1);
    CHECK(bb.at(3, 0) == 1);

    GrayImage flat(3, 3, 42);
    CHECK(threshold(flat, dark).mask == std::vector<std::uint8_t>(9, 0));
    CHECK(threshold(flat, bright).mask == std::vector<std::uint8_t>(9, 0));
}

TEST_CASE("segment hand cases") {
    DetectConfig cfg;

    BinaryImage empty(8, 8);
    CHECK(segment(empty, cfg).empty());

    BinaryImage single(20, 20);
    single.set(10, 10, true);
    const auto regions = segment(single, cfg);
    REQUIRE(regions.size() == 1);
    CHECK(regions[0].area_px == 1);
    CHECK(regions[0].centroid_px == Eigen::Vector2d(10.0, 10.0));
    CHECK(regions[0].min_u == 10);
    CHECK(regions[0].max_v == 10);

    BinaryImage diag(8, 8);
    diag.set(2, 2, true);
    diag.set(3, 3, true);
    DetectConfig eight;
    eight.connectivity = Connectivity::Eight;
    CHECK(segment(diag, eight).size() == 1);
    DetectConfig four;
    four.connectivity = Connectivity::Four;
    CHECK(segment(diag, four).size() == 2);
}

TEST_CASE("segment exact centroid and region order") {
    // Two blobs; the one whose first pixel appears earlier in raster order
    // must come first.
    BinaryImage bin(10, 6);
    bin.set(7, 0, true);  // blob A starts at row 0
    bin.set(7, 1, true);
    bin.set(8, 1, true);
    bin.set(1, 1, true);  // blob B starts at row 1
    bin.set(1, 2, true);

    DetectConfig cfg;
    const auto regions = segment(bin, cfg);
    REQUIRE(regions.size() == 2);
    CHECK(regions[0].centroid_px.x() == doctest::Approx(22.0 / 3).epsilon(1e-12));
    CHECK(regions[0].centroid_px.y() == doctest::Approx(2.0 / 3).epsilon(1e-12));
    CHECK(regions[0].area_px == 3);
    CHECK(regions[1].centroid_px == Eigen::Vector2d(1.0, 1.5));
    CHECK(regions[1].min_u == 1);
    CHECK(regions[1].max_u == 1);
    CHECK(regions[1].min_v == 1);
    CHECK(regions[1].max_v == 2);
}

TEST_CASE("segment min_area filter") {
    BinaryImage bin(12, 12);
    bin.set(0, 0, true);
    for (int u = 5; u < 9; ++u) bin.set(u, 5, true);
    DetectConfig cfg;
    cfg.min_area_px = 2;
    const auto regions = segment(bin, cfg);
    REQUIRE(regions.size() == 1);
    CHECK(regions[0].area_px == 4);

    cfg.min_area_px = 0;
    CHECK_THROWS_AS(segment(bin, cfg), ValidationError);
}

TEST_CASE("segment matches the flood-fill oracle") {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> density(0.05, 0.95);
    for (int trial = 0; trial < 40; ++trial) {
        const Connectivity conn = trial % 2 ? Connectivity::Four : Connectivity::Eight;
        const BinaryImage bin = random_binary(rng, 64, 64, density(rng));
        const std::vector<int> oracle = flood_fill_labels(bin, conn);

        DetectConfig cfg;
        cfg.connectivity = conn;
        const auto regions = segment(bin, cfg);

        // Pixel memberships must match exactly: same partition, same order.
        std::map<int, std::set<std::pair<int, int>>> oracle_sets;
        for (int v = 0; v < 64; ++v)
            for (int u = 0; u < 64; ++u)
                if (const int l = oracle[static_cast<std::size_t>(v) * 64 + u])
                    oracle_sets[l].insert({u, v});
        REQUIRE(regions.size() == oracle_sets.size());

        for (std::size_t i = 0; i < regions.size(); ++i) {
            const auto& want = oracle_sets.at(static_cast<int>(i) + 1);
            CHECK(static_cast<std::size_t>(regions[i].area_px) == want.size());
            double su = 0.0, sv = 0.0;
            int min_u = 64, max_u = -1, min_v = 64, max_v = -1;
            for (auto [u, v] : want) {
                su += u;
                sv += v;
                min_u = std::min(min_u, u);
                max_u = std::max(max_u, u);
                min_v = std::min(min_v, v);
                max_v = std::max(max_v, v);
            }
            CHECK(regions[i].centroid_px.x() == doctest::Approx(su / want.size()).epsilon(1e-12));
            CHECK(regions[i].centroid_px.y() == doctest::Approx(sv / want.size()).epsilon(1e-12));
            CHECK(regions[i].min_u == min_u);
            CHECK(regions[i].max_u == max_u);
            CHECK(regions[i].min_v == min_v);
            CHECK(regions[i].max_v == max_v);
        }
    }
}

TEST_CASE("quantify converts and sorts") {
    BedMapping m;  // 0.67 mm/px, ROI origin (50,50)

    DefectRegion at_origin;
    at_origin.centroid_px = {50.0, 50.0};
    at_origin.area_px = 1;
    const auto q0 = quantify({at_origin}, m);
    CHECK(q0[0].centroid_mm == Eigen::Vector2d(0.0, 0.0));
    CHECK(q0[0].equivalent_diameter_mm ==
          doctest::Approx(2.0 * std::sqrt(1.0 / M_PI) * 0.67).epsilon(1e-12));

    DefectRegion a, b, c;
    a.centroid_px = {60.0, 80.0};  // x = 6.7
    b.centroid_px = {60.0, 55.0};  // same x, smaller y
    c.centroid_px = {55.0, 90.0};  // smallest x
    a.area_px = b.area_px = c.area_px = 4;
    const auto sorted = quantify({a, b, c}, m);
    CHECK(sorted[0].centroid_px == Eigen::Vector2d(55.0, 90.0));
    CHECK(sorted[1].centroid_px == Eigen::Vector2d(60.0, 55.0));
    CHECK(sorted[2].centroid_px == Eigen::Vector2d(60.0, 80.0));

    // Area scales the equivalent diameter with sqrt.
    DefectRegion big;
    big.centroid_px = {100.0, 100.0};
    big.area_px = 16;
    const auto qb = quantify({big}, m);
    CHECK(qb[0].equivalent_diameter_mm ==
          doctest::Approx(4.0 * q0[0].equivalent_diameter_mm).epsilon(1e-12));
}

TEST_CASE("detect end to end on a synthetic frame") {
    // 400x400 frame, already rectified (identity homography). Outside the
    // ROI everything is dark bed; inside sits bright material with two dark
    // square voids plus a dark frame-edge band crossing the ROI border.
    GrayImage frame(400, 400, 40);
    for (int v = 60; v < 340; ++v)
        for (int u = 60; u < 340; ++u) frame.at(u, v) = 200;
    auto punch = [&](int u0, int v0, int size) {
        for (int v = v0; v < v0 + size; ++v)
            for (int u = u0; u < u0 + size; ++u) frame.at(u, v) = 40;
    };
    punch(100, 120, 4);
    punch(200, 210, 2);

    DetectConfig cfg;
    BedMapping m;
    const auto regions = detect(frame, kIdentity, m, cfg);
    REQUIRE(regions.size() == 2);

    // Sorted by x: the (100,120) square first.
    CHECK(regions[0].area_px == 16);
    CHECK(regions[0].centroid_px == Eigen::Vector2d(101.5, 121.5));
    CHECK(regions[0].min_u == 100);
    CHECK(regions[0].max_u == 103);
    CHECK(regions[0].centroid_mm.x() == doctest::Approx((101.5 - 50) * 0.67).epsilon(1e-12));
    CHECK(regions[1].area_px == 4);
    CHECK(regions[1].centroid_px == Eigen::Vector2d(200.5, 210.5));

    // The dark bed ring between ROI border and material touches the ROI
    // boundary, so it must not be reported. A defect-free material field
    // reports nothing at all.
    GrayImage clean(400, 400, 40);
    for (int v = 60; v < 340; ++v)
        for (int u = 60; u < 340; ++u) clean.at(u, v) = 200;
    CHECK(detect(clean, kIdentity, m, cfg).empty());
}

TEST_CASE("burn_overlay marks bounding boxes") {
    GrayImage img(10, 10, 0);
    DefectRegion r;
    r.min_u = 2;
    r.max_u = 5;
    r.min_v = 3;
    r.max_v = 6;
    burn_overlay(img, {r});
    CHECK(img.at(2, 3) == 255);
    CHECK(img.at(5, 6) == 255);
    CHECK(img.at(3, 3) == 255);
    CHECK(img.at(2, 4) == 255);
    CHECK(img.at(3, 4) == 0);  // interior untouched
    CHECK(img.at(6, 3) == 0);  // outside the box
}
