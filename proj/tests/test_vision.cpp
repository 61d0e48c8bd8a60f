#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fabloop/errors.hpp"
#include "fabloop/vision.hpp"

using namespace fabloop;

namespace {

Homography translation(double du, double dv) {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m(0, 2) = du;
    m(1, 2) = dv;
    return Homography::from_matrix(m);
}

GrayImage ramp_image(int w, int h) {
    GrayImage img(w, h);
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u) img.at(u, v) = static_cast<std::uint8_t>((3 * u + 7 * v) % 256);
    return img;
}

}  // namespace

TEST_CASE("homography estimation identity and translation") {
    CalibrationQuad quad;
    quad.source = CalibrationQuad::frame_corners(400);
    quad.target = quad.source;
    const Homography ident = estimate_homography(quad);
    CHECK((ident.h - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-9);

    for (auto& p : quad.target) p += Eigen::Vector2d(5.0, 7.0);
    const Homography shift = estimate_homography(quad);
    CHECK(shift.h(0, 2) == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(shift.h(1, 2) == doctest::Approx(7.0).epsilon(1e-9));
    CHECK((shift.h - translation(5, 7).h).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("homography estimation recovers a projective matrix") {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> small(-2e-4, 2e-4);
    std::uniform_real_distribution<double> lin(0.8, 1.2);
    std::uniform_real_distribution<double> off(-30.0, 30.0);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::Matrix3d m;
        m << lin(rng), small(rng) * 100, off(rng), small(rng) * 100, lin(rng), off(rng),
            small(rng), small(rng), 1.0;
        const Homography truth = Homography::from_matrix(m);

        CalibrationQuad quad;
        quad.source = CalibrationQuad::frame_corners(400);
        for (int i = 0; i < 4; ++i) quad.target[i] = apply_homography(truth, quad.source[i]);

        const Homography got = estimate_homography(quad);
        CHECK((got.h - truth.h).norm() / truth.h.norm() < 1e-9);
        for (int i = 0; i < 4; ++i)
            CHECK((apply_homography(got, quad.source[i]) - quad.target[i]).norm() < 1e-9);
    }
}

TEST_CASE("degenerate calibration quads are rejected") {
    CalibrationQuad quad;
    quad.source = CalibrationQuad::frame_corners(400);
    quad.target = quad.source;

    // Three collinear source corners.
    quad.source[2] = (quad.source[0] + quad.source[1]) / 2.0;
    CHECK_THROWS_AS(estimate_homography(quad), DegenerateQuadError);

    // Bowtie (self-intersecting) ordering.
    quad.source = CalibrationQuad::frame_corners(400);
    std::swap(quad.source[2], quad.source[3]);
    CHECK_THROWS_AS(estimate_homography(quad), DegenerateQuadError);

    // Repeated corner.
    quad.source = CalibrationQuad::frame_corners(400);
    quad.source[1] = quad.source[0];
    CHECK_THROWS_AS(estimate_homography(quad), DegenerateQuadError);
}

TEST_CASE("apply_homography basics and errors") {
    const Homography ident = Homography::from_matrix(Eigen::Matrix3d::Identity());
    const Eigen::Vector2d p(12.5, 3.0);
    CHECK((apply_homography(ident, p) - p).norm() == 0.0);

    CHECK((apply_homography(translation(5, 7), {0, 0}) - Eigen::Vector2d(5, 7)).norm() < 1e-12);

    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m(2, 0) = -1.0;  // w = 1 - u vanishes on the u = 1 line
    const Homography h = Homography::from_matrix(m);
    CHECK_THROWS_AS(apply_homography(h, {1.0, 0.5}), PointAtInfinityError);
}

TEST_CASE("inverse homography round trips points") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> coord(0.0, 400.0);
    Eigen::Matrix3d m;
    m << 1.05, 0.02, 14.0, -0.03, 0.97, 22.0, 1e-4, -2e-4, 1.0;
    const Homography h = Homography::from_matrix(m);
    const Homography back = h.inverse();
    for (int i = 0; i < 100; ++i) {
        const Eigen::Vector2d p(coord(rng), coord(rng));
        CHECK((apply_homography(back, apply_homography(h, p)) - p).norm() < 1e-9);
    }

    CHECK_THROWS_AS(Homography::from_matrix(Eigen::Matrix3d::Zero()), NonInvertibleError);
    Eigen::Matrix3d rank2;
    rank2 << 1, 2, 3, 2, 4, 6, 0, 0, 1;
    CHECK_THROWS_AS(Homography::from_matrix(rank2), NonInvertibleError);
}

TEST_CASE("from_matrix normalizes the corner entry") {
    Eigen::Matrix3d m;
    m << 2.0, 0.0, 10.0, 0.0, 2.0, 4.0, 0.0, 0.0, 2.0;
    const Homography h = Homography::from_matrix(m);
    CHECK(h.h(2, 2) == 1.0);
    CHECK(h.h(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(h.h(0, 2) == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("rectify with identity is bit exact") {
    const GrayImage img = ramp_image(37, 23);
    const GrayImage out =
        rectify(img, Homography::from_matrix(Eigen::Matrix3d::Identity()), 23);
    // Same-size identity on a square image.
    const GrayImage sq = ramp_image(23, 23);
    const GrayImage sq_out = rectify(sq, Homography::from_matrix(Eigen::Matrix3d::Identity()), 23);
    CHECK(sq_out == sq);
    // Non-square input still samples exactly at integer coordinates.
    for (int v = 0; v < 23; ++v)
        for (int u = 0; u < 23; ++u) CHECK(out.at(u, v) == img.at(u, v));
}

TEST_CASE("rectify mirrors an asymmetric image under an axis flip") {
    const int n = 9;
    const GrayImage img = ramp_image(n, n);
    // u' = (n-1) - u maps raw to rectified; rectify samples its inverse.
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m(0, 0) = -1.0;
    m(0, 2) = n - 1.0;
    const GrayImage out = rectify(img, Homography::from_matrix(m), n);
    for (int v = 0; v < n; ++v)
        for (int u = 0; u < n; ++u) CHECK(out.at(u, v) == img.at(n - 1 - u, v));
}

TEST_CASE("rectify fills uncovered pixels with the background") {
    const GrayImage img = ramp_image(8, 8);
    const GrayImage out = rectify(img, translation(3, 0), 8, 99);
    for (int v = 0; v < 8; ++v) {
        CHECK(out.at(0, v) == 99);
        CHECK(out.at(2, v) == 99);
        CHECK(out.at(3, v) == img.at(0, v));
        CHECK(out.at(7, v) == img.at(4, v));
    }
}

TEST_CASE("bilinear samples round half up") {
    GrayImage img(2, 1);
    img.at(0, 0) = 10;
    img.at(1, 0) = 11;
    // Output pixel 0 lands at source u = 0.5: (10 + 11) / 2 = 10.5 -> 11.
    const GrayImage out = rectify(img, translation(-0.5, 0.0), 1);
    CHECK(out.at(0, 0) == 11);

    GrayImage img2(2, 1);
    img2.at(0, 0) = 10;
    img2.at(1, 0) = 13;
    // 11.5 -> 12.
    const GrayImage out2 = rectify(img2, translation(-0.5, 0.0), 1);
    CHECK(out2.at(0, 0) == 12);
}

TEST_CASE("calibration corners land on the frame corners after rectification") {
    // A keystoned view estimated from its own corners.
    CalibrationQuad quad;
    quad.target = CalibrationQuad::frame_corners(400);
    quad.source = {Eigen::Vector2d(40, 30), Eigen::Vector2d(430, 42), Eigen::Vector2d(420, 440),
                   Eigen::Vector2d(28, 428)};
    const Homography h = estimate_homography(quad);
    const std::array<Eigen::Vector2d, 4> want = CalibrationQuad::frame_corners(400);
    for (int i = 0; i < 4; ++i) {
        const Eigen::Vector2d got = apply_homography(h, quad.source[i]);
        CHECK(std::abs(got.x() - want[i].x()) < 1e-9);
        CHECK(std::abs(got.y() - want[i].y()) < 1e-9);
    }
}

TEST_CASE("pixel to bed mapping") {
    BedMapping m;  // 0.67 mm/px, ROI at (50,50), 300 px
    CHECK((pixel_to_bed({50.0, 50.0}, m) - Eigen::Vector2d(0.0, 0.0)).norm() == 0.0);
    CHECK((pixel_to_bed({200.0, 200.0}, m) - Eigen::Vector2d(100.5, 100.5)).norm() < 1e-12);
    CHECK((pixel_to_bed({350.0, 350.0}, m) - Eigen::Vector2d(201.0, 201.0)).norm() < 1e-12);

    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> mm(0.0, 201.0);
    for (int i = 0; i < 100; ++i) {
        const Eigen::Vector2d p(mm(rng), mm(rng));
        CHECK((pixel_to_bed(bed_to_pixel(p, m), m) - p).norm() < 1e-9);
    }
}

TEST_CASE("bed mapping validation") {
    BedMapping m;
    CHECK_NOTHROW(m.validate(400));
    m.mm_per_pixel = 0.0;
    CHECK_THROWS_AS(m.validate(400), ValidationError);
    m.mm_per_pixel = 0.67;
    m.roi_origin_px = {150.0, 150.0};
    CHECK_THROWS_AS(m.validate(400), ValidationError);  // 150 + 300 > 400
    m.roi_origin_px = {-1.0, 0.0};
    CHECK_THROWS_AS(m.validate(400), ValidationError);
}

TEST_CASE("frame corners") {
    const auto c = CalibrationQuad::frame_corners(400);
    CHECK(c[0] == Eigen::Vector2d(0, 0));
    CHECK(c[1] == Eigen::Vector2d(399, 0));
    CHECK(c[2] == Eigen::Vector2d(399, 399));
    CHECK(c[3] == Eigen::Vector2d(0, 399));
}

TEST_CASE("image construction guards") {
    CHECK_THROWS_AS(GrayImage(0, 5), ValidationError);
    CHECK_THROWS_AS(GrayImage(5, -1), ValidationError);
    CHECK_THROWS_AS(rectify(ramp_image(4, 4), translation(0, 0), 0), ValidationError);
}
