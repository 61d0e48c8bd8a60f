#include "fabloop/vision.hpp"

#include <cmath>

namespace fabloop {

Homography Homography::from_matrix(const Eigen::Matrix3d& m) {
    if (!m.allFinite()) throw NonInvertibleError("Homography: entries must be finite");
    const double scale = m(2, 2);
    if (scale == 0.0 || std::abs(scale) < 1e-15 * m.cwiseAbs().maxCoeff())
        throw NonInvertibleError("Homography: h(2,2) vanishes, cannot normalize");
    Homography out;
    out.h = m / scale;
    if (std::abs(out.h.determinant()) <= 1e-12)
        throw NonInvertibleError("Homography: matrix is singular");
    return out;
}

Homography Homography::inverse() const {
    Eigen::Matrix3d inv;
    bool invertible = false;
    h.computeInverseWithCheck(inv, invertible, 1e-12);
    if (!invertible) throw NonInvertibleError("Homography: matrix is singular");
    return Homography::from_matrix(inv);
}

void CalibrationQuad::validate() const {
    for (const auto& p : source)
        if (!p.allFinite()) throw DegenerateQuadError("CalibrationQuad: non-finite source point");
    for (const auto& p : target)
        if (!p.allFinite()) throw DegenerateQuadError("CalibrationQuad: non-finite target point");

    // Strict convexity with consistent winding: every consecutive edge
    // cross product has the same nonzero sign. This also rules out
    // duplicate and collinear triples among the source corners.
    double first_sign = 0.0;
    for (int i = 0; i < 4; ++i) {
        const Eigen::Vector2d a = source[(i + 1) % 4] - source[i];
        const Eigen::Vector2d b = source[(i + 2) % 4] - source[(i + 1) % 4];
        const double cross = a.x() * b.y() - a.y() * b.x();
        if (cross == 0.0)
            throw DegenerateQuadError("CalibrationQuad: collinear or duplicate source corners");
        if (first_sign == 0.0)
            first_sign = cross;
        else if ((cross > 0.0) != (first_sign > 0.0))
            throw DegenerateQuadError("CalibrationQuad: source corners are not strictly convex");
    }
}

std::array<Eigen::Vector2d, 4> CalibrationQuad::frame_corners(int size) {
    const double e = size - 1.0;
    return {Eigen::Vector2d(0, 0), Eigen::Vector2d(e, 0), Eigen::Vector2d(e, e),
            Eigen::Vector2d(0, e)};
}

void BedMapping::validate(int frame_px) const {
    if (!(mm_per_pixel > 0.0) || !std::isfinite(mm_per_pixel))
        throw ValidationError("BedMapping: mm_per_pixel must be > 0");
    if (roi_size_px < 1) throw ValidationError("BedMapping: roi_size_px must be >= 1");
    if (!roi_origin_px.allFinite() || roi_origin_px.x() < 0.0 || roi_origin_px.y() < 0.0 ||
        roi_origin_px.x() + roi_size_px > frame_px || roi_origin_px.y() + roi_size_px > frame_px)
        throw ValidationError("BedMapping: ROI does not fit inside the rectified frame");
}

Homography estimate_homography(const CalibrationQuad& quad) {
    quad.validate();

    // Unknowns x = (h00 h01 h02 h10 h11 h12 h20 h21), h22 = 1. Each
    // correspondence (u,v) -> (x,y) contributes
    //   u h00 + v h01 + h02 - x u h20 - x v h21 = x
    //   u h10 + v h11 + h12 - y u h20 - y v h21 = y
    Eigen::Matrix<double, 8, 8> A = Eigen::Matrix<double, 8, 8>::Zero();
    Eigen::Matrix<double, 8, 1> b;
    for (int i = 0; i < 4; ++i) {
        const double u = quad.source[i].x(), v = quad.source[i].y();
        const double x = quad.target[i].x(), y = quad.target[i].y();
        A.row(2 * i) << u, v, 1, 0, 0, 0, -x * u, -x * v;
        A.row(2 * i + 1) << 0, 0, 0, u, v, 1, -y * u, -y * v;
        b(2 * i) = x;
        b(2 * i + 1) = y;
    }

    const Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(A);
    if (!lu.isInvertible())
        throw DegenerateQuadError("estimate_homography: correspondences give a singular system");
    const Eigen::Matrix<double, 8, 1> x = lu.solve(b);

    Eigen::Matrix3d m;
    m << x(0), x(1), x(2), x(3), x(4), x(5), x(6), x(7), 1.0;
    return Homography::from_matrix(m);
}

Eigen::Vector2d apply_homography(const Homography& h, const Eigen::Vector2d& p) {
    const Eigen::Vector3d q = h.h * p.homogeneous();
    if (q.z() == 0.0) throw PointAtInfinityError("apply_homography: point maps to infinity");
    return q.hnormalized();
}

namespace {

// Bilinear sample at continuous (u, v); integer coordinates are pixel
// centers and reproduce the stored value exactly. Returns `background`
// outside [0, w-1] x [0, h-1].
double sample_bilinear(const GrayImage& img, double u, double v, std::uint8_t background) {
    if (!(u >= 0.0) || !(v >= 0.0) || u > img.width - 1.0 || v > img.height - 1.0)
        return background;
    int u0 = static_cast<int>(std::floor(u));
    int v0 = static_cast<int>(std::floor(v));
    if (u0 > img.width - 2) u0 = img.width - 2;    // u == w-1 lands here with fu == 1
    if (v0 > img.height - 2) v0 = img.height - 2;
    if (u0 < 0) u0 = 0;  // single-column/-row images
    if (v0 < 0) v0 = 0;
    const int u1 = std::min(u0 + 1, img.width - 1);
    const int v1 = std::min(v0 + 1, img.height - 1);
    const double fu = u - u0;
    const double fv = v - v0;
    const double top = (1.0 - fu) * img.at(u0, v0) + fu * img.at(u1, v0);
    const double bottom = (1.0 - fu) * img.at(u0, v1) + fu * img.at(u1, v1);
    return (1.0 - fv) * top + fv * bottom;
}

}  // namespace

GrayImage rectify(const GrayImage& image, const Homography& h, int out_size,
                  std::uint8_t background) {
    if (out_size < 1) throw ValidationError("rectify: out_size must be >= 1");
    const Homography inv = h.inverse();  // NonInvertibleError propagates

    GrayImage out(out_size, out_size);
    for (int v = 0; v < out_size; ++v) {
        for (int u = 0; u < out_size; ++u) {
            const Eigen::Vector3d q = inv.h * Eigen::Vector3d(u, v, 1.0);
            if (q.z() == 0.0) {
                out.at(u, v) = background;
                continue;
            }
            const double value =
                sample_bilinear(image, q.x() / q.z(), q.y() / q.z(), background);
            const double rounded = std::floor(value + 0.5);  // round half up
            out.at(u, v) = static_cast<std::uint8_t>(
                rounded < 0.0 ? 0.0 : (rounded > 255.0 ? 255.0 : rounded));
        }
    }
    return out;
}

Eigen::Vector2d pixel_to_bed(const Eigen::Vector2d& p, const BedMapping& m) {
    return (p - m.roi_origin_px) * m.mm_per_pixel;
}

Eigen::Vector2d bed_to_pixel(const Eigen::Vector2d& bed_mm, const BedMapping& m) {
    return bed_mm / m.mm_per_pixel + m.roi_origin_px;
}

}  // namespace fabloop
