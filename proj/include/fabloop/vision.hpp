#pragma once

#include <array>

#include <Eigen/Dense>

#include "fabloop/errors.hpp"
#include "fabloop/image.hpp"

namespace fabloop {

/// 3x3 projective map between raw camera pixels and rectified bed pixels,
/// stored normalized so h(2,2) = 1.
struct Homography {
    Eigen::Matrix3d h = Eigen::Matrix3d::Identity();

    /// Normalizes by h(2,2) and checks invertibility (|det| > 1e-12).
    static Homography from_matrix(const Eigen::Matrix3d& m);
    Homography inverse() const;

    bool operator==(const Homography&) const = default;
};

/// Four raw -> rectified corner correspondences. The source corners must
/// form a strictly convex quad with no three points collinear, listed in
/// a consistent winding order.
struct CalibrationQuad {
    std::array<Eigen::Vector2d, 4> source;  // raw pixels
    std::array<Eigen::Vector2d, 4> target;  // rectified pixels

    void validate() const;  // throws DegenerateQuadError

    /// Targets for a square output frame of `size` pixels:
    /// (0,0), (size-1,0), (size-1,size-1), (0,size-1).
    static std::array<Eigen::Vector2d, 4> frame_corners(int size);
};

/// Pixel -> millimeter mapping of the rectified frame. Bed (0,0) sits at
/// the ROI origin.
struct BedMapping {
    double mm_per_pixel = 0.67;
    Eigen::Vector2d roi_origin_px{50.0, 50.0};  // ROI top-left in the rectified frame
    int roi_size_px = 300;

    /// Checks mm_per_pixel > 0 and that the ROI fits in frame_px.
    void validate(int frame_px) const;
};

/// Exact DLT from four correspondences (8x8 linear solve). The returned H
/// maps each source corner onto its target within 1e-9 px.
Homography estimate_homography(const CalibrationQuad& quad);

/// Projective point map ((h00 u + h01 v + h02)/w, (h10 u + h11 v + h12)/w)
/// with w = h20 u + h21 v + h22. Throws PointAtInfinityError when w = 0.
Eigen::Vector2d apply_homography(const Homography& h, const Eigen::Vector2d& p);

/// Inverse-mapping warp: H maps raw -> rectified, and each output pixel
/// (u, v) of the out_size x out_size result samples the source bilinearly
/// at H^-1(u, v). Out-of-bounds samples take `background`.
GrayImage rectify(const GrayImage& image, const Homography& h, int out_size,
                  std::uint8_t background = 0);

/// Rectified pixel -> bed millimeters: (p - roi_origin) * mm_per_pixel.
/// Total on the rectified frame; points outside the ROI still map.
Eigen::Vector2d pixel_to_bed(const Eigen::Vector2d& p, const BedMapping& m);

/// Bed millimeters -> rectified pixel (exact inverse of pixel_to_bed).
Eigen::Vector2d bed_to_pixel(const Eigen::Vector2d& bed_mm, const BedMapping& m);

}  // namespace fabloop
