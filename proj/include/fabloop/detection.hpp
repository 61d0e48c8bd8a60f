#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "fabloop/image.hpp"
#include "fabloop/vision.hpp"

namespace fabloop {

enum class Polarity { DefectsDark, DefectsBright };
enum class Connectivity { Four, Eight };

struct DetectConfig {
    Polarity polarity = Polarity::DefectsDark;
    long min_area_px = 1;
    Connectivity connectivity = Connectivity::Eight;

    void validate() const {
        if (min_area_px < 1) throw ValidationError("DetectConfig: min_area_px must be >= 1");
    }
};

/// One segmented defect. segment() fills the pixel-frame fields; quantify()
/// adds the bed-frame ones.
struct DefectRegion {
    Eigen::Vector2d centroid_px{0, 0};
    long area_px = 0;
    int min_u = 0, min_v = 0, max_u = 0, max_v = 0;  // tight bbox, inclusive
    Eigen::Vector2d centroid_mm{0, 0};
    double equivalent_diameter_mm = 0.0;  // 2 sqrt(area/pi) * mm_per_pixel
};

/// Linear min-max contrast stretch, round half up. Constant images are
/// returned unchanged.
GrayImage enhance_contrast(const GrayImage& img);

std::array<std::uint64_t, 256> intensity_histogram(const GrayImage& img);

/// Otsu's threshold: exhaustive scan of t = 0..255 maximizing between-class
/// variance, lowest maximizer on ties. Returns -1 when the variance is zero
/// everywhere (constant image).
int otsu_threshold(const std::array<std::uint64_t, 256>& histogram);

/// Binarize with Otsu. Foreground is the defect side of the threshold:
/// intensity <= t for DefectsDark, intensity > t for DefectsBright. A
/// constant image yields all background.
BinaryImage threshold(const GrayImage& img, const DetectConfig& cfg);

/// Connected-component labeling under cfg.connectivity. Components smaller
/// than cfg.min_area_px are discarded. Regions appear in row-major
/// first-pixel order with pixel-frame fields only; centroids are arithmetic
/// means of member coordinates.
std::vector<DefectRegion> segment(const BinaryImage& bin, const DetectConfig& cfg);

/// Fills centroid_mm (via pixel_to_bed) and equivalent_diameter_mm, then
/// sorts column-major: ascending bed x, ties by ascending y — the order the
/// repair pass traverses.
std::vector<DefectRegion> quantify(std::vector<DefectRegion> regions, const BedMapping& m);

/// Full pipeline: rectify to frame_px, crop the ROI, enhance, threshold,
/// segment, quantify. Region pixel coordinates are reported in the rectified
/// frame. Components touching the ROI boundary are dropped: the bed outside
/// the printed part is one border-connected component, not a layer defect.
std::vector<DefectRegion> detect(const GrayImage& raw, const Homography& h,
                                 const BedMapping& m, const DetectConfig& cfg,
                                 int frame_px = 400);

/// Intermediate images of one detect() run, for dumps and inspection.
struct DetectTrace {
    GrayImage rectified;     // frame_px x frame_px
    GrayImage roi_enhanced;  // contrast-stretched ROI crop
    BinaryImage mask;        // ROI coordinates
    std::vector<DefectRegion> regions;  // rectified-frame coordinates
};

DetectTrace detect_with_trace(const GrayImage& raw, const Homography& h, const BedMapping& m,
                              const DetectConfig& cfg, int frame_px = 400);

/// Burns region bounding boxes into `img` at intensity 255 (rectified frame).
void burn_overlay(GrayImage& img, const std::vector<DefectRegion>& regions);

}  // namespace fabloop
