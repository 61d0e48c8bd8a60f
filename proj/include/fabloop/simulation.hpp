#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "fabloop/detection.hpp"
#include "fabloop/image.hpp"
#include "fabloop/kinematics.hpp"
#include "fabloop/thermal.hpp"
#include "fabloop/vision.hpp"

namespace fabloop {

/// Axis-aligned rectangle in bed millimeters.
struct RectMm {
    double x_mm = 0.0;
    double y_mm = 0.0;
    double width_mm = 0.0;
    double height_mm = 0.0;

    bool contains(double x, double y) const {
        return x >= x_mm && x < x_mm + width_mm && y >= y_mm && y < y_mm + height_mm;
    }
};

/// Ground-truth deposited-material grid. Cell (ix, iy) covers
/// [ix*res, (ix+1)*res) x [iy*res, (iy+1)*res); inside tests use cell
/// centers.
class VirtualBed {
public:
    VirtualBed(double span_x_mm, double span_y_mm, double resolution_mm, double layer_z_mm);

    double span_x_mm() const { return span_x_; }
    double span_y_mm() const { return span_y_; }
    double resolution_mm() const { return res_; }
    double layer_z_mm() const { return layer_z_; }
    int cells_x() const { return nx_; }
    int cells_y() const { return ny_; }

    bool occupied(int ix, int iy) const { return grid_[idx(ix, iy)] != 0; }
    void set_occupied(int ix, int iy, bool v) { grid_[idx(ix, iy)] = v ? 1 : 0; }

    /// Occupancy of the cell containing (x, y); false outside the span.
    bool occupied_at(double x_mm, double y_mm) const;

    /// Center coordinates of cell (ix, iy).
    Eigen::Vector2d cell_center(int ix, int iy) const {
        return {(ix + 0.5) * res_, (iy + 0.5) * res_};
    }

    std::uint64_t occupied_count() const;

    bool operator==(const VirtualBed&) const = default;

private:
    std::size_t idx(int ix, int iy) const {
        return static_cast<std::size_t>(iy) * nx_ + ix;
    }

    double span_x_, span_y_, res_, layer_z_;
    int nx_, ny_;
    std::vector<std::uint8_t> grid_;
};

/// Voids punched into the printed region.
struct DefectSpec {
    std::vector<Eigen::Vector2d> centers_mm;
    double diameter_mm = 2.0;
};

/// Virtual overhead camera: ground-truth perspective distortion (rectified
/// -> raw), sensor size, and seeded Gaussian intensity noise.
struct CameraModel {
    Homography warp;  // rectified -> raw
    int raw_size_px = 480;
    double noise_sigma = 0.0;
    std::uint64_t seed = 1;
};

/// Intensities the virtual camera renders: deposited material vs void/background.
constexpr std::uint8_t kRenderMaterial = 200;
constexpr std::uint8_t kRenderVoid = 40;

/// Rigid bed-frame -> arm-frame registration (translation + yaw).
struct BedRegistration {
    Eigen::Vector3d translation_mm{150.0, -100.5, 0.0};
    double yaw_rad = 0.0;
};

Eigen::Vector3d bed_to_arm(const BedRegistration& reg, const Eigen::Vector2d& bed_mm,
                           double z_mm);

struct RepairAction {
    DefectRegion target;
    JointAngles joints;
    double fill_volume_mm3 = 0.0;
    double dwell_s = 0.0;
};

struct CycleReport {
    std::uint64_t detected = 0;
    std::uint64_t repaired = 0;
    std::uint64_t residual_after_verify = 0;
    /// Distance from each reported centroid to the nearest injected defect
    /// center, in traversal order (empty when no ground truth is known).
    std::vector<double> centroid_errors_mm;
};

/// Fills `region` with material, then clears each defect disc
/// (cell-center inside-disc test). Throws OutOfBedError when the region
/// leaves the bed span, ValidationError when a defect center is outside
/// the region.
VirtualBed deposit_layer(VirtualBed bed, const RectMm& region, const DefectSpec& defects);

/// Renders the bed to an ideal rectified frame (material 200, void 40),
/// warps it through cam.warp onto the raw sensor, and adds seeded Gaussian
/// noise clamped to [0, 255]. Deterministic for a fixed seed.
GrayImage capture(const VirtualBed& bed, const CameraModel& cam, const BedMapping& mapping,
                  int frame_px = 400);

/// Raw-to-rectified homography the way a calibration run derives it: the
/// four frame corners are located on the raw sensor through the camera's
/// warp and mapped back onto the frame by DLT.
Homography rectifying_homography(const CameraModel& cam, int frame_px = 400);

/// Repair planning parameters shared by every action of a cycle.
struct RepairParams {
    double pitch_rad = 0.0;  // nozzle-down cumulative pitch
    ElbowBranch elbow = ElbowBranch::Up;
    double speed_mm_per_s = 30.0;  // nozzle speed assumed for dwell metering
};

/// Inverse-kinematics repair targeting for one defect: joints reaching the
/// centroid at layer z (checked against FK within 0.01 mm), fill volume
/// area_px * mm_per_pixel^2 * layer_height, dwell = volume / volumetric
/// flow at the repair speed. OutOfReachError propagates from IK.
RepairAction plan_repair(const DefectRegion& d, const VirtualBed& bed, const ArmGeometry& geom,
                         const ExtrusionConfig& e, const BedRegistration& reg,
                         double mm_per_pixel, const RepairParams& params);

/// Deposits material in all cells within equivalent_diameter/2 + one cell
/// of the target centroid. Idempotent; touches nothing outside that disc.
VirtualBed execute_repair(VirtualBed bed, const RepairAction& a);

}  // namespace fabloop
