#include "fabloop/simulation.hpp"

#include <cmath>
#include <random>

namespace fabloop {

VirtualBed::VirtualBed(double span_x_mm, double span_y_mm, double resolution_mm,
                       double layer_z_mm)
    : span_x_(span_x_mm), span_y_(span_y_mm), res_(resolution_mm), layer_z_(layer_z_mm) {
    if (!(resolution_mm > 0.0)) throw ValidationError("VirtualBed: resolution must be > 0");
    if (!(span_x_mm > 0.0) || !(span_y_mm > 0.0))
        throw ValidationError("VirtualBed: span must be > 0");
    if (layer_z_mm < 0.0) throw ValidationError("VirtualBed: layer_z must be >= 0");

    const double fx = span_x_mm / resolution_mm;
    const double fy = span_y_mm / resolution_mm;
    nx_ = static_cast<int>(std::llround(fx));
    ny_ = static_cast<int>(std::llround(fy));
    if (std::abs(fx - nx_) > 1e-9 || std::abs(fy - ny_) > 1e-9 || nx_ < 1 || ny_ < 1)
        throw ValidationError("VirtualBed: span must be an integer multiple of resolution");
    grid_.assign(static_cast<std::size_t>(nx_) * ny_, 0);
}

bool VirtualBed::occupied_at(double x_mm, double y_mm) const {
    if (x_mm < 0.0 || y_mm < 0.0 || x_mm >= span_x_ || y_mm >= span_y_) return false;
    const int ix = std::min(static_cast<int>(x_mm / res_), nx_ - 1);
    const int iy = std::min(static_cast<int>(y_mm / res_), ny_ - 1);
    return occupied(ix, iy);
}

std::uint64_t VirtualBed::occupied_count() const {
    std::uint64_t n = 0;
    for (const auto c : grid_) n += c;
    return n;
}

VirtualBed deposit_layer(VirtualBed bed, const RectMm& region, const DefectSpec& defects) {
    if (!(region.width_mm > 0.0) || !(region.height_mm > 0.0))
        throw ValidationError("deposit_layer: region must have positive extent");
    if (region.x_mm < 0.0 || region.y_mm < 0.0 ||
        region.x_mm + region.width_mm > bed.span_x_mm() ||
        region.y_mm + region.height_mm > bed.span_y_mm())
        throw OutOfBedError("deposit_layer: region exceeds the bed span");
    if (!(defects.diameter_mm > 0.0))
        throw ValidationError("deposit_layer: defect diameter must be > 0");
    for (const auto& c : defects.centers_mm)
        if (!region.contains(c.x(), c.y()))
            throw ValidationError("deposit_layer: defect center outside the printed region");

    const double res = bed.resolution_mm();
    const auto cell_range = [&](double lo, double hi, int n) {
        // Cells whose centers fall in [lo, hi).
        int first = static_cast<int>(std::ceil(lo / res - 0.5));
        int last = static_cast<int>(std::floor((hi - 1e-12) / res - 0.5));
        return std::pair<int, int>{std::max(first, 0), std::min(last, n - 1)};
    };

    const auto [x0, x1] =
        cell_range(region.x_mm, region.x_mm + region.width_mm, bed.cells_x());
    const auto [y0, y1] =
        cell_range(region.y_mm, region.y_mm + region.height_mm, bed.cells_y());
    for (int iy = y0; iy <= y1; ++iy)
        for (int ix = x0; ix <= x1; ++ix) bed.set_occupied(ix, iy, true);

    const double radius = defects.diameter_mm / 2.0;
    const double r2 = radius * radius;
    for (const auto& c : defects.centers_mm) {
        const auto [dx0, dx1] = cell_range(c.x() - radius, c.x() + radius + res, bed.cells_x());
        const auto [dy0, dy1] = cell_range(c.y() - radius, c.y() + radius + res, bed.cells_y());
        for (int iy = dy0; iy <= dy1; ++iy) {
            for (int ix = dx0; ix <= dx1; ++ix) {
                const Eigen::Vector2d center = bed.cell_center(ix, iy);
                if ((center - c).squaredNorm() <= r2) bed.set_occupied(ix, iy, false);
            }
        }
    }
    return bed;
}

namespace {

/// Deterministic Box-Muller gaussian on top of mt19937_64; independent of
/// library distribution implementations.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = unit();
        const double u2 = unit();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        spare_ = mag * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return mag * std::cos(2.0 * M_PI * u2);
    }

private:
    double unit() {  // strictly inside (0, 1)
        return (static_cast<double>(rng_() >> 11) + 0.5) * 0x1.0p-53;
    }

    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace

GrayImage capture(const VirtualBed& bed, const CameraModel& cam, const BedMapping& mapping,
                  int frame_px) {
    mapping.validate(frame_px);
    if (cam.noise_sigma < 0.0) throw ValidationError("capture: noise_sigma must be >= 0");

    GrayImage ideal(frame_px, frame_px);
    for (int v = 0; v < frame_px; ++v) {
        for (int u = 0; u < frame_px; ++u) {
            const Eigen::Vector2d bed_mm = pixel_to_bed(Eigen::Vector2d(u, v), mapping);
            ideal.at(u, v) =
                bed.occupied_at(bed_mm.x(), bed_mm.y()) ? kRenderMaterial : kRenderVoid;
        }
    }

    // The warp maps rectified -> raw, so the raw view is the rectify
    // machinery run with the forward map.
    GrayImage raw = rectify(ideal, cam.warp, cam.raw_size_px, kRenderVoid);

    if (cam.noise_sigma > 0.0) {
        GaussianStream noise(cam.seed);
        for (auto& p : raw.pixels) {
            const double value = p + cam.noise_sigma * noise.next();
            const double rounded = std::floor(value + 0.5);
            p = static_cast<std::uint8_t>(rounded < 0.0 ? 0.0
                                                        : (rounded > 255.0 ? 255.0 : rounded));
        }
    }
    return raw;
}

Eigen::Vector3d bed_to_arm(const BedRegistration& reg, const Eigen::Vector2d& bed_mm,
                           double z_mm) {
    const double c = std::cos(reg.yaw_rad), s = std::sin(reg.yaw_rad);
    return {c * bed_mm.x() - s * bed_mm.y() + reg.translation_mm.x(),
            s * bed_mm.x() + c * bed_mm.y() + reg.translation_mm.y(),
            z_mm + reg.translation_mm.z()};
}

RepairAction plan_repair(const DefectRegion& d, const VirtualBed& bed, const ArmGeometry& geom,
                         const ExtrusionConfig& e, const BedRegistration& reg,
                         double mm_per_pixel, const RepairParams& params) {
    e.validate();
    if (!(mm_per_pixel > 0.0)) throw ValidationError("plan_repair: mm_per_pixel must be > 0");
    if (!(params.speed_mm_per_s > 0.0))
        throw ValidationError("plan_repair: repair speed must be > 0");

    RepairAction action;
    action.target = d;

    const Eigen::Vector3d target_arm = bed_to_arm(reg, d.centroid_mm, bed.layer_z_mm());
    action.joints =
        inverse_kinematics({target_arm, params.pitch_rad, params.elbow}, geom);

    const Eigen::Vector3d reached = forward_kinematics(action.joints, geom).position_mm;
    if (std::abs(reached.x() - target_arm.x()) > 0.01 ||
        std::abs(reached.y() - target_arm.y()) > 0.01 ||
        std::abs(reached.z() - target_arm.z()) > 0.01)
        throw OutOfReachError("plan_repair: planned joints miss the defect centroid");

    action.fill_volume_mm3 =
        static_cast<double>(d.area_px) * mm_per_pixel * mm_per_pixel * e.layer_height_mm;
    const double flow_mm3_per_s =
        params.speed_mm_per_s * e.road_width_mm * e.layer_height_mm;
    action.dwell_s = action.fill_volume_mm3 / flow_mm3_per_s;
    return action;
}

Homography rectifying_homography(const CameraModel& cam, int frame_px) {
    CalibrationQuad quad;
    quad.target = CalibrationQuad::frame_corners(frame_px);
    for (int i = 0; i < 4; ++i) quad.source[i] = apply_homography(cam.warp, quad.target[i]);
    return estimate_homography(quad);
}

VirtualBed execute_repair(VirtualBed bed, const RepairAction& a) {
    const double radius = a.target.equivalent_diameter_mm / 2.0 + bed.resolution_mm();
    const double r2 = radius * radius;
    const Eigen::Vector2d c = a.target.centroid_mm;
    const double res = bed.resolution_mm();

    const int x0 = std::max(static_cast<int>(std::floor((c.x() - radius) / res)), 0);
    const int x1 = std::min(static_cast<int>(std::ceil((c.x() + radius) / res)),
                            bed.cells_x() - 1);
    const int y0 = std::max(static_cast<int>(std::floor((c.y() - radius) / res)), 0);
    const int y1 = std::min(static_cast<int>(std::ceil((c.y() + radius) / res)),
                            bed.cells_y() - 1);
    for (int iy = y0; iy <= y1; ++iy) {
        for (int ix = x0; ix <= x1; ++ix) {
            if ((bed.cell_center(ix, iy) - c).squaredNorm() <= r2)
                bed.set_occupied(ix, iy, true);
        }
    }
    return bed;
}

}  // namespace fabloop
