#include "fabloop/cycle.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <thread>
#include <utility>

#include <json.hpp>

#include "fabloop/detection.hpp"
#include "fabloop/errors.hpp"
#include "fabloop/pgm.hpp"

namespace fabloop {

namespace {

/// Keeps one StatusSnapshot up to date and pushes it to the board after
/// every meaningful state change. Sleeps throttle_ms per push so an outside
/// poller can observe mid-cycle states.
struct Publisher {
    SnapshotBoard* board;
    int throttle_ms;
    StatusSnapshot snap{};

    void push(Phase phase) {
        snap.phase = phase;
        if (board) board->publish(snap);
        if (throttle_ms > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(throttle_ms));
    }
};

GrayImage mask_to_gray(const BinaryImage& mask) {
    GrayImage g(mask.width, mask.height);
    for (std::size_t i = 0; i < mask.mask.size(); ++i) g.pixels[i] = mask.mask[i] ? 255 : 0;
    return g;
}

void dump_trace(const std::string& dir, const std::string& stem, const GrayImage& raw,
                const DetectTrace& trace) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    write_pgm_file(dir + "/" + stem + "_raw.pgm", raw);
    write_pgm_file(dir + "/" + stem + "_rectified.pgm", trace.rectified);
    write_pgm_file(dir + "/" + stem + "_roi_enhanced.pgm", trace.roi_enhanced);
    write_pgm_file(dir + "/" + stem + "_mask.pgm", mask_to_gray(trace.mask));
    GrayImage overlay = trace.rectified;
    burn_overlay(overlay, trace.regions);
    write_pgm_file(dir + "/" + stem + "_overlay.pgm", overlay);
}

}  // namespace

CycleReport run_layer_cycle(const ScenarioConfig& cfg, const CycleOptions& opts) {
    cfg.validate();

    const DefectSpec defects = cfg.make_defects();
    const double sp = cfg.hysteresis.setpoint_c;
    const double hb = cfg.hysteresis.half_band_c;

    Publisher pub{opts.board, cfg.throttle_ms};
    pub.snap.setpoint_c = sp;
    pub.snap.layer = 1;

    // Deposit the layer and bring the hotend into the band.
    VirtualBed bed = deposit_layer(cfg.make_bed(), cfg.print_region, defects);

    ThermalPlant plant = cfg.plant;
    plant.temperature_c = plant.t_ambient_c;
    ControllerState ctl{};
    double time_s = 0.0;

    const long steps_per_push = std::max<long>(1, std::llround(1.0 / cfg.dt_s));
    const double print_rate =
        extrusion_rate(cfg.print_speed_mm_per_s, cfg.extrusion, ExtrudeDirection::Extrude);

    auto sync_snapshot = [&](double extruder_rate) {
        pub.snap.time_s = time_s;
        pub.snap.temp_c = plant.temperature_c;
        pub.snap.heater_on = ctl.heater_on;
        pub.snap.extruder_steps_per_s = extruder_rate;
    };

    sync_snapshot(print_rate);
    pub.push(Phase::Printing);
    long step = 0;
    while (std::abs(plant.temperature_c - sp) > hb) {
        if (time_s > cfg.thermal_timeout_s)
            throw ThermalTimeoutError("hotend still out of band after " +
                                      std::to_string(cfg.thermal_timeout_s) + " s");
        ctl = control_step(plant.temperature_c, cfg.hysteresis, ctl);
        plant = plant_step(plant, ctl.heater_on, cfg.dt_s);
        time_s += cfg.dt_s;
        if (++step % steps_per_push == 0) {
            sync_snapshot(print_rate);
            pub.push(Phase::Printing);
        }
    }
    sync_snapshot(print_rate);
    pub.push(Phase::Printing);

    // Runs the relay and plant forward by roughly `span_s` of sim time.
    auto advance_thermal = [&](double span_s) {
        const long n = std::llround(span_s / cfg.dt_s);
        for (long i = 0; i < n; ++i) {
            ctl = control_step(plant.temperature_c, cfg.hysteresis, ctl);
            plant = plant_step(plant, ctl.heater_on, cfg.dt_s);
            time_s += cfg.dt_s;
        }
    };

    CameraModel cam = cfg.camera;
    cam.seed = cfg.seed;
    std::uint64_t recapture = 0;
    const Homography rect_h = rectifying_homography(cfg.camera, cfg.frame_px);

    sync_snapshot(0.0);
    pub.push(Phase::Capturing);
    const GrayImage first_raw = capture(bed, cam, cfg.mapping, cfg.frame_px);

    pub.push(Phase::Detecting);
    DetectTrace trace = detect_with_trace(first_raw, rect_h, cfg.mapping, cfg.detect, cfg.frame_px);
    if (!opts.dump_dir.empty()) dump_trace(opts.dump_dir, "capture", first_raw, trace);

    CycleReport report;
    report.detected = trace.regions.size();
    pub.snap.defects_open = report.detected;
    pub.push(Phase::Detecting);

    const double repair_rate =
        extrusion_rate(cfg.repair.speed_mm_per_s, cfg.extrusion, ExtrudeDirection::Extrude);
    std::uint64_t remaining = report.detected;
    for (const DefectRegion& region : trace.regions) {
        sync_snapshot(repair_rate);
        pub.snap.defects_open = remaining;
        pub.push(Phase::Repairing);

        RepairAction action;
        try {
            action = plan_repair(region, bed, cfg.arm, cfg.extrusion, cfg.registration,
                                 cfg.mapping.mm_per_pixel, cfg.repair);
        } catch (const OutOfReachError&) {
            --remaining;  // left for the verify pass to re-report
            continue;
        }
        bed = execute_repair(std::move(bed), action);
        advance_thermal(action.dwell_s);
        ++report.repaired;
        --remaining;

        if (cfg.verify_after_each) {
            cam.seed = cfg.seed + ++recapture;
            const GrayImage check = capture(bed, cam, cfg.mapping, cfg.frame_px);
            remaining = detect(check, rect_h, cfg.mapping, cfg.detect, cfg.frame_px).size();
        }
        sync_snapshot(repair_rate);
        pub.snap.defects_open = remaining;
        pub.push(Phase::Repairing);
    }

    sync_snapshot(0.0);
    pub.push(Phase::Verifying);
    cam.seed = cfg.seed + ++recapture;
    const GrayImage verify_raw = capture(bed, cam, cfg.mapping, cfg.frame_px);
    DetectTrace verify_trace =
        detect_with_trace(verify_raw, rect_h, cfg.mapping, cfg.detect, cfg.frame_px);
    if (!opts.dump_dir.empty()) dump_trace(opts.dump_dir, "verify", verify_raw, verify_trace);
    report.residual_after_verify = verify_trace.regions.size();

    if (!defects.centers_mm.empty()) {
        report.centroid_errors_mm.reserve(trace.regions.size());
        for (const DefectRegion& region : trace.regions) {
            double best = std::numeric_limits<double>::infinity();
            for (const Eigen::Vector2d& truth : defects.centers_mm)
                best = std::min(best, (region.centroid_mm - truth).norm());
            report.centroid_errors_mm.push_back(best);
        }
    }

    sync_snapshot(0.0);
    pub.snap.defects_open = report.residual_after_verify;
    pub.push(Phase::Idle);
    return report;
}

std::string cycle_report_to_json(const CycleReport& report) {
    nlohmann::json j;
    j["detected"] = report.detected;
    j["repaired"] = report.repaired;
    j["residual_after_verify"] = report.residual_after_verify;
    j["centroid_errors_mm"] = report.centroid_errors_mm;
    return j.dump(2) + "\n";
}

}  // namespace fabloop
