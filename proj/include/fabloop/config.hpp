#pragma once

#include <cstdint>
#include <string>

#include "fabloop/detection.hpp"
#include "fabloop/kinematics.hpp"
#include "fabloop/simulation.hpp"
#include "fabloop/thermal.hpp"
#include "fabloop/vision.hpp"

namespace fabloop {

/// Where the injected voids go: either an explicit list of centers or an
/// evenly spaced grid inside the printed region. Explicit centers win when
/// both are given (grid fields are then rejected by the parser).
struct DefectLayout {
    std::vector<Eigen::Vector2d> centers_mm;
    bool explicit_centers = false;
    int grid_nx = 7;
    int grid_ny = 7;
    double diameter_mm = 2.0;

    /// Resolves the layout against the printed region. Grid point (i, j)
    /// sits at origin + ((i+1) * w / (nx+1), (j+1) * h / (ny+1)).
    DefectSpec resolve(const RectMm& region) const;
};

/// One self-contained closed-loop scenario: arm, thermal chain, camera,
/// detection settings, bed and printed part, injected defects, repair
/// parameters, and simulation stepping.
struct ScenarioConfig {
    std::uint64_t seed = 1;

    ArmGeometry arm{126.0, 300.0, 300.0, 90.0};

    HysteresisConfig hysteresis;
    ThermalPlant plant;
    DividerConfig divider;
    SteinhartHart steinhart_hart;  // defaulted from a stock 100k NTC fit
    ExtrusionConfig extrusion;

    int frame_px = 400;
    BedMapping mapping;
    CameraModel camera;
    DetectConfig detect;

    double bed_span_x_mm = 201.0;
    double bed_span_y_mm = 201.0;
    double bed_resolution_mm = 0.1;
    double layer_z_mm = 0.2;

    RectMm print_region{50.5, 50.5, 100.0, 100.0};
    double print_speed_mm_per_s = 30.0;

    DefectLayout defects;
    BedRegistration registration;
    RepairParams repair;
    bool verify_after_each = false;

    double dt_s = 0.01;
    double thermal_timeout_s = 600.0;
    int throttle_ms = 0;

    VirtualBed make_bed() const;
    DefectSpec make_defects() const { return defects.resolve(print_region); }

    /// Cross-field checks beyond what the leaf types enforce.
    void validate() const;
};

/// Coefficients fitted to a generic 100k NTC (370.5k at 0 C, 100k at 25 C,
/// 5.633k at 100 C).
SteinhartHart default_steinhart_hart();

/// Keystoned default view: rectified frame corners land at (40,30),
/// (430,42), (420,440), (28,428) on a 480 px sensor.
CameraModel default_camera();

/// The built-in scenario used when no config file is given.
ScenarioConfig default_config();

/// Parses a JSON scenario. Unknown keys anywhere are rejected; every
/// complaint names the full key path (e.g. "arm.a2_mm"). The FABLOOP_SEED
/// environment variable, when set, overrides the seed.
ScenarioConfig parse_config(const std::string& json_text);

/// parse_config over a file's contents. Throws IoError when unreadable.
ScenarioConfig load_config(const std::string& path);

/// Serializes with stable key order; parse_config(serialize_config(c))
/// reproduces c exactly (defect layouts come back as explicit centers).
std::string serialize_config(const ScenarioConfig& cfg);

}  // namespace fabloop
