#include "fabloop/config.hpp"

#include <charconv>
#include <climits>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "fabloop/errors.hpp"

namespace fabloop {

namespace {

using njson = nlohmann::json;

std::string join_path(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

void extract(const njson& j, const std::string& path, double& out) {
    if (!j.is_number()) throw ValidationError(path + ": expected a number");
    out = j.get<double>();
}

void extract(const njson& j, const std::string& path, bool& out) {
    if (!j.is_boolean()) throw ValidationError(path + ": expected a boolean");
    out = j.get<bool>();
}

void extract(const njson& j, const std::string& path, std::string& out) {
    if (!j.is_string()) throw ValidationError(path + ": expected a string");
    out = j.get<std::string>();
}

void extract(const njson& j, const std::string& path, std::uint64_t& out) {
    if (!j.is_number_unsigned()) throw ValidationError(path + ": expected an unsigned integer");
    out = j.get<std::uint64_t>();
}

long long extract_integer(const njson& j, const std::string& path, long long lo, long long hi) {
    if (!j.is_number_integer()) throw ValidationError(path + ": expected an integer");
    const long long v = j.get<long long>();
    if (v < lo || v > hi) throw ValidationError(path + ": out of range");
    return v;
}

void extract(const njson& j, const std::string& path, int& out) {
    out = static_cast<int>(extract_integer(j, path, INT_MIN, INT_MAX));
}

void extract(const njson& j, const std::string& path, long& out) {
    out = static_cast<long>(extract_integer(j, path, LONG_MIN, LONG_MAX));
}

/// One JSON object plus its dotted path. Tracks which keys were consumed so
/// finish() can reject the rest by name.
class Section {
public:
    Section(const njson& obj, std::string path) : obj_(&obj), path_(std::move(path)) {
        if (!obj_->is_object())
            throw ValidationError((path_.empty() ? std::string("config") : path_) +
                                  ": expected an object");
    }

    template <typename T>
    void read(const std::string& key, T& out) {
        auto it = obj_->find(key);
        if (it == obj_->end()) return;
        seen_.insert(key);
        extract(*it, join_path(path_, key), out);
    }

    /// Claims a key and hands back the raw value, or nullptr when absent.
    const njson* take(const std::string& key) {
        auto it = obj_->find(key);
        if (it == obj_->end()) return nullptr;
        seen_.insert(key);
        return &*it;
    }

    std::string sub_path(const std::string& key) const { return join_path(path_, key); }

    void finish() const {
        for (const auto& item : obj_->items())
            if (!seen_.count(item.key()))
                throw UnknownKeyError("unknown key: " + join_path(path_, item.key()));
    }

private:
    const njson* obj_;
    std::string path_;
    std::set<std::string> seen_;
};

Eigen::Vector2d extract_point(const njson& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ValidationError(path + ": expected [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

Homography extract_warp(const njson& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3) throw ValidationError(path + ": expected a 3x3 matrix");
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r) {
        const njson& row = j[r];
        if (!row.is_array() || row.size() != 3)
            throw ValidationError(path + ": expected a 3x3 matrix");
        for (int c = 0; c < 3; ++c) {
            if (!row[c].is_number()) throw ValidationError(path + ": expected a 3x3 matrix");
            m(r, c) = row[c].get<double>();
        }
    }
    try {
        return Homography::from_matrix(m);
    } catch (const Error&) {
        throw ValidationError(path + ": matrix is not invertible");
    }
}

void read_defects(Section& top, DefectLayout& out) {
    const njson* j = top.take("defects");
    if (!j) return;
    Section s(*j, top.sub_path("defects"));
    s.read("diameter_mm", out.diameter_mm);
    const njson* centers = s.take("centers_mm");
    const njson* jnx = s.take("grid_nx");
    const njson* jny = s.take("grid_ny");
    if (centers && (jnx || jny))
        throw ValidationError("defects: centers_mm excludes grid_nx/grid_ny");
    if (centers) {
        if (!centers->is_array())
            throw ValidationError("defects.centers_mm: expected an array of [x, y] points");
        out.explicit_centers = true;
        out.centers_mm.clear();
        for (std::size_t i = 0; i < centers->size(); ++i)
            out.centers_mm.push_back(extract_point(
                (*centers)[i], "defects.centers_mm[" + std::to_string(i) + "]"));
    } else {
        if (jnx) extract(*jnx, "defects.grid_nx", out.grid_nx);
        if (jny) extract(*jny, "defects.grid_ny", out.grid_ny);
    }
    s.finish();
}

ScenarioConfig from_json(const njson& root) {
    ScenarioConfig cfg = default_config();
    Section top(root, "");

    top.read("seed", cfg.seed);
    top.read("setpoint_c", cfg.hysteresis.setpoint_c);
    top.read("half_band_c", cfg.hysteresis.half_band_c);
    top.read("frame_px", cfg.frame_px);

    if (const njson* j = top.take("arm")) {
        Section s(*j, "arm");
        s.read("d1_mm", cfg.arm.d1_mm);
        s.read("a2_mm", cfg.arm.a2_mm);
        s.read("a3_mm", cfg.arm.a3_mm);
        s.read("d6_mm", cfg.arm.d6_mm);
        s.finish();
    }
    if (const njson* j = top.take("plant")) {
        Section s(*j, "plant");
        s.read("heat_capacity_j_per_k", cfg.plant.heat_capacity_j_per_k);
        s.read("loss_w_per_k", cfg.plant.loss_w_per_k);
        s.read("power_w", cfg.plant.heater_power_w);
        s.read("ambient_c", cfg.plant.t_ambient_c);
        s.finish();
        cfg.plant.temperature_c = cfg.plant.t_ambient_c;
    }
    if (const njson* j = top.take("divider")) {
        Section s(*j, "divider");
        s.read("v_supply", cfg.divider.v_supply);
        s.read("r_fixed_ohm", cfg.divider.r_fixed_ohm);
        s.read("adc_max", cfg.divider.adc_max);
        s.finish();
    }
    if (const njson* j = top.take("steinhart_hart")) {
        Section s(*j, "steinhart_hart");
        s.read("a", cfg.steinhart_hart.a);
        s.read("b", cfg.steinhart_hart.b);
        s.read("c", cfg.steinhart_hart.c);
        s.finish();
    }
    if (const njson* j = top.take("extrusion")) {
        Section s(*j, "extrusion");
        s.read("steps_per_mm", cfg.extrusion.steps_per_mm);
        s.read("filament_diameter_mm", cfg.extrusion.filament_diameter_mm);
        s.read("road_width_mm", cfg.extrusion.road_width_mm);
        s.read("layer_height_mm", cfg.extrusion.layer_height_mm);
        s.finish();
    }
    if (const njson* j = top.take("mapping")) {
        Section s(*j, "mapping");
        s.read("mm_per_pixel", cfg.mapping.mm_per_pixel);
        double u = cfg.mapping.roi_origin_px.x(), v = cfg.mapping.roi_origin_px.y();
        s.read("roi_origin_u_px", u);
        s.read("roi_origin_v_px", v);
        cfg.mapping.roi_origin_px = {u, v};
        s.read("roi_size_px", cfg.mapping.roi_size_px);
        s.finish();
    }
    if (const njson* j = top.take("camera")) {
        Section s(*j, "camera");
        s.read("raw_size_px", cfg.camera.raw_size_px);
        s.read("noise_sigma", cfg.camera.noise_sigma);
        if (const njson* w = s.take("warp")) cfg.camera.warp = extract_warp(*w, "camera.warp");
        s.finish();
    }
    if (const njson* j = top.take("detect")) {
        Section s(*j, "detect");
        std::string polarity;
        s.read("polarity", polarity);
        if (!polarity.empty()) {
            if (polarity == "dark")
                cfg.detect.polarity = Polarity::DefectsDark;
            else if (polarity == "bright")
                cfg.detect.polarity = Polarity::DefectsBright;
            else
                throw ValidationError("detect.polarity: expected \"dark\" or \"bright\"");
        }
        s.read("min_area_px", cfg.detect.min_area_px);
        int conn = 0;
        s.read("connectivity", conn);
        if (conn != 0) {
            if (conn == 4)
                cfg.detect.connectivity = Connectivity::Four;
            else if (conn == 8)
                cfg.detect.connectivity = Connectivity::Eight;
            else
                throw ValidationError("detect.connectivity: expected 4 or 8");
        }
        s.finish();
    }
    if (const njson* j = top.take("bed")) {
        Section s(*j, "bed");
        s.read("span_x_mm", cfg.bed_span_x_mm);
        s.read("span_y_mm", cfg.bed_span_y_mm);
        s.read("resolution_mm", cfg.bed_resolution_mm);
        s.read("layer_z_mm", cfg.layer_z_mm);
        s.finish();
    }
    if (const njson* j = top.take("print")) {
        Section s(*j, "print");
        s.read("x_mm", cfg.print_region.x_mm);
        s.read("y_mm", cfg.print_region.y_mm);
        s.read("width_mm", cfg.print_region.width_mm);
        s.read("height_mm", cfg.print_region.height_mm);
        s.read("speed_mm_per_s", cfg.print_speed_mm_per_s);
        s.finish();
    }
    read_defects(top, cfg.defects);
    if (const njson* j = top.take("registration")) {
        Section s(*j, "registration");
        double x = cfg.registration.translation_mm.x();
        double y = cfg.registration.translation_mm.y();
        double z = cfg.registration.translation_mm.z();
        s.read("x_mm", x);
        s.read("y_mm", y);
        s.read("z_mm", z);
        cfg.registration.translation_mm = {x, y, z};
        s.read("yaw_rad", cfg.registration.yaw_rad);
        s.finish();
    }
    if (const njson* j = top.take("repair")) {
        Section s(*j, "repair");
        s.read("pitch_rad", cfg.repair.pitch_rad);
        std::string elbow;
        s.read("elbow", elbow);
        if (!elbow.empty()) {
            if (elbow == "up")
                cfg.repair.elbow = ElbowBranch::Up;
            else if (elbow == "down")
                cfg.repair.elbow = ElbowBranch::Down;
            else
                throw ValidationError("repair.elbow: expected \"up\" or \"down\"");
        }
        s.read("speed_mm_per_s", cfg.repair.speed_mm_per_s);
        s.read("verify_after_each", cfg.verify_after_each);
        s.finish();
    }
    if (const njson* j = top.take("sim")) {
        Section s(*j, "sim");
        s.read("dt_s", cfg.dt_s);
        s.read("thermal_timeout_s", cfg.thermal_timeout_s);
        s.read("throttle_ms", cfg.throttle_ms);
        s.finish();
    }
    top.finish();
    return cfg;
}

void apply_seed_override(ScenarioConfig& cfg) {
    const char* env = std::getenv("FABLOOP_SEED");
    if (!env || !*env) return;
    std::uint64_t seed = 0;
    const char* end = env + std::char_traits<char>::length(env);
    auto [ptr, ec] = std::from_chars(env, end, seed, 10);
    if (ec != std::errc() || ptr != end)
        throw ValidationError("FABLOOP_SEED: expected an unsigned integer");
    cfg.seed = seed;
}

void check_positive(double v, const char* path) {
    if (!(v > 0.0)) throw ValidationError(std::string(path) + ": must be positive");
}

void check_span(double span, double res, const char* path) {
    check_positive(span, path);
    const double cells = span / res;
    if (std::abs(cells - std::round(cells)) > 1e-9)
        throw ValidationError(std::string(path) +
                              ": must be an integer multiple of bed.resolution_mm");
}

}  // namespace

DefectSpec DefectLayout::resolve(const RectMm& region) const {
    DefectSpec spec;
    spec.diameter_mm = diameter_mm;
    if (explicit_centers) {
        spec.centers_mm = centers_mm;
        return spec;
    }
    for (int i = 0; i < grid_nx; ++i)
        for (int j = 0; j < grid_ny; ++j)
            spec.centers_mm.emplace_back(
                region.x_mm + (i + 1) * region.width_mm / (grid_nx + 1),
                region.y_mm + (j + 1) * region.height_mm / (grid_ny + 1));
    return spec;
}

VirtualBed ScenarioConfig::make_bed() const {
    return VirtualBed(bed_span_x_mm, bed_span_y_mm, bed_resolution_mm, layer_z_mm);
}

void ScenarioConfig::validate() const {
    check_positive(arm.d1_mm, "arm.d1_mm");
    check_positive(arm.a2_mm, "arm.a2_mm");
    check_positive(arm.a3_mm, "arm.a3_mm");
    check_positive(arm.d6_mm, "arm.d6_mm");
    arm.validate();

    check_positive(hysteresis.setpoint_c, "setpoint_c");
    check_positive(hysteresis.half_band_c, "half_band_c");
    check_positive(plant.heat_capacity_j_per_k, "plant.heat_capacity_j_per_k");
    check_positive(plant.loss_w_per_k, "plant.loss_w_per_k");
    check_positive(plant.heater_power_w, "plant.power_w");
    check_positive(divider.v_supply, "divider.v_supply");
    check_positive(divider.r_fixed_ohm, "divider.r_fixed_ohm");
    if (divider.adc_max < 2) throw ValidationError("divider.adc_max: must be at least 2");
    check_positive(extrusion.steps_per_mm, "extrusion.steps_per_mm");
    check_positive(extrusion.filament_diameter_mm, "extrusion.filament_diameter_mm");
    check_positive(extrusion.road_width_mm, "extrusion.road_width_mm");
    check_positive(extrusion.layer_height_mm, "extrusion.layer_height_mm");

    if (frame_px < 1) throw ValidationError("frame_px: must be at least 1");
    check_positive(mapping.mm_per_pixel, "mapping.mm_per_pixel");
    if (mapping.roi_size_px < 1) throw ValidationError("mapping.roi_size_px: must be at least 1");
    if (mapping.roi_origin_px.x() < 0 || mapping.roi_origin_px.y() < 0 ||
        mapping.roi_origin_px.x() + mapping.roi_size_px > frame_px ||
        mapping.roi_origin_px.y() + mapping.roi_size_px > frame_px)
        throw ValidationError("mapping: region of interest leaves the frame");

    if (camera.raw_size_px < 1) throw ValidationError("camera.raw_size_px: must be at least 1");
    if (camera.noise_sigma < 0) throw ValidationError("camera.noise_sigma: must be >= 0");
    if (detect.min_area_px < 1) throw ValidationError("detect.min_area_px: must be at least 1");

    check_positive(bed_resolution_mm, "bed.resolution_mm");
    check_span(bed_span_x_mm, bed_resolution_mm, "bed.span_x_mm");
    check_span(bed_span_y_mm, bed_resolution_mm, "bed.span_y_mm");
    check_positive(layer_z_mm, "bed.layer_z_mm");

    check_positive(print_region.width_mm, "print.width_mm");
    check_positive(print_region.height_mm, "print.height_mm");
    if (print_region.x_mm < 0 || print_region.y_mm < 0 ||
        print_region.x_mm + print_region.width_mm > bed_span_x_mm ||
        print_region.y_mm + print_region.height_mm > bed_span_y_mm)
        throw ValidationError("print: region leaves the bed span");
    check_positive(print_speed_mm_per_s, "print.speed_mm_per_s");
    check_positive(repair.speed_mm_per_s, "repair.speed_mm_per_s");

    check_positive(defects.diameter_mm, "defects.diameter_mm");
    if (defects.grid_nx < 0) throw ValidationError("defects.grid_nx: must be >= 0");
    if (defects.grid_ny < 0) throw ValidationError("defects.grid_ny: must be >= 0");
    if (defects.explicit_centers) {
        for (std::size_t i = 0; i < defects.centers_mm.size(); ++i)
            if (!print_region.contains(defects.centers_mm[i].x(), defects.centers_mm[i].y()))
                throw ValidationError("defects.centers_mm[" + std::to_string(i) +
                                      "]: outside the printed region");
    }

    check_positive(dt_s, "sim.dt_s");
    check_positive(thermal_timeout_s, "sim.thermal_timeout_s");
    if (throttle_ms < 0) throw ValidationError("sim.throttle_ms: must be >= 0");
    if (dt_s * plant.loss_w_per_k / plant.heat_capacity_j_per_k >= 1.0)
        throw ValidationError("sim.dt_s: explicit Euler is unstable for the configured plant");
}

SteinhartHart default_steinhart_hart() {
    return fit_steinhart_hart({{{370500.0, 0.0}, {100000.0, 25.0}, {5633.0, 100.0}}});
}

CameraModel default_camera() {
    CalibrationQuad quad;
    quad.source = CalibrationQuad::frame_corners(400);
    quad.target = {Eigen::Vector2d(40.0, 30.0), Eigen::Vector2d(430.0, 42.0),
                   Eigen::Vector2d(420.0, 440.0), Eigen::Vector2d(28.0, 428.0)};
    CameraModel cam;
    cam.warp = estimate_homography(quad);
    cam.raw_size_px = 480;
    cam.noise_sigma = 2.0;
    cam.seed = 1;
    return cam;
}

ScenarioConfig default_config() {
    ScenarioConfig cfg;
    cfg.steinhart_hart = default_steinhart_hart();
    cfg.camera = default_camera();
    return cfg;
}

ScenarioConfig parse_config(const std::string& json_text) {
    njson root;
    try {
        root = njson::parse(json_text);
    } catch (const njson::parse_error& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    ScenarioConfig cfg = from_json(root);
    apply_seed_override(cfg);
    cfg.validate();
    return cfg;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string serialize_config(const ScenarioConfig& cfg) {
    njson j;
    j["seed"] = cfg.seed;
    j["setpoint_c"] = cfg.hysteresis.setpoint_c;
    j["half_band_c"] = cfg.hysteresis.half_band_c;
    j["frame_px"] = cfg.frame_px;
    j["arm"] = {{"d1_mm", cfg.arm.d1_mm},
                {"a2_mm", cfg.arm.a2_mm},
                {"a3_mm", cfg.arm.a3_mm},
                {"d6_mm", cfg.arm.d6_mm}};
    j["plant"] = {{"heat_capacity_j_per_k", cfg.plant.heat_capacity_j_per_k},
                  {"loss_w_per_k", cfg.plant.loss_w_per_k},
                  {"power_w", cfg.plant.heater_power_w},
                  {"ambient_c", cfg.plant.t_ambient_c}};
    j["divider"] = {{"v_supply", cfg.divider.v_supply},
                    {"r_fixed_ohm", cfg.divider.r_fixed_ohm},
                    {"adc_max", cfg.divider.adc_max}};
    j["steinhart_hart"] = {
        {"a", cfg.steinhart_hart.a}, {"b", cfg.steinhart_hart.b}, {"c", cfg.steinhart_hart.c}};
    j["extrusion"] = {{"steps_per_mm", cfg.extrusion.steps_per_mm},
                      {"filament_diameter_mm", cfg.extrusion.filament_diameter_mm},
                      {"road_width_mm", cfg.extrusion.road_width_mm},
                      {"layer_height_mm", cfg.extrusion.layer_height_mm}};
    j["mapping"] = {{"mm_per_pixel", cfg.mapping.mm_per_pixel},
                    {"roi_origin_u_px", cfg.mapping.roi_origin_px.x()},
                    {"roi_origin_v_px", cfg.mapping.roi_origin_px.y()},
                    {"roi_size_px", cfg.mapping.roi_size_px}};
    njson warp = njson::array();
    for (int r = 0; r < 3; ++r)
        warp.push_back({cfg.camera.warp.h(r, 0), cfg.camera.warp.h(r, 1), cfg.camera.warp.h(r, 2)});
    j["camera"] = {{"raw_size_px", cfg.camera.raw_size_px},
                   {"noise_sigma", cfg.camera.noise_sigma},
                   {"warp", warp}};
    j["detect"] = {
        {"polarity", cfg.detect.polarity == Polarity::DefectsDark ? "dark" : "bright"},
        {"min_area_px", cfg.detect.min_area_px},
        {"connectivity", cfg.detect.connectivity == Connectivity::Four ? 4 : 8}};
    j["bed"] = {{"span_x_mm", cfg.bed_span_x_mm},
                {"span_y_mm", cfg.bed_span_y_mm},
                {"resolution_mm", cfg.bed_resolution_mm},
                {"layer_z_mm", cfg.layer_z_mm}};
    j["print"] = {{"x_mm", cfg.print_region.x_mm},
                  {"y_mm", cfg.print_region.y_mm},
                  {"width_mm", cfg.print_region.width_mm},
                  {"height_mm", cfg.print_region.height_mm},
                  {"speed_mm_per_s", cfg.print_speed_mm_per_s}};
    njson centers = njson::array();
    for (const Eigen::Vector2d& c : cfg.make_defects().centers_mm)
        centers.push_back({c.x(), c.y()});
    j["defects"] = {{"diameter_mm", cfg.defects.diameter_mm}, {"centers_mm", centers}};
    j["registration"] = {{"x_mm", cfg.registration.translation_mm.x()},
                         {"y_mm", cfg.registration.translation_mm.y()},
                         {"z_mm", cfg.registration.translation_mm.z()},
                         {"yaw_rad", cfg.registration.yaw_rad}};
    j["repair"] = {{"pitch_rad", cfg.repair.pitch_rad},
                   {"elbow", cfg.repair.elbow == ElbowBranch::Up ? "up" : "down"},
                   {"speed_mm_per_s", cfg.repair.speed_mm_per_s},
                   {"verify_after_each", cfg.verify_after_each}};
    j["sim"] = {{"dt_s", cfg.dt_s},
                {"thermal_timeout_s", cfg.thermal_timeout_s},
                {"throttle_ms", cfg.throttle_ms}};
    return j.dump(2) + "\n";
}

}  // namespace fabloop
