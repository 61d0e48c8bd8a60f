#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fabloop/config.hpp"
#include "fabloop/cycle.hpp"
#include "fabloop/detection.hpp"
#include "fabloop/errors.hpp"
#include "fabloop/kinematics.hpp"
#include "fabloop/pgm.hpp"
#include "fabloop/telemetry.hpp"
#include "fabloop/thermal.hpp"
#include "fabloop/vision.hpp"

namespace {

using njson = nlohmann::json;

fabloop::ScenarioConfig load_scenario(const std::string& path) {
    if (path.empty()) return fabloop::parse_config("{}");
    return fabloop::load_config(path);
}

njson matrix_json(const Eigen::Matrix3d& m) {
    njson rows = njson::array();
    for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
    return rows;
}

njson region_json(const fabloop::DefectRegion& r) {
    return njson{{"centroid_px", {r.centroid_px.x(), r.centroid_px.y()}},
                 {"centroid_mm", {r.centroid_mm.x(), r.centroid_mm.y()}},
                 {"area_px", r.area_px},
                 {"equivalent_diameter_mm", r.equivalent_diameter_mm},
                 {"bbox", {r.min_u, r.min_v, r.max_u, r.max_v}}};
}

Eigen::Vector2d quad_point(const njson& j, const std::string& what) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw fabloop::ValidationError(what + ": expected [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

std::array<Eigen::Vector2d, 4> quad_points(const njson& j, const std::string& what) {
    if (!j.is_array() || j.size() != 4)
        throw fabloop::ValidationError(what + ": expected four [x, y] points");
    std::array<Eigen::Vector2d, 4> pts;
    for (int i = 0; i < 4; ++i) pts[i] = quad_point(j[i], what + "[" + std::to_string(i) + "]");
    return pts;
}

int run_fk(const std::string& config_path, const std::vector<double>& joints) {
    const fabloop::ScenarioConfig cfg = load_scenario(config_path);
    const fabloop::JointAngles q(joints[0], joints[1], joints[2], joints[3], joints[4]);
    const fabloop::Pose pose = fabloop::forward_kinematics(q, cfg.arm);
    njson out{{"position_mm", {pose.position_mm.x(), pose.position_mm.y(), pose.position_mm.z()}},
              {"rotation", matrix_json(pose.rotation)}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

int run_ik(const std::string& config_path, const std::vector<double>& target, double pitch,
           const std::string& elbow) {
    const fabloop::ScenarioConfig cfg = load_scenario(config_path);
    fabloop::IkRequest req;
    req.target_mm = {target[0], target[1], target[2]};
    req.pitch_rad = pitch;
    if (elbow == "up")
        req.elbow = fabloop::ElbowBranch::Up;
    else if (elbow == "down")
        req.elbow = fabloop::ElbowBranch::Down;
    else
        throw fabloop::ValidationError("--elbow: expected \"up\" or \"down\"");
    const fabloop::JointAngles q = fabloop::inverse_kinematics(req, cfg.arm);
    njson out{{"joints_rad", {q.theta1(), q.theta2(), q.theta3(), q.theta4(), q.theta5()}}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

int run_calibrate(const std::string& quad_path, int frame_px) {
    std::ifstream in(quad_path, std::ios::binary);
    if (!in) throw fabloop::IoError("cannot read " + quad_path);
    njson root;
    try {
        root = njson::parse(in);
    } catch (const njson::parse_error& e) {
        throw fabloop::ParseError(std::string("quad file: ") + e.what());
    }
    if (!root.is_object() || !root.contains("source"))
        throw fabloop::ValidationError("quad file: expected an object with \"source\"");
    for (const auto& item : root.items())
        if (item.key() != "source" && item.key() != "target")
            throw fabloop::UnknownKeyError("quad file: unknown key: " + item.key());

    fabloop::CalibrationQuad quad;
    quad.source = quad_points(root["source"], "source");
    quad.target = root.contains("target") ? quad_points(root["target"], "target")
                                          : fabloop::CalibrationQuad::frame_corners(frame_px);
    const fabloop::Homography h = fabloop::estimate_homography(quad);

    double worst = 0.0;
    for (int i = 0; i < 4; ++i)
        worst = std::max(worst,
                         (fabloop::apply_homography(h, quad.source[i]) - quad.target[i]).norm());
    njson out{{"h", matrix_json(h.h)}, {"max_reprojection_px", worst}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

int run_detect(const std::string& config_path, const std::string& image_path,
               const std::string& overlay_path) {
    const fabloop::ScenarioConfig cfg = load_scenario(config_path);
    const fabloop::GrayImage raw = fabloop::read_pgm_file(image_path);
    const fabloop::Homography h = fabloop::rectifying_homography(cfg.camera, cfg.frame_px);
    const fabloop::DetectTrace trace =
        fabloop::detect_with_trace(raw, h, cfg.mapping, cfg.detect, cfg.frame_px);

    njson out = njson::array();
    for (const fabloop::DefectRegion& r : trace.regions) out.push_back(region_json(r));
    std::cout << out.dump(2) << "\n";

    if (!overlay_path.empty()) {
        fabloop::GrayImage overlay = trace.rectified;
        fabloop::burn_overlay(overlay, trace.regions);
        fabloop::write_pgm_file(overlay_path, overlay);
    }
    return 0;
}

int run_thermal(const std::string& config_path, double duration_s) {
    const fabloop::ScenarioConfig cfg = load_scenario(config_path);
    fabloop::ThermalPlant plant = cfg.plant;
    plant.temperature_c = plant.t_ambient_c;
    const auto samples = fabloop::simulate_thermal(cfg.hysteresis, plant, duration_s, cfg.dt_s);
    std::cout << "time_s,temp_c,heater_on\n";
    for (const fabloop::ThermalSample& s : samples) {
        char line[80];
        std::snprintf(line, sizeof(line), "%.6f,%.6f,%d\n", s.time_s, s.temp_c,
                      s.heater_on ? 1 : 0);
        std::cout << line;
    }
    return 0;
}

int run_simulate(const std::string& config_path, const std::string& report_path,
                 const std::string& dump_dir, int serve_port, bool serve, int throttle_ms) {
    fabloop::ScenarioConfig cfg = load_scenario(config_path);
    if (throttle_ms >= 0) cfg.throttle_ms = throttle_ms;

    fabloop::SnapshotBoard board;
    std::unique_ptr<fabloop::TelemetryServer> server;
    fabloop::CycleOptions opts;
    opts.dump_dir = dump_dir;
    if (serve) {
        server = std::make_unique<fabloop::TelemetryServer>(board);
        const int port = server->start(serve_port);
        std::cerr << "telemetry: http://127.0.0.1:" << port << "/status\n";
        opts.board = &board;
    }

    const fabloop::CycleReport report = fabloop::run_layer_cycle(cfg, opts);
    const std::string text = fabloop::cycle_report_to_json(report);
    std::cout << text;
    if (!report_path.empty()) {
        std::ofstream out(report_path, std::ios::binary);
        if (!out) throw fabloop::IoError("cannot write " + report_path);
        out << text;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"closed-loop FDM defect mitigation simulator"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("-c,--config", config_path, "scenario JSON (defaults used when omitted)");

    auto* fk = app.add_subcommand("fk", "forward kinematics: joints to pose");
    std::vector<double> joints;
    fk->add_option("--joints", joints, "theta1..theta5 in radians")
        ->required()
        ->delimiter(',')
        ->expected(5);

    auto* ik = app.add_subcommand("ik", "inverse kinematics: position to joints");
    std::vector<double> target;
    double pitch = 0.0;
    std::string elbow = "up";
    ik->add_option("--target", target, "x,y,z in mm")->required()->delimiter(',')->expected(3);
    ik->add_option("--pitch", pitch, "cumulative pitch in radians (default 0)");
    ik->add_option("--elbow", elbow, "up|down (default up)");

    auto* calibrate = app.add_subcommand("calibrate", "estimate a homography from a quad file");
    std::string quad_path;
    int frame_px = 400;
    calibrate->add_option("--quad", quad_path, "JSON file with source (and optional target) quads")
        ->required();
    calibrate->add_option("--frame", frame_px, "frame size used when target is omitted");

    auto* detect = app.add_subcommand("detect", "find defects in a raw PGM capture");
    std::string image_path, overlay_path;
    detect->add_option("--image", image_path, "raw capture, binary PGM")->required();
    detect->add_option("--overlay", overlay_path, "write rectified image with boxes burned in");

    auto* thermal = app.add_subcommand("thermal", "hotend relay simulation as CSV");
    double duration_s = 600.0;
    thermal->add_option("--duration", duration_s, "simulated seconds (default 600)");

    auto* simulate = app.add_subcommand("simulate", "run one closed defect-mitigation cycle");
    std::string report_path, dump_dir;
    int serve_port = 0;
    int throttle_ms = -1;
    bool serve = false;
    simulate->add_option("--report", report_path, "also write the report JSON here");
    simulate->add_option("--dump-dir", dump_dir, "write per-stage PGM images here");
    auto* serve_opt = simulate->add_option(
        "--serve", serve_port, "serve /status and /healthz on this port (0 picks one)");
    simulate->add_option("--throttle-ms", throttle_ms, "sleep after each status publish");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    serve = serve_opt->count() > 0;

    try {
        if (*fk) return run_fk(config_path, joints);
        if (*ik) return run_ik(config_path, target, pitch, elbow);
        if (*calibrate) return run_calibrate(quad_path, frame_px);
        if (*detect) return run_detect(config_path, image_path, overlay_path);
        if (*thermal) return run_thermal(config_path, duration_s);
        if (*simulate)
            return run_simulate(config_path, report_path, dump_dir, serve_port, serve,
                                throttle_ms);
    } catch (const fabloop::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const fabloop::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const fabloop::UnknownKeyError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const fabloop::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const fabloop::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
