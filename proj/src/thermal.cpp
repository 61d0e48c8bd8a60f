#include "fabloop/thermal.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace fabloop {

void DividerConfig::validate() const {
    if (!(v_supply > 0.0)) throw ValidationError("divider.v_supply must be > 0");
    if (!(r_fixed_ohm > 0.0)) throw ValidationError("divider.r_fixed_ohm must be > 0");
    if (adc_max < 1) throw ValidationError("divider.adc_max must be >= 1");
}

void HysteresisConfig::validate() const {
    if (!std::isfinite(setpoint_c)) throw ValidationError("setpoint_c must be finite");
    if (!(half_band_c > 0.0)) throw ValidationError("half_band_c must be > 0");
}

void ThermalPlant::validate() const {
    if (!(heat_capacity_j_per_k > 0.0))
        throw ValidationError("plant.heat_capacity_j_per_k must be > 0");
    if (!(loss_w_per_k > 0.0)) throw ValidationError("plant.loss_w_per_k must be > 0");
    if (!(heater_power_w > 0.0)) throw ValidationError("plant.power_w must be > 0");
}

void ExtrusionConfig::validate() const {
    if (!(steps_per_mm > 0.0)) throw ValidationError("extrusion.steps_per_mm must be > 0");
    if (!(filament_diameter_mm > 0.0))
        throw ValidationError("extrusion.filament_diameter_mm must be > 0");
    if (!(road_width_mm > 0.0)) throw ValidationError("extrusion.road_width_mm must be > 0");
    if (!(layer_height_mm > 0.0)) throw ValidationError("extrusion.layer_height_mm must be > 0");
}

double adc_to_resistance(long counts, const DividerConfig& d, bool* short_circuit) {
    d.validate();
    if (short_circuit) *short_circuit = false;
    if (counts < 0 || counts > d.adc_max)
        throw ValidationError("adc_to_resistance: counts outside [0, adc_max]");
    if (counts == 0)
        throw OpenCircuitError("adc_to_resistance: zero counts, thermistor open");
    if (counts == d.adc_max) {
        if (short_circuit) *short_circuit = true;
        return 0.0;
    }
    // V = v_supply * counts / adc_max; R = r_fixed * (v_supply / V - 1).
    return d.r_fixed_ohm * (static_cast<double>(d.adc_max) / counts - 1.0);
}

double resistance_to_temperature(double r_ohm, const SteinhartHart& c) {
    if (!(r_ohm > 0.0)) throw ValidationError("resistance_to_temperature: resistance must be > 0");
    const double ln_r = std::log(r_ohm);
    const double inv_t = c.a + c.b * ln_r + c.c * ln_r * ln_r * ln_r;
    if (!(inv_t > 0.0))
        throw NonPhysicalError("resistance_to_temperature: nonpositive 1/T");
    return 1.0 / inv_t - 273.15;
}

SteinhartHart fit_steinhart_hart(const std::array<std::pair<double, double>, 3>& points) {
    Eigen::Matrix3d m;
    Eigen::Vector3d rhs;
    for (int i = 0; i < 3; ++i) {
        const double r = points[i].first;
        if (!(r > 0.0)) throw ValidationError("fit_steinhart_hart: resistances must be > 0");
        const double ln_r = std::log(r);
        m.row(i) << 1.0, ln_r, ln_r * ln_r * ln_r;
        rhs(i) = 1.0 / (points[i].second + 273.15);
    }
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j)
            if (points[i].first == points[j].first)
                throw SingularSystemError("fit_steinhart_hart: duplicate resistances");

    const Eigen::FullPivLU<Eigen::Matrix3d> lu(m);
    if (!lu.isInvertible())
        throw SingularSystemError("fit_steinhart_hart: singular calibration system");
    const Eigen::Vector3d x = lu.solve(rhs);
    return SteinhartHart{x(0), x(1), x(2)};
}

ControllerState control_step(double temp_c, const HysteresisConfig& cfg, ControllerState s) {
    cfg.validate();
    if (!std::isfinite(temp_c)) throw ValidationError("control_step: temperature must be finite");
    bool next = s.heater_on;
    if (temp_c <= cfg.setpoint_c - cfg.half_band_c)
        next = true;
    else if (temp_c >= cfg.setpoint_c + cfg.half_band_c)
        next = false;
    if (next != s.heater_on) ++s.toggle_count;
    s.heater_on = next;
    s.last_temp_c = temp_c;
    return s;
}

ThermalPlant plant_step(ThermalPlant p, bool heater_on, double dt_s) {
    p.validate();
    if (!(dt_s > 0.0) || dt_s * p.loss_w_per_k / p.heat_capacity_j_per_k >= 1.0)
        throw UnstableStepError("plant_step: dt violates explicit-Euler stability");
    const double input_w = heater_on ? p.heater_power_w : 0.0;
    p.temperature_c += dt_s *
                       (input_w - p.loss_w_per_k * (p.temperature_c - p.t_ambient_c)) /
                       p.heat_capacity_j_per_k;
    return p;
}

double extrusion_rate(double robot_speed_mm_per_s, const ExtrusionConfig& e,
                      ExtrudeDirection dir) {
    e.validate();
    if (robot_speed_mm_per_s < 0.0)
        throw ValidationError("extrusion_rate: robot speed must be >= 0");
    const double half_d = e.filament_diameter_mm / 2.0;
    const double feed_mm_per_s =
        robot_speed_mm_per_s * e.road_width_mm * e.layer_height_mm / (M_PI * half_d * half_d);
    const double steps = feed_mm_per_s * e.steps_per_mm;
    return dir == ExtrudeDirection::Extrude ? steps : -steps;
}

std::vector<ThermalSample> simulate_thermal(const HysteresisConfig& cfg, ThermalPlant plant,
                                            double duration_s, double dt_s) {
    cfg.validate();
    plant.validate();
    if (!(duration_s >= 0.0)) throw ValidationError("simulate_thermal: duration must be >= 0");
    if (!(dt_s > 0.0) || dt_s * plant.loss_w_per_k / plant.heat_capacity_j_per_k >= 1.0)
        throw UnstableStepError("simulate_thermal: dt violates explicit-Euler stability");
    const auto steps = static_cast<std::uint64_t>(std::llround(duration_s / dt_s));

    std::vector<ThermalSample> trace;
    trace.reserve(steps + 1);
    ControllerState state;
    for (std::uint64_t k = 0; k <= steps; ++k) {
        state = control_step(plant.temperature_c, cfg, state);
        trace.push_back({k * dt_s, plant.temperature_c, state.heater_on});
        if (k < steps) plant = plant_step(plant, state.heater_on, dt_s);
    }
    return trace;
}

}  // namespace fabloop
