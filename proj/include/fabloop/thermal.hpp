#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fabloop/errors.hpp"

namespace fabloop {

/// Coefficients of 1/T = A + B ln R + C (ln R)^3, T in kelvin.
struct SteinhartHart {
    double a = 0.0;  // 1/K
    double b = 0.0;  // 1/K
    double c = 0.0;  // 1/K
};

/// Voltage divider on the ADC pin: thermistor between supply and the sense
/// node, fixed resistor from the sense node to ground.
struct DividerConfig {
    double v_supply = 3.3;      // volts
    double r_fixed_ohm = 4700;  // ohms
    long adc_max = 4095;        // full-scale counts

    void validate() const;
};

struct HysteresisConfig {
    double setpoint_c = 200.0;
    double half_band_c = 2.0;

    void validate() const;
};

struct ControllerState {
    bool heater_on = false;
    double last_temp_c = 0.0;
    std::uint64_t toggle_count = 0;
};

/// First-order lumped thermal model of the hotend.
struct ThermalPlant {
    double heat_capacity_j_per_k = 12.0;
    double loss_w_per_k = 0.18;
    double heater_power_w = 40.0;
    double t_ambient_c = 25.0;
    double temperature_c = 25.0;

    void validate() const;
};

struct ExtrusionConfig {
    double steps_per_mm = 100.0;        // steps per mm of filament
    double filament_diameter_mm = 1.75;
    double road_width_mm = 0.4;
    double layer_height_mm = 0.2;

    void validate() const;
};

enum class ExtrudeDirection { Extrude, Retract };

/// counts -> thermistor ohms through the divider:
/// R = r_fixed * (adc_max / counts - 1).
/// counts = 0 throws OpenCircuitError (infinite resistance); counts =
/// adc_max returns 0 and sets *short_circuit when given.
double adc_to_resistance(long counts, const DividerConfig& d, bool* short_circuit = nullptr);

/// Steinhart-Hart evaluation, returns degrees C. Throws NonPhysicalError
/// when the 1/T denominator is <= 0.
double resistance_to_temperature(double r_ohm, const SteinhartHart& c);

/// Exact 3x3 solve for (A, B, C) from three (ohms, degC) calibration
/// points. Throws SingularSystemError on duplicate or near-duplicate
/// resistances.
SteinhartHart fit_steinhart_hart(const std::array<std::pair<double, double>, 3>& points);

/// Bang-bang hysteresis relay: ON at or below setpoint - half_band, OFF at
/// or above setpoint + half_band, held inside the dead band. toggle_count
/// increments exactly on transitions.
ControllerState control_step(double temp_c, const HysteresisConfig& cfg, ControllerState s);

/// One explicit-Euler step of the first-order plant. Requires dt > 0 and
/// dt * loss / capacity < 1 (UnstableStepError otherwise).
ThermalPlant plant_step(ThermalPlant p, bool heater_on, double dt_s);

/// Volumetric flow matching: filament feed = speed * road_width *
/// layer_height / filament cross-section; returns feed * steps_per_mm,
/// negated for Retract.
double extrusion_rate(double robot_speed_mm_per_s, const ExtrusionConfig& e,
                      ExtrudeDirection dir = ExtrudeDirection::Extrude);

struct ThermalSample {
    double time_s;
    double temp_c;
    bool heater_on;
};

/// Deterministic closed-loop run: control_step then plant_step at each dt,
/// samples at t = 0, dt, ..., duration.
std::vector<ThermalSample> simulate_thermal(const HysteresisConfig& cfg, ThermalPlant plant,
                                            double duration_s, double dt_s);

}  // namespace fabloop
