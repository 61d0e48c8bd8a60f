#pragma once

#include <string>

#include "fabloop/config.hpp"
#include "fabloop/simulation.hpp"
#include "fabloop/telemetry.hpp"

namespace fabloop {

/// Hooks around run_layer_cycle: optional live status publishing, optional
/// image dumps of the detect stages.
struct CycleOptions {
    SnapshotBoard* board = nullptr;
    std::string dump_dir;  // writes capture/verify stage images when set
};

/// Runs one closed defect-mitigation loop on a fresh virtual bed:
/// deposit the layer with injected voids, settle the hotend into the
/// hysteresis band (ThermalTimeoutError past cfg.thermal_timeout_s),
/// capture, detect, repair each region in traversal order (unreachable
/// targets are skipped), then recapture and verify. The camera uses
/// cfg.seed for the first capture and cfg.seed + k for the k-th
/// recapture, so every frame is deterministic yet distinct.
CycleReport run_layer_cycle(const ScenarioConfig& cfg, const CycleOptions& opts = {});

std::string cycle_report_to_json(const CycleReport& report);

}  // namespace fabloop
