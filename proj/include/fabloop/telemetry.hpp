#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <string>

namespace fabloop {

enum class Phase : std::int32_t { Idle, Printing, Capturing, Detecting, Repairing, Verifying };

const char* phase_name(Phase p);

/// Latest observable state of the simulation, published after each phase
/// and repair step. Trivially copyable by design (seqlock payload).
struct StatusSnapshot {
    double time_s = 0.0;
    double temp_c = 0.0;
    double setpoint_c = 0.0;
    double extruder_steps_per_s = 0.0;
    std::uint64_t layer = 0;
    std::uint64_t defects_open = 0;
    Phase phase = Phase::Idle;
    bool heater_on = false;
};

std::string snapshot_to_json(const StatusSnapshot& s);

/// Single-writer seqlock handoff: publish() is wait-free for the simulation
/// loop, read() retries until it observes an untorn snapshot.
class SnapshotBoard {
public:
    SnapshotBoard() { publish(StatusSnapshot{}); }

    void publish(const StatusSnapshot& s) noexcept;
    StatusSnapshot read() const noexcept;

private:
    static constexpr std::size_t kWords = (sizeof(StatusSnapshot) + 7) / 8;

    std::atomic<std::uint64_t> seq_{0};
    std::array<std::atomic<std::uint64_t>, kWords> words_{};
};

/// HTTP poll endpoint mirroring a microcontroller webserver:
///   GET /status  -> latest StatusSnapshot as application/json
///   GET /healthz -> 200 "ok"
class TelemetryServer {
public:
    explicit TelemetryServer(const SnapshotBoard& board);
    ~TelemetryServer();

    TelemetryServer(const TelemetryServer&) = delete;
    TelemetryServer& operator=(const TelemetryServer&) = delete;

    /// Binds and serves on a background thread. port 0 picks an ephemeral
    /// port; returns the bound port. Throws IoError when binding fails.
    int start(int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace fabloop
