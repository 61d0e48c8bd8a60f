#include "fabloop/telemetry.hpp"

#include <cstring>
#include <thread>
#include <type_traits>

#include <httplib.h>
#include <json.hpp>

#include "fabloop/errors.hpp"

namespace fabloop {

static_assert(std::is_trivially_copyable_v<StatusSnapshot>);

const char* phase_name(Phase p) {
    switch (p) {
        case Phase::Idle: return "Idle";
        case Phase::Printing: return "Printing";
        case Phase::Capturing: return "Capturing";
        case Phase::Detecting: return "Detecting";
        case Phase::Repairing: return "Repairing";
        case Phase::Verifying: return "Verifying";
    }
    return "Idle";
}

std::string snapshot_to_json(const StatusSnapshot& s) {
    nlohmann::json j{
        {"time_s", s.time_s},
        {"temp_c", s.temp_c},
        {"setpoint_c", s.setpoint_c},
        {"extruder_steps_per_s", s.extruder_steps_per_s},
        {"layer", s.layer},
        {"defects_open", s.defects_open},
        {"phase", phase_name(s.phase)},
        {"heater_on", s.heater_on},
    };
    return j.dump();
}

void SnapshotBoard::publish(const StatusSnapshot& s) noexcept {
    std::uint64_t w[kWords] = {};
    std::memcpy(w, &s, sizeof(s));

    const std::uint64_t v = seq_.load(std::memory_order_relaxed);
    seq_.store(v + 1, std::memory_order_relaxed);  // odd: write in progress
    std::atomic_thread_fence(std::memory_order_release);
    for (std::size_t i = 0; i < kWords; ++i) words_[i].store(w[i], std::memory_order_relaxed);
    seq_.store(v + 2, std::memory_order_release);
}

StatusSnapshot SnapshotBoard::read() const noexcept {
    std::uint64_t w[kWords];
    for (;;) {
        const std::uint64_t v1 = seq_.load(std::memory_order_acquire);
        if (v1 & 1) continue;  // writer mid-update
        for (std::size_t i = 0; i < kWords; ++i) w[i] = words_[i].load(std::memory_order_relaxed);
        std::atomic_thread_fence(std::memory_order_acquire);
        if (seq_.load(std::memory_order_relaxed) == v1) {
            StatusSnapshot s;
            std::memcpy(&s, w, sizeof(s));
            return s;
        }
    }
}

struct TelemetryServer::Impl {
    const SnapshotBoard* board;
    httplib::Server server;
    std::thread thread;
    int port = 0;
};

TelemetryServer::TelemetryServer(const SnapshotBoard& board) : impl_(new Impl) {
    impl_->board = &board;
    impl_->server.Get("/status", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(snapshot_to_json(impl_->board->read()), "application/json");
    });
    impl_->server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("ok", "text/plain");
    });
}

TelemetryServer::~TelemetryServer() { stop(); }

int TelemetryServer::start(int port) {
    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
        if (impl_->port <= 0) throw IoError("telemetry: failed to bind an ephemeral port");
    } else {
        if (!impl_->server.bind_to_port("127.0.0.1", port))
            throw IoError("telemetry: failed to bind port " + std::to_string(port));
        impl_->port = port;
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return impl_->port;
}

void TelemetryServer::stop() {
    if (impl_ && impl_->thread.joinable()) {
        impl_->server.stop();
        impl_->thread.join();
    }
}

}  // namespace fabloop
