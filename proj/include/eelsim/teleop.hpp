#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "eelsim/commands.hpp"
#include "eelsim/scenario.hpp"
#include "eelsim/simulation.hpp"

namespace eelsim::teleop {

using nlohmann::json;

enum class Role { controller, viewer };
const char* to_string(Role role);

/// StateFrame JSON for one scheduler snapshot.
json state_frame(const sim::Snapshot& s, bool paused);

/// 4-byte big-endian length followed by the payload.
std::string length_prefixed(std::string_view payload);
/// Pops one complete message off the front of `buffer`, if there is one.
std::optional<std::string> pop_length_prefixed(std::string& buffer);

/// One live simulation with its clients. Thread safe; the owner advances
/// simulated time, clients connect, submit commands and read frames.
class Session : private sim::Observer {
public:
    /// With a record directory the run logs go to <dir>/run and every accepted
    /// command is appended to <dir>/timeline.csv.
    explicit Session(sim::Scenario scenario, std::filesystem::path record_dir = {});
    ~Session() override;

    /// First client becomes the controller, the rest are read-only viewers.
    /// Reconnecting keeps the role.
    Role connect(const std::string& client);
    /// Releases control; the last operator command stays in force.
    void disconnect(const std::string& client);
    std::optional<std::string> controller() const;
    std::optional<Role> role(const std::string& client) const;

    /// Validates and queues a CommandMessage. Body commands take effect at
    /// the next supervisor tick, or at the first one after resume while paused.
    sim::Ack submit(const std::string& client, const json& message);

    /// Advances simulated time by `seconds` unless paused.
    void advance(double seconds);
    void advance_to(SimTime t);

    SimTime now() const;
    bool paused() const;
    std::uint64_t resets() const;
    json frame() const;
    std::vector<sim::TimelineEntry> timeline() const;

    /// Flushes the current run's logs and metrics.
    void finish();

private:
    void on_command(SimTime now, const sim::Command& c, const sim::Ack& ack) override;
    void record(SimTime at, const sim::Command& c);
    void start_run();
    void schedule(const sim::Command& c);

    mutable std::mutex mutex_;
    sim::Scenario scenario_;
    std::filesystem::path record_dir_;
    std::unique_ptr<sim::Simulation> sim_;
    std::ofstream timeline_file_;
    std::vector<sim::TimelineEntry> timeline_;
    std::vector<sim::Command> held_;  // submitted while paused
    std::map<std::string, Role> clients_;
    std::optional<std::string> controller_;
    bool paused_ = false;
    double target_ = 0.0;  // s
    std::uint64_t resets_ = 0;
};

struct ServiceOptions {
    std::string host = "127.0.0.1";
    int port = 8080;           // 0 picks a free port
    double rate_factor = 1.0;  // simulated seconds per wall second
    double stream_rate = 20.0; // StateFrames per second
    double controller_timeout = 30.0;  // s of inactivity before control is released; 0 disables
    std::filesystem::path record_dir;
};

/// HTTP front end for a Session.
///
///   POST /control/connect     {"client"}            -> {"client","role","read_only"}
///   POST /control             CommandMessage        -> acknowledgement
///   POST /control/disconnect  {"client"}
///   GET  /state               length-prefixed StateFrame stream (?once=1 for one frame)
class Service {
public:
    /// Binds the port; throws Error when it is unavailable.
    Service(sim::Scenario scenario, ServiceOptions options);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    int port() const { return port_; }
    Session& session() { return *session_; }
    std::uint64_t frames_published() const;

    /// Starts pacing and serving in background threads.
    void start();
    /// Blocks until stop() is called (from another thread or a signal).
    void wait();
    void stop();

private:
    struct Http;

    void pace_loop();
    void publish();
    void touch(const std::string& client);

    ServiceOptions options_;
    std::unique_ptr<Session> session_;
    std::unique_ptr<Http> http_;
    int port_ = 0;

    std::atomic<bool> running_{false};
    std::thread pace_thread_;
    std::thread http_thread_;

    mutable std::mutex frame_mutex_;
    std::condition_variable frame_cv_;
    std::shared_ptr<const std::string> latest_;
    std::uint64_t frame_seq_ = 0;

    std::mutex activity_mutex_;
    std::map<std::string, std::chrono::steady_clock::time_point> activity_;
};

}  // namespace eelsim::teleop
