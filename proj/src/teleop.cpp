#include "eelsim/teleop.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include "eelsim/error.hpp"

namespace eelsim::teleop {

namespace fs = std::filesystem;
using sim::Ack;
using sim::AckStatus;
using sim::Command;
using sim::CommandKind;

const char* to_string(Role role) { return role == Role::controller ? "controller" : "viewer"; }

json state_frame(const sim::Snapshot& s, bool paused) {
    json pose = json::array();
    for (const auto& f : s.pose) {
        const auto& q = f.orientation;
        pose.push_back({{"position", {f.position.x(), f.position.y(), f.position.z()}},
                        {"orientation", {q.w(), q.x(), q.y(), q.z()}}});
    }
    json joints = json::array();
    for (const auto& j : s.joints) joints.push_back({rad_to_deg(j.yaw), rad_to_deg(j.pitch), rad_to_deg(j.roll)});

    const auto& g = s.inputs.gait;
    return {
        {"simulated_time_s", to_seconds(s.time)},
        {"paused", paused},
        {"pose", pose},
        {"joint_angles_deg", joints},
        {"fin_angles_deg", {{"left", rad_to_deg(s.fins.left)}, {"right", rad_to_deg(s.fins.right)}}},
        {"battery_wh_remaining", s.battery_wh_remaining},
        {"bus_loads", {{"bus1", s.bus_loads[0]}, {"bus2", s.bus_loads[1]}}},
        {"saturation_flags", s.saturated},
        {"sync_error_s", s.sync_error},
        {"propulsion_estimate",
         {{"mean_thrust_n", s.propulsion.mean_thrust},
          {"mean_power_w", s.propulsion.mean_power},
          {"non_normative", s.propulsion.non_normative}}},
        {"gait",
         {{"active", s.has_command},
          {"amp_yaw_deg", rad_to_deg(g.amp_yaw)},
          {"amp_pitch_deg", rad_to_deg(g.amp_pitch)},
          {"frequency_hz", g.frequency},
          {"phase_gradient_deg", rad_to_deg(g.phase_gradient)},
          {"direction", g.direction == gait::WaveDirection::progressive ? "progressive" : "retrograde"},
          {"bias_yaw_deg", rad_to_deg(g.bias_yaw)},
          {"bias_pitch_deg", rad_to_deg(g.bias_pitch)},
          {"fin_pitch_deg", rad_to_deg(s.inputs.fin_pitch)},
          {"fin_roll_deg", rad_to_deg(s.inputs.fin_roll)}}},
    };
}

std::string length_prefixed(std::string_view payload) {
    const auto n = static_cast<std::uint32_t>(payload.size());
    std::string out;
    out.reserve(payload.size() + 4);
    for (int shift = 24; shift >= 0; shift -= 8) out += static_cast<char>((n >> shift) & 0xFF);
    out.append(payload);
    return out;
}

std::optional<std::string> pop_length_prefixed(std::string& buffer) {
    if (buffer.size() < 4) return std::nullopt;
    std::uint32_t n = 0;
    for (int i = 0; i < 4; ++i) n = (n << 8) | static_cast<unsigned char>(buffer[i]);
    if (buffer.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
    std::string msg = buffer.substr(4, n);
    buffer.erase(0, 4 + n);
    return msg;
}

// Session

Session::Session(sim::Scenario scenario, fs::path record_dir)
    : scenario_((scenario.validate(), std::move(scenario))), record_dir_(std::move(record_dir)) {
    if (!record_dir_.empty()) {
        fs::create_directories(record_dir_);
        timeline_file_.open(record_dir_ / "timeline.csv", std::ios::binary | std::ios::trunc);
        if (!timeline_file_) throw Error("cannot write '" + (record_dir_ / "timeline.csv").string() + "'");
        sim::write_timeline_header(timeline_file_);
    }
    start_run();
}

Session::~Session() {
    try {
        finish();
    } catch (...) {
    }
}

void Session::start_run() {
    if (sim_) sim_->finish();
    sim_ = std::make_unique<sim::Simulation>(scenario_, record_dir_.empty() ? fs::path{} : record_dir_ / "run");
    sim_->set_observer(this);
    target_ = 0.0;
}

Role Session::connect(const std::string& client) {
    std::lock_guard lock(mutex_);
    if (auto it = clients_.find(client); it != clients_.end()) return it->second;
    const Role role = controller_ ? Role::viewer : Role::controller;
    if (role == Role::controller) controller_ = client;
    clients_[client] = role;
    return role;
}

void Session::disconnect(const std::string& client) {
    std::lock_guard lock(mutex_);
    clients_.erase(client);
    if (controller_ == client) controller_.reset();
}

std::optional<std::string> Session::controller() const {
    std::lock_guard lock(mutex_);
    return controller_;
}

std::optional<Role> Session::role(const std::string& client) const {
    std::lock_guard lock(mutex_);
    auto it = clients_.find(client);
    if (it == clients_.end()) return std::nullopt;
    return it->second;
}

namespace {

Ack rejected(std::string reason) {
    Ack ack;
    ack.status = AckStatus::rejected;
    ack.reason = std::move(reason);
    return ack;
}

}  // namespace

Ack Session::submit(const std::string& client, const json& message) {
    Command c;
    try {
        c = sim::command_from_json(message);
    } catch (const ConfigError& e) {
        return rejected(e.what());
    }
    if (c.client.empty()) c.client = client;

    std::lock_guard lock(mutex_);
    auto it = clients_.find(c.client);
    if (it == clients_.end()) return rejected("client '" + c.client + "' is not connected");
    if (it->second != Role::controller) return rejected("client '" + c.client + "' is read-only");

    switch (c.kind) {
    case CommandKind::pause:
        if (!paused_) {
            paused_ = true;
            record(sim_->now(), c);
        }
        return {};
    case CommandKind::resume:
        if (paused_) {
            paused_ = false;
            record(sim_->now(), c);
            for (const auto& held : held_) schedule(held);
            held_.clear();
        }
        return {};
    case CommandKind::reset:
        record(sim_->now(), c);
        ++resets_;
        paused_ = false;
        held_.clear();
        start_run();
        return {};
    default:
        break;
    }

    sim::OperatorInputs scratch;
    Ack ack = sim::apply_command(scratch, c, scenario_.fin_limit);
    if (ack.status == AckStatus::rejected) return ack;
    if (paused_)
        held_.push_back(c);
    else
        schedule(c);
    return ack;
}

void Session::schedule(const Command& c) { sim_->schedule_command(c, sim_->next_supervisor_tick()); }

void Session::on_command(SimTime now, const Command& c, const Ack& ack) {
    if (ack.status != AckStatus::rejected && c.affects_body()) record(now, c);
}

void Session::record(SimTime at, const Command& c) {
    timeline_.push_back({at, c});
    if (timeline_file_.is_open()) {
        sim::write_timeline_row(timeline_file_, timeline_.back());
        timeline_file_.flush();
    }
}

void Session::advance(double seconds) {
    std::lock_guard lock(mutex_);
    if (paused_ || !(seconds > 0)) return;
    target_ += seconds;
    sim_->run_until(std::max(sim_->now(), from_seconds(target_)));
}

void Session::advance_to(SimTime t) {
    std::lock_guard lock(mutex_);
    if (paused_ || t <= sim_->now()) return;
    target_ = to_seconds(t);
    sim_->run_until(t);
}

SimTime Session::now() const {
    std::lock_guard lock(mutex_);
    return sim_->now();
}

bool Session::paused() const {
    std::lock_guard lock(mutex_);
    return paused_;
}

std::uint64_t Session::resets() const {
    std::lock_guard lock(mutex_);
    return resets_;
}

json Session::frame() const {
    std::lock_guard lock(mutex_);
    return state_frame(sim_->snapshot(), paused_);
}

std::vector<sim::TimelineEntry> Session::timeline() const {
    std::lock_guard lock(mutex_);
    return timeline_;
}

void Session::finish() {
    std::lock_guard lock(mutex_);
    if (sim_) sim_->finish();
    if (timeline_file_.is_open()) timeline_file_.flush();
}

// Service

struct Service::Http {
    httplib::Server server;
};

namespace {

std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
    try {
        return json::parse(req.body);
    } catch (const json::exception& e) {
        res.status = 400;
        res.set_content(json{{"status", "rejected"}, {"reason", std::string("malformed JSON: ") + e.what()}}.dump(),
                        "application/json");
        return std::nullopt;
    }
}

std::string client_of(const json& j) {
    auto it = j.find("client");
    return it != j.end() && it->is_string() ? it->get<std::string>() : std::string();
}

}  // namespace

Service::Service(sim::Scenario scenario, ServiceOptions options)
    : options_(std::move(options)),
      session_(std::make_unique<Session>(std::move(scenario), options_.record_dir)),
      http_(std::make_unique<Http>()) {
    if (!(options_.rate_factor > 0)) throw InvalidInput("rate_factor must be > 0");
    if (!(options_.stream_rate > 0)) throw InvalidInput("stream rate must be > 0");

    auto& srv = http_->server;
    srv.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    srv.Post("/control/connect", [this](const httplib::Request& req, httplib::Response& res) {
        auto body = parse_body(req, res);
        if (!body) return;
        const std::string client = client_of(*body);
        if (client.empty()) {
            res.status = 400;
            res.set_content(json{{"status", "rejected"}, {"reason", "missing client"}}.dump(), "application/json");
            return;
        }
        touch(client);
        const Role role = session_->connect(client);
        res.set_content(json{{"client", client}, {"role", to_string(role)}, {"read_only", role == Role::viewer}}.dump(),
                        "application/json");
    });
    srv.Post("/control/disconnect", [this](const httplib::Request& req, httplib::Response& res) {
        auto body = parse_body(req, res);
        if (!body) return;
        const std::string client = client_of(*body);
        session_->disconnect(client);
        {
            std::lock_guard lock(activity_mutex_);
            activity_.erase(client);
        }
        res.set_content(json{{"client", client}, {"connected", false}}.dump(), "application/json");
    });
    srv.Post("/control", [this](const httplib::Request& req, httplib::Response& res) {
        Ack ack;
        try {
            const json body = json::parse(req.body);
            touch(client_of(body));
            ack = session_->submit(client_of(body), body);
        } catch (const json::exception& e) {
            ack.status = AckStatus::rejected;
            ack.reason = std::string("malformed JSON: ") + e.what();
        }
        res.set_content(ack.to_json().dump(), "application/json");
    });
    srv.Get("/state", [this](const httplib::Request& req, httplib::Response& res) {
        if (req.has_param("once")) {
            res.set_content(length_prefixed(session_->frame().dump()), "application/octet-stream");
            return;
        }
        std::uint64_t limit = 0;
        if (req.has_param("frames")) limit = std::stoull(req.get_param_value("frames"));
        struct Cursor {
            std::uint64_t seen = 0;
            std::uint64_t sent = 0;
        };
        auto cursor = std::make_shared<Cursor>();
        res.set_chunked_content_provider(
            "application/octet-stream", [this, cursor, limit](std::size_t, httplib::DataSink& sink) {
                std::shared_ptr<const std::string> frame;
                {
                    std::unique_lock lock(frame_mutex_);
                    frame_cv_.wait_for(lock, std::chrono::milliseconds(200),
                                       [&] { return frame_seq_ != cursor->seen || !running_; });
                    if (!running_ || (limit && cursor->sent >= limit)) {
                        sink.done();
                        return true;
                    }
                    if (frame_seq_ == cursor->seen || !latest_) return true;
                    cursor->seen = frame_seq_;
                    frame = latest_;
                }
                const std::string msg = length_prefixed(*frame);
                if (!sink.write(msg.data(), msg.size())) return false;
                ++cursor->sent;
                return true;
            });
    });

    if (options_.port == 0) {
        port_ = srv.bind_to_any_port(options_.host);
    } else {
        port_ = srv.bind_to_port(options_.host, options_.port) ? options_.port : -1;
    }
    if (port_ <= 0)
        throw Error(fmt::format("port {} on {} is unavailable", options_.port, options_.host));
}

Service::~Service() { stop(); }

std::uint64_t Service::frames_published() const {
    std::lock_guard lock(frame_mutex_);
    return frame_seq_;
}

void Service::touch(const std::string& client) {
    if (client.empty()) return;
    std::lock_guard lock(activity_mutex_);
    activity_[client] = std::chrono::steady_clock::now();
}

void Service::publish() {
    auto frame = std::make_shared<const std::string>(session_->frame().dump());
    {
        std::lock_guard lock(frame_mutex_);
        latest_ = std::move(frame);
        ++frame_seq_;
    }
    frame_cv_.notify_all();
}

void Service::start() {
    if (running_.exchange(true)) return;
    publish();
    pace_thread_ = std::thread([this] { pace_loop(); });
    http_thread_ = std::thread([this] { http_->server.listen_after_bind(); });
}

void Service::pace_loop() {
    using clock = std::chrono::steady_clock;
    const auto frame_period = std::chrono::duration_cast<clock::duration>(
        std::chrono::duration<double>(1.0 / options_.stream_rate));
    auto last = clock::now();
    auto next_frame = last + frame_period;
    while (running_) {
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
        const auto now = clock::now();
        session_->advance(std::chrono::duration<double>(now - last).count() * options_.rate_factor);
        last = now;
        if (now >= next_frame) {
            publish();
            next_frame += frame_period;
            if (next_frame <= now) next_frame = now + frame_period;
        }
        if (options_.controller_timeout > 0) {
            if (auto ctl = session_->controller()) {
                std::lock_guard lock(activity_mutex_);
                auto it = activity_.find(*ctl);
                if (it == activity_.end() ||
                    std::chrono::duration<double>(now - it->second).count() > options_.controller_timeout) {
                    session_->disconnect(*ctl);
                    activity_.erase(*ctl);
                }
            }
        }
    }
}

void Service::wait() {
    while (running_) std::this_thread::sleep_for(std::chrono::milliseconds(50));
}

void Service::stop() {
    const bool was_running = running_.exchange(false);
    frame_cv_.notify_all();
    if (was_running) http_->server.stop();
    if (pace_thread_.joinable()) pace_thread_.join();
    if (http_thread_.joinable()) http_thread_.join();
    if (was_running) session_->finish();
}

}  // namespace eelsim::teleop
