#include "eelsim/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <fmt/format.h>

#include "eelsim/error.hpp"
#include "eelsim/report.hpp"

namespace eelsim::sim {

namespace fs = std::filesystem;

std::uint64_t RunMetrics::max_saturation() const {
    return saturations.empty() ? 0 : *std::max_element(saturations.begin(), saturations.end());
}

std::vector<nodes::ClockModel> draw_clocks(const Scenario& scenario) {
    std::mt19937_64 rng(scenario.seed);
    // Uniform in [-1, 1) straight from the raw 64-bit output.
    auto symmetric = [&rng] { return 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0; };
    std::vector<nodes::ClockModel> clocks;
    for (std::size_t n = 0; n < scenario.vertebra_count / nodes::kVertebraePerNode; ++n) {
        const double drift = symmetric() * scenario.max_drift_ppm;
        const double offset = symmetric() * scenario.max_initial_offset;
        clocks.push_back({drift, offset});
    }
    return clocks;
}

namespace {

nodes::NetworkConfig network_config(const Scenario& s) {
    nodes::NetworkConfig cfg;
    cfg.vertebra_count = s.vertebra_count;
    cfg.periods = s.periods;
    cfg.controller.shape = s.gait_shape();
    cfg.controller.gains = s.gains;
    cfg.controller.gear_ratio = s.gear_ratio;
    cfg.bitrate = s.bitrate;
    cfg.clocks = draw_clocks(s);
    return cfg;
}

std::ofstream open_log(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    return out;
}

}  // namespace

struct Simulation::Logs {
    std::ofstream joints;
    std::ofstream power;
    std::ofstream pose;
    std::ofstream bus1;
    std::ofstream bus2;
    std::ofstream load;
    std::ofstream events;
    std::ofstream timeline;

    std::ofstream& bus(int index) { return index == 1 ? bus1 : bus2; }
};

Simulation::Simulation(Scenario scenario, fs::path out_dir)
    : scenario_((scenario.validate(), std::move(scenario))),
      net_(nodes::assemble_network(network_config(scenario_))),
      out_dir_(std::move(out_dir)) {
    const auto& topo = net_.topology;
    motors_.assign(topo.motor_count(), plant::MotorState{0.0, 0.0, scenario_.plant.motor});
    torque_cmds_.assign(topo.motor_count(), 0.0);
    saturations_.assign(topo.vertebra_count, 0);

    energy_ = scenario_.plant.energy;
    energy_.module_count = topo.module_count();
    pressure_ = scenario_.plant.pressure;
    pressure_.water_density = scenario_.plant.drag.water_density;

    if (!out_dir_.empty()) {
        fs::create_directories(out_dir_);
        logs_ = std::make_unique<Logs>();
        logs_->joints = open_log(out_dir_ / "joints.csv");
        logs_->power = open_log(out_dir_ / "power.csv");
        logs_->pose = open_log(out_dir_ / "pose.csv");
        logs_->bus1 = open_log(out_dir_ / "bus1.csv");
        logs_->bus2 = open_log(out_dir_ / "bus2.csv");
        logs_->load = open_log(out_dir_ / "bus_load.csv");
        logs_->events = open_log(out_dir_ / "events.csv");
        logs_->timeline = open_log(out_dir_ / "timeline.csv");

        logs_->joints << "time_s";
        for (std::size_t v = 0; v < topo.vertebra_count; ++v)
            logs_->joints << fmt::format(",v{0:02}_yaw,v{0:02}_pitch,v{0:02}_roll", v);
        logs_->joints << ",fin_left,fin_right\n";
        logs_->power << "time_s,actuator_power_W,electronics_power_W,battery_Wh_remaining\n";
        logs_->pose << "time_s,frame,x,y,z,qw,qx,qy,qz\n";
        canbus::write_delivery_header(logs_->bus1);
        canbus::write_delivery_header(logs_->bus2);
        logs_->load << "window_start_s,bus1_load,bus2_load\n";
        logs_->events << "time_s,node,event,detail\n";
        write_timeline_header(logs_->timeline);
    }

    const auto& p = scenario_.periods;
    scheduler_.schedule_periodic(scenario_.plant.step, scenario_.plant.step, EventClass::plant,
                                 [this](SimTime t) { plant_step(t); });
    scheduler_.schedule_periodic(0, p.sync, EventClass::supervisor,
                                 [this](SimTime t) { submit(1, net_.supervisor.tick(t)); });
    for (std::size_t n = 0; n < net_.locals.size(); ++n) {
        scheduler_.schedule_periodic(0, p.control, EventClass::controller, [this, n](SimTime t) { control_tick(n, t); });
        scheduler_.schedule_periodic(0, p.diag, EventClass::controller, [this, n](SimTime t) { diag_tick(n, t); });
    }
    scheduler_.schedule_periodic(0, scenario_.plant.pressure_period, EventClass::monitor, [this](SimTime t) {
        try {
            const auto step = plant::pressure_step(pressure_, scenario_.plant.depth);
            pressure_ = step.state;
            if (step.action != plant::PressureAction::none) {
                ++pressure_actions_;
                log_event(t, "supervisor", plant::to_string(step.action),
                          fmt::format("internal_pa={:.1f}", pressure_.internal_pressure));
            }
        } catch (const ExhaustionError& e) {
            log_event(t, "supervisor", "pressure_fault", e.what());
        }
    });
    if (logs_) {
        scheduler_.schedule_periodic(0, scenario_.log.period, EventClass::log, [this](SimTime t) { log_sample(t); });
        scheduler_.schedule_periodic(0, scenario_.log.pose_period, EventClass::log, [this](SimTime t) { log_pose(t); });
    }
    scheduler_.schedule_periodic(scenario_.log.load_window, scenario_.log.load_window, EventClass::log,
                                 [this](SimTime t) { log_load(t); });

    for (const auto& entry : scenario_.commands) schedule_command(entry.command, entry.time);
}

Simulation::~Simulation() = default;

void Simulation::schedule_command(const Command& c, SimTime at) {
    scheduler_.schedule(at, EventClass::command, [this, c](SimTime t) { apply(c, t); });
}

void Simulation::run_until(SimTime t) { scheduler_.run_until(t); }

RunMetrics Simulation::run() {
    run_until(scenario_.duration);
    return finish();
}

SimTime Simulation::next_supervisor_tick() const {
    const SimTime period = scenario_.periods.sync;
    return (now() / period + 1) * period;
}

void Simulation::submit(int index, const std::vector<canbus::CanFrame>& frames) {
    if (frames.empty()) return;
    for (const auto& f : frames) bus(index).submit(f);
    ensure_bus_service(index, scheduler_.now());
}

void Simulation::ensure_bus_service(int index, SimTime at) {
    auto& slot = service_at_[index - 1];
    if (slot && *slot <= at) return;
    slot = at;
    scheduler_.schedule(at, EventClass::bus, [this, index, at](SimTime t) {
        if (service_at_[index - 1] != at) return;  // superseded by an earlier service
        service_bus(index, t);
    });
}

void Simulation::service_bus(int index, SimTime now) {
    service_at_[index - 1].reset();
    auto deliveries = bus(index).arbitrate_and_deliver(now);
    for (const auto& d : deliveries) {
        if (logs_) canbus::write_delivery_row(logs_->bus(index), bus(index).name(), d);
        if (observer_) observer_->on_delivery(index, d);
        for (canbus::NodeId station : d.recipients) {
            if (station == nodes::kSupervisorStation) {
                if (index == 2) net_.supervisor.on_diagnostics(d.frame);
                continue;
            }
            if (index != 1) continue;
            auto& node = net_.locals[station - 1];
            const auto outcome = node.on_frame(d.frame, node.clock().local_time(d.delivery_time));
            if (outcome == nodes::FrameOutcome::gait_stored || outcome == nodes::FrameOutcome::gait_stale)
                log_event(d.delivery_time, fmt::format("node{}", node.node_index()),
                          outcome == nodes::FrameOutcome::gait_stored ? "gait_stored" : "gait_stale",
                          fmt::format("seq={}", d.frame.payload[7]));
        }
    }
    if (auto next = bus(index).next_activity()) ensure_bus_service(index, std::max(*next, now));
}

void Simulation::plant_step(SimTime now) {
    const double dt = to_seconds(now - plant_time_);
    plant_time_ = now;
    double actuator = 0.0;
    for (std::size_t k = 0; k < motors_.size(); ++k) {
        const auto step = plant::motor_step(motors_[k], torque_cmds_[k], 0.0, dt);
        motors_[k] = step.state;
        actuator += step.electrical_power;
    }
    const double electronics = energy_.electronics_power();
    const bool was_depleted = energy_.depleted();
    energy_.draw(actuator + electronics, dt);
    actuator_energy_j_ += actuator * dt;
    electronics_energy_j_ += electronics * dt;
    last_actuator_power_ = actuator;
    if (!was_depleted && energy_.depleted()) log_event(now, "supervisor", "battery_depleted", "");
}

std::array<double, nodes::kMotorsPerNode> Simulation::node_motor_angles(std::size_t node) const {
    std::array<double, nodes::kMotorsPerNode> out{};
    for (std::size_t m = 0; m < nodes::kMotorsPerNode; ++m) out[m] = motors_[node * nodes::kMotorsPerNode + m].angle;
    return out;
}

void Simulation::control_tick(std::size_t n, SimTime now) {
    auto& node = net_.locals[n];
    const auto measured = node_motor_angles(n);
    const auto torque = node.control_tick(node.clock().local_time(now), measured);
    std::copy(torque.begin(), torque.end(), torque_cmds_.begin() + static_cast<std::ptrdiff_t>(n * nodes::kMotorsPerNode));

    if (node.params())
        for (std::size_t v = 0; v < nodes::kVertebraePerNode; ++v)
            if (node.saturated()[v]) ++saturations_[node.first_vertebra() + v];

    if (node.synchronized()) {
        const double err = std::abs(node.last_network_time() - to_seconds(now));
        max_sync_error_ = std::max(max_sync_error_, err);
        last_sync_error_ = n == 0 ? err : std::max(last_sync_error_, err);
    }
    if (observer_) observer_->on_control_tick(now, node);
}

void Simulation::diag_tick(std::size_t n, SimTime now) {
    const auto measured = node_motor_angles(n);
    submit(2, {net_.locals[n].diagnostics_tick(now, measured)});
}

void Simulation::apply(const Command& c, SimTime now) {
    const Ack ack = apply_command(inputs_, c, scenario_.fin_limit);
    if (ack.status == AckStatus::rejected) {
        log_event(now, "supervisor", "command_rejected", ack.reason);
    } else if (c.affects_body()) {
        submit(1, net_.supervisor.set_command(inputs_.to_command(scenario_.fin_limit), now));
        propulsion_ = plant::propulsion_estimate(inputs_.gait, scenario_.gait_shape(), scenario_.body,
                                                 scenario_.plant.drag);
        log_event(now, "supervisor", to_string(c.kind), command_payload(c).dump());
        if (logs_) write_timeline_row(logs_->timeline, {now, c});
    }
    if (observer_) observer_->on_command(now, c, ack);
}

void Simulation::log_event(SimTime now, const std::string& node, const std::string& event,
                           const std::string& detail) {
    if (!logs_) return;
    std::string quoted = detail;
    if (quoted.find_first_of(",\"") != std::string::npos) {
        std::string q = "\"";
        for (char ch : detail) {
            if (ch == '"') q += '"';
            q += ch;
        }
        quoted = q + "\"";
    }
    logs_->events << fmt::format("{:.9f},{},{},{}\n", to_seconds(now), node, event, quoted);
}

std::vector<kinematics::VertebraJointState> Simulation::measured_joints() const {
    std::vector<kinematics::VertebraJointState> joints(net_.topology.vertebra_count);
    for (std::size_t v = 0; v < joints.size(); ++v) {
        const std::size_t m = v * nodes::kMotorsPerVertebra;
        joints[v] = kinematics::joints_from_motors(
            {motors_[m].angle, motors_[m + 1].angle, motors_[m + 2].angle, scenario_.gear_ratio});
    }
    return joints;
}

void Simulation::log_sample(SimTime now) {
    std::string row = fmt::format("{:.6f}", to_seconds(now));
    for (const auto& j : measured_joints()) row += fmt::format(",{:.9f},{:.9f},{:.9f}", j.yaw, j.pitch, j.roll);
    const auto& fins = net_.supervisor.fins();
    row += fmt::format(",{:.9f},{:.9f}\n", fins.left, fins.right);
    logs_->joints << row;
    logs_->power << fmt::format("{:.6f},{:.6f},{:.6f},{:.6f}\n", to_seconds(now), last_actuator_power_,
                                energy_.electronics_power(), energy_.remaining_wh());
}

void Simulation::log_pose(SimTime now) {
    const auto joints = measured_joints();
    const auto pose = kinematics::forward_kinematics(joints, scenario_.body, joints.size());
    for (std::size_t i = 0; i < pose.size(); ++i) {
        const auto& f = pose[i];
        logs_->pose << fmt::format("{:.6f},{},{:.9f},{:.9f},{:.9f},{:.12f},{:.12f},{:.12f},{:.12f}\n",
                                   to_seconds(now), i, f.position.x(), f.position.y(), f.position.z(),
                                   f.orientation.w(), f.orientation.x(), f.orientation.y(), f.orientation.z());
    }
}

void Simulation::log_load(SimTime now) {
    const SimTime begin = now - scenario_.log.load_window;
    double load[2];
    for (int i = 0; i < 2; ++i) {
        load[i] = bus(i + 1).load(begin, now);
        load_sum_[i] += load[i];
        load_max_[i] = std::max(load_max_[i], load[i]);
        bus(i + 1).prune_history(begin);
    }
    ++load_windows_;
    if (logs_) logs_->load << fmt::format("{:.6f},{:.6f},{:.6f}\n", to_seconds(begin), load[0], load[1]);
}

Snapshot Simulation::snapshot() const {
    Snapshot s;
    s.time = now();
    s.joints = measured_joints();
    s.pose = kinematics::forward_kinematics(s.joints, scenario_.body, s.joints.size());
    s.fins = net_.supervisor.fins();
    s.battery_wh_remaining = energy_.remaining_wh();
    const SimTime window = scenario_.log.load_window;
    for (int i = 0; i < 2; ++i)
        s.bus_loads[i] = s.time > 0 ? bus(i + 1).load(std::max<SimTime>(0, s.time - window), s.time) : 0.0;
    s.saturated.assign(net_.topology.vertebra_count, false);
    for (const auto& node : net_.locals)
        for (std::size_t v = 0; v < nodes::kVertebraePerNode; ++v)
            s.saturated[node.first_vertebra() + v] = node.params().has_value() && node.saturated()[v];
    s.sync_error = last_sync_error_;
    s.propulsion = propulsion_;
    s.inputs = inputs_;
    s.has_command = net_.supervisor.command().has_value();
    return s;
}

RunMetrics Simulation::metrics() const {
    RunMetrics m;
    m.simulated_s = to_seconds(now());
    m.vertebra_count = net_.topology.vertebra_count;
    m.local_nodes = net_.topology.local_node_count();
    m.seed = scenario_.seed;
    m.saturations = saturations_;
    m.max_sync_error = max_sync_error_;
    for (int i = 0; i < 2; ++i) {
        m.mean_bus_load[i] = load_windows_ ? load_sum_[i] / static_cast<double>(load_windows_) : 0.0;
        m.max_window_load[i] = load_max_[i];
        m.frames[i] = bus(i + 1).delivered_count();
        m.bits[i] = bus(i + 1).delivered_bits();
    }
    m.consumed_wh = energy_.consumed;
    m.remaining_wh = energy_.remaining_wh();
    const double elapsed = to_seconds(plant_time_);
    m.mean_actuator_power = elapsed > 0 ? actuator_energy_j_ / elapsed : 0.0;
    m.mean_electronics_power = elapsed > 0 ? electronics_energy_j_ / elapsed : 0.0;
    m.pressure_actions = pressure_actions_;
    m.propulsion = propulsion_;
    return m;
}

RunMetrics Simulation::finish() {
    if (finished_) return final_metrics_;
    finished_ = true;
    final_metrics_ = metrics();
    if (logs_) {
        RunArtifacts artifacts = make_artifacts(final_metrics_, scenario_, energy_);
        save_artifacts(out_dir_, artifacts);
        std::ofstream report = open_log(out_dir_ / "report.txt");
        report << summarize(artifacts);
        logs_.reset();
    }
    return final_metrics_;
}

RunMetrics run(const Scenario& scenario, const fs::path& out_dir) {
    Simulation sim(scenario, out_dir);
    return sim.run();
}

}  // namespace eelsim::sim
