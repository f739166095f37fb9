#include "eelsim/nodes.hpp"

#include <cmath>
#include <string>

#include "eelsim/error.hpp"

namespace eelsim::nodes {

gait::Payload SyncMessage::encode() const {
    gait::Payload b{};
    for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(time_ms >> (8 * i));
    b[4] = static_cast<std::uint8_t>(seq);
    b[5] = static_cast<std::uint8_t>(seq >> 8);
    return b;
}

SyncMessage SyncMessage::decode(std::span<const std::uint8_t> payload) {
    if (payload.size() != 8) throw InvalidFrame("sync payload must be 8 bytes");
    SyncMessage m;
    for (int i = 0; i < 4; ++i) m.time_ms |= static_cast<std::uint32_t>(payload[i]) << (8 * i);
    m.seq = static_cast<std::uint16_t>(payload[4] | (payload[5] << 8));
    return m;
}

gait::Payload DiagFrame::encode(bool* saturated) const {
    bool sat = false;
    gait::Payload b{};
    b[0] = node;
    b[1] = seq;
    std::size_t k = 2;
    for (const auto& j : joints)
        for (double angle : {j.yaw, j.pitch, j.roll})
            b[k++] = static_cast<std::uint8_t>(gait::quantize_signed(rad_to_deg(angle), 0.5, sat));
    if (saturated) *saturated = sat;
    return b;
}

DiagFrame DiagFrame::decode(std::span<const std::uint8_t> payload) {
    if (payload.size() != 8) throw InvalidFrame("diagnostic payload must be 8 bytes");
    DiagFrame d;
    d.node = payload[0];
    d.seq = payload[1];
    auto angle = [&](std::size_t k) { return deg_to_rad(static_cast<std::int8_t>(payload[k]) * 0.5); };
    for (std::size_t v = 0; v < kVertebraePerNode; ++v)
        d.joints[v] = {angle(2 + 3 * v), angle(3 + 3 * v), angle(4 + 3 * v)};
    return d;
}

void Periods::validate() const {
    if (sync <= 0 || gait <= 0 || control <= 0 || diag <= 0) throw InvalidInput("periods must be > 0");
    if (gait % sync != 0) throw InvalidInput("gait period must be a multiple of the sync period");
}

// ---------------------------------------------------------------------------

Supervisor::Supervisor(Periods periods) : periods_(periods) { periods_.validate(); }

std::vector<CanFrame> Supervisor::gait_frames(SimTime now) {
    gait::GaitParams p = command_->gait;
    p.seq = gait_seq_++;
    const auto encoded = gait::encode_gait(p);
    const auto fins = gait::encode_fins(command_->fins, fin_seq_++);
    return {CanFrame::make(kGaitId, encoded.payload, now, kSupervisorStation),
            CanFrame::make(kFinId, fins, now, kSupervisorStation)};
}

std::vector<CanFrame> Supervisor::tick(SimTime now) {
    std::vector<CanFrame> out;
    const SyncMessage sync{static_cast<std::uint32_t>(now / milliseconds(1)), sync_seq_++};
    out.push_back(CanFrame::make(kSyncId, sync.encode(), now, kSupervisorStation));
    if (command_ && now % periods_.gait == 0) {
        auto g = gait_frames(now);
        out.insert(out.end(), g.begin(), g.end());
    }
    return out;
}

std::vector<CanFrame> Supervisor::set_command(const OperatorCommand& cmd, SimTime now) {
    OperatorCommand normalized = cmd;
    normalized.gait.seq = 0;
    if (command_ && *command_ == normalized) return {};
    command_ = normalized;
    fins_ = normalized.fins;
    last_change_ = now;
    return gait_frames(now);
}

void Supervisor::on_diagnostics(const CanFrame& frame) {
    if (frame.id < kDiagBaseId || frame.id > kDiagBaseId + 0xFF || frame.dlc != 8) return;
    const DiagFrame d = DiagFrame::decode(frame.data());
    archive_[d.node] = d;
}

// ---------------------------------------------------------------------------

double ClockModel::local_time(SimTime network) const {
    return to_seconds(network) * (1.0 + drift_ppm * 1e-6) + initial_offset_s;
}

double Pid::update(double error, double dt) {
    integral_ += error * dt;
    const double derivative = primed_ ? (error - previous_error_) / dt : 0.0;
    previous_error_ = error;
    primed_ = true;
    return gains_.kp * error + gains_.ki * integral_ + gains_.kd * derivative;
}

void Pid::reset() {
    integral_ = 0.0;
    previous_error_ = 0.0;
    primed_ = false;
}

bool seq_is_newer(std::uint8_t seq, std::uint8_t last) {
    const auto delta = static_cast<std::uint8_t>(seq - last);
    return delta >= 1 && delta <= 127;
}

LocalController::LocalController(std::size_t node_index, ClockModel clock, LocalControllerConfig config)
    : node_index_(node_index), clock_(clock), config_(std::move(config)) {
    if (first_vertebra() + kVertebraePerNode > config_.shape.vertebra_count)
        throw TopologyError("node " + std::to_string(node_index) + " has no vertebrae in this chain");
    pids_.fill(Pid(config_.gains));
}

FrameOutcome LocalController::on_frame(const CanFrame& frame, double local_now) {
    switch (frame.id) {
    case kSyncId: {
        const SyncMessage m = SyncMessage::decode(frame.data());
        offset_ = static_cast<double>(m.time_ms) * 1e-3 - local_now;
        synchronized_ = true;
        return FrameOutcome::resynchronized;
    }
    case kGaitId: {
        const gait::GaitParams p = gait::decode_gait(frame.data());
        if (params_ && !seq_is_newer(p.seq, params_->seq)) return FrameOutcome::gait_stale;
        params_ = p;
        return FrameOutcome::gait_stored;
    }
    default:
        return FrameOutcome::ignored;
    }
}

MotorArray LocalController::control_tick(double local_now, std::span<const double, kMotorsPerNode> measured) {
    MotorArray torque{};
    last_network_time_ = network_time(local_now);
    if (!params_) return torque;

    const double dt = to_seconds(config_.control_period);
    for (std::size_t v = 0; v < kVertebraePerNode; ++v) {
        const std::size_t vertebra = first_vertebra() + v;
        const auto raw = gait::raw_setpoint(vertebra, last_network_time_, *params_, config_.shape);
        const auto verdict = kinematics::check_joint_limits(raw, config_.shape.limits);
        setpoints_[v] = verdict.clamped;
        saturated_[v] = verdict.any();
        const auto motors = kinematics::motors_from_joints(verdict.clamped, config_.gear_ratio);
        references_[3 * v + 0] = motors.m1;
        references_[3 * v + 1] = motors.m2;
        references_[3 * v + 2] = motors.m3;
    }
    for (std::size_t m = 0; m < kMotorsPerNode; ++m) torque[m] = pids_[m].update(references_[m] - measured[m], dt);
    return torque;
}

CanFrame LocalController::diagnostics_tick(SimTime now, std::span<const double, kMotorsPerNode> measured) {
    DiagFrame d;
    d.node = static_cast<std::uint8_t>(node_index_);
    d.seq = diag_seq_++;
    for (std::size_t v = 0; v < kVertebraePerNode; ++v)
        d.joints[v] = kinematics::joints_from_motors(
            {measured[3 * v], measured[3 * v + 1], measured[3 * v + 2], config_.gear_ratio});
    return CanFrame::make(static_cast<std::uint16_t>(kDiagBaseId + node_index_), d.encode(), now, station());
}

Topology Topology::assemble(std::size_t vertebra_count) {
    if (vertebra_count == 0 || vertebra_count % kVertebraePerNode != 0)
        throw TopologyError("vertebra count must be even and >= 2, got " + std::to_string(vertebra_count));
    return Topology{vertebra_count};
}

Network assemble_network(const NetworkConfig& config) {
    const Topology topology = Topology::assemble(config.vertebra_count);
    LocalControllerConfig controller = config.controller;
    controller.shape.vertebra_count = topology.vertebra_count;
    controller.control_period = config.periods.control;

    Network net{topology, Supervisor(config.periods), {}, canbus::Bus("bus1", config.bitrate),
                canbus::Bus("bus2", config.bitrate)};
    net.control_bus.attach(kSupervisorStation);
    net.diag_bus.attach(kSupervisorStation);
    for (std::size_t n = 0; n < topology.local_node_count(); ++n) {
        const ClockModel clock = n < config.clocks.size() ? config.clocks[n] : ClockModel{};
        net.locals.emplace_back(n, clock, controller);
        net.control_bus.attach(station_of(n));
        net.diag_bus.attach(station_of(n));
    }
    return net;
}

}  // namespace eelsim::nodes
