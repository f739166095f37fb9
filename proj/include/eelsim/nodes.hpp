#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "eelsim/canbus.hpp"
#include "eelsim/gait.hpp"
#include "eelsim/kinematics.hpp"
#include "eelsim/units.hpp"

namespace eelsim::nodes {

using canbus::CanFrame;
using canbus::NodeId;

// Identifier map. Sync wins arbitration against everything else on bus 1.
inline constexpr std::uint16_t kSyncId = 0x010;
inline constexpr std::uint16_t kGaitId = 0x020;
inline constexpr std::uint16_t kFinId = 0x030;
inline constexpr std::uint16_t kDiagBaseId = 0x100;

inline constexpr NodeId kSupervisorStation = 0;
constexpr NodeId station_of(std::size_t node_index) { return static_cast<NodeId>(node_index + 1); }

inline constexpr std::size_t kVertebraePerNode = 2;
inline constexpr std::size_t kMotorsPerVertebra = 3;
inline constexpr std::size_t kMotorsPerNode = kVertebraePerNode * kMotorsPerVertebra;

using MotorArray = std::array<double, kMotorsPerNode>;

/// Time-topic broadcast: u32 network milliseconds (LE), u16 seq (LE), two zero bytes.
struct SyncMessage {
    std::uint32_t time_ms = 0;
    std::uint16_t seq = 0;

    gait::Payload encode() const;
    static SyncMessage decode(std::span<const std::uint8_t> payload);
};

/// Joint feedback of one node: node id, seq, then yaw/pitch/roll of both
/// vertebrae as signed bytes at 0.5 deg per LSB.
struct DiagFrame {
    std::uint8_t node = 0;
    std::uint8_t seq = 0;
    std::array<kinematics::VertebraJointState, kVertebraePerNode> joints{};

    gait::Payload encode(bool* saturated = nullptr) const;
    static DiagFrame decode(std::span<const std::uint8_t> payload);
};

struct Periods {
    SimTime sync = milliseconds(10);
    SimTime gait = milliseconds(100);
    SimTime control = milliseconds(1);
    SimTime diag = milliseconds(50);

    void validate() const;
};

struct OperatorCommand {
    gait::GaitParams gait;  // seq ignored; the supervisor owns numbering
    gait::FinCommand fins;

    friend bool operator==(const OperatorCommand&, const OperatorCommand&) = default;
};

/// Head computer: owns the operator command, the network time reference and
/// the fin motors; broadcasts sync, gait and fin frames on bus 1 and archives
/// diagnostics from bus 2.
class Supervisor {
public:
    explicit Supervisor(Periods periods = {});

    /// Invoked at multiples of the sync period. Emits a sync frame and, on
    /// gait-period boundaries once a command exists, gait + fin frames.
    std::vector<CanFrame> tick(SimTime now);

    /// Sets the operator command. A changed command is broadcast right away.
    std::vector<CanFrame> set_command(const OperatorCommand& cmd, SimTime now);

    void on_diagnostics(const CanFrame& frame);

    const std::optional<OperatorCommand>& command() const { return command_; }
    const gait::FinCommand& fins() const { return fins_; }
    const Periods& periods() const { return periods_; }
    std::uint8_t last_gait_seq() const { return static_cast<std::uint8_t>(gait_seq_ - 1); }
    SimTime last_command_change() const { return last_change_; }
    const std::map<std::uint8_t, DiagFrame>& diagnostics() const { return archive_; }

private:
    std::vector<CanFrame> gait_frames(SimTime now);

    Periods periods_;
    std::optional<OperatorCommand> command_;
    gait::FinCommand fins_;
    SimTime last_change_ = -1;
    std::uint16_t sync_seq_ = 0;
    std::uint8_t gait_seq_ = 0;
    std::uint8_t fin_seq_ = 0;
    std::map<std::uint8_t, DiagFrame> archive_;
};

/// Local oscillator: local = (1 + drift) * network + initial offset.
struct ClockModel {
    double drift_ppm = 0.0;
    double initial_offset_s = 0.0;

    double local_time(SimTime network) const;
};

struct PidGains {
    double kp = 8.0;
    double ki = 0.5;
    double kd = 0.1;
};

class Pid {
public:
    explicit Pid(PidGains gains = {}) : gains_(gains) {}

    double update(double error, double dt);
    void reset();

    const PidGains& gains() const { return gains_; }

private:
    PidGains gains_;
    double integral_ = 0.0;
    double previous_error_ = 0.0;
    bool primed_ = false;
};

struct LocalControllerConfig {
    gait::GaitShape shape;
    PidGains gains;
    double gear_ratio = 1.0;
    SimTime control_period = milliseconds(1);
};

enum class FrameOutcome {
    resynchronized,
    gait_stored,
    gait_stale,
    ignored,
};

/// Controller of two adjacent vertebrae (six motors). Computes its own
/// setpoints from the last broadcast parameters and its synchronized clock.
class LocalController {
public:
    LocalController(std::size_t node_index, ClockModel clock, LocalControllerConfig config);

    std::size_t node_index() const { return node_index_; }
    std::size_t first_vertebra() const { return node_index_ * kVertebraePerNode; }
    NodeId station() const { return station_of(node_index_); }
    const ClockModel& clock() const { return clock_; }

    FrameOutcome on_frame(const CanFrame& frame, double local_now);

    /// Position loops: returns six torque commands for the motors ordered
    /// (m1, m2, m3) of the first vertebra then the second.
    MotorArray control_tick(double local_now, std::span<const double, kMotorsPerNode> measured);

    CanFrame diagnostics_tick(SimTime now, std::span<const double, kMotorsPerNode> measured);

    /// Estimated network time at the given local clock reading.
    double network_time(double local_now) const { return local_now + offset_; }
    double offset() const { return offset_; }
    bool synchronized() const { return synchronized_; }

    const std::optional<gait::GaitParams>& params() const { return params_; }
    const std::array<kinematics::VertebraJointState, kVertebraePerNode>& setpoints() const { return setpoints_; }
    const std::array<bool, kVertebraePerNode>& saturated() const { return saturated_; }
    const MotorArray& motor_references() const { return references_; }
    double last_network_time() const { return last_network_time_; }

private:
    std::size_t node_index_;
    ClockModel clock_;
    LocalControllerConfig config_;

    double offset_ = 0.0;
    bool synchronized_ = false;
    std::optional<gait::GaitParams> params_;
    std::array<Pid, kMotorsPerNode> pids_;
    MotorArray references_{};
    std::array<kinematics::VertebraJointState, kVertebraePerNode> setpoints_{};
    std::array<bool, kVertebraePerNode> saturated_{};
    double last_network_time_ = 0.0;
    std::uint8_t diag_seq_ = 0;
};

/// True when `seq` is newer than `last` within half the 8-bit window.
bool seq_is_newer(std::uint8_t seq, std::uint8_t last);

struct Topology {
    std::size_t vertebra_count = kinematics::kDefaultVertebraCount;

    /// Throws TopologyError for odd or zero vertebra counts.
    static Topology assemble(std::size_t vertebra_count);

    std::size_t local_node_count() const { return vertebra_count / kVertebraePerNode; }
    std::size_t module_count() const { return local_node_count() + 1; }
    std::size_t motor_count() const { return vertebra_count * kMotorsPerVertebra; }
};

struct NetworkConfig {
    std::size_t vertebra_count = kinematics::kDefaultVertebraCount;
    Periods periods;
    LocalControllerConfig controller;
    double bitrate = canbus::kDefaultBitrate;
    std::vector<ClockModel> clocks;  // one per local node; missing entries are ideal clocks
};

/// Supervisor, one local controller per vertebra pair, and the two buses
/// (control, diagnostics) with every module attached to both.
struct Network {
    Topology topology;
    Supervisor supervisor;
    std::vector<LocalController> locals;
    canbus::Bus control_bus;
    canbus::Bus diag_bus;
};

Network assemble_network(const NetworkConfig& config);

}  // namespace eelsim::nodes
