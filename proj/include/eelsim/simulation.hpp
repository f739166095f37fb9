#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

#include "eelsim/canbus.hpp"
#include "eelsim/commands.hpp"
#include "eelsim/kinematics.hpp"
#include "eelsim/nodes.hpp"
#include "eelsim/plant.hpp"
#include "eelsim/scenario.hpp"
#include "eelsim/scheduler.hpp"

namespace eelsim::sim {

/// Aggregates collected while a run progresses; persisted as metrics.ini.
struct RunMetrics {
    double simulated_s = 0.0;
    std::size_t vertebra_count = 0;
    std::size_t local_nodes = 0;
    std::uint64_t seed = 0;

    std::vector<std::uint64_t> saturations;  // control ticks with a clamp, per vertebra
    double max_sync_error = 0.0;              // s, over synchronized control ticks

    std::array<double, 2> mean_bus_load{};
    std::array<double, 2> max_window_load{};
    std::array<std::uint64_t, 2> frames{};
    std::array<std::uint64_t, 2> bits{};

    double consumed_wh = 0.0;
    double remaining_wh = 0.0;
    double mean_actuator_power = 0.0;    // W
    double mean_electronics_power = 0.0; // W
    std::uint64_t pressure_actions = 0;

    plant::PropulsionEstimate propulsion;  // for the last operator gait

    std::uint64_t max_saturation() const;
};

/// Consistent view of the whole system at one scheduler instant.
struct Snapshot {
    SimTime time = 0;
    std::vector<kinematics::VertebraJointState> joints;  // measured
    kinematics::BodyPose pose;
    gait::FinCommand fins;
    double battery_wh_remaining = 0.0;
    std::array<double, 2> bus_loads{};
    std::vector<bool> saturated;
    double sync_error = 0.0;
    plant::PropulsionEstimate propulsion;
    OperatorInputs inputs;
    bool has_command = false;
};

/// Hooks for tests and tools that need to look inside a running simulation.
struct Observer {
    virtual ~Observer() = default;
    virtual void on_control_tick(SimTime /*now*/, const nodes::LocalController& /*node*/) {}
    virtual void on_delivery(int /*bus*/, const canbus::Delivery& /*d*/) {}
    virtual void on_command(SimTime /*now*/, const Command& /*c*/, const Ack& /*ack*/) {}
};

/// The digital twin: supervisor, local controllers, both buses and the motor
/// plant driven by one deterministic scheduler. Writes CSV logs when given an
/// output directory.
class Simulation {
public:
    explicit Simulation(Scenario scenario, std::filesystem::path out_dir = {});
    ~Simulation();

    Simulation(const Simulation&) = delete;
    Simulation& operator=(const Simulation&) = delete;

    /// The command becomes effective at `at` (>= now()).
    void schedule_command(const Command& c, SimTime at);

    void run_until(SimTime t);
    /// Runs to the scenario duration and finalizes the artifacts.
    RunMetrics run();
    /// Flushes logs and writes metrics.ini and report.txt. Idempotent.
    RunMetrics finish();

    SimTime now() const { return scheduler_.now(); }
    /// First supervisor tick strictly after now().
    SimTime next_supervisor_tick() const;

    Snapshot snapshot() const;
    RunMetrics metrics() const;

    void set_observer(Observer* observer) { observer_ = observer; }

    const Scenario& scenario() const { return scenario_; }
    const nodes::Network& network() const { return net_; }
    const std::vector<plant::MotorState>& motors() const { return motors_; }
    const plant::EnergyBudget& energy() const { return energy_; }
    const OperatorInputs& operator_inputs() const { return inputs_; }
    std::vector<kinematics::VertebraJointState> measured_joints() const;

private:
    struct Logs;

    void submit(int bus, const std::vector<canbus::CanFrame>& frames);
    void service_bus(int bus, SimTime now);
    void ensure_bus_service(int bus, SimTime at);
    void plant_step(SimTime now);
    void control_tick(std::size_t node, SimTime now);
    void diag_tick(std::size_t node, SimTime now);
    void apply(const Command& c, SimTime now);
    void log_event(SimTime now, const std::string& node, const std::string& event, const std::string& detail);
    void log_sample(SimTime now);
    void log_pose(SimTime now);
    void log_load(SimTime now);
    canbus::Bus& bus(int index) { return index == 1 ? net_.control_bus : net_.diag_bus; }
    const canbus::Bus& bus(int index) const { return index == 1 ? net_.control_bus : net_.diag_bus; }
    std::array<double, nodes::kMotorsPerNode> node_motor_angles(std::size_t node) const;

    Scenario scenario_;
    Scheduler scheduler_;
    nodes::Network net_;
    std::vector<plant::MotorState> motors_;
    std::vector<double> torque_cmds_;
    std::vector<std::uint64_t> saturations_;
    plant::EnergyBudget energy_;
    plant::PressureState pressure_;
    OperatorInputs inputs_;
    plant::PropulsionEstimate propulsion_;

    std::array<std::optional<SimTime>, 2> service_at_{};
    double max_sync_error_ = 0.0;
    double last_sync_error_ = 0.0;
    double actuator_energy_j_ = 0.0;
    double electronics_energy_j_ = 0.0;
    double last_actuator_power_ = 0.0;
    SimTime plant_time_ = 0;
    std::uint64_t pressure_actions_ = 0;
    double load_sum_[2] = {0.0, 0.0};
    double load_max_[2] = {0.0, 0.0};
    std::uint64_t load_windows_ = 0;
    bool finished_ = false;
    RunMetrics final_metrics_;

    std::filesystem::path out_dir_;
    std::unique_ptr<Logs> logs_;
    Observer* observer_ = nullptr;
};

/// Headless run: simulate the scenario to its duration, writing artifacts
/// into out_dir (created if needed).
RunMetrics run(const Scenario& scenario, const std::filesystem::path& out_dir);

/// Clock drifts and initial offsets drawn from the scenario seed.
std::vector<nodes::ClockModel> draw_clocks(const Scenario& scenario);

}  // namespace eelsim::sim
