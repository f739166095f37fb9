#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "eelsim/gait.hpp"
#include "eelsim/kinematics.hpp"
#include "eelsim/units.hpp"

namespace eelsim::plant {

/// Per-motor constants. Defaults are a calibration, not a measurement.
struct MotorParams {
    double inertia = 1e-4;           // kg m^2
    double viscous_friction = 5e-3;  // N m s
    double torque_limit = 1.2;       // N m
    double efficiency = 0.7;
    double standby_power = 0.15;     // W

    void validate() const;
};

struct MotorState {
    double angle = 0.0;     // rad
    double velocity = 0.0;  // rad/s
    MotorParams params;
};

struct MotorStep {
    MotorState state;
    double applied_torque = 0.0;
    double electrical_power = 0.0;  // W
};

/// Semi-implicit Euler: velocity first, then angle with the new velocity.
MotorStep motor_step(const MotorState& m, double torque_cmd, double load_torque, double dt);

struct EnergyBudget {
    double battery_voltage = 37.0;     // V
    double battery_capacity = 4.0;     // Ah
    double battery_mass = 1.1;         // kg
    double module_power = 2.15;        // W per computing module
    std::size_t module_count = 7;
    double actuator_power_max = 102.0; // W
    double consumed = 0.0;             // Wh

    void validate() const;
    double capacity_wh() const { return battery_voltage * battery_capacity; }
    double remaining_wh() const { return capacity_wh() - consumed; }
    double electronics_power() const { return module_power * static_cast<double>(module_count); }
    bool depleted() const { return consumed >= capacity_wh(); }

    /// Draws `watts` for `dt` seconds; consumption saturates at capacity.
    void draw(double watts, double dt);
};

/// Hours of operation at the given actuator duty, in (0, 1].
double endurance(const EnergyBudget& e, double duty);

struct MassBudget {
    double vertebra_target_mass = 2.7;  // kg
    double head_target_mass = 4.5;      // kg
    std::vector<double> vertebra_masses = std::vector<double>(kinematics::kDefaultVertebraCount, 2.7);
    double head_mass = 4.5;
    double head_volume = 4.5e-3;        // m^3, head is built to be neutral
    double water_density = kFreshWaterDensity;
};

struct BuoyancyRow {
    std::string part;
    double actual_mass = 0.0;   // kg
    double neutral_mass = 0.0;  // kg of displaced water
    double net_buoyancy = 0.0;  // N, positive floats
    double density_ratio = 0.0;
};

struct BuoyancyReport {
    double vertebra_neutral_mass = 0.0;
    std::vector<BuoyancyRow> rows;  // head, then each vertebra
    double total_net_buoyancy = 0.0;
};

BuoyancyRow buoyancy_of(std::string part, double actual_mass, double volume, double water_density);
BuoyancyReport buoyancy_report(const MassBudget& mb, const kinematics::VertebraGeometry& geom);

enum class PressureAction { none, vent, inject };

const char* to_string(PressureAction a);

struct PressureState {
    double depth = 0.0;                              // m
    double internal_pressure = kAtmosphericPressure; // Pa
    double valve_threshold = 2000.0;                 // Pa over external before venting
    double regulator_threshold = 2000.0;             // Pa under external before injecting
    double air_reserve = 200000.0;                   // Pa worth of injectable air
    double water_density = kFreshWaterDensity;

    void validate() const;
};

struct PressureStep {
    PressureState state;
    PressureAction action = PressureAction::none;
};

double external_pressure(double depth, double water_density = kFreshWaterDensity);

/// Relief valve / diving regulator balancing. Throws ExhaustionError when the
/// reserve cannot cover an injection.
PressureStep pressure_step(const PressureState& p, double depth);

struct DragCoefficients {
    double normal = 1.0;        // on the projected side / top area
    double tangential = 0.02;   // on the wetted surface
    double water_density = kFreshWaterDensity;
};

/// Resistive quadratic-drag estimate with the head held fixed. Not a
/// hydrodynamic model; every consumer must label it as an estimate.
struct PropulsionEstimate {
    double mean_thrust = 0.0;  // N along the head direction
    double mean_power = 0.0;   // W delivered to the water
    bool non_normative = true;
};

/// Joint states of the whole chain at time t.
using JointTrajectory = std::function<std::vector<kinematics::VertebraJointState>(double t)>;

PropulsionEstimate propulsion_estimate(const JointTrajectory& motion, double period,
                                       const kinematics::BodyDimensions& body, std::size_t vertebra_count,
                                       const DragCoefficients& drag, int samples = 240);

PropulsionEstimate propulsion_estimate(const gait::GaitParams& params, const gait::GaitShape& shape,
                                       const kinematics::BodyDimensions& body, const DragCoefficients& drag,
                                       int samples = 240);

}  // namespace eelsim::plant
