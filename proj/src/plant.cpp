#include "eelsim/plant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "eelsim/error.hpp"

namespace eelsim::plant {

void MotorParams::validate() const {
    if (!(inertia > 0)) throw InvalidInput("motor inertia must be > 0");
    if (!(viscous_friction >= 0)) throw InvalidInput("viscous friction must be >= 0");
    if (!(torque_limit > 0)) throw InvalidInput("torque limit must be > 0");
    if (!(efficiency > 0 && efficiency <= 1)) throw InvalidInput("efficiency must lie in (0, 1]");
    if (!(standby_power >= 0)) throw InvalidInput("standby power must be >= 0");
}

MotorStep motor_step(const MotorState& m, double torque_cmd, double load_torque, double dt) {
    if (!(dt > 0)) throw InvalidInput("motor step requires dt > 0");
    const MotorParams& p = m.params;
    MotorStep out;
    out.applied_torque = std::clamp(torque_cmd, -p.torque_limit, p.torque_limit);
    out.state = m;
    out.state.velocity += dt * (out.applied_torque - p.viscous_friction * m.velocity - load_torque) / p.inertia;
    out.state.angle += dt * out.state.velocity;
    out.electrical_power = std::abs(out.applied_torque * out.state.velocity) / p.efficiency + p.standby_power;
    return out;
}

void EnergyBudget::validate() const {
    if (!(battery_voltage > 0 && battery_capacity > 0 && battery_mass > 0 && module_power > 0 &&
          module_count > 0 && actuator_power_max > 0))
        throw InvalidInput("energy budget constants must be positive");
}

void EnergyBudget::draw(double watts, double dt) {
    consumed = std::min(capacity_wh(), consumed + watts * dt / 3600.0);
}

double endurance(const EnergyBudget& e, double duty) {
    if (!(duty > 0 && duty <= 1)) throw InvalidInput("duty must lie in (0, 1]");
    return e.capacity_wh() / (duty * e.actuator_power_max + e.electronics_power());
}

BuoyancyRow buoyancy_of(std::string part, double actual_mass, double volume, double water_density) {
    BuoyancyRow row;
    row.part = std::move(part);
    row.actual_mass = actual_mass;
    row.neutral_mass = water_density * volume;
    row.net_buoyancy = kGravity * (row.neutral_mass - actual_mass);
    row.density_ratio = actual_mass / row.neutral_mass;
    return row;
}

BuoyancyReport buoyancy_report(const MassBudget& mb, const kinematics::VertebraGeometry& geom) {
    geom.validate();
    BuoyancyReport report;
    report.vertebra_neutral_mass = mb.water_density * kinematics::displaced_volume(geom);
    report.rows.push_back(buoyancy_of("head", mb.head_mass, mb.head_volume, mb.water_density));
    for (std::size_t i = 0; i < mb.vertebra_masses.size(); ++i)
        report.rows.push_back(buoyancy_of("vertebra " + std::to_string(i), mb.vertebra_masses[i],
                                          kinematics::displaced_volume(geom), mb.water_density));
    for (const auto& row : report.rows) report.total_net_buoyancy += row.net_buoyancy;
    return report;
}

const char* to_string(PressureAction a) {
    switch (a) {
    case PressureAction::none: return "none";
    case PressureAction::vent: return "vent";
    case PressureAction::inject: return "inject";
    }
    return "none";
}

void PressureState::validate() const {
    if (!(valve_threshold > 0 && regulator_threshold > 0)) throw InvalidInput("pressure thresholds must be > 0");
}

double external_pressure(double depth, double water_density) {
    return kAtmosphericPressure + water_density * kGravity * depth;
}

PressureStep pressure_step(const PressureState& p, double depth) {
    if (!(depth >= 0)) throw InvalidInput("depth must be >= 0");
    p.validate();
    PressureStep out{p, PressureAction::none};
    out.state.depth = depth;
    const double external = external_pressure(depth, p.water_density);
    if (p.internal_pressure > external + p.valve_threshold) {
        out.state.internal_pressure = external;
        out.action = PressureAction::vent;
    } else if (p.internal_pressure < external - p.regulator_threshold) {
        const double needed = external - p.internal_pressure;
        if (needed > p.air_reserve) throw ExhaustionError("air reserve exhausted");
        out.state.air_reserve -= needed;
        out.state.internal_pressure = external;
        out.action = PressureAction::inject;
    }
    return out;
}

namespace {

double ellipse_perimeter(double major, double minor) {
    const double a = major / 2.0;
    const double b = minor / 2.0;
    const double h = (a - b) * (a - b) / ((a + b) * (a + b));
    return kPi * (a + b) * (1.0 + 3.0 * h / (10.0 + std::sqrt(4.0 - 3.0 * h)));
}

struct Segment {
    Eigen::Vector3d center;
    Eigen::Quaterniond orientation;
};

std::vector<Segment> segments(const JointTrajectory& motion, double t, const kinematics::BodyDimensions& body,
                              std::size_t vertebra_count) {
    const auto joints = motion(t);
    const auto pose = kinematics::forward_kinematics(joints, body, vertebra_count);
    std::vector<Segment> out;
    out.reserve(vertebra_count);
    const Eigen::Vector3d half(body.vertebra.segment_length / 2.0, 0.0, 0.0);
    for (std::size_t i = 1; i <= vertebra_count; ++i)
        out.push_back({pose[i].position + pose[i].orientation * half, pose[i].orientation});
    return out;
}

}  // namespace

PropulsionEstimate propulsion_estimate(const JointTrajectory& motion, double period,
                                       const kinematics::BodyDimensions& body, std::size_t vertebra_count,
                                       const DragCoefficients& drag, int samples) {
    PropulsionEstimate est;
    if (!(period > 0) || !std::isfinite(period)) return est;
    if (samples < 8) throw InvalidInput("propulsion estimate needs at least 8 samples per cycle");

    const auto& g = body.vertebra;
    const double side_area = g.ellipse_major_axis * g.segment_length;
    const double top_area = g.ellipse_minor_axis * g.segment_length;
    const double wetted_area = ellipse_perimeter(g.ellipse_major_axis, g.ellipse_minor_axis) * g.segment_length;
    const double q = 0.5 * drag.water_density;
    const Eigen::Vector3d coeff(q * drag.tangential * wetted_area, q * drag.normal * side_area,
                                q * drag.normal * top_area);

    const double dt = period / samples;
    const double h = dt * 1e-2;
    double thrust = 0.0;
    double power = 0.0;
    for (int k = 0; k < samples; ++k) {
        const double t = k * dt;
        const auto before = segments(motion, t - h, body, vertebra_count);
        const auto after = segments(motion, t + h, body, vertebra_count);
        const auto now = segments(motion, t, body, vertebra_count);
        for (std::size_t i = 0; i < now.size(); ++i) {
            const Eigen::Vector3d v = (after[i].center - before[i].center) / (2.0 * h);
            const Eigen::Vector3d v_local = now[i].orientation.conjugate() * v;
            const Eigen::Vector3d f_local = -coeff.cwiseProduct(v_local.cwiseAbs().cwiseProduct(v_local));
            const Eigen::Vector3d f = now[i].orientation * f_local;
            thrust += -f.x();
            power += -f.dot(v);
        }
    }
    est.mean_thrust = thrust / samples;
    est.mean_power = power / samples;
    return est;
}

PropulsionEstimate propulsion_estimate(const gait::GaitParams& params, const gait::GaitShape& shape,
                                       const kinematics::BodyDimensions& body, const DragCoefficients& drag,
                                       int samples) {
    if (!(params.frequency > 0)) return {};
    JointTrajectory motion = [&](double t) {
        std::vector<kinematics::VertebraJointState> joints(shape.vertebra_count);
        for (std::size_t i = 0; i < shape.vertebra_count; ++i) joints[i] = gait::setpoint(i, t, params, shape);
        return joints;
    };
    return propulsion_estimate(motion, 1.0 / params.frequency, body, shape.vertebra_count, drag, samples);
}

}  // namespace eelsim::plant
