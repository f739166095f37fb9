#include "eelsim/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "eelsim/error.hpp"

namespace eelsim::kinematics {

namespace {

bool finite(double v) { return std::isfinite(v); }

void require_finite(double v, const char* what) {
    if (!finite(v)) throw InvalidInput(std::string(what) + " must be finite");
}

}  // namespace

void VertebraGeometry::validate() const {
    if (!(ellipse_major_axis > 0 && ellipse_minor_axis > 0 && segment_length > 0))
        throw InvalidInput("vertebra geometry must be strictly positive");
    if (ellipse_major_axis < ellipse_minor_axis)
        throw InvalidInput("ellipse major axis must not be shorter than the minor axis");
}

void BodyDimensions::validate() const {
    vertebra.validate();
    if (!(head_length >= 0 && tail_length >= 0)) throw InvalidInput("head and tail lengths must be >= 0");
}

double BodyDimensions::straight_length(std::size_t vertebra_count) const {
    return head_length + static_cast<double>(vertebra_count) * vertebra.segment_length + tail_length;
}

void JointLimits::validate() const {
    if (!(yaw_max > 0 && pitch_max > 0 && roll_max > 0))
        throw InvalidInput("joint limits must be strictly positive");
}

FiberRadii FiberRadii::calibrated(double outer_strain, double inner_strain, double reference_yaw,
                                  const VertebraGeometry& geom) {
    if (!(std::abs(reference_yaw) > 0)) throw InvalidInput("reference yaw must be non-zero");
    const double scale = geom.segment_length / std::abs(reference_yaw);
    return {std::abs(outer_strain) * scale, std::abs(inner_strain) * scale};
}

FiberRadii FiberRadii::prototype_skin(const VertebraGeometry& geom) {
    return calibrated(0.24, -0.28, deg_to_rad(30.0), geom);
}

VertebraJointState joints_from_motors(const ActuatorTriple& a) {
    require_finite(a.m1, "m1");
    require_finite(a.m2, "m2");
    require_finite(a.m3, "m3");
    require_finite(a.gear_ratio, "gear_ratio");
    if (!(a.gear_ratio > 0)) throw InvalidInput("gear_ratio must be > 0");
    const double k = a.gear_ratio;
    return {(a.m1 - a.m2) / (2.0 * k), (a.m1 + a.m2) / (2.0 * k), a.m3 / k};
}

ActuatorTriple motors_from_joints(const VertebraJointState& j, double gear_ratio) {
    require_finite(j.yaw, "yaw");
    require_finite(j.pitch, "pitch");
    require_finite(j.roll, "roll");
    require_finite(gear_ratio, "gear_ratio");
    if (!(gear_ratio > 0)) throw InvalidInput("gear_ratio must be > 0");
    const double k = gear_ratio;
    return {k * (j.pitch + j.yaw), k * (j.pitch - j.yaw), k * j.roll, k};
}

LimitVerdict check_joint_limits(const VertebraJointState& j, const JointLimits& lim) {
    LimitVerdict v;
    v.yaw_violated = std::abs(j.yaw) > lim.yaw_max;
    v.pitch_violated = std::abs(j.pitch) > lim.pitch_max;
    v.roll_violated = std::abs(j.roll) > lim.roll_max;
    v.clamped = {std::clamp(j.yaw, -lim.yaw_max, lim.yaw_max),
                 std::clamp(j.pitch, -lim.pitch_max, lim.pitch_max),
                 std::clamp(j.roll, -lim.roll_max, lim.roll_max)};
    return v;
}

BodyPose forward_kinematics(std::span<const VertebraJointState> joints, const VertebraGeometry& geom,
                            double head_length, double tail_length, std::size_t vertebra_count) {
    if (joints.size() != vertebra_count)
        throw TopologyError("expected " + std::to_string(vertebra_count) + " joint states, got " +
                            std::to_string(joints.size()));

    BodyPose pose;
    pose.reserve(vertebra_count + 2);
    pose.push_back(Frame{});

    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
    double advance = head_length;
    for (const auto& j : joints) {
        position += orientation * Eigen::Vector3d(advance, 0.0, 0.0);
        orientation = orientation * Eigen::AngleAxisd(j.yaw, Eigen::Vector3d::UnitZ()) *
                      Eigen::AngleAxisd(j.pitch, Eigen::Vector3d::UnitY()) *
                      Eigen::AngleAxisd(j.roll, Eigen::Vector3d::UnitX());
        orientation.normalize();
        pose.push_back(Frame{position, orientation});
        advance = geom.segment_length;
    }
    position += orientation * Eigen::Vector3d(advance + tail_length, 0.0, 0.0);
    pose.push_back(Frame{position, orientation});
    return pose;
}

BodyPose forward_kinematics(std::span<const VertebraJointState> joints, const BodyDimensions& body,
                            std::size_t vertebra_count) {
    return forward_kinematics(joints, body.vertebra, body.head_length, body.tail_length, vertebra_count);
}

FiberStrain skin_fiber_strain(double yaw, const VertebraGeometry& geom, const FiberRadii& radii) {
    require_finite(yaw, "yaw");
    if (std::abs(yaw) > kPi / 2) throw InvalidInput("skin strain model is valid for |yaw| <= pi/2");
    const double bend = std::abs(yaw) / geom.segment_length;
    return {radii.outer * bend, -radii.inner * bend};
}

double displaced_volume(const VertebraGeometry& geom) {
    return kPi * (geom.ellipse_major_axis / 2.0) * (geom.ellipse_minor_axis / 2.0) * geom.segment_length;
}

}  // namespace eelsim::kinematics
