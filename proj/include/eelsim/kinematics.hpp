#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Geometry>

#include "eelsim/units.hpp"

namespace eelsim::kinematics {

inline constexpr std::size_t kDefaultVertebraCount = 12;

/// Elliptical vertebra section. Axes are full lengths; segment_length is the
/// spine spacing between consecutive inter-vertebral joints.
struct VertebraGeometry {
    double ellipse_major_axis = 0.18;
    double ellipse_minor_axis = 0.13;
    double segment_length = 0.15;

    void validate() const;
};

struct BodyDimensions {
    VertebraGeometry vertebra;
    double head_length = 0.35;
    double tail_length = 0.25;

    void validate() const;
    /// Head-to-tail-tip length of a straight body.
    double straight_length(std::size_t vertebra_count = kDefaultVertebraCount) const;
};

struct VertebraJointState {
    double yaw = 0.0;
    double pitch = 0.0;
    double roll = 0.0;
};

/// Symmetric +/- bounds per axis.
struct JointLimits {
    double yaw_max = deg_to_rad(30.0);
    double pitch_max = deg_to_rad(30.0);
    double roll_max = deg_to_rad(30.0);

    void validate() const;
};

/// Motor angles of one vertebra. m1/m2 are the coaxial differential pair.
struct ActuatorTriple {
    double m1 = 0.0;
    double m2 = 0.0;
    double m3 = 0.0;
    double gear_ratio = 1.0;
};

struct Frame {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();

    /// Local x axis: points tailward along the spine.
    Eigen::Vector3d spine_axis() const { return orientation * Eigen::Vector3d::UnitX(); }
};

/// Head, one frame per vertebra, then the tail tip.
using BodyPose = std::vector<Frame>;

struct LimitVerdict {
    bool yaw_violated = false;
    bool pitch_violated = false;
    bool roll_violated = false;
    VertebraJointState clamped;

    bool any() const { return yaw_violated || pitch_violated || roll_violated; }
};

struct FiberStrain {
    double outer = 0.0;
    double inner = 0.0;
};

/// Distances of the outer and inner skin fibers from the bending neutral axis.
struct FiberRadii {
    double outer = 0.0;
    double inner = 0.0;

    /// Inverts the linear elongation model against measured strains at one
    /// reference yaw. inner_strain is given as a (negative) contraction.
    static FiberRadii calibrated(double outer_strain, double inner_strain, double reference_yaw,
                                 const VertebraGeometry& geom);

    /// +24 % outside / -28 % inside at a 30 degree bend.
    static FiberRadii prototype_skin(const VertebraGeometry& geom = {});
};

VertebraJointState joints_from_motors(const ActuatorTriple& a);
ActuatorTriple motors_from_joints(const VertebraJointState& j, double gear_ratio);

LimitVerdict check_joint_limits(const VertebraJointState& j, const JointLimits& lim);

/// Composes the chain from the head frame at the origin. Each vertebra frame
/// sits at its front joint: translate along the previous spine axis, then
/// rotate by yaw (local z), pitch (local y), roll (local x) in that order.
/// The tail tip is placed segment_length + tail_length behind the last joint.
BodyPose forward_kinematics(std::span<const VertebraJointState> joints, const VertebraGeometry& geom,
                            double head_length, double tail_length,
                            std::size_t vertebra_count = kDefaultVertebraCount);

BodyPose forward_kinematics(std::span<const VertebraJointState> joints, const BodyDimensions& body,
                            std::size_t vertebra_count = kDefaultVertebraCount);

/// Linear fiber elongation about the neutral axis; symmetric in the sign of yaw.
FiberStrain skin_fiber_strain(double yaw, const VertebraGeometry& geom, const FiberRadii& radii);

/// Elliptical cylinder volume of one vertebra (m^3).
double displaced_volume(const VertebraGeometry& geom);

}  // namespace eelsim::kinematics
