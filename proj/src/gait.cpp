#include "eelsim/gait.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "eelsim/error.hpp"

namespace eelsim::gait {

void GaitParams::validate() const {
    for (double v : {amp_yaw, amp_pitch, frequency, phase_gradient, bias_yaw, bias_pitch})
        if (!std::isfinite(v)) throw InvalidInput("gait parameters must be finite");
    if (amp_yaw < 0 || amp_pitch < 0) throw InvalidInput("gait amplitudes must be >= 0");
    if (frequency < 0) throw InvalidInput("gait frequency must be >= 0");
    if (phase_gradient < 0 || phase_gradient > kPi) throw InvalidInput("phase gradient must lie in [0, pi]");
}

std::uint8_t quantize_unsigned(double value, double lsb, bool& saturated) {
    const double steps = std::round(value / lsb);
    if (!(steps >= 0.0)) {  // also catches NaN
        saturated = true;
        return 0;
    }
    if (steps > 255.0) {
        saturated = true;
        return 255;
    }
    return static_cast<std::uint8_t>(steps);
}

std::int8_t quantize_signed(double value, double lsb, bool& saturated) {
    const double steps = std::round(value / lsb);
    if (std::isnan(steps)) {
        saturated = true;
        return 0;
    }
    if (steps > 127.0) {
        saturated = true;
        return 127;
    }
    if (steps < -127.0) {
        saturated = true;
        return -127;
    }
    return static_cast<std::int8_t>(steps);
}

double wave_phase(std::size_t index, double t, const GaitParams& p) {
    const double s = p.direction == WaveDirection::progressive ? 1.0 : -1.0;
    return 2.0 * kPi * p.frequency * t - s * static_cast<double>(index) * p.phase_gradient;
}

kinematics::VertebraJointState raw_setpoint(std::size_t index, double t, const GaitParams& p,
                                            const GaitShape& shape) {
    const double phase = wave_phase(index, t, p);
    return {p.amp_yaw * std::sin(phase) + p.bias_yaw,
            p.amp_pitch * std::sin(phase + shape.pitch_phase_offset) + p.bias_pitch, 0.0};
}

kinematics::VertebraJointState setpoint(std::size_t index, double t, const GaitParams& p,
                                        const GaitShape& shape) {
    if (index >= shape.vertebra_count)
        throw TopologyError("vertebra index " + std::to_string(index) + " out of range");
    return kinematics::check_joint_limits(raw_setpoint(index, t, p, shape), shape.limits).clamped;
}

EncodedGait encode_gait(const GaitParams& p) {
    EncodedGait out;
    bool& sat = out.saturated;
    auto& b = out.payload;
    b[0] = quantize_unsigned(rad_to_deg(p.amp_yaw), wire::kAmplitudeLsbDeg, sat);
    b[1] = quantize_unsigned(rad_to_deg(p.amp_pitch), wire::kAmplitudeLsbDeg, sat);
    b[2] = quantize_unsigned(p.frequency, wire::kFrequencyLsbHz, sat);
    b[3] = quantize_unsigned(rad_to_deg(p.phase_gradient), wire::kGradientLsbDeg, sat);
    b[4] = static_cast<std::uint8_t>(quantize_signed(rad_to_deg(p.bias_yaw), wire::kBiasLsbDeg, sat));
    b[5] = static_cast<std::uint8_t>(quantize_signed(rad_to_deg(p.bias_pitch), wire::kBiasLsbDeg, sat));
    std::uint8_t flags = 0;
    if (p.direction == WaveDirection::retrograde) flags |= wire::kFlagRetrograde;
    if (p.roll_compensation_enabled) flags |= wire::kFlagRollCompensation;
    b[6] = flags;
    b[7] = p.seq;
    return out;
}

GaitParams decode_gait(std::span<const std::uint8_t> payload) {
    if (payload.size() != 8) throw InvalidFrame("gait payload must be 8 bytes");
    GaitParams p;
    p.amp_yaw = deg_to_rad(payload[0] * wire::kAmplitudeLsbDeg);
    p.amp_pitch = deg_to_rad(payload[1] * wire::kAmplitudeLsbDeg);
    p.frequency = payload[2] * wire::kFrequencyLsbHz;
    p.phase_gradient = deg_to_rad(payload[3] * wire::kGradientLsbDeg);
    p.bias_yaw = deg_to_rad(static_cast<std::int8_t>(payload[4]) * wire::kBiasLsbDeg);
    p.bias_pitch = deg_to_rad(static_cast<std::int8_t>(payload[5]) * wire::kBiasLsbDeg);
    p.direction = (payload[6] & wire::kFlagRetrograde) ? WaveDirection::retrograde : WaveDirection::progressive;
    p.roll_compensation_enabled = (payload[6] & wire::kFlagRollCompensation) != 0;
    p.seq = payload[7];
    return p;
}

FinCommand fin_mix(double pitch_cmd, double roll_cmd, double fin_limit) {
    if (!std::isfinite(pitch_cmd) || !std::isfinite(roll_cmd)) throw InvalidInput("fin commands must be finite");
    return {std::clamp(pitch_cmd + roll_cmd, -fin_limit, fin_limit),
            std::clamp(pitch_cmd - roll_cmd, -fin_limit, fin_limit)};
}

Payload encode_fins(const FinCommand& fins, std::uint8_t seq) {
    bool sat = false;
    Payload b{};
    b[0] = static_cast<std::uint8_t>(quantize_signed(rad_to_deg(fins.left), wire::kBiasLsbDeg, sat));
    b[1] = static_cast<std::uint8_t>(quantize_signed(rad_to_deg(fins.right), wire::kBiasLsbDeg, sat));
    b[2] = seq;
    return b;
}

FinCommand decode_fins(std::span<const std::uint8_t> payload) {
    if (payload.size() != 8) throw InvalidFrame("fin payload must be 8 bytes");
    return {deg_to_rad(static_cast<std::int8_t>(payload[0]) * wire::kBiasLsbDeg),
            deg_to_rad(static_cast<std::int8_t>(payload[1]) * wire::kBiasLsbDeg)};
}

}  // namespace eelsim::gait
