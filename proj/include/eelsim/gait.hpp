#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

#include "eelsim/kinematics.hpp"

namespace eelsim::gait {

using Payload = std::array<std::uint8_t, 8>;

enum class WaveDirection : std::uint8_t {
    progressive = 0,  // head to tail
    retrograde = 1,   // tail to head
};

/// Traveling-wave parameters plus overall bends. Angles in radians.
struct GaitParams {
    double amp_yaw = 0.0;
    double amp_pitch = 0.0;
    double frequency = 0.0;       // Hz
    double phase_gradient = 0.0;  // rad per vertebra
    WaveDirection direction = WaveDirection::progressive;
    double bias_yaw = 0.0;
    double bias_pitch = 0.0;
    bool roll_compensation_enabled = false;  // reserved; the roll law is always zero
    std::uint8_t seq = 0;

    void validate() const;
    friend bool operator==(const GaitParams&, const GaitParams&) = default;
};

/// Body-wide options that are configuration, not broadcast.
struct GaitShape {
    kinematics::JointLimits limits;
    std::size_t vertebra_count = kinematics::kDefaultVertebraCount;
    double pitch_phase_offset = 0.0;  // rad, added to the pitch wave phase
};

/// Wire table of the 8-byte gait payload (byte 0 first).
namespace wire {
inline constexpr double kAmplitudeLsbDeg = 0.25;  // b0, b1 unsigned
inline constexpr double kFrequencyLsbHz = 0.01;   // b2 unsigned
inline constexpr double kGradientLsbDeg = 0.5;    // b3 unsigned
inline constexpr double kBiasLsbDeg = 0.5;        // b4, b5 signed
inline constexpr std::uint8_t kFlagRetrograde = 0x01;
inline constexpr std::uint8_t kFlagRollCompensation = 0x02;

inline constexpr double kAmplitudeMaxDeg = 255 * kAmplitudeLsbDeg;  // 63.75
inline constexpr double kFrequencyMaxHz = 255 * kFrequencyLsbHz;    // 2.55
inline constexpr double kGradientMaxDeg = 255 * kGradientLsbDeg;    // 127.5
inline constexpr double kBiasMaxDeg = 127 * kBiasLsbDeg;            // 63.5
}  // namespace wire

/// Round-to-nearest quantizers shared by every wire format. `saturated` is
/// set (never cleared) when the value had to be clipped into range.
std::uint8_t quantize_unsigned(double value, double lsb, bool& saturated);
std::int8_t quantize_signed(double value, double lsb, bool& saturated);

/// Phase argument of the traveling wave for one vertebra.
double wave_phase(std::size_t index, double t, const GaitParams& p);

/// Setpoint before joint-limit clamping; also skips the index range check so
/// spatial periodicity can be checked past the end of the body.
kinematics::VertebraJointState raw_setpoint(std::size_t index, double t, const GaitParams& p,
                                            const GaitShape& shape = {});

/// Joint setpoint of vertebra `index` at synchronized network time t,
/// clamped to the joint limits.
kinematics::VertebraJointState setpoint(std::size_t index, double t, const GaitParams& p,
                                        const GaitShape& shape = {});

struct EncodedGait {
    Payload payload{};
    bool saturated = false;
};

EncodedGait encode_gait(const GaitParams& p);
GaitParams decode_gait(std::span<const std::uint8_t> payload);

struct FinCommand {
    double left = 0.0;   // rad
    double right = 0.0;  // rad

    friend bool operator==(const FinCommand&, const FinCommand&) = default;
};

inline constexpr double kDefaultFinLimit = deg_to_rad(45.0);

/// Common mode drives pitch, differential mode drives roll.
FinCommand fin_mix(double pitch_cmd, double roll_cmd, double fin_limit = kDefaultFinLimit);

/// Fin frame: b0 left, b1 right (signed, 0.5 deg LSB), b2 seq, b3..b7 zero.
Payload encode_fins(const FinCommand& fins, std::uint8_t seq);
FinCommand decode_fins(std::span<const std::uint8_t> payload);

}  // namespace eelsim::gait
