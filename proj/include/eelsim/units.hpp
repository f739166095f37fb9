#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace eelsim {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kGravity = 9.81;               // m/s^2
inline constexpr double kAtmosphericPressure = 101325; // Pa
inline constexpr double kFreshWaterDensity = 1000;     // kg/m^3

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Simulation time in integer nanoseconds; used for all scheduling and bus timing.
using SimTime = std::int64_t;

inline constexpr SimTime kNanosPerSecond = 1'000'000'000;

constexpr double to_seconds(SimTime t) { return static_cast<double>(t) / 1e9; }
inline SimTime from_seconds(double s) { return static_cast<SimTime>(std::llround(s * 1e9)); }
constexpr SimTime milliseconds(std::int64_t ms) { return ms * 1'000'000; }
constexpr SimTime microseconds(std::int64_t us) { return us * 1'000; }

}  // namespace eelsim
