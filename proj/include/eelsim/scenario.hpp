#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "eelsim/commands.hpp"
#include "eelsim/gait.hpp"
#include "eelsim/kinematics.hpp"
#include "eelsim/nodes.hpp"
#include "eelsim/plant.hpp"
#include "eelsim/units.hpp"

namespace eelsim::sim {

struct LogOptions {
    SimTime period = milliseconds(10);       // joints.csv, power.csv
    SimTime pose_period = milliseconds(50);  // pose.csv
    SimTime load_window = milliseconds(100); // bus_load.csv
};

struct PlantConfig {
    plant::MotorParams motor;
    plant::EnergyBudget energy;
    plant::PressureState pressure;
    plant::DragCoefficients drag;
    double depth = 0.0;  // m, held constant during a run
    SimTime step = milliseconds(1);
    SimTime pressure_period = milliseconds(100);
};

/// Everything a run depends on. Parsed from a flat key/value file with
/// dotted sections; every key has a default so an empty file is valid.
struct Scenario {
    std::size_t vertebra_count = kinematics::kDefaultVertebraCount;
    kinematics::BodyDimensions body;
    kinematics::JointLimits limits;
    double fin_limit = gait::kDefaultFinLimit;
    double pitch_phase_offset = 0.0;

    nodes::Periods periods;
    nodes::PidGains gains;
    double gear_ratio = 1.0;
    double max_drift_ppm = 100.0;
    double max_initial_offset = 1e-3;  // s
    double bitrate = canbus::kDefaultBitrate;

    PlantConfig plant;
    LogOptions log;

    SimTime duration = 10 * kNanosPerSecond;
    std::uint64_t seed = 1;
    std::vector<TimelineEntry> commands;

    void validate() const;
    gait::GaitShape gait_shape() const;

    /// Replaces the scripted commands with the replayable part of a recorded
    /// timeline (which already contains the scripted ones).
    void use_timeline(const std::filesystem::path& timeline);

    /// Throws ConfigError naming the offending key.
    static Scenario parse(std::istream& in, const std::filesystem::path& base_dir = {});
    static Scenario load(const std::filesystem::path& file);
};

/// Every recognised key with its default, in file order (for docs and --help).
std::vector<std::pair<std::string, std::string>> scenario_defaults();

}  // namespace eelsim::sim
