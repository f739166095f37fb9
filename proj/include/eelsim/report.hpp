#pragma once

#include <filesystem>
#include <string>

#include "eelsim/kinematics.hpp"
#include "eelsim/plant.hpp"
#include "eelsim/scenario.hpp"
#include "eelsim/simulation.hpp"

namespace eelsim::sim {

/// What `report` needs from a finished run, persisted as metrics.ini.
struct RunArtifacts {
    RunMetrics metrics;
    kinematics::VertebraGeometry geometry;
    plant::EnergyBudget energy;  // module count as run, consumption at the end
    plant::MassBudget masses;
};

RunArtifacts make_artifacts(const RunMetrics& metrics, const Scenario& scenario, const plant::EnergyBudget& energy);

void save_artifacts(const std::filesystem::path& run_dir, const RunArtifacts& artifacts);
/// Throws ConfigError when metrics.ini is missing or malformed.
RunArtifacts load_artifacts(const std::filesystem::path& run_dir);

/// Endurance projections, bus loads, saturation counts, buoyancy table and
/// synchronization error as plain text.
std::string summarize(const RunArtifacts& artifacts);
std::string summarize(const std::filesystem::path& run_dir);

}  // namespace eelsim::sim
