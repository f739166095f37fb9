#include "eelsim/report.hpp"

#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "eelsim/error.hpp"

namespace eelsim::sim {

namespace pt = boost::property_tree;

RunArtifacts make_artifacts(const RunMetrics& metrics, const Scenario& scenario, const plant::EnergyBudget& energy) {
    RunArtifacts a;
    a.metrics = metrics;
    a.geometry = scenario.body.vertebra;
    a.energy = energy;
    a.masses.vertebra_masses.assign(scenario.vertebra_count, a.masses.vertebra_target_mass);
    a.masses.water_density = scenario.plant.drag.water_density;
    return a;
}

namespace {

std::string num(double v) { return fmt::format("{}", v); }

}  // namespace

void save_artifacts(const std::filesystem::path& run_dir, const RunArtifacts& a) {
    const auto& m = a.metrics;
    pt::ptree tree;
    tree.put("run.simulated_s", num(m.simulated_s));
    tree.put("run.vertebrae", m.vertebra_count);
    tree.put("run.local_nodes", m.local_nodes);
    tree.put("run.seed", m.seed);

    std::string sat;
    for (std::size_t i = 0; i < m.saturations.size(); ++i) sat += (i ? " " : "") + std::to_string(m.saturations[i]);
    tree.put("joints.saturations", sat);
    tree.put("sync.max_error_s", num(m.max_sync_error));

    for (int i = 0; i < 2; ++i) {
        const std::string b = fmt::format("bus{}", i + 1);
        tree.put(b + ".mean_load", num(m.mean_bus_load[i]));
        tree.put(b + ".max_window_load", num(m.max_window_load[i]));
        tree.put(b + ".frames", m.frames[i]);
        tree.put(b + ".bits", m.bits[i]);
    }

    tree.put("energy.battery_voltage_v", num(a.energy.battery_voltage));
    tree.put("energy.battery_capacity_ah", num(a.energy.battery_capacity));
    tree.put("energy.module_power_w", num(a.energy.module_power));
    tree.put("energy.module_count", a.energy.module_count);
    tree.put("energy.actuator_power_max_w", num(a.energy.actuator_power_max));
    tree.put("energy.consumed_wh", num(m.consumed_wh));
    tree.put("energy.mean_actuator_power_w", num(m.mean_actuator_power));
    tree.put("energy.mean_electronics_power_w", num(m.mean_electronics_power));
    tree.put("energy.pressure_actions", m.pressure_actions);

    tree.put("geometry.major_axis_m", num(a.geometry.ellipse_major_axis));
    tree.put("geometry.minor_axis_m", num(a.geometry.ellipse_minor_axis));
    tree.put("geometry.segment_length_m", num(a.geometry.segment_length));
    tree.put("geometry.water_density", num(a.masses.water_density));

    tree.put("propulsion.mean_thrust_n", num(m.propulsion.mean_thrust));
    tree.put("propulsion.mean_power_w", num(m.propulsion.mean_power));

    std::ofstream out(run_dir / "metrics.ini", std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write metrics.ini in '" + run_dir.string() + "'");
    pt::write_ini(out, tree);
}

RunArtifacts load_artifacts(const std::filesystem::path& run_dir) {
    const auto path = run_dir / "metrics.ini";
    std::ifstream in(path);
    if (!in) throw ConfigError("", "no metrics.ini in '" + run_dir.string() + "'");
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
        RunArtifacts a;
        auto& m = a.metrics;
        m.simulated_s = tree.get<double>("run.simulated_s");
        m.vertebra_count = tree.get<std::size_t>("run.vertebrae");
        m.local_nodes = tree.get<std::size_t>("run.local_nodes");
        m.seed = tree.get<std::uint64_t>("run.seed");
        std::istringstream sat(tree.get<std::string>("joints.saturations"));
        for (std::uint64_t v; sat >> v;) m.saturations.push_back(v);
        m.max_sync_error = tree.get<double>("sync.max_error_s");
        for (int i = 0; i < 2; ++i) {
            const std::string b = fmt::format("bus{}", i + 1);
            m.mean_bus_load[i] = tree.get<double>(b + ".mean_load");
            m.max_window_load[i] = tree.get<double>(b + ".max_window_load");
            m.frames[i] = tree.get<std::uint64_t>(b + ".frames");
            m.bits[i] = tree.get<std::uint64_t>(b + ".bits");
        }
        a.energy.battery_voltage = tree.get<double>("energy.battery_voltage_v");
        a.energy.battery_capacity = tree.get<double>("energy.battery_capacity_ah");
        a.energy.module_power = tree.get<double>("energy.module_power_w");
        a.energy.module_count = tree.get<std::size_t>("energy.module_count");
        a.energy.actuator_power_max = tree.get<double>("energy.actuator_power_max_w");
        m.consumed_wh = tree.get<double>("energy.consumed_wh");
        a.energy.consumed = m.consumed_wh;
        m.remaining_wh = a.energy.remaining_wh();
        m.mean_actuator_power = tree.get<double>("energy.mean_actuator_power_w");
        m.mean_electronics_power = tree.get<double>("energy.mean_electronics_power_w");
        m.pressure_actions = tree.get<std::uint64_t>("energy.pressure_actions");
        a.geometry.ellipse_major_axis = tree.get<double>("geometry.major_axis_m");
        a.geometry.ellipse_minor_axis = tree.get<double>("geometry.minor_axis_m");
        a.geometry.segment_length = tree.get<double>("geometry.segment_length_m");
        a.masses.water_density = tree.get<double>("geometry.water_density");
        a.masses.vertebra_masses.assign(m.vertebra_count, a.masses.vertebra_target_mass);
        m.propulsion.mean_thrust = tree.get<double>("propulsion.mean_thrust_n");
        m.propulsion.mean_power = tree.get<double>("propulsion.mean_power_w");
        return a;
    } catch (const pt::ptree_error& e) {
        throw ConfigError("metrics.ini", e.what());
    }
}

std::string summarize(const RunArtifacts& a) {
    const auto& m = a.metrics;
    std::string out;
    auto line = [&out](const std::string& s) { out += s + "\n"; };

    line(fmt::format("run: {:.3f} s simulated, {} vertebrae, {} local nodes + supervisor, seed {}", m.simulated_s,
                     m.vertebra_count, m.local_nodes, m.seed));
    line("");
    line("energy");
    line(fmt::format("  battery capacity           {:.1f} Wh", a.energy.capacity_wh()));
    line(fmt::format("  electronics                {} x {:.2f} W = {:.2f} W", a.energy.module_count,
                     a.energy.module_power, a.energy.electronics_power()));
    line(fmt::format("  endurance at full duty     {:.1f} min", plant::endurance(a.energy, 1.0) * 60.0));
    const double mean_power = m.mean_actuator_power + m.mean_electronics_power;
    if (mean_power > 0)
        line(fmt::format("  endurance at run power     {:.1f} min ({:.2f} W mean)",
                         a.energy.capacity_wh() / mean_power * 60.0, mean_power));
    line(fmt::format("  consumed                   {:.4f} Wh, remaining {:.4f} Wh", m.consumed_wh, m.remaining_wh));
    line("");
    line("buses");
    for (int i = 0; i < 2; ++i)
        line(fmt::format("  bus{} mean load {:.4f}, max window {:.4f}, {} frames", i + 1, m.mean_bus_load[i],
                         m.max_window_load[i], m.frames[i]));
    line("");
    line("control");
    line(fmt::format("  max joint-limit saturation count {}", m.max_saturation()));
    line(fmt::format("  max synchronization error        {:.3f} us", m.max_sync_error * 1e6));
    line("");
    line("buoyancy");
    const auto report = plant::buoyancy_report(a.masses, a.geometry);
    line(fmt::format("  vertebra neutral mass {:.4f} kg", report.vertebra_neutral_mass));
    line(fmt::format("  {:<12} {:>9} {:>9} {:>9} {:>7}", "part", "mass kg", "neutral", "net N", "ratio"));
    for (const auto& row : report.rows)
        line(fmt::format("  {:<12} {:>9.4f} {:>9.4f} {:>9.4f} {:>7.4f}", row.part, row.actual_mass,
                         row.neutral_mass, row.net_buoyancy, row.density_ratio));
    line(fmt::format("  total net buoyancy {:.4f} N", report.total_net_buoyancy));
    line("");
    line("propulsion (model estimate, non-normative)");
    line(fmt::format("  mean thrust {:.3f} N, mean power {:.3f} W", m.propulsion.mean_thrust,
                     m.propulsion.mean_power));
    return out;
}

std::string summarize(const std::filesystem::path& run_dir) { return summarize(load_artifacts(run_dir)); }

}  // namespace eelsim::sim
