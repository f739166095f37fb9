#include "eelsim/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "eelsim/error.hpp"

namespace eelsim::sim {

namespace {

namespace pt = boost::property_tree;

double parse_number(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected a number, got '" + text + "'");
    }
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ConfigError(key, "expected a non-negative integer, got '" + text + "'");
    return v;
}

SimTime parse_seconds(const std::string& key, const std::string& text) {
    const double s = parse_number(key, text);
    if (!std::isfinite(s)) throw ConfigError(key, "expected a finite duration");
    return from_seconds(s);
}

struct Field {
    const char* key;
    const char* default_value;
    std::function<void(Scenario&, const std::string& key, const std::string& value)> apply;
};

template <typename Member>
Field number(const char* key, const char* def, Member member, double scale = 1.0) {
    return {key, def, [member, scale](Scenario& s, const std::string& k, const std::string& v) {
                std::invoke(member, s) = parse_number(k, v) * scale;
            }};
}

template <typename Member>
Field duration(const char* key, const char* def, Member member) {
    return {key, def, [member](Scenario& s, const std::string& k, const std::string& v) {
                std::invoke(member, s) = parse_seconds(k, v);
            }};
}

const std::vector<Field>& fields() {
    constexpr double deg = kPi / 180.0;
    static const std::vector<Field> table = {
        duration("sim.duration_s", "10", [](Scenario& s) -> SimTime& { return s.duration; }),
        {"sim.seed", "1", [](Scenario& s, const std::string& k, const std::string& v) { s.seed = parse_unsigned(k, v); }},
        {"sim.vertebrae", "12",
         [](Scenario& s, const std::string& k, const std::string& v) { s.vertebra_count = parse_unsigned(k, v); }},

        number("geometry.major_axis_m", "0.18", [](Scenario& s) -> double& { return s.body.vertebra.ellipse_major_axis; }),
        number("geometry.minor_axis_m", "0.13", [](Scenario& s) -> double& { return s.body.vertebra.ellipse_minor_axis; }),
        number("geometry.segment_length_m", "0.15", [](Scenario& s) -> double& { return s.body.vertebra.segment_length; }),
        number("geometry.head_length_m", "0.35", [](Scenario& s) -> double& { return s.body.head_length; }),
        number("geometry.tail_length_m", "0.25", [](Scenario& s) -> double& { return s.body.tail_length; }),

        number("limits.yaw_deg", "30", [](Scenario& s) -> double& { return s.limits.yaw_max; }, deg),
        number("limits.pitch_deg", "30", [](Scenario& s) -> double& { return s.limits.pitch_max; }, deg),
        number("limits.roll_deg", "30", [](Scenario& s) -> double& { return s.limits.roll_max; }, deg),
        number("limits.fin_deg", "45", [](Scenario& s) -> double& { return s.fin_limit; }, deg),

        number("gait.pitch_phase_offset_deg", "0", [](Scenario& s) -> double& { return s.pitch_phase_offset; }, deg),

        number("bus.bitrate", "1000000", [](Scenario& s) -> double& { return s.bitrate; }),

        duration("nodes.sync_period_s", "0.01", [](Scenario& s) -> SimTime& { return s.periods.sync; }),
        duration("nodes.gait_period_s", "0.1", [](Scenario& s) -> SimTime& { return s.periods.gait; }),
        duration("nodes.control_period_s", "0.001", [](Scenario& s) -> SimTime& { return s.periods.control; }),
        duration("nodes.diag_period_s", "0.05", [](Scenario& s) -> SimTime& { return s.periods.diag; }),
        number("nodes.max_drift_ppm", "100", [](Scenario& s) -> double& { return s.max_drift_ppm; }),
        number("nodes.max_initial_offset_s", "0.001", [](Scenario& s) -> double& { return s.max_initial_offset; }),
        number("nodes.kp", "8", [](Scenario& s) -> double& { return s.gains.kp; }),
        number("nodes.ki", "0.5", [](Scenario& s) -> double& { return s.gains.ki; }),
        number("nodes.kd", "0.1", [](Scenario& s) -> double& { return s.gains.kd; }),
        number("nodes.gear_ratio", "1", [](Scenario& s) -> double& { return s.gear_ratio; }),

        duration("plant.step_s", "0.001", [](Scenario& s) -> SimTime& { return s.plant.step; }),
        number("plant.inertia", "0.0001", [](Scenario& s) -> double& { return s.plant.motor.inertia; }),
        number("plant.friction", "0.005", [](Scenario& s) -> double& { return s.plant.motor.viscous_friction; }),
        number("plant.torque_limit", "1.2", [](Scenario& s) -> double& { return s.plant.motor.torque_limit; }),
        number("plant.efficiency", "0.7", [](Scenario& s) -> double& { return s.plant.motor.efficiency; }),
        number("plant.standby_w", "0.15", [](Scenario& s) -> double& { return s.plant.motor.standby_power; }),
        number("plant.battery_voltage_v", "37", [](Scenario& s) -> double& { return s.plant.energy.battery_voltage; }),
        number("plant.battery_capacity_ah", "4", [](Scenario& s) -> double& { return s.plant.energy.battery_capacity; }),
        number("plant.module_power_w", "2.15", [](Scenario& s) -> double& { return s.plant.energy.module_power; }),
        number("plant.actuator_power_max_w", "102", [](Scenario& s) -> double& { return s.plant.energy.actuator_power_max; }),
        number("plant.depth_m", "0", [](Scenario& s) -> double& { return s.plant.depth; }),
        number("plant.valve_threshold_pa", "2000", [](Scenario& s) -> double& { return s.plant.pressure.valve_threshold; }),
        number("plant.regulator_threshold_pa", "2000", [](Scenario& s) -> double& { return s.plant.pressure.regulator_threshold; }),
        number("plant.air_reserve_pa", "200000", [](Scenario& s) -> double& { return s.plant.pressure.air_reserve; }),
        number("plant.water_density", "1000", [](Scenario& s) -> double& { return s.plant.drag.water_density; }),
        number("plant.drag_normal", "1", [](Scenario& s) -> double& { return s.plant.drag.normal; }),
        number("plant.drag_tangential", "0.02", [](Scenario& s) -> double& { return s.plant.drag.tangential; }),
        duration("plant.pressure_period_s", "0.1", [](Scenario& s) -> SimTime& { return s.plant.pressure_period; }),

        duration("log.period_s", "0.01", [](Scenario& s) -> SimTime& { return s.log.period; }),
        duration("log.pose_period_s", "0.05", [](Scenario& s) -> SimTime& { return s.log.pose_period; }),
        duration("log.load_window_s", "0.1", [](Scenario& s) -> SimTime& { return s.log.load_window; }),
    };
    return table;
}

/// INI sections become dotted prefixes; bare dotted keys pass through.
void flatten(const pt::ptree& tree, const std::string& prefix, std::map<std::string, std::string>& out) {
    for (const auto& [name, child] : tree) {
        const std::string key = prefix.empty() ? name : prefix + "." + name;
        if (child.empty()) {
            if (!out.emplace(key, child.data()).second) throw ConfigError(key, "duplicate key");
        } else {
            flatten(child, key, out);
        }
    }
}

const std::set<std::string>& command_fields() {
    static const std::set<std::string> f = {"time_s",        "kind",           "amp_yaw_deg",   "amp_pitch_deg",
                                            "frequency_hz",  "phase_gradient_deg", "direction", "bias_yaw_deg",
                                            "bias_pitch_deg", "fin_pitch_deg",  "fin_roll_deg",  "client"};
    return f;
}

std::vector<TimelineEntry> parse_commands(const std::map<std::string, std::string>& kv) {
    std::map<std::uint64_t, std::map<std::string, std::string>> grouped;
    for (const auto& [key, value] : kv) {
        if (key.rfind("command.", 0) != 0) continue;
        const auto rest = key.substr(8);
        const auto dot = rest.find('.');
        if (dot == std::string::npos) throw ConfigError(key, "expected command.<n>.<field>");
        const auto index = parse_unsigned(key, rest.substr(0, dot));
        const auto field = rest.substr(dot + 1);
        if (!command_fields().contains(field)) throw ConfigError(key, "unknown command field");
        grouped[index][field] = value;
    }

    std::vector<TimelineEntry> out;
    for (const auto& [index, f] : grouped) {
        const std::string prefix = "command." + std::to_string(index) + ".";
        if (!f.contains("time_s")) throw ConfigError(prefix + "time_s", "missing");
        if (!f.contains("kind")) throw ConfigError(prefix + "kind", "missing");
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [field, value] : f) {
            if (field == "time_s") continue;
            if (field == "kind" || field == "direction" || field == "client")
                j[field] = value;
            else
                j[field] = parse_number(prefix + field, value);
        }
        TimelineEntry entry;
        entry.time = parse_seconds(prefix + "time_s", f.at("time_s"));
        if (entry.time < 0) throw ConfigError(prefix + "time_s", "must be >= 0");
        try {
            entry.command = command_from_json(j);
        } catch (const ConfigError& e) {
            throw ConfigError(prefix + e.key(), e.detail());
        }
        if (entry.command.client.empty()) entry.command.client = "scenario";
        out.push_back(std::move(entry));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const TimelineEntry& a, const TimelineEntry& b) { return a.time < b.time; });
    return out;
}

}  // namespace

void Scenario::validate() const {
    auto check = [](bool ok, const char* key, const char* what) {
        if (!ok) throw ConfigError(key, what);
    };
    check(duration > 0, "sim.duration_s", "must be > 0");
    check(vertebra_count >= 2 && vertebra_count % 2 == 0, "sim.vertebrae", "must be even and >= 2");
    try {
        body.validate();
    } catch (const Error& e) {
        throw ConfigError("geometry", e.what());
    }
    check(limits.yaw_max > 0 && limits.pitch_max > 0 && limits.roll_max > 0, "limits", "must be > 0");
    check(fin_limit > 0, "limits.fin_deg", "must be > 0");
    check(bitrate > 0, "bus.bitrate", "must be > 0");
    check(periods.sync > 0 && periods.sync % milliseconds(1) == 0, "nodes.sync_period_s",
          "must be a positive whole number of milliseconds");
    check(periods.gait > 0 && periods.gait % periods.sync == 0, "nodes.gait_period_s",
          "must be a positive multiple of the sync period");
    check(periods.control > 0, "nodes.control_period_s", "must be > 0");
    check(periods.diag > 0, "nodes.diag_period_s", "must be > 0");
    check(max_drift_ppm >= 0, "nodes.max_drift_ppm", "must be >= 0");
    check(max_initial_offset >= 0, "nodes.max_initial_offset_s", "must be >= 0");
    check(gear_ratio > 0, "nodes.gear_ratio", "must be > 0");
    check(plant.step > 0, "plant.step_s", "must be > 0");
    check(plant.pressure_period > 0, "plant.pressure_period_s", "must be > 0");
    check(plant.depth >= 0, "plant.depth_m", "must be >= 0");
    try {
        plant.motor.validate();
        plant.energy.validate();
        plant.pressure.validate();
    } catch (const Error& e) {
        throw ConfigError("plant", e.what());
    }
    check(log.period > 0, "log.period_s", "must be > 0");
    check(log.pose_period > 0, "log.pose_period_s", "must be > 0");
    check(log.load_window > 0, "log.load_window_s", "must be > 0");
}

gait::GaitShape Scenario::gait_shape() const { return {limits, vertebra_count, pitch_phase_offset}; }

Scenario Scenario::parse(std::istream& in, const std::filesystem::path& base_dir) {
    pt::ptree tree;
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("", std::string("malformed scenario: ") + e.what());
    }
    std::map<std::string, std::string> kv;
    flatten(tree, "", kv);

    Scenario s;
    std::set<std::string> used;
    for (const auto& f : fields()) {
        if (auto it = kv.find(f.key); it != kv.end()) {
            f.apply(s, it->first, it->second);
            used.insert(it->first);
        }
    }
    s.commands = parse_commands(kv);

    if (auto it = kv.find("replay.timeline"); it != kv.end()) {
        used.insert(it->first);
        std::filesystem::path path = it->second;
        if (path.is_relative()) path = base_dir / path;
        s.use_timeline(path);
    }

    for (const auto& [key, value] : kv)
        if (!used.contains(key) && key.rfind("command.", 0) != 0) throw ConfigError(key, "unknown key");

    s.validate();
    return s;
}

void Scenario::use_timeline(const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file) throw ConfigError("replay.timeline", "cannot open '" + path.string() + "'");
    commands = replayable(read_timeline(file));
    std::stable_sort(commands.begin(), commands.end(),
                     [](const TimelineEntry& a, const TimelineEntry& b) { return a.time < b.time; });
}

Scenario Scenario::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("", "cannot open scenario '" + file.string() + "'");
    return parse(in, file.parent_path());
}

std::vector<std::pair<std::string, std::string>> scenario_defaults() {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& f : fields()) out.emplace_back(f.key, f.default_value);
    out.emplace_back("replay.timeline", "");
    return out;
}

}  // namespace eelsim::sim
