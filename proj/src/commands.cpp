#include "eelsim/commands.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "eelsim/error.hpp"

namespace eelsim::sim {

using nlohmann::json;

const char* to_string(CommandKind kind) {
    switch (kind) {
    case CommandKind::set_gait: return "set_gait";
    case CommandKind::set_bias: return "set_bias";
    case CommandKind::set_fins: return "set_fins";
    case CommandKind::pause: return "pause";
    case CommandKind::resume: return "resume";
    case CommandKind::reset: return "reset";
    }
    return "set_gait";
}

std::optional<CommandKind> parse_command_kind(std::string_view text) {
    for (auto k : {CommandKind::set_gait, CommandKind::set_bias, CommandKind::set_fins, CommandKind::pause,
                   CommandKind::resume, CommandKind::reset})
        if (text == to_string(k)) return k;
    return std::nullopt;
}

const char* to_string(AckStatus status) {
    switch (status) {
    case AckStatus::accepted: return "accepted";
    case AckStatus::clamped: return "clamped";
    case AckStatus::rejected: return "rejected";
    }
    return "rejected";
}

namespace {

std::optional<double> number_field(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_number()) throw ConfigError(key, "expected a number");
    return it->get<double>();
}

}  // namespace

Command command_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("", "command must be a JSON object");
    auto kind_it = j.find("kind");
    if (kind_it == j.end() || !kind_it->is_string()) throw ConfigError("kind", "missing command kind");
    const auto kind = parse_command_kind(kind_it->get<std::string>());
    if (!kind) throw ConfigError("kind", "unknown command kind '" + kind_it->get<std::string>() + "'");

    Command c;
    c.kind = *kind;
    if (auto it = j.find("client"); it != j.end()) {
        if (!it->is_string()) throw ConfigError("client", "expected a string");
        c.client = it->get<std::string>();
    }
    if (auto ts = number_field(j, "client_timestamp")) c.client_timestamp = *ts;

    switch (c.kind) {
    case CommandKind::set_gait:
        c.amp_yaw_deg = number_field(j, "amp_yaw_deg");
        c.amp_pitch_deg = number_field(j, "amp_pitch_deg");
        c.frequency_hz = number_field(j, "frequency_hz");
        c.phase_gradient_deg = number_field(j, "phase_gradient_deg");
        if (auto it = j.find("direction"); it != j.end() && !it->is_null()) {
            if (*it == "progressive")
                c.direction = gait::WaveDirection::progressive;
            else if (*it == "retrograde")
                c.direction = gait::WaveDirection::retrograde;
            else
                throw ConfigError("direction", "expected 'progressive' or 'retrograde'");
        }
        break;
    case CommandKind::set_bias:
        c.bias_yaw_deg = number_field(j, "bias_yaw_deg");
        c.bias_pitch_deg = number_field(j, "bias_pitch_deg");
        break;
    case CommandKind::set_fins:
        c.fin_pitch_deg = number_field(j, "fin_pitch_deg");
        c.fin_roll_deg = number_field(j, "fin_roll_deg");
        break;
    default:
        break;
    }
    return c;
}

json command_payload(const Command& c) {
    json j = json::object();
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) j[key] = *v;
    };
    put("amp_yaw_deg", c.amp_yaw_deg);
    put("amp_pitch_deg", c.amp_pitch_deg);
    put("frequency_hz", c.frequency_hz);
    put("phase_gradient_deg", c.phase_gradient_deg);
    if (c.direction)
        j["direction"] = *c.direction == gait::WaveDirection::progressive ? "progressive" : "retrograde";
    put("bias_yaw_deg", c.bias_yaw_deg);
    put("bias_pitch_deg", c.bias_pitch_deg);
    put("fin_pitch_deg", c.fin_pitch_deg);
    put("fin_roll_deg", c.fin_roll_deg);
    return j;
}

json command_to_json(const Command& c) {
    json j = command_payload(c);
    j["kind"] = to_string(c.kind);
    if (!c.client.empty()) j["client"] = c.client;
    j["client_timestamp"] = c.client_timestamp;
    return j;
}

json Ack::to_json() const {
    json j{{"status", sim::to_string(status)}, {"applied", applied}};
    if (!reason.empty()) j["reason"] = reason;
    if (!clamped_fields.empty()) j["clamped_fields"] = clamped_fields;
    return j;
}

nodes::OperatorCommand OperatorInputs::to_command(double fin_limit) const {
    return {gait, gait::fin_mix(fin_pitch, fin_roll, fin_limit)};
}

Ack apply_command(OperatorInputs& inputs, const Command& c, double fin_limit) {
    Ack ack;
    if (!c.affects_body()) return ack;

    const json payload = command_payload(c);
    if (payload.empty()) {
        ack.status = AckStatus::rejected;
        ack.reason = std::string(to_string(c.kind)) + " carries no fields";
        return ack;
    }
    for (const auto& [key, value] : payload.items()) {
        if (value.is_number() && !std::isfinite(value.get<double>())) {
            ack.status = AckStatus::rejected;
            ack.reason = key + " must be finite";
            return ack;
        }
    }

    OperatorInputs next = inputs;
    auto clamp_field = [&](const char* name, const std::optional<double>& v, double lo, double hi,
                           auto&& assign) {
        if (!v) return;
        const double applied = std::clamp(*v, lo, hi);
        if (applied != *v) ack.clamped_fields.emplace_back(name);
        ack.applied[name] = applied;
        assign(applied);
    };

    using namespace gait::wire;
    const double fin_max = rad_to_deg(fin_limit);
    clamp_field("amp_yaw_deg", c.amp_yaw_deg, 0.0, kAmplitudeMaxDeg,
                [&](double v) { next.gait.amp_yaw = deg_to_rad(v); });
    clamp_field("amp_pitch_deg", c.amp_pitch_deg, 0.0, kAmplitudeMaxDeg,
                [&](double v) { next.gait.amp_pitch = deg_to_rad(v); });
    clamp_field("frequency_hz", c.frequency_hz, 0.0, kFrequencyMaxHz, [&](double v) { next.gait.frequency = v; });
    clamp_field("phase_gradient_deg", c.phase_gradient_deg, 0.0, kGradientMaxDeg,
                [&](double v) { next.gait.phase_gradient = deg_to_rad(v); });
    if (c.direction) {
        next.gait.direction = *c.direction;
        ack.applied["direction"] = payload["direction"];
    }
    clamp_field("bias_yaw_deg", c.bias_yaw_deg, -kBiasMaxDeg, kBiasMaxDeg,
                [&](double v) { next.gait.bias_yaw = deg_to_rad(v); });
    clamp_field("bias_pitch_deg", c.bias_pitch_deg, -kBiasMaxDeg, kBiasMaxDeg,
                [&](double v) { next.gait.bias_pitch = deg_to_rad(v); });
    clamp_field("fin_pitch_deg", c.fin_pitch_deg, -fin_max, fin_max,
                [&](double v) { next.fin_pitch = deg_to_rad(v); });
    clamp_field("fin_roll_deg", c.fin_roll_deg, -fin_max, fin_max,
                [&](double v) { next.fin_roll = deg_to_rad(v); });

    inputs = next;
    if (!ack.clamped_fields.empty()) ack.status = AckStatus::clamped;
    return ack;
}

namespace {

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                fields.back() += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.emplace_back();
        } else if (ch != '\r') {
            fields.back() += ch;
        }
    }
    return fields;
}

}  // namespace

void write_timeline_header(std::ostream& out) { out << "time_s,client,kind,payload_json\n"; }

void write_timeline_row(std::ostream& out, const TimelineEntry& entry) {
    const auto& client = entry.command.client;
    const bool plain = client.find_first_of(",\"\r\n") == std::string::npos;
    out << fmt::format("{:.9f},{},{},{}\n", to_seconds(entry.time), plain ? client : csv_quote(client),
                       to_string(entry.command.kind), csv_quote(command_payload(entry.command).dump()));
}

std::vector<TimelineEntry> read_timeline(std::istream& in) {
    std::vector<TimelineEntry> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line_no == 1) continue;
        const auto fields = csv_split(line);
        const std::string where = fmt::format("timeline line {}", line_no);
        if (fields.size() != 4) throw ConfigError(where, "expected 4 columns");
        json j;
        try {
            j = fields[3].empty() ? json::object() : json::parse(fields[3]);
        } catch (const json::exception& e) {
            throw ConfigError(where, std::string("bad payload: ") + e.what());
        }
        j["kind"] = fields[2];
        j["client"] = fields[1];
        TimelineEntry entry;
        try {
            entry.time = from_seconds(std::stod(fields[0]));
        } catch (const std::exception&) {
            throw ConfigError(where, "bad time '" + fields[0] + "'");
        }
        entry.command = command_from_json(j);
        out.push_back(std::move(entry));
    }
    return out;
}

std::vector<TimelineEntry> replayable(const std::vector<TimelineEntry>& timeline) {
    auto last_reset = std::find_if(timeline.rbegin(), timeline.rend(),
                                   [](const TimelineEntry& e) { return e.command.kind == CommandKind::reset; });
    std::vector<TimelineEntry> out(last_reset.base(), timeline.end());
    std::erase_if(out, [](const TimelineEntry& e) { return !e.command.affects_body(); });
    return out;
}

}  // namespace eelsim::sim
