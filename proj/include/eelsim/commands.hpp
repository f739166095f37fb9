#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "eelsim/gait.hpp"
#include "eelsim/nodes.hpp"
#include "eelsim/units.hpp"

namespace eelsim::sim {

enum class CommandKind { set_gait, set_bias, set_fins, pause, resume, reset };

const char* to_string(CommandKind kind);
std::optional<CommandKind> parse_command_kind(std::string_view text);

/// Operator command in operator units (degrees, Hz). Absent fields keep
/// their current value.
struct Command {
    CommandKind kind = CommandKind::set_gait;

    std::optional<double> amp_yaw_deg;
    std::optional<double> amp_pitch_deg;
    std::optional<double> frequency_hz;
    std::optional<double> phase_gradient_deg;
    std::optional<gait::WaveDirection> direction;

    std::optional<double> bias_yaw_deg;
    std::optional<double> bias_pitch_deg;

    std::optional<double> fin_pitch_deg;
    std::optional<double> fin_roll_deg;

    std::string client;
    double client_timestamp = 0.0;

    bool affects_body() const {
        return kind == CommandKind::set_gait || kind == CommandKind::set_bias || kind == CommandKind::set_fins;
    }
};

/// Parses a command object. Throws ConfigError naming the offending field.
Command command_from_json(const nlohmann::json& j);
/// Only the kind-specific fields (the timeline payload).
nlohmann::json command_payload(const Command& c);
nlohmann::json command_to_json(const Command& c);

enum class AckStatus { accepted, clamped, rejected };

const char* to_string(AckStatus status);

struct Ack {
    AckStatus status = AckStatus::accepted;
    std::string reason;
    std::vector<std::string> clamped_fields;
    nlohmann::json applied = nlohmann::json::object();  // values in effect after the command

    nlohmann::json to_json() const;
};

/// What the operator has asked for, in the units the supervisor broadcasts.
struct OperatorInputs {
    gait::GaitParams gait;
    double fin_pitch = 0.0;  // rad
    double fin_roll = 0.0;   // rad

    nodes::OperatorCommand to_command(double fin_limit = gait::kDefaultFinLimit) const;
};

/// Validates `c` against the wire quantization ranges, clamps what is out of
/// range and folds it into `inputs`. Session commands (pause/resume/reset)
/// are accepted without touching `inputs`. Non-finite values are rejected.
Ack apply_command(OperatorInputs& inputs, const Command& c, double fin_limit = gait::kDefaultFinLimit);

struct TimelineEntry {
    SimTime time = 0;
    Command command;
};

/// Command timeline CSV: time_s,client,kind,payload_json
void write_timeline_header(std::ostream& out);
void write_timeline_row(std::ostream& out, const TimelineEntry& entry);
std::vector<TimelineEntry> read_timeline(std::istream& in);

/// Entries after the last reset; a reset restarts the simulated episode.
std::vector<TimelineEntry> replayable(const std::vector<TimelineEntry>& timeline);

}  // namespace eelsim::sim
