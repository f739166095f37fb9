#include <sstream>

#include <doctest.h>

#include "eelsim/commands.hpp"
#include "eelsim/error.hpp"

using namespace eelsim;
using namespace eelsim::sim;
using nlohmann::json;

TEST_SUITE("commands") {

TEST_CASE("parse a command message") {
    const auto c = command_from_json(json::parse(
        R"({"kind":"set_gait","amp_yaw_deg":20,"frequency_hz":0.8,"direction":"retrograde","client":"op","client_timestamp":12.5})"));
    CHECK(c.kind == CommandKind::set_gait);
    CHECK(*c.amp_yaw_deg == 20);
    CHECK(*c.frequency_hz == 0.8);
    CHECK(*c.direction == gait::WaveDirection::retrograde);
    CHECK_FALSE(c.amp_pitch_deg.has_value());
    CHECK(c.client == "op");
    CHECK(c.client_timestamp == 12.5);
    CHECK(c.affects_body());
    CHECK_FALSE(command_from_json(json{{"kind", "pause"}}).affects_body());
}

TEST_CASE("malformed messages name the field") {
    auto key_of = [](const json& j) {
        try {
            command_from_json(j);
        } catch (const ConfigError& e) {
            return e.key();
        }
        return std::string("<none>");
    };
    CHECK(key_of(json{{"amp_yaw_deg", 3}}) == "kind");
    CHECK(key_of(json{{"kind", "jump"}}) == "kind");
    CHECK(key_of(json{{"kind", "set_gait"}, {"amp_yaw_deg", "big"}}) == "amp_yaw_deg");
    CHECK(key_of(json{{"kind", "set_gait"}, {"direction", "sideways"}}) == "direction");
    CHECK(key_of(json{{"kind", "set_fins"}, {"client", 3}}) == "client");
    CHECK(key_of(json::array()) == "");
}

TEST_CASE("clamping to the wire ranges") {
    OperatorInputs in;
    Command c;
    c.kind = CommandKind::set_gait;
    c.amp_yaw_deg = 90;
    c.frequency_hz = 0.5;
    const Ack ack = apply_command(in, c);
    CHECK(ack.status == AckStatus::clamped);
    CHECK(ack.clamped_fields == std::vector<std::string>{"amp_yaw_deg"});
    CHECK(ack.applied["amp_yaw_deg"] == 63.75);
    CHECK(in.gait.amp_yaw == doctest::Approx(deg_to_rad(63.75)));
    CHECK(in.gait.frequency == 0.5);

    Command b;
    b.kind = CommandKind::set_bias;
    b.bias_yaw_deg = 10;
    CHECK(apply_command(in, b).status == AckStatus::accepted);
    CHECK(in.gait.bias_yaw == doctest::Approx(deg_to_rad(10)));
    CHECK(in.gait.amp_yaw == doctest::Approx(deg_to_rad(63.75)));

    Command f;
    f.kind = CommandKind::set_fins;
    f.fin_roll_deg = -60;
    const Ack fa = apply_command(in, f);
    CHECK(fa.status == AckStatus::clamped);
    CHECK(in.fin_roll == doctest::Approx(-gait::kDefaultFinLimit));
    const auto mixed = in.to_command();
    CHECK(mixed.fins.left == doctest::Approx(-gait::kDefaultFinLimit));
    CHECK(mixed.fins.right == doctest::Approx(gait::kDefaultFinLimit));
}

TEST_CASE("rejections leave the inputs untouched") {
    OperatorInputs in;
    in.gait.frequency = 0.3;
    Command empty;
    empty.kind = CommandKind::set_gait;
    Ack ack = apply_command(in, empty);
    CHECK(ack.status == AckStatus::rejected);
    CHECK_FALSE(ack.reason.empty());

    Command nan;
    nan.kind = CommandKind::set_gait;
    nan.frequency_hz = std::numeric_limits<double>::quiet_NaN();
    ack = apply_command(in, nan);
    CHECK(ack.status == AckStatus::rejected);
    CHECK(in.gait.frequency == 0.3);
}

TEST_CASE("ack JSON") {
    Ack ack;
    ack.status = AckStatus::clamped;
    ack.clamped_fields = {"amp_yaw_deg"};
    ack.applied["amp_yaw_deg"] = 63.75;
    const auto j = ack.to_json();
    CHECK(j["status"] == "clamped");
    CHECK(j["clamped_fields"][0] == "amp_yaw_deg");
    CHECK(j["applied"]["amp_yaw_deg"] == 63.75);
}

TEST_CASE("timeline CSV roundtrip") {
    std::vector<TimelineEntry> entries;
    Command a;
    a.kind = CommandKind::set_gait;
    a.client = "op,1";
    a.amp_yaw_deg = 5;
    a.direction = gait::WaveDirection::retrograde;
    entries.push_back({milliseconds(20), a});
    Command p;
    p.kind = CommandKind::pause;
    p.client = "op";
    entries.push_back({milliseconds(30), p});

    std::stringstream ss;
    write_timeline_header(ss);
    for (const auto& e : entries) write_timeline_row(ss, e);
    const std::string text = ss.str();
    CHECK(text.rfind("time_s,client,kind,payload_json\n", 0) == 0);
    CHECK(text.find("0.020000000,\"op,1\",set_gait,") != std::string::npos);

    const auto back = read_timeline(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[0].time == milliseconds(20));
    CHECK(back[0].command.kind == CommandKind::set_gait);
    CHECK(*back[0].command.amp_yaw_deg == 5);
    CHECK(*back[0].command.direction == gait::WaveDirection::retrograde);
    CHECK(back[0].command.client == "op,1");
    CHECK(back[1].command.kind == CommandKind::pause);
    CHECK(back[1].command.client == "op");
}

TEST_CASE("replayable keeps body commands after the last reset") {
    auto cmd = [](CommandKind k) {
        Command c;
        c.kind = k;
        c.amp_yaw_deg = 1;
        return c;
    };
    const std::vector<TimelineEntry> t = {
        {0, cmd(CommandKind::set_gait)}, {5, cmd(CommandKind::reset)},  {1, cmd(CommandKind::set_gait)},
        {2, cmd(CommandKind::pause)},    {2, cmd(CommandKind::resume)}, {3, cmd(CommandKind::set_fins)},
    };
    const auto r = replayable(t);
    REQUIRE(r.size() == 2);
    CHECK(r[0].time == 1);
    CHECK(r[1].command.kind == CommandKind::set_fins);
    CHECK(replayable({t.begin(), t.begin() + 1}).size() == 1);
}

TEST_CASE("bad timeline rows") {
    std::stringstream bad("time_s,client,kind,payload_json\nabc,op,set_gait,\"{}\"\n");
    CHECK_THROWS_AS(read_timeline(bad), ConfigError);
    std::stringstream cols("time_s,client,kind,payload_json\n0.1,op\n");
    CHECK_THROWS_AS(read_timeline(cols), ConfigError);
}

}
