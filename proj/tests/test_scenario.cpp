#include <sstream>

#include <doctest.h>

#include "eelsim/error.hpp"
#include "eelsim/scenario.hpp"
#include "test_util.hpp"

using namespace eelsim;
using namespace eelsim::sim;

namespace {

Scenario parse(const std::string& text) {
    std::istringstream in(text);
    return Scenario::parse(in);
}

std::string failing_key(const std::string& text) {
    try {
        parse(text);
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "<none>";
}

}  // namespace

TEST_SUITE("scenario") {

TEST_CASE("an empty file gives the defaults") {
    const Scenario s = parse("");
    CHECK(s.vertebra_count == 12);
    CHECK(s.duration == 10 * kNanosPerSecond);
    CHECK(s.seed == 1);
    CHECK(s.body.vertebra.ellipse_major_axis == 0.18);
    CHECK(s.body.vertebra.ellipse_minor_axis == 0.13);
    CHECK(s.body.vertebra.segment_length == 0.15);
    CHECK(s.periods.sync == milliseconds(10));
    CHECK(s.periods.gait == milliseconds(100));
    CHECK(s.periods.control == milliseconds(1));
    CHECK(s.bitrate == 1e6);
    CHECK(s.commands.empty());
}

TEST_CASE("defaults table round-trips through the parser") {
    std::string text;
    for (const auto& [key, value] : scenario_defaults())
        if (!value.empty()) text += key + " = " + value + "\n";
    const Scenario s = parse(text);
    const Scenario d = parse("");
    CHECK(s.vertebra_count == d.vertebra_count);
    CHECK(s.limits.yaw_max == doctest::Approx(d.limits.yaw_max));
    CHECK(s.plant.energy.battery_capacity == d.plant.energy.battery_capacity);
    CHECK(s.gains.kp == d.gains.kp);
}

TEST_CASE("sections and values") {
    const Scenario s = parse(R"(
[sim]
duration_s = 2.5
seed = 42
vertebrae = 6
[limits]
yaw_deg = 20
[bus]
bitrate = 500000
)");
    CHECK(s.duration == from_seconds(2.5));
    CHECK(s.seed == 42);
    CHECK(s.vertebra_count == 6);
    CHECK(s.limits.yaw_max == doctest::Approx(deg_to_rad(20)));
    CHECK(s.bitrate == 500000);
}

TEST_CASE("errors name the key") {
    CHECK(failing_key("[geometry]\nfocal_length_m = 0.18\n") == "geometry.focal_length_m");
    CHECK(failing_key("[sim]\nduration_s = soon\n") == "sim.duration_s");
    CHECK(failing_key("[sim]\nseed = -3\n") == "sim.seed");
    CHECK(failing_key("[sim]\nvertebrae = 7\n") == "sim.vertebrae");
    CHECK(failing_key("[sim]\nvertebrae = 0\n") == "sim.vertebrae");
    CHECK(failing_key("[sim]\nduration_s = 0\n") == "sim.duration_s");
    CHECK(failing_key("[nodes]\ngait_period_s = 0.015\n") == "nodes.gait_period_s");
    CHECK(failing_key("[command.0]\nkind = set_gait\n") == "command.0.time_s");
    CHECK(failing_key("[command.0]\ntime_s = 1\nkind = dance\n") == "command.0.kind");
    CHECK(failing_key("[command.0]\ntime_s = 1\nkind = set_gait\namp_yaw_deg = x\n") == "command.0.amp_yaw_deg");
    CHECK(failing_key("[command.0]\ntime_s = 1\nkind = set_gait\nwiggle = 1\n") == "command.0.wiggle");
    CHECK(failing_key("[replay]\ntimeline = /nonexistent/timeline.csv\n") == "replay.timeline");
    CHECK(failing_key("[sim\n") == "");
    CHECK_THROWS_AS(Scenario::load("/nonexistent/scenario.ini"), ConfigError);
}

TEST_CASE("scripted commands are sorted by time") {
    const Scenario s = parse(R"(
[command.0]
time_s = 3
kind = set_bias
bias_yaw_deg = 8
[command.1]
time_s = 0.5
kind = set_gait
amp_yaw_deg = 10
direction = retrograde
)");
    REQUIRE(s.commands.size() == 2);
    CHECK(s.commands[0].time == from_seconds(0.5));
    CHECK(s.commands[0].command.kind == CommandKind::set_gait);
    CHECK(*s.commands[0].command.direction == gait::WaveDirection::retrograde);
    CHECK(s.commands[0].command.client == "scenario");
    CHECK(*s.commands[1].command.bias_yaw_deg == 8);
}

TEST_CASE("replay timeline replaces the scripted commands") {
    testutil::TempDir dir("scenario");
    testutil::write_file(dir / "timeline.csv",
                         "time_s,client,kind,payload_json\n"
                         "0.010000000,op,set_gait,\"{\"\"amp_yaw_deg\"\":7.0}\"\n"
                         "0.500000000,op,reset,\"{}\"\n"
                         "0.600000000,op,set_fins,\"{\"\"fin_pitch_deg\"\":5.0}\"\n"
                         "0.700000000,op,pause,\"{}\"\n");
    testutil::write_file(dir / "s.ini", "[replay]\ntimeline = timeline.csv\n[command.0]\ntime_s = 0\nkind = set_gait\namp_yaw_deg = 3\n");
    const Scenario s = Scenario::load(dir / "s.ini");
    REQUIRE(s.commands.size() == 1);
    CHECK(s.commands[0].time == milliseconds(600));
    CHECK(s.commands[0].command.kind == CommandKind::set_fins);
}

TEST_CASE("shipped scenarios parse") {
    for (const char* name : {"default.ini", "idle.ini", "pool6.ini"}) {
        CAPTURE(name);
        CHECK_NOTHROW(Scenario::load(std::filesystem::path(EELSIM_SCENARIO_DIR) / name));
    }
    const auto pool = Scenario::load(std::filesystem::path(EELSIM_SCENARIO_DIR) / "pool6.ini");
    CHECK(pool.vertebra_count == 6);
    CHECK(pool.commands.size() == 2);
}

}
