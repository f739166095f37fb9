#include <chrono>
#include <thread>

#include <doctest.h>

#include "eelsim/error.hpp"
#include "eelsim/teleop.hpp"
#include "test_util.hpp"

#include <httplib.h>

using namespace eelsim;
using namespace eelsim::teleop;
using sim::AckStatus;

namespace {

sim::Scenario load(const char* name) {
    return sim::Scenario::load(std::filesystem::path(EELSIM_SCENARIO_DIR) / name);
}

json gait_msg(double amp, double freq, double gradient) {
    return {{"kind", "set_gait"}, {"amp_yaw_deg", amp}, {"frequency_hz", freq}, {"phase_gradient_deg", gradient}};
}

std::vector<kinematics::VertebraJointState> joints_of(const json& frame) {
    std::vector<kinematics::VertebraJointState> out;
    for (const auto& j : frame["joint_angles_deg"])
        out.push_back({deg_to_rad(j[0].get<double>()), deg_to_rad(j[1].get<double>()), deg_to_rad(j[2].get<double>())});
    return out;
}

}  // namespace

TEST_SUITE("teleop") {

TEST_CASE("length-prefixed framing") {
    std::string buffer = length_prefixed("hello") + length_prefixed("");
    buffer += length_prefixed(std::string(300, 'x')).substr(0, 100);
    CHECK(static_cast<unsigned char>(buffer[3]) == 5);
    CHECK(pop_length_prefixed(buffer) == "hello");
    CHECK(pop_length_prefixed(buffer) == "");
    CHECK_FALSE(pop_length_prefixed(buffer).has_value());
    CHECK(buffer.size() == 100);
    buffer += length_prefixed(std::string(300, 'x')).substr(100);
    CHECK(pop_length_prefixed(buffer) == std::string(300, 'x'));
    CHECK(buffer.empty());
}

TEST_CASE("first client controls, the rest watch") {
    Session s(load("idle.ini"));
    CHECK(s.connect("alice") == Role::controller);
    CHECK(s.connect("bob") == Role::viewer);
    CHECK(s.connect("alice") == Role::controller);
    CHECK(s.controller() == "alice");

    auto ack = s.submit("bob", gait_msg(5, 0.5, 30));
    CHECK(ack.status == AckStatus::rejected);
    CHECK(ack.reason.find("read-only") != std::string::npos);
    ack = s.submit("carol", gait_msg(5, 0.5, 30));
    CHECK(ack.status == AckStatus::rejected);
    CHECK(ack.reason.find("not connected") != std::string::npos);

    ack = s.submit("alice", gait_msg(90, 0.5, 30));
    CHECK(ack.status == AckStatus::clamped);
    CHECK(ack.applied["amp_yaw_deg"] == 63.75);

    ack = s.submit("alice", json{{"kind", "set_gait"}, {"amp_yaw_deg", "wide"}});
    CHECK(ack.status == AckStatus::rejected);
    CHECK(ack.reason.find("amp_yaw_deg") != std::string::npos);
    CHECK(s.submit("alice", json::array()).status == AckStatus::rejected);
}

TEST_CASE("commands take effect at the next supervisor tick") {
    Session s(load("idle.ini"));
    s.connect("op");
    s.advance_to(milliseconds(25));
    REQUIRE(s.submit("op", gait_msg(5, 0.5, 30)).status == AckStatus::accepted);
    s.advance_to(milliseconds(29));
    CHECK(s.frame()["gait"]["active"] == false);
    s.advance_to(milliseconds(30));
    CHECK(s.frame()["gait"]["active"] == true);
    const auto t = s.timeline();
    REQUIRE(t.size() == 1);
    CHECK(t[0].time == milliseconds(30));
}

TEST_CASE("pause freezes time and holds commands until resume") {
    Session s(load("idle.ini"));
    s.connect("op");
    s.submit("op", gait_msg(5, 0.5, 30));
    s.advance(0.5);
    CHECK(s.now() == milliseconds(500));
    s.submit("op", {{"kind", "pause"}});
    CHECK(s.paused());
    s.advance(1.0);
    s.advance_to(milliseconds(900));
    CHECK(s.now() == milliseconds(500));
    CHECK(s.frame()["paused"] == true);

    CHECK(s.submit("op", {{"kind", "set_fins"}, {"fin_pitch_deg", 10}}).status == AckStatus::accepted);
    CHECK(s.frame()["fin_angles_deg"]["left"] == 0.0);
    s.submit("op", {{"kind", "resume"}});
    CHECK_FALSE(s.paused());
    s.advance(0.05);
    CHECK(s.frame()["fin_angles_deg"]["left"].get<double>() == doctest::Approx(10.0));

    const auto t = s.timeline();
    REQUIRE(t.size() == 4);
    CHECK(t[1].command.kind == sim::CommandKind::pause);
    CHECK(t[2].command.kind == sim::CommandKind::resume);
    CHECK(t[3].command.kind == sim::CommandKind::set_fins);
    CHECK(t[3].time == milliseconds(510));
}

TEST_CASE("controller disconnect keeps the gait running") {
    Session s(load("idle.ini"));
    s.connect("op");
    s.submit("op", gait_msg(10, 1.0, 30));
    s.advance(0.2);
    s.disconnect("op");
    CHECK_FALSE(s.controller().has_value());
    s.advance(1.0);
    const json f = s.frame();
    CHECK(f["gait"]["active"] == true);
    CHECK(f["gait"]["amp_yaw_deg"].get<double>() == doctest::Approx(10.0));
    double peak = 0;
    for (const auto& j : f["joint_angles_deg"]) peak = std::max(peak, std::abs(j[0].get<double>()));
    CHECK(peak > 1.0);
    CHECK(s.connect("next") == Role::controller);
}

TEST_CASE("reset restarts the episode") {
    Session s(load("idle.ini"));
    s.connect("op");
    s.submit("op", gait_msg(10, 1.0, 30));
    s.advance(0.5);
    s.submit("op", {{"kind", "reset"}});
    CHECK(s.resets() == 1);
    CHECK(s.now() == 0);
    CHECK(s.frame()["gait"]["active"] == false);
    CHECK(s.controller() == "op");
    s.advance(0.1);
    CHECK(s.now() == milliseconds(100));
    CHECK(s.timeline().back().command.kind == sim::CommandKind::reset);
}

TEST_CASE("state frame pose agrees with the joint angles") {
    Session s(load("default.ini"));
    s.advance(1.3);
    const json f = s.frame();
    const auto joints = joints_of(f);
    REQUIRE(joints.size() == 12);
    const auto pose = kinematics::forward_kinematics(joints, kinematics::BodyDimensions{}, 12);
    REQUIRE(f["pose"].size() == pose.size());
    for (std::size_t i = 0; i < pose.size(); ++i) {
        for (int k = 0; k < 3; ++k) CHECK(std::abs(f["pose"][i]["position"][k].get<double>() - pose[i].position[k]) <= 1e-9);
        const auto& q = f["pose"][i]["orientation"];
        const double dot = q[0].get<double>() * pose[i].orientation.w() + q[1].get<double>() * pose[i].orientation.x() +
                           q[2].get<double>() * pose[i].orientation.y() + q[3].get<double>() * pose[i].orientation.z();
        CHECK(std::abs(std::abs(dot) - 1.0) <= 1e-9);
    }
    CHECK(f["saturation_flags"].size() == 12);
    CHECK(f["propulsion_estimate"]["non_normative"] == true);
    CHECK(f["simulated_time_s"].get<double>() == doctest::Approx(1.3));
}

TEST_CASE("a recorded session replays headlessly to identical logs") {
    testutil::TempDir rec("rec"), rep("rep");
    const SimTime end = from_seconds(3.0);
    {
        Session s(load("default.ini"), rec.path());
        s.connect("op");
        s.advance(0.73);
        s.submit("op", gait_msg(12.3, 0.8, 40));
        s.advance(0.5);
        s.submit("op", {{"kind", "pause"}});
        s.submit("op", {{"kind", "set_bias"}, {"bias_yaw_deg", -6}});
        s.submit("op", {{"kind", "resume"}});
        s.advance(0.4);
        s.submit("op", {{"kind", "set_fins"}, {"fin_roll_deg", 7}});
        s.advance_to(end);
        s.finish();
    }
    sim::Scenario replay = load("default.ini");
    replay.duration = end;
    replay.use_timeline(rec / "timeline.csv");
    CHECK(replay.commands.size() == 4);
    sim::run(replay, rep.path());

    std::size_t compared = 0;
    for (const auto& entry : std::filesystem::directory_iterator(rec / "run")) {
        const auto name = entry.path().filename().string();
        CAPTURE(name);
        CHECK(testutil::slurp(entry.path()) == testutil::slurp(rep / name));
        ++compared;
    }
    CHECK(compared >= 10);
}

TEST_CASE("service rejects a port that is in use") {
    ServiceOptions opt;
    opt.port = 0;
    Service first(load("idle.ini"), opt);
    REQUIRE(first.port() > 0);
    opt.port = first.port();
    CHECK_THROWS_AS(Service(load("idle.ini"), opt), Error);
}

TEST_CASE("service round trip over HTTP") {
    ServiceOptions opt;
    opt.port = 0;
    opt.controller_timeout = 0;
    Service svc(load("idle.ini"), opt);
    svc.start();
    httplib::Client cli("127.0.0.1", svc.port());

    auto r = cli.Post("/control/connect", json{{"client", "op"}}.dump(), "application/json");
    REQUIRE(r);
    CHECK(json::parse(r->body)["role"] == "controller");
    r = cli.Post("/control/connect", json{{"client", "viewer"}}.dump(), "application/json");
    REQUIRE(r);
    CHECK(json::parse(r->body)["read_only"] == true);

    json cmd = gait_msg(5, 0.5, 30);
    cmd["client"] = "op";
    r = cli.Post("/control", cmd.dump(), "application/json");
    REQUIRE(r);
    CHECK(json::parse(r->body)["status"] == "accepted");
    cmd["client"] = "viewer";
    r = cli.Post("/control", cmd.dump(), "application/json");
    REQUIRE(r);
    CHECK(json::parse(r->body)["status"] == "rejected");
    r = cli.Post("/control", "{not json", "application/json");
    REQUIRE(r);
    CHECK(json::parse(r->body)["status"] == "rejected");

    std::this_thread::sleep_for(std::chrono::milliseconds(150));
    r = cli.Get("/state?once=1");
    REQUIRE(r);
    std::string body = r->body;
    const auto msg = pop_length_prefixed(body);
    REQUIRE(msg.has_value());
    CHECK(body.empty());
    const json frame = json::parse(*msg);
    CHECK(frame["gait"]["active"] == true);
    CHECK(frame["simulated_time_s"].get<double>() > 0.0);

    r = cli.Post("/control/disconnect", json{{"client", "op"}}.dump(), "application/json");
    REQUIRE(r);
    CHECK_FALSE(svc.session().controller().has_value());
    svc.stop();
}

TEST_CASE("state stream delivers frames at the stream rate") {
    ServiceOptions opt;
    opt.port = 0;
    opt.controller_timeout = 0;
    Service svc(load("default.ini"), opt);
    svc.start();
    httplib::Client cli("127.0.0.1", svc.port());
    std::string buffer;
    std::vector<double> times;
    const auto t0 = std::chrono::steady_clock::now();
    auto r = cli.Get("/state?frames=11", [&](const char* data, std::size_t n) {
        buffer.append(data, n);
        while (auto msg = pop_length_prefixed(buffer)) times.push_back(json::parse(*msg)["simulated_time_s"].get<double>());
        return true;
    });
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    REQUIRE(r);
    REQUIRE(times.size() == 11);
    for (std::size_t i = 1; i < times.size(); ++i) CHECK(times[i] > times[i - 1]);
    CHECK(wall >= 0.40);
    CHECK(wall <= 0.80);
    CHECK((times.back() - times.front()) / 10 == doctest::Approx(0.05).epsilon(0.2));
    svc.stop();
}

TEST_CASE("paused stream keeps its heartbeat with frozen time") {
    ServiceOptions opt;
    opt.port = 0;
    opt.controller_timeout = 0;
    Service svc(load("default.ini"), opt);
    svc.start();
    std::this_thread::sleep_for(std::chrono::milliseconds(300));
    svc.session().connect("op");
    svc.session().submit("op", {{"kind", "pause"}});
    const SimTime frozen = svc.session().now();
    const auto published = svc.frames_published();

    httplib::Client cli("127.0.0.1", svc.port());
    std::string buffer;
    std::vector<json> frames;
    auto r = cli.Get("/state?frames=6", [&](const char* data, std::size_t n) {
        buffer.append(data, n);
        while (auto msg = pop_length_prefixed(buffer)) frames.push_back(json::parse(*msg));
        return true;
    });
    REQUIRE(r);
    REQUIRE(frames.size() == 6);
    // The stream opens with the latest frame, which may predate the pause.
    for (std::size_t i = 1; i < frames.size(); ++i) {
        const auto& f = frames[i];
        CHECK(f["paused"] == true);
        CHECK(f["simulated_time_s"].get<double>() == to_seconds(frozen));
    }
    const auto before = svc.frames_published();
    const auto t0 = std::chrono::steady_clock::now();
    std::this_thread::sleep_for(std::chrono::seconds(1));
    const auto count = static_cast<double>(svc.frames_published() - before);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(count / wall == doctest::Approx(20.0).epsilon(0.1));
    CHECK(before > published);
    CHECK(svc.session().now() == frozen);
    svc.stop();
}

TEST_CASE("simulated time follows wall time times the rate factor") {
    for (double factor : {1.0, 4.0}) {
        CAPTURE(factor);
        ServiceOptions opt;
        opt.port = 0;
        opt.rate_factor = factor;
        opt.controller_timeout = 0;
        Service svc(load("default.ini"), opt);
        const auto t0 = std::chrono::steady_clock::now();
        svc.start();
        std::this_thread::sleep_for(std::chrono::seconds(2));
        const double sim_s = to_seconds(svc.session().now());
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        svc.stop();
        CHECK(sim_s / (wall * factor) == doctest::Approx(1.0).epsilon(0.01));
    }
}

TEST_CASE("an idle controller loses control") {
    ServiceOptions opt;
    opt.port = 0;
    opt.controller_timeout = 0.2;
    Service svc(load("idle.ini"), opt);
    svc.start();
    httplib::Client cli("127.0.0.1", svc.port());
    REQUIRE(cli.Post("/control/connect", json{{"client", "op"}}.dump(), "application/json"));
    CHECK(svc.session().controller() == "op");
    std::this_thread::sleep_for(std::chrono::milliseconds(500));
    CHECK_FALSE(svc.session().controller().has_value());
    auto r = cli.Post("/control/connect", json{{"client", "other"}}.dump(), "application/json");
    REQUIRE(r);
    CHECK(json::parse(r->body)["role"] == "controller");
    svc.stop();
}

}
