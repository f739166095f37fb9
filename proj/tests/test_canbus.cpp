#include <random>
#include <set>
#include <tuple>
#include <sstream>

#include <doctest.h>

#include "eelsim/canbus.hpp"
#include "eelsim/error.hpp"
#include "oracles/bus_oracle.hpp"

using namespace eelsim;
using namespace eelsim::canbus;

namespace {

CanFrame frame(std::uint16_t id, SimTime at, NodeId source, int dlc = 8) {
    std::vector<std::uint8_t> data(static_cast<std::size_t>(dlc), static_cast<std::uint8_t>(id & 0xFF));
    return CanFrame::make(id, data, at, source);
}

Bus make_bus(int stations, double bitrate = 1e6) {
    Bus bus("test", bitrate);
    for (int s = 0; s < stations; ++s) bus.attach(static_cast<NodeId>(s));
    return bus;
}

constexpr SimTime kForever = 1'000'000'000'000;

struct Scenario {
    std::vector<oracle::Frame> frames;
};

Scenario random_traffic(std::mt19937_64& rng, int count, int stations, SimTime horizon) {
    std::uniform_int_distribution<int> id(0, 0x7FF), id_small(0, 7), src(0, stations - 1), dlc(0, 8);
    std::uniform_int_distribution<SimTime> at(0, horizon);
    std::bernoulli_distribution collide(0.3), few_ids(0.5);
    Scenario s;
    for (int i = 0; i < count; ++i) {
        oracle::Frame f;
        f.id = few_ids(rng) ? id_small(rng) : id(rng);
        f.dlc = dlc(rng);
        f.source = src(rng);
        f.ready_ns = collide(rng) && !s.frames.empty() ? s.frames[rng() % s.frames.size()].ready_ns : at(rng);
        f.order = i;
        s.frames.push_back(f);
    }
    return s;
}

CanFrame to_frame(const oracle::Frame& f) {
    std::vector<std::uint8_t> data(static_cast<std::size_t>(f.dlc), static_cast<std::uint8_t>(f.order & 0xFF));
    return CanFrame::make(static_cast<std::uint16_t>(f.id), data, f.ready_ns, static_cast<NodeId>(f.source));
}

}  // namespace

TEST_SUITE("canbus") {

TEST_CASE("frame time") {
    CHECK(frame_time(8, 1e6) == doctest::Approx(111e-6).epsilon(1e-12));
    CHECK(frame_time(0, 1e6) == doctest::Approx(47e-6).epsilon(1e-12));
    CHECK(frame_time(8, 500e3) == doctest::Approx(222e-6).epsilon(1e-12));
    CHECK(frame_duration(8) == 111'000);
    CHECK_THROWS_AS(frame_time(9), InvalidFrame);
    CHECK_THROWS_AS(frame_time(-1), InvalidFrame);
}

TEST_CASE("frame validation") {
    const std::uint8_t nine[9] = {};
    CHECK_THROWS_AS(CanFrame::make(0x10, nine, 0, 0), InvalidFrame);
    CHECK_THROWS_AS(CanFrame::make(0x800, {}, 0, 0), InvalidFrame);
    Bus bus = make_bus(2);
    CanFrame bad;
    bad.id = 0x900;
    CHECK_THROWS_AS(bus.submit(bad), InvalidFrame);
    bad.id = 1;
    bad.dlc = 12;
    CHECK_THROWS_AS(bus.submit(bad), InvalidFrame);
}

TEST_CASE("idle bus transmits at enqueue time") {
    Bus bus = make_bus(3);
    bus.submit(frame(0x100, 5'000, 1));
    const auto out = bus.arbitrate_and_deliver(kForever);
    REQUIRE(out.size() == 1);
    CHECK(out[0].start_time == 5'000);
    CHECK(out[0].delivery_time == 5'000 + 111'000);
    CHECK(out[0].recipients == std::vector<NodeId>{0, 2});
}

TEST_CASE("busy bus defers the next start") {
    Bus bus = make_bus(3);
    bus.submit(frame(0x100, 0, 1));
    bus.submit(frame(0x001, 50'000, 2));
    const auto out = bus.arbitrate_and_deliver(kForever);
    REQUIRE(out.size() == 2);
    CHECK(out[1].start_time == 111'000);
    CHECK(out[1].start_time >= out[0].delivery_time);
}

TEST_CASE("lower id wins a simultaneous start") {
    Bus bus = make_bus(3);
    bus.submit(frame(0x100, 0, 1));
    bus.submit(frame(0x020, 0, 2));
    const auto out = bus.arbitrate_and_deliver(kForever);
    REQUIRE(out.size() == 2);
    CHECK(out[0].frame.id == 0x020);
    CHECK(out[1].frame.id == 0x100);
}

TEST_CASE("loser is delayed, not lost") {
    Bus bus = make_bus(3);
    bus.submit(frame(0x300, 0, 2));  // occupies the bus
    bus.submit(frame(0x200, 10'000, 1));
    bus.submit(frame(0x010, 20'000, 2));
    const auto out = bus.arbitrate_and_deliver(kForever);
    REQUIRE(out.size() == 3);
    CHECK(out[1].frame.id == 0x010);
    CHECK(out[2].frame.id == 0x200);
    CHECK(out[2].frame.payload == frame(0x200, 10'000, 1).payload);
    CHECK(bus.pending() == 0);
}

TEST_CASE("equal ids: lower source, then FIFO") {
    Bus bus = make_bus(4);
    bus.submit(frame(0x050, 0, 3));
    bus.submit(frame(0x050, 0, 2));
    bus.submit(frame(0x050, 0, 2, 4));
    const auto out = bus.arbitrate_and_deliver(kForever);
    REQUIRE(out.size() == 3);
    CHECK(out[0].frame.source == 2);
    CHECK(out[0].frame.dlc == 8);
    CHECK(out[1].frame.source == 2);
    CHECK(out[1].frame.dlc == 4);
    CHECK(out[2].frame.source == 3);
}

TEST_CASE("partial arbitration honours the horizon") {
    Bus bus = make_bus(2);
    bus.submit(frame(0x10, 0, 0));
    bus.submit(frame(0x11, 0, 0));
    auto out = bus.arbitrate_and_deliver(110'999);
    CHECK(out.empty());
    CHECK(bus.next_activity() == 111'000);
    out = bus.arbitrate_and_deliver(111'000);
    REQUIRE(out.size() == 1);
    CHECK(bus.next_activity() == 222'000);
    out = bus.arbitrate_and_deliver(kForever);
    CHECK(out.size() == 1);
    CHECK_FALSE(bus.next_activity().has_value());
}

TEST_CASE("50 random frames against the re-sorting oracle") {
    std::mt19937_64 rng(50);
    for (int trial = 0; trial < 20; ++trial) {
        const auto s = random_traffic(rng, 50, 5, 3'000'000);
        const auto expected = oracle::arbitrate(s.frames, 1e6);
        Bus bus = make_bus(5);
        for (const auto& f : s.frames) bus.submit(to_frame(f));
        const auto got = bus.arbitrate_and_deliver(kForever);
        REQUIRE(got.size() == expected.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].frame.id == expected[i].frame.id);
            CHECK(got[i].frame.source == expected[i].frame.source);
            CHECK(got[i].frame.enqueue_time == expected[i].frame.ready_ns);
            CHECK(got[i].start_time == expected[i].start_ns);
            CHECK(got[i].delivery_time == expected[i].end_ns);
        }
    }
}

TEST_CASE("incremental submission matches the oracle") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        auto s = random_traffic(rng, 60, 7, 2'000'000);
        const auto expected = oracle::arbitrate(s.frames, 1e6);

        auto by_ready = s.frames;
        std::stable_sort(by_ready.begin(), by_ready.end(),
                         [](const auto& a, const auto& b) { return a.ready_ns < b.ready_ns; });
        Bus bus = make_bus(7);
        std::vector<Delivery> got;
        for (std::size_t i = 0; i < by_ready.size();) {
            const SimTime r = by_ready[i].ready_ns;
            if (r > bus.now()) {
                const SimTime mid = bus.now() + static_cast<SimTime>(rng() % static_cast<std::uint64_t>(r - bus.now()));
                for (auto& d : bus.arbitrate_and_deliver(mid)) got.push_back(d);
                for (auto& d : bus.arbitrate_and_deliver(r - 1)) got.push_back(d);
            }
            for (; i < by_ready.size() && by_ready[i].ready_ns == r; ++i) bus.submit(to_frame(by_ready[i]));
        }
        for (auto& d : bus.arbitrate_and_deliver(kForever)) got.push_back(d);
        REQUIRE(got.size() == expected.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].frame.id == expected[i].frame.id);
            CHECK(got[i].frame.source == expected[i].frame.source);
            CHECK(got[i].delivery_time == expected[i].end_ns);
        }
    }
}

TEST_CASE("broadcast completeness") {
    Bus bus = make_bus(7);
    for (NodeId s = 0; s < 7; ++s) bus.submit(frame(static_cast<std::uint16_t>(0x100 + s), 0, s));
    for (const auto& d : bus.arbitrate_and_deliver(kForever)) {
        CHECK(d.recipients.size() == 6);
        CHECK(std::find(d.recipients.begin(), d.recipients.end(), d.frame.source) == d.recipients.end());
    }
}

TEST_CASE("bus load") {
    Bus idle = make_bus(2);
    idle.arbitrate_and_deliver(milliseconds(100));
    CHECK(idle.bus_load(milliseconds(10)) == 0.0);

    Bus one = make_bus(2);
    for (int k = 0; k < 10; ++k) one.submit(frame(0x10, milliseconds(10) * k, 0));
    one.arbitrate_and_deliver(milliseconds(100));
    CHECK(one.bus_load(milliseconds(10)) == doctest::Approx(0.0111).epsilon(1e-9));
    CHECK(one.load(0, milliseconds(100)) == doctest::Approx(0.0111).epsilon(1e-9));

    Bus full = make_bus(2);
    for (int k = 0; k < 2000; ++k) full.submit(frame(0x10, 0, 0));
    full.arbitrate_and_deliver(milliseconds(100));
    const double l = full.bus_load(milliseconds(100));
    CHECK(l <= 1.0);
    CHECK(l > 0.99);
    CHECK_THROWS_AS(full.bus_load(0), InvalidInput);
}

TEST_CASE("no loss and bandwidth bound under saturation") {
    std::mt19937_64 rng(8);
    const auto s = random_traffic(rng, 3000, 7, 100'000'000);
    Bus bus = make_bus(7);
    for (const auto& f : s.frames) bus.submit(to_frame(f));
    const auto out = bus.arbitrate_and_deliver(kForever);
    CHECK(out.size() == s.frames.size());
    std::multiset<std::tuple<int, int, SimTime, int>> submitted;
    for (const auto& f : s.frames) submitted.insert({f.id, f.source, f.ready_ns, f.dlc});
    for (const auto& d : out) {
        auto it = submitted.find({d.frame.id, d.frame.source, d.frame.enqueue_time, d.frame.dlc});
        REQUIRE(it != submitted.end());
        submitted.erase(it);
    }
    CHECK(submitted.empty());
    const double elapsed = to_seconds(out.back().delivery_time);
    CHECK(static_cast<double>(bus.delivered_bits()) / elapsed <= 1e6);
    CHECK(bus.pending() == 0);
}

TEST_CASE("identical traces give identical deliveries") {
    std::mt19937_64 rng(99);
    const auto s = random_traffic(rng, 200, 4, 5'000'000);
    auto run = [&] {
        Bus bus = make_bus(4);
        for (const auto& f : s.frames) bus.submit(to_frame(f));
        std::ostringstream out;
        for (const auto& d : bus.arbitrate_and_deliver(kForever)) write_delivery_row(out, "bus1", d);
        return out.str();
    };
    CHECK(run() == run());
}

TEST_CASE("delivery CSV row") {
    Bus bus = make_bus(2);
    const std::uint8_t data[3] = {0xAB, 0x01, 0xFF};
    bus.submit(CanFrame::make(0x020, data, 0, 1));
    const auto out = bus.arbitrate_and_deliver(kForever);
    std::ostringstream csv;
    write_delivery_header(csv);
    write_delivery_row(csv, "bus1", out[0]);
    CHECK(csv.str() == "time_s,bus,id_hex,dlc,payload_hex,source\n0.000071000,bus1,0x020,3,AB01FF,1\n");
}

}
