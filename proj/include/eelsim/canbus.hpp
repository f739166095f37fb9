#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "eelsim/units.hpp"

namespace eelsim::canbus {

/// Station index on a bus. The supervisor is station 0; local controller n is
/// station n + 1. Lower index wins ties between frames with equal ids.
using NodeId = std::uint16_t;

inline constexpr std::uint16_t kMaxId = 0x7FF;
inline constexpr int kFrameOverheadBits = 47;  // standard frame incl. interframe space, no stuffing
inline constexpr double kDefaultBitrate = 1e6;

struct CanFrame {
    std::uint16_t id = 0;
    std::uint8_t dlc = 0;
    std::array<std::uint8_t, 8> payload{};
    SimTime enqueue_time = 0;
    NodeId source = 0;

    static CanFrame make(std::uint16_t id, std::span<const std::uint8_t> data, SimTime enqueue_time,
                         NodeId source);

    void validate() const;
    std::span<const std::uint8_t> data() const { return {payload.data(), dlc}; }

    friend bool operator==(const CanFrame&, const CanFrame&) = default;
};

/// Transmission time of one frame, in seconds.
double frame_time(int dlc, double bitrate = kDefaultBitrate);
/// Same, rounded to the simulation clock.
SimTime frame_duration(int dlc, double bitrate = kDefaultBitrate);

struct Delivery {
    CanFrame frame;
    SimTime start_time = 0;
    SimTime delivery_time = 0;
    std::vector<NodeId> recipients;
};

/// One simulated CAN bus with non-destructive priority arbitration.
///
/// Frames wait in their source's queue until their enqueue time. Whenever the
/// bus goes idle, the ready frame with the lowest (id, source, enqueue time,
/// submission order) transmits; the others stay queued untouched. A finished
/// frame is delivered to every attached station but its source.
class Bus {
public:
    explicit Bus(std::string name, double bitrate = kDefaultBitrate);

    const std::string& name() const { return name_; }
    double bitrate() const { return bitrate_; }

    void attach(NodeId station);
    const std::vector<NodeId>& stations() const { return stations_; }

    /// Queues a frame. Never drops. Throws InvalidFrame on a malformed frame.
    void submit(const CanFrame& frame);

    /// Completes every transmission that ends at or before `until` and commits
    /// new transmissions that start at or before it. Returns completed frames
    /// in delivery order.
    std::vector<Delivery> arbitrate_and_deliver(SimTime until);

    /// Next instant at which calling arbitrate_and_deliver would do something.
    std::optional<SimTime> next_activity() const;

    /// Fraction of [begin, end) during which the bus was transmitting.
    double load(SimTime begin, SimTime end) const;
    /// Load over the window of the given length ending at now().
    double bus_load(SimTime window) const;

    SimTime now() const { return now_; }
    SimTime busy_until() const { return busy_until_; }
    std::size_t pending() const;
    std::uint64_t delivered_count() const { return delivered_count_; }
    std::uint64_t delivered_bits() const { return delivered_bits_; }

    /// Delivery log; off by default to bound memory in long sessions.
    void set_log_enabled(bool enabled) { log_enabled_ = enabled; }
    const std::vector<Delivery>& log() const { return log_; }

    /// Drops busy-interval history older than `before` (affects load()).
    void prune_history(SimTime before);

private:
    struct Queued {
        CanFrame frame;
        std::uint64_t order = 0;
    };
    struct ReadyKey {
        std::uint16_t id;
        NodeId source;
        SimTime enqueue_time;
        std::uint64_t order;
        auto operator<=>(const ReadyKey&) const = default;
    };
    struct LaterEnqueue {
        bool operator()(const Queued& a, const Queued& b) const {
            if (a.frame.enqueue_time != b.frame.enqueue_time) return a.frame.enqueue_time > b.frame.enqueue_time;
            return a.order > b.order;
        }
    };
    struct Interval {
        SimTime begin;
        SimTime end;
    };

    void promote_ready(SimTime instant);
    std::vector<NodeId> recipients_for(NodeId source) const;

    std::string name_;
    double bitrate_;
    std::vector<NodeId> stations_;

    std::priority_queue<Queued, std::vector<Queued>, LaterEnqueue> waiting_;
    std::map<ReadyKey, CanFrame> ready_;
    std::optional<Delivery> in_flight_;

    SimTime now_ = 0;
    SimTime busy_until_ = 0;
    std::uint64_t next_order_ = 0;
    std::uint64_t delivered_count_ = 0;
    std::uint64_t delivered_bits_ = 0;
    std::vector<Interval> busy_;
    bool log_enabled_ = false;
    std::vector<Delivery> log_;
};

std::string to_hex(std::span<const std::uint8_t> bytes);

/// CSV: time_s,bus,id_hex,dlc,payload_hex,source
void write_delivery_header(std::ostream& out);
void write_delivery_row(std::ostream& out, const std::string& bus, const Delivery& d);

}  // namespace eelsim::canbus
