#include "eelsim/canbus.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "eelsim/error.hpp"

namespace eelsim::canbus {

CanFrame CanFrame::make(std::uint16_t id, std::span<const std::uint8_t> data, SimTime enqueue_time,
                        NodeId source) {
    if (data.size() > 8) throw InvalidFrame("CAN payload longer than 8 bytes");
    CanFrame f;
    f.id = id;
    f.dlc = static_cast<std::uint8_t>(data.size());
    std::copy(data.begin(), data.end(), f.payload.begin());
    f.enqueue_time = enqueue_time;
    f.source = source;
    f.validate();
    return f;
}

void CanFrame::validate() const {
    if (id > kMaxId) throw InvalidFrame(fmt::format("CAN id 0x{:X} exceeds 11 bits", id));
    if (dlc > 8) throw InvalidFrame(fmt::format("dlc {} out of range", dlc));
}

double frame_time(int dlc, double bitrate) {
    if (dlc < 0 || dlc > 8) throw InvalidFrame(fmt::format("dlc {} out of range", dlc));
    if (!(bitrate > 0)) throw InvalidInput("bitrate must be > 0");
    return (kFrameOverheadBits + 8.0 * dlc) / bitrate;
}

SimTime frame_duration(int dlc, double bitrate) {
    return static_cast<SimTime>(std::llround(frame_time(dlc, bitrate) * 1e9));
}

Bus::Bus(std::string name, double bitrate) : name_(std::move(name)), bitrate_(bitrate) {
    if (!(bitrate_ > 0)) throw InvalidInput("bitrate must be > 0");
}

void Bus::attach(NodeId station) {
    auto it = std::lower_bound(stations_.begin(), stations_.end(), station);
    if (it == stations_.end() || *it != station) stations_.insert(it, station);
}

void Bus::submit(const CanFrame& frame) {
    frame.validate();
    waiting_.push(Queued{frame, next_order_++});
}

std::size_t Bus::pending() const { return waiting_.size() + ready_.size() + (in_flight_ ? 1 : 0); }

void Bus::promote_ready(SimTime instant) {
    while (!waiting_.empty() && waiting_.top().frame.enqueue_time <= instant) {
        const Queued& q = waiting_.top();
        ready_.emplace(ReadyKey{q.frame.id, q.frame.source, q.frame.enqueue_time, q.order}, q.frame);
        waiting_.pop();
    }
}

std::vector<NodeId> Bus::recipients_for(NodeId source) const {
    std::vector<NodeId> out;
    out.reserve(stations_.size());
    for (NodeId s : stations_)
        if (s != source) out.push_back(s);
    return out;
}

std::vector<Delivery> Bus::arbitrate_and_deliver(SimTime until) {
    std::vector<Delivery> out;
    while (true) {
        if (in_flight_) {
            if (in_flight_->delivery_time > until) break;
            now_ = in_flight_->delivery_time;
            ++delivered_count_;
            delivered_bits_ += static_cast<std::uint64_t>(kFrameOverheadBits + 8 * in_flight_->frame.dlc);
            if (log_enabled_) log_.push_back(*in_flight_);
            out.push_back(std::move(*in_flight_));
            in_flight_.reset();
            continue;
        }

        SimTime instant = now_;
        if (ready_.empty()) {
            if (waiting_.empty()) break;
            instant = std::max(now_, waiting_.top().frame.enqueue_time);
        }
        if (instant > until) break;

        promote_ready(instant);
        auto winner = ready_.begin();
        const CanFrame frame = winner->second;
        ready_.erase(winner);

        const SimTime end = instant + frame_duration(frame.dlc, bitrate_);
        in_flight_ = Delivery{frame, instant, end, recipients_for(frame.source)};
        busy_until_ = end;
        busy_.push_back({instant, end});
        now_ = instant;
    }
    now_ = std::max(now_, until);
    return out;
}

std::optional<SimTime> Bus::next_activity() const {
    if (in_flight_) return in_flight_->delivery_time;
    if (!ready_.empty()) return now_;
    if (!waiting_.empty()) return std::max(now_, waiting_.top().frame.enqueue_time);
    return std::nullopt;
}

double Bus::load(SimTime begin, SimTime end) const {
    if (end <= begin) throw InvalidInput("load window must be positive");
    auto it = std::lower_bound(busy_.begin(), busy_.end(), begin,
                               [](const Interval& iv, SimTime t) { return iv.end <= t; });
    SimTime busy = 0;
    for (; it != busy_.end() && it->begin < end; ++it)
        busy += std::min(it->end, end) - std::max(it->begin, begin);
    return std::clamp(static_cast<double>(busy) / static_cast<double>(end - begin), 0.0, 1.0);
}

double Bus::bus_load(SimTime window) const {
    if (window <= 0) throw InvalidInput("load window must be positive");
    return load(now_ - window, now_);
}

void Bus::prune_history(SimTime before) {
    auto it = std::lower_bound(busy_.begin(), busy_.end(), before,
                               [](const Interval& iv, SimTime t) { return iv.end <= t; });
    busy_.erase(busy_.begin(), it);
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    std::string s;
    s.reserve(bytes.size() * 2);
    for (auto b : bytes) s += fmt::format("{:02X}", b);
    return s;
}

void write_delivery_header(std::ostream& out) { out << "time_s,bus,id_hex,dlc,payload_hex,source\n"; }

void write_delivery_row(std::ostream& out, const std::string& bus, const Delivery& d) {
    out << fmt::format("{:.9f},{},0x{:03X},{},{},{}\n", to_seconds(d.delivery_time), bus, d.frame.id,
                       static_cast<int>(d.frame.dlc), to_hex(d.frame.data()), d.frame.source);
}

}  // namespace eelsim::canbus
