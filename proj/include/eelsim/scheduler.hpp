#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "eelsim/units.hpp"

namespace eelsim::sim {

/// Priority class of an event. Events at the same instant run in this order,
/// then in insertion order.
enum class EventClass : int {
    plant = 0,       // integrate motors over the elapsed step
    command = 1,     // operator command becomes effective
    supervisor = 2,  // sync / gait broadcasts
    controller = 3,  // local position loops and diagnostics
    monitor = 4,     // pressure balancing and bookkeeping
    log = 8,
    bus = 9,         // arbitration and delivery, after every same-instant submission
};

struct Event {
    SimTime time = 0;
    EventClass kind = EventClass::plant;
    std::uint64_t sequence = 0;
    std::function<void(SimTime)> action;
};

/// Deterministic discrete-event scheduler. Total order: (time, class, sequence).
class Scheduler {
public:
    using Action = std::function<void(SimTime)>;

    /// Throws InvalidInput when `at` lies before now().
    std::uint64_t schedule(SimTime at, EventClass kind, Action action);

    /// Runs `action` at start, start + period, ... until the scheduler stops.
    void schedule_periodic(SimTime start, SimTime period, EventClass kind, Action action);

    /// Executes every event with time <= until, then advances now() to until.
    void run_until(SimTime until);

    /// Executes the next event. Returns false when the queue is empty.
    bool step();

    SimTime now() const { return now_; }
    std::size_t pending() const { return heap_.size(); }
    std::uint64_t executed() const { return executed_; }

private:
    static bool later(const Event& a, const Event& b);

    std::vector<Event> heap_;
    SimTime now_ = 0;
    std::uint64_t next_sequence_ = 0;
    std::uint64_t executed_ = 0;
};

}  // namespace eelsim::sim
