#include "eelsim/scheduler.hpp"

#include <algorithm>
#include <memory>

#include "eelsim/error.hpp"

namespace eelsim::sim {

bool Scheduler::later(const Event& a, const Event& b) {
    if (a.time != b.time) return a.time > b.time;
    if (a.kind != b.kind) return a.kind > b.kind;
    return a.sequence > b.sequence;
}

std::uint64_t Scheduler::schedule(SimTime at, EventClass kind, Action action) {
    if (at < now_) throw InvalidInput("cannot schedule an event in the past");
    const std::uint64_t seq = next_sequence_++;
    heap_.push_back(Event{at, kind, seq, std::move(action)});
    std::push_heap(heap_.begin(), heap_.end(), later);
    return seq;
}

void Scheduler::schedule_periodic(SimTime start, SimTime period, EventClass kind, Action action) {
    if (period <= 0) throw InvalidInput("period must be > 0");
    auto shared = std::make_shared<Action>(std::move(action));
    struct Repeater {
        Scheduler* self;
        SimTime period;
        EventClass kind;
        std::shared_ptr<Action> action;
        void operator()(SimTime t) const {
            (*action)(t);
            self->schedule(t + period, kind, *this);
        }
    };
    schedule(start, kind, Repeater{this, period, kind, std::move(shared)});
}

bool Scheduler::step() {
    if (heap_.empty()) return false;
    std::pop_heap(heap_.begin(), heap_.end(), later);
    Event ev = std::move(heap_.back());
    heap_.pop_back();
    now_ = ev.time;
    ++executed_;
    ev.action(ev.time);
    return true;
}

void Scheduler::run_until(SimTime until) {
    while (!heap_.empty() && heap_.front().time <= until) step();
    now_ = std::max(now_, until);
}

}  // namespace eelsim::sim
