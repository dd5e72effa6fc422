#pragma once

#include <functional>
#include <queue>
#include <stdexcept>

namespace echomix::sim {

using Time = double;

/// Virtual-time event queue. Single-threaded; ties broken by insertion
/// order so identical schedules replay identically.
class EventQueue {
  public:
    void at(Time t, std::function<void()> fn) {
        if (t < now_) throw std::logic_error("event scheduled in the past");
        heap_.push(Event{t, seq_++, std::move(fn)});
    }

    void after(Time delay, std::function<void()> fn) { at(now_ + delay, std::move(fn)); }

    Time now() const { return now_; }
    bool empty() const { return heap_.empty(); }
    uint64_t executed() const { return executed_; }

    /// Runs one event; returns false when the queue is drained.
    bool step() {
        if (heap_.empty()) return false;
        Event ev = std::move(const_cast<Event&>(heap_.top()));
        heap_.pop();
        now_ = ev.t;
        ++executed_;
        ev.fn();
        return true;
    }

    /// Runs events with t <= end, then advances the clock to end.
    void run_until(Time end) {
        while (!heap_.empty() && heap_.top().t <= end) step();
        if (now_ < end) now_ = end;
    }

    void run_all() {
        while (step()) {
        }
    }

  private:
    struct Event {
        Time t;
        uint64_t seq;
        std::function<void()> fn;
        bool operator>(const Event& other) const {
            return t != other.t ? t > other.t : seq > other.seq;
        }
    };

    std::priority_queue<Event, std::vector<Event>, std::greater<>> heap_;
    Time now_ = 0;
    uint64_t seq_ = 0;
    uint64_t executed_ = 0;
};

}  // namespace echomix::sim
