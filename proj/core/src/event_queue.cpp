#include "veft/event_queue.hpp"

#include <stdexcept>
#include <string>
#include <utility>

namespace veft {

void EventQueue::schedule(std::int64_t t, Handler fn) {
    if (t < now_)
        throw std::logic_error("event scheduled at " + std::to_string(t) +
                               " behind the clock at " + std::to_string(now_));
    heap_.push(Entry{t, seq_++, std::move(fn)});
}

std::optional<std::int64_t> EventQueue::next_time() const {
    if (heap_.empty()) return std::nullopt;
    return heap_.top().time;
}

void EventQueue::step() {
    if (heap_.empty()) throw std::logic_error("step() on an empty event queue");
    // priority_queue::top() is const; the handler is moved out via the pop.
    Entry e = std::move(const_cast<Entry&>(heap_.top()));
    heap_.pop();
    now_ = e.time;
    ++processed_;
    e.fn();
}

void EventQueue::run_until(std::int64_t t) {
    while (!heap_.empty() && heap_.top().time <= t) step();
    if (t > now_) now_ = t;
}

void EventQueue::run() {
    while (!heap_.empty()) step();
}

}  // namespace veft
