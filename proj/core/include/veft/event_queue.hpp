#pragma once
// Minimal discrete-event core: a time-ordered queue of closures with stable
// FIFO ordering among same-timestamp events and a monotonic clock.

#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <vector>

namespace veft {

class EventQueue {
public:
    using Handler = std::function<void()>;

    // t must be >= now(); same-time events run in scheduling order.
    void schedule(std::int64_t t, Handler fn);
    std::int64_t now() const { return now_; }
    bool empty() const { return heap_.empty(); }
    std::size_t pending() const { return heap_.size(); }
    std::optional<std::int64_t> next_time() const;
    std::uint64_t processed() const { return processed_; }

    // Runs the earliest event (clock jumps to its timestamp first).
    void step();
    // Runs every event with timestamp <= t, then advances the clock to t.
    void run_until(std::int64_t t);
    // Drains the queue completely.
    void run();

private:
    struct Entry {
        std::int64_t time;
        std::uint64_t seq;
        Handler fn;
    };
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const {
            return a.time != b.time ? a.time > b.time : a.seq > b.seq;
        }
    };

    std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
    std::int64_t now_ = 0;
    std::uint64_t seq_ = 0;
    std::uint64_t processed_ = 0;
};

}  // namespace veft
