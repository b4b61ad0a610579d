#pragma once
// Dynamic-metrics collection: flow completion times with summaries and CDFs,
// windowed per-port buffer occupancy maxima, and congestion heatmap SVGs.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "veft/topology.hpp"

namespace veft {

struct FctRecord {
    std::int32_t session = 0;  // overlay runs tag records by session index
    std::int64_t msg_id = 0;
    std::uint64_t bytes = 0;
    std::int64_t gen_ns = 0;
    std::int64_t deliver_ns = 0;
    std::int64_t fct_ns() const { return deliver_ns - gen_ns; }
    bool operator==(const FctRecord&) const = default;
};

struct FctSummary {
    std::int64_t mean_ns = 0;  // integer mean, half-up
    std::int64_t max_ns = 0;
    std::int64_t count = 0;
    bool operator==(const FctSummary&) const = default;
};

FctSummary fct_summary(std::span<const FctRecord> records);

struct CdfPoint {
    std::int64_t fct_ns = 0;
    std::int64_t fraction_micro = 0;  // fraction in millionths, exact
    bool operator==(const CdfPoint&) const = default;
};

// Empirical CDF sampled at num_points (>= 2) equally spaced quantiles;
// empty input yields an empty curve.
std::vector<CdfPoint> fct_cdf(std::span<const FctRecord> records, std::int32_t num_points);

// Ratio t_baseline / t_improved; both must be positive.
double speedup(std::int64_t t_baseline_ns, std::int64_t t_improved_ns);

// Per-window running maximum of one port's buffer occupancy. Samples are
// event-driven (every enqueue/dequeue) and must be time-ordered; a window
// with no samples inherits the occupancy standing at its start.
class OccupancyTracker {
public:
    static constexpr std::int64_t kDefaultWindowNs = 100'000'000;  // 100 ms

    explicit OccupancyTracker(std::int64_t window_ns = kDefaultWindowNs);
    void record(std::int64_t t, std::uint64_t occupancy_bytes);
    // Closes every window up to the one containing end_time; windows then
    // tile [0, end_time] with end_time/window + 1 entries.
    std::vector<std::uint64_t> finish(std::int64_t end_time) const;
    std::int64_t window_ns() const { return window_ns_; }

private:
    std::int64_t window_ns_;
    std::int64_t last_t_ = 0;
    std::vector<std::uint64_t> maxima_;  // one running max per window so far
    std::int64_t cur_window_ = 0;
    std::uint64_t standing_ = 0;  // occupancy after the latest sample
};

// Receiving endpoint of a directed link together with its window maximum.
struct PortOccupancy {
    DeviceKind kind = DeviceKind::Switch;
    std::int32_t device = 0;
    std::int32_t port = 0;
    std::uint64_t max_bytes = 0;
    std::uint64_t capacity_bytes = 0;
};

// Draws the topology (fat-tree layered, megafly groups on a ring, grid
// fallback) with every directed half-link colored by its receiving input
// port: 0 -> green, then a linear blue-to-red ramp. The red anchor is the
// buffer capacity, or the period's peak occupancy when normalize_to_peak.
std::string render_heatmap(const Topology& topo, std::span<const PortOccupancy> occ,
                           bool normalize_to_peak = false);
void render_heatmap_file(const Topology& topo, std::span<const PortOccupancy> occ,
                         const std::string& out_path, bool normalize_to_peak = false);

// "#RRGGBB" for occupancy o = max/cap under the ramp above.
std::string occupancy_color(std::uint64_t max_bytes, std::uint64_t capacity_bytes);

void write_fct_csv(const std::string& path, std::span<const FctRecord> records);
void write_fct_cdf_csv(const std::string& path, std::span<const CdfPoint> cdf);
void write_summary_csv(const std::string& path, std::int64_t execution_time_ns,
                       const FctSummary& s);

}  // namespace veft
