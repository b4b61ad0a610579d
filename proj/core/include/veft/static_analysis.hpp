#pragma once
// Offline trace characterization: ideal-bus replay (zero-latency delivery),
// per-operation call/byte accounting, binned time series, and rank-to-rank
// traffic matrices, plus deterministic CSV/SVG report emission.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "veft/replay.hpp"
#include "veft/trace.hpp"

namespace veft {

struct OpEntry {
    std::uint64_t calls = 0;
    std::uint64_t buffer_bytes = 0;   // payload per call, as passed to the operation
    std::uint64_t wire_messages = 0;  // point-to-point deliveries after expansion
    std::uint64_t wire_bytes = 0;
};

struct OpStats {
    std::array<OpEntry, kNumOpKinds> by_kind{};

    OpEntry totals() const {
        OpEntry t;
        for (const OpEntry& e : by_kind) {
            t.calls += e.calls;
            t.buffer_bytes += e.buffer_bytes;
            t.wire_messages += e.wire_messages;
            t.wire_bytes += e.wire_bytes;
        }
        return t;
    }
};

struct IdealEvent {
    std::int64_t msg_id = 0;
    std::int64_t record_id = 0;
    OpKind op = OpKind::P2P;
    MsgPhase phase = MsgPhase::Plain;
    std::int32_t src_rank = 0;
    std::int32_t dst_rank = 0;
    std::uint64_t bytes = 0;
    std::int64_t gen_time_ns = 0;
    bool self = false;  // src_rank == dst_rank
};

struct IdealReplayResult {
    std::vector<IdealEvent> events;  // msg_id order
    std::int64_t duration_ns = 0;
    std::vector<Finding> findings;   // structural findings and/or replay stall
    bool ok() const { return findings.empty(); }
};

struct TimeBin {
    std::int64_t bin_start_ns = 0;
    OpKind op = OpKind::P2P;
    std::uint64_t messages = 0;
    std::uint64_t bytes = 0;
};

struct TimeSeries {
    std::int64_t bin_width_ns = 0;
    std::vector<TimeBin> bins;  // sorted by (bin_start_ns, op); zero rows omitted
};

struct TrafficMatrix {
    std::int32_t num_tasks = 0;
    std::vector<std::uint64_t> messages;  // row-major num_tasks x num_tasks
    std::vector<std::uint64_t> bytes;

    std::uint64_t& msg_at(std::int32_t src, std::int32_t dst) {
        return messages[static_cast<std::size_t>(src) * static_cast<std::size_t>(num_tasks) +
                        static_cast<std::size_t>(dst)];
    }
    std::uint64_t msg_at(std::int32_t src, std::int32_t dst) const {
        return messages[static_cast<std::size_t>(src) * static_cast<std::size_t>(num_tasks) +
                        static_cast<std::size_t>(dst)];
    }
    std::uint64_t& bytes_at(std::int32_t src, std::int32_t dst) {
        return bytes[static_cast<std::size_t>(src) * static_cast<std::size_t>(num_tasks) +
                     static_cast<std::size_t>(dst)];
    }
    std::uint64_t bytes_at(std::int32_t src, std::int32_t dst) const {
        return bytes[static_cast<std::size_t>(src) * static_cast<std::size_t>(num_tasks) +
                     static_cast<std::size_t>(dst)];
    }
};

// Replays the trace against a zero-latency bus: every message is delivered at
// the instant it is generated (ties broken by msg_id). Structural findings
// suppress the replay; an unsatisfiable dependency surfaces as a
// "replay stalled" finding rather than an error.
IdealReplayResult ideal_replay(const Trace& trace);

OpStats count_by_operation(const Trace& trace);

std::int64_t default_bin_width(std::int64_t duration_ns);  // duration/100, >= 1 ms
TimeSeries time_series(const Trace& trace, std::int64_t bin_width_ns);
TimeSeries time_series(const IdealReplayResult& ideal, std::int64_t bin_width_ns);

TrafficMatrix traffic_matrix(const Trace& trace);

std::string ops_csv(const OpStats& s);
std::string timeseries_csv(const TimeSeries& ts);
std::string matrix_csv(const TrafficMatrix& m, bool bytes);

// Writes ops.csv, timeseries.csv, matrix_messages.csv, matrix_bytes.csv and
// SVG charts (ops_calls.svg, ops_bytes.svg, timeseries.svg, matrix_bytes.svg)
// into out_dir; byte-stable for equal inputs. Returns the file paths written.
std::vector<std::string> emit_report(const OpStats& ops, const TimeSeries& ts,
                                     const TrafficMatrix& matrix, const std::string& out_dir);

}  // namespace veft
