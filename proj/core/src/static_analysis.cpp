#include "veft/static_analysis.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include "veft/metrics.hpp"

namespace veft {

IdealReplayResult ideal_replay(const Trace& trace) {
    IdealReplayResult out;
    const ValidationReport report = validate_structure(trace);
    for (const Finding& f : report.findings) {
        // Unobservable dependencies stall the replay below and are reported
        // with the stalled record; everything else suppresses the replay.
        if (f.code != FindingCode::Unobservable) out.findings.push_back(f);
    }
    if (!out.findings.empty()) return out;

    Session s(trace, map_tasks(MappingPolicy::Linear, trace.header.num_tasks,
                               iota_nodes(std::max(trace.header.num_tasks, 1))));
    while (!s.is_finished()) {
        const auto t = s.next_pending_time();
        if (!t) break;  // no pending message and not finished: stalled
        auto msgs = s.next_ready_messages(*t);
        std::sort(msgs.begin(), msgs.end(),
                  [](const Message& a, const Message& b) { return a.msg_id < b.msg_id; });
        for (const Message& m : msgs) s.notify_delivered(m.msg_id, *t);
    }
    if (!s.is_finished()) {
        const auto rid = s.first_incomplete_record();
        out.findings.push_back({FindingCode::Unobservable, rid ? *rid : -1,
                                "replay stalled at record " + std::to_string(rid ? *rid : -1)});
    }
    for (const LoggedMessage& lm : s.message_log()) {
        IdealEvent e;
        e.msg_id = lm.msg.msg_id;
        e.record_id = lm.msg.record_id;
        e.op = lm.op;
        e.phase = lm.msg.phase;
        e.src_rank = lm.msg.src_rank;
        e.dst_rank = lm.msg.dst_rank;
        e.bytes = lm.msg.length_bytes;
        e.gen_time_ns = lm.msg.gen_time_ns;
        e.self = lm.self;
        out.events.push_back(e);
    }
    out.duration_ns = s.elapsed_ns();
    return out;
}

OpStats count_by_operation(const Trace& trace) {
    OpStats s;
    for (const TraceRecord& r : trace.records) {
        if (r.is_p2p()) {
            OpEntry& e = s.by_kind[static_cast<std::size_t>(OpKind::P2P)];
            ++e.calls;
            e.buffer_bytes += r.p2p().size_bytes;
            e.wire_messages += 1;
            e.wire_bytes += r.p2p().size_bytes;
        } else {
            const Collective& c = r.coll();
            OpEntry& e = s.by_kind[static_cast<std::size_t>(op_kind(c.kind))];
            ++e.calls;
            e.buffer_bytes += c.size_bytes;
            const Communicator* comm = trace.find_comm(c.comm_id);
            if (comm == nullptr) throw std::invalid_argument("trace references unknown comm");
            for (const ExpandedMessage& m :
                 expand_collective(c.kind, *comm, c.root_rank, c.size_bytes)) {
                e.wire_messages += 1;
                e.wire_bytes += m.bytes;
            }
        }
    }
    return s;
}

std::int64_t default_bin_width(std::int64_t duration_ns) {
    return std::max<std::int64_t>(duration_ns / 100, 1'000'000);
}

TimeSeries time_series(const IdealReplayResult& ideal, std::int64_t bin_width_ns) {
    if (bin_width_ns <= 0) throw std::invalid_argument("bin width must be positive");
    TimeSeries ts;
    ts.bin_width_ns = bin_width_ns;
    std::map<std::pair<std::int64_t, int>, TimeBin> acc;
    for (const IdealEvent& e : ideal.events) {
        const std::int64_t start = e.gen_time_ns / bin_width_ns * bin_width_ns;
        TimeBin& b = acc[{start, static_cast<int>(e.op)}];
        b.bin_start_ns = start;
        b.op = e.op;
        b.messages += 1;
        b.bytes += e.bytes;
    }
    for (const auto& [key, bin] : acc) ts.bins.push_back(bin);
    return ts;
}

TimeSeries time_series(const Trace& trace, std::int64_t bin_width_ns) {
    return time_series(ideal_replay(trace), bin_width_ns);
}

TrafficMatrix traffic_matrix(const Trace& trace) {
    TrafficMatrix m;
    m.num_tasks = trace.header.num_tasks;
    const std::size_t n = static_cast<std::size_t>(m.num_tasks);
    m.messages.assign(n * n, 0);
    m.bytes.assign(n * n, 0);
    for (const TraceRecord& r : trace.records) {
        if (r.is_p2p()) {
            m.msg_at(r.p2p().src_rank, r.p2p().dst_rank) += 1;
            m.bytes_at(r.p2p().src_rank, r.p2p().dst_rank) += r.p2p().size_bytes;
        } else {
            const Collective& c = r.coll();
            const Communicator* comm = trace.find_comm(c.comm_id);
            if (comm == nullptr) throw std::invalid_argument("trace references unknown comm");
            for (const ExpandedMessage& x :
                 expand_collective(c.kind, *comm, c.root_rank, c.size_bytes)) {
                m.msg_at(x.src_rank, x.dst_rank) += 1;
                m.bytes_at(x.src_rank, x.dst_rank) += x.bytes;
            }
        }
    }
    return m;
}

std::string ops_csv(const OpStats& s) {
    std::string out = "kind,calls,buffer_bytes,wire_messages,wire_bytes\n";
    for (int k = 0; k < kNumOpKinds; ++k) {
        const OpEntry& e = s.by_kind[static_cast<std::size_t>(k)];
        if (e.calls == 0) continue;
        out += to_string(static_cast<OpKind>(k));
        out += ',' + std::to_string(e.calls) + ',' + std::to_string(e.buffer_bytes) + ',' +
               std::to_string(e.wire_messages) + ',' + std::to_string(e.wire_bytes) + '\n';
    }
    return out;
}

std::string timeseries_csv(const TimeSeries& ts) {
    std::string out = "bin_start_ns,kind,messages,bytes\n";
    for (const TimeBin& b : ts.bins) {
        if (b.messages == 0 && b.bytes == 0) continue;
        out += std::to_string(b.bin_start_ns);
        out += ',';
        out += to_string(b.op);
        out += ',' + std::to_string(b.messages) + ',' + std::to_string(b.bytes) + '\n';
    }
    return out;
}

std::string matrix_csv(const TrafficMatrix& m, bool bytes) {
    std::string out = "src\\dst";
    for (std::int32_t d = 0; d < m.num_tasks; ++d) out += ',' + std::to_string(d);
    out += '\n';
    for (std::int32_t s = 0; s < m.num_tasks; ++s) {
        out += std::to_string(s);
        for (std::int32_t d = 0; d < m.num_tasks; ++d)
            out += ',' + std::to_string(bytes ? m.bytes_at(s, d) : m.msg_at(s, d));
        out += '\n';
    }
    return out;
}

namespace {

void write_bytes(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << content;
}

// Fixed per-kind palette (enum order) so charts are stable across runs.
const char* kKindColor[kNumOpKinds] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                       "#8c564b", "#e377c2", "#7f7f7f", "#17becf"};

std::string svg_open(int w, int h) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
           "\" height=\"" + std::to_string(h) + "\">\n<rect width=\"" + std::to_string(w) +
           "\" height=\"" + std::to_string(h) + "\" fill=\"#FFFFFF\"/>\n";
}

std::string rect(int x, int y, int w, int h, const std::string& fill) {
    return "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" +
           std::to_string(w) + "\" height=\"" + std::to_string(h) + "\" fill=\"" + fill + "\"/>\n";
}

std::string text(int x, int y, const std::string& s, int size = 12) {
    return "<text x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) +
           "\" font-family=\"monospace\" font-size=\"" + std::to_string(size) + "\">" + s +
           "</text>\n";
}

// Horizontal bar chart over operation kinds; one row per kind with calls > 0.
std::string ops_bar_svg(const OpStats& s, bool bytes, const std::string& title) {
    std::vector<int> kinds;
    std::uint64_t peak = 0;
    for (int k = 0; k < kNumOpKinds; ++k) {
        const OpEntry& e = s.by_kind[static_cast<std::size_t>(k)];
        if (e.calls == 0) continue;
        kinds.push_back(k);
        peak = std::max(peak, bytes ? e.wire_bytes : e.calls);
    }
    const int rows = static_cast<int>(kinds.size());
    const int h = 40 + std::max(rows, 1) * 26;
    std::string svg = svg_open(640, h);
    svg += text(10, 20, title, 14);
    for (int i = 0; i < rows; ++i) {
        const int k = kinds[static_cast<std::size_t>(i)];
        const OpEntry& e = s.by_kind[static_cast<std::size_t>(k)];
        const std::uint64_t v = bytes ? e.wire_bytes : e.calls;
        const int y = 34 + i * 26;
        const int w = peak == 0 ? 0 : static_cast<int>(v * 400 / peak);
        svg += text(10, y + 14, to_string(static_cast<OpKind>(k)));
        svg += rect(110, y, std::max(w, 1), 18, kKindColor[k]);
        svg += text(118 + std::max(w, 1), y + 14, std::to_string(v));
    }
    svg += "</svg>\n";
    return svg;
}

// Vertical bars of total bytes per time bin (all kinds folded together).
std::string timeseries_svg(const TimeSeries& ts) {
    std::map<std::int64_t, std::uint64_t> per_bin;
    for (const TimeBin& b : ts.bins) per_bin[b.bin_start_ns] += b.bytes;
    std::uint64_t peak = 0;
    for (const auto& [t, v] : per_bin) peak = std::max(peak, v);
    const int n = static_cast<int>(per_bin.size());
    const int w = std::max(120, 60 + n * 10);
    std::string svg = svg_open(w, 260);
    svg += text(10, 20, "bytes per " + std::to_string(ts.bin_width_ns) + " ns bin", 14);
    int i = 0;
    for (const auto& [t, v] : per_bin) {
        const int bh = peak == 0 ? 0 : static_cast<int>(v * 200 / peak);
        svg += rect(40 + i * 10, 240 - std::max(bh, 1), 8, std::max(bh, 1), "#1f77b4");
        ++i;
    }
    svg += "</svg>\n";
    return svg;
}

// num_tasks x num_tasks grid, green..red relative to the busiest pair.
std::string matrix_svg(const TrafficMatrix& m) {
    std::uint64_t peak = 0;
    for (std::uint64_t v : m.bytes) peak = std::max(peak, v);
    const int n = std::max<std::int32_t>(m.num_tasks, 1);
    const int cell = n <= 64 ? 12 : 4;
    const int w = 40 + n * cell;
    std::string svg = svg_open(w + 10, w + 10);
    for (std::int32_t s = 0; s < m.num_tasks; ++s)
        for (std::int32_t d = 0; d < m.num_tasks; ++d)
            svg += rect(40 + d * cell, 40 + s * cell, cell, cell,
                        occupancy_color(m.bytes_at(s, d), std::max<std::uint64_t>(peak, 1)));
    svg += text(10, 20, "bytes by src (rows) x dst (cols)", 12);
    svg += "</svg>\n";
    return svg;
}

}  // namespace

std::vector<std::string> emit_report(const OpStats& ops, const TimeSeries& ts,
                                     const TrafficMatrix& matrix, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> files;
    auto emit = [&](const std::string& name, const std::string& content) {
        const std::string path = (std::filesystem::path(out_dir) / name).string();
        write_bytes(path, content);
        files.push_back(path);
    };
    emit("ops.csv", ops_csv(ops));
    emit("timeseries.csv", timeseries_csv(ts));
    emit("matrix_messages.csv", matrix_csv(matrix, false));
    emit("matrix_bytes.csv", matrix_csv(matrix, true));
    emit("ops_calls.svg", ops_bar_svg(ops, false, "operation call counts"));
    emit("ops_bytes.svg", ops_bar_svg(ops, true, "wire bytes by operation"));
    emit("timeseries.svg", timeseries_svg(ts));
    emit("matrix_bytes.svg", matrix_svg(matrix));
    return files;
}

}  // namespace veft
