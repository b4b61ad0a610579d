#include "veft/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "veft/synthetic.hpp"
#include "veft/topology.hpp"
#include "veft/trace.hpp"

namespace veft {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    for (char& c : s)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return s;
}

std::int64_t parse_i64(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const std::int64_t r = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return r;
    } catch (const std::exception&) {
        throw std::invalid_argument("bad integer for " + key + ": '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& v, const std::string& key) {
    const std::int64_t r = parse_i64(v, key);
    if (r < 0) throw std::invalid_argument(key + " must be >= 0");
    return static_cast<std::uint64_t>(r);
}

bool parse_bool(const std::string& v, const std::string& key) {
    const std::string s = lower(v);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw std::invalid_argument("bad boolean for " + key + ": '" + v + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

}  // namespace

IncastOverlay parse_incast_overlay(const std::string& text) {
    IncastOverlay o;
    bool have_dst = false, have_at = false;
    for (const std::string& part : split(text, ',')) {
        const std::string p = trim(part);
        if (p.empty()) continue;
        const std::size_t eq = p.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("incast expects key=value pairs, got '" + p + "'");
        const std::string k = lower(trim(p.substr(0, eq)));
        const std::string v = trim(p.substr(eq + 1));
        if (k == "sources") {
            o.num_sources = static_cast<std::int32_t>(parse_i64(v, k));
        } else if (k == "bytes") {
            o.message_bytes = parse_u64(v, k);
        } else if (k == "dst") {
            o.dst_node = static_cast<std::int32_t>(parse_i64(v, k));
            have_dst = true;
        } else if (k == "at") {
            o.start_time_ns = parse_i64(v, k);
            have_at = true;
        } else if (k == "seed") {
            o.seed = parse_u64(v, k);
        } else {
            throw std::invalid_argument("unknown incast key '" + k + "'");
        }
    }
    if (!have_dst) throw std::invalid_argument("incast requires dst=<node>");
    if (!have_at) throw std::invalid_argument("incast requires at=<time_ns> (injection offset)");
    return o;
}

void apply_config_pair(ExperimentConfig& cfg, const std::string& raw_key,
                       const std::string& raw_value) {
    const std::string key = lower(trim(raw_key));
    const std::string value = trim(raw_value);
    if (key == "trace") {
        cfg.trace_files.push_back(value);
    } else if (key == "topology") {
        cfg.topology = value;
    } else if (key == "config") {
        const auto preset = preset_by_name(value);
        if (!preset) throw std::invalid_argument("unknown config preset '" + value + "'");
        cfg.net = *preset;
    } else if (key == "switch_arch") {
        const std::string v = lower(value);
        if (v == "iq")
            cfg.net.arch = SwitchArch::IQ;
        else if (v == "cioq")
            cfg.net.arch = SwitchArch::CIOQ;
        else
            throw std::invalid_argument("switch_arch must be iq or cioq");
    } else if (key == "flow_control") {
        const std::string v = lower(value);
        if (v == "pfc")
            cfg.net.flow_control = FlowControl::PFC;
        else if (v == "credit")
            cfg.net.flow_control = FlowControl::Credit;
        else
            throw std::invalid_argument("flow_control must be pfc or credit");
    } else if (key == "input_buffer_bytes") {
        cfg.net.input_buffer_bytes = parse_u64(value, key);
    } else if (key == "output_buffer_bytes") {
        cfg.net.output_buffer_bytes = parse_u64(value, key);
    } else if (key == "mtu_bytes") {
        cfg.net.mtu_bytes = parse_u64(value, key);
    } else if (key == "variable_packet_size") {
        cfg.net.sizing =
            parse_bool(value, key) ? PacketSizing::Variable : PacketSizing::FixedPadded;
    } else if (key == "link_bandwidth_gbps") {
        cfg.net.link_rate_gbps = static_cast<std::uint32_t>(parse_u64(value, key));
    } else if (key == "link_length_m") {
        cfg.net.cable_m = static_cast<std::uint32_t>(parse_u64(value, key));
    } else if (key == "link_latency_ns_per_m") {
        cfg.net.prop_ns_per_m = static_cast<std::uint32_t>(parse_u64(value, key));
    } else if (key == "header_bytes") {
        cfg.net.header_bytes = static_cast<std::uint32_t>(parse_u64(value, key));
    } else if (key == "num_virtual_channels") {
        cfg.net.virtual_channels = static_cast<std::uint32_t>(parse_u64(value, key));
    } else if (key == "mapping") {
        const std::string v = lower(value);
        if (v == "linear")
            cfg.mapping = MappingPolicy::Linear;
        else if (v == "random")
            cfg.mapping = MappingPolicy::Random;
        else if (v == "explicit")
            cfg.mapping = MappingPolicy::Explicit;
        else
            throw std::invalid_argument("mapping must be linear, random, or explicit");
    } else if (key == "map") {
        cfg.explicit_map.clear();
        for (const std::string& part : split(value, ','))
            cfg.explicit_map.push_back(static_cast<std::int32_t>(parse_i64(trim(part), key)));
        cfg.mapping = MappingPolicy::Explicit;
    } else if (key == "seed") {
        cfg.map_seed = parse_u64(value, key);
    } else if (key == "occupancy_window_ns") {
        const std::int64_t w = parse_i64(value, key);
        if (w < 1) throw std::invalid_argument("occupancy_window_ns must be >= 1");
        cfg.occupancy_window_ns = w;
    } else if (key == "heatmap_window") {
        cfg.heatmap_windows.clear();
        for (const std::string& part : split(value, ','))
            cfg.heatmap_windows.push_back(parse_i64(trim(part), key));
    } else if (key == "normalize_to_peak") {
        cfg.normalize_heatmap_to_peak = parse_bool(value, key);
    } else if (key == "incast") {
        cfg.incast = parse_incast_overlay(value);
    } else if (key == "out") {
        cfg.out_dir = value;
    } else {
        throw std::invalid_argument("unknown config key '" + key + "'");
    }
}

ExperimentConfig parse_experiment_config(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key=value");
        apply_config_pair(cfg, line.substr(0, eq), line.substr(eq + 1));
    }
    return cfg;
}

ExperimentConfig parse_experiment_config_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::invalid_argument("cannot read config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_experiment_config(ss.str());
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    return f;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    const Topology topo = topology_by_name(cfg.topology);
    NetworkConfig net = cfg.net;
    net.validate();
    if (cfg.trace_files.empty() && !cfg.incast)
        throw std::invalid_argument("nothing to simulate: no trace files and no incast overlay");

    std::vector<Trace> traces;
    traces.reserve(cfg.trace_files.size());
    for (const std::string& f : cfg.trace_files) traces.push_back(parse_trace_file(f));

    const std::vector<std::int32_t> nodes = iota_nodes(topo.num_nodes());
    std::vector<std::unique_ptr<Session>> sessions;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        Mapping m;
        switch (cfg.mapping) {
        case MappingPolicy::Linear:
            m = map_tasks(MappingPolicy::Linear, traces[i].header.num_tasks, nodes);
            break;
        case MappingPolicy::Random:
            m = map_tasks(MappingPolicy::Random, traces[i].header.num_tasks, nodes,
                          cfg.map_seed + i);
            break;
        case MappingPolicy::Explicit:
            m = explicit_mapping(cfg.explicit_map, topo.num_nodes());
            break;
        }
        sessions.push_back(std::make_unique<Session>(traces[i], std::move(m)));
    }

    Trace incast_trace;  // must outlive its session
    if (cfg.incast) {
        IncastSpec spec;
        spec.num_sources = cfg.incast->num_sources;
        spec.dst_task = cfg.incast->num_sources;  // destination is the last task
        spec.message_bytes = cfg.incast->message_bytes;
        spec.start_time_ns = cfg.incast->start_time_ns;
        incast_trace = synth_incast(spec);
        Mapping m = incast_overlay_mapping(spec, cfg.incast->dst_node, topo.num_nodes(), {},
                                           cfg.incast->seed);
        sessions.push_back(std::make_unique<Session>(incast_trace, std::move(m)));
    }

    RunOptions opt;
    opt.occupancy_window_ns = cfg.occupancy_window_ns;
    PacketFabric fabric(topo, net, opt);
    std::vector<Session*> raw;
    raw.reserve(sessions.size());
    for (const auto& s : sessions) raw.push_back(s.get());

    ExperimentResult res;
    res.run = fabric.run(std::move(raw));
    if (!res.run.finished)
        for (std::size_t i = 0; i < sessions.size(); ++i)
            if (!sessions[i]->is_finished()) {
                const auto rid = sessions[i]->first_incomplete_record();
                throw SimError("session " + std::to_string(i) + " stalled at record " +
                               std::to_string(rid ? *rid : -1));
            }

    std::filesystem::create_directories(cfg.out_dir);
    auto out_path = [&](const std::string& name) {
        return (std::filesystem::path(cfg.out_dir) / name).string();
    };
    auto note = [&](const std::string& p) { res.files.push_back(p); };

    std::vector<FctRecord> all = res.run.fcts;
    std::sort(all.begin(), all.end(), [](const FctRecord& a, const FctRecord& b) {
        if (a.session != b.session) return a.session < b.session;
        return a.msg_id < b.msg_id;
    });
    res.fct = fct_summary(all);

    write_summary_csv(out_path("summary.csv"), res.run.execution_time_ns, res.fct);
    note(out_path("summary.csv"));
    write_fct_csv(out_path("fct.csv"), all);
    note(out_path("fct.csv"));
    const auto cdf = fct_cdf(all, 100);
    write_fct_cdf_csv(out_path("fct_cdf.csv"), cdf);
    note(out_path("fct_cdf.csv"));

    {
        auto f = open_out(out_path("occupancy.csv"));
        f << "window,switch,port,max_bytes,capacity_bytes\n";
        const std::size_t windows =
            res.run.occupancy.empty() ? 0 : res.run.occupancy.front().window_max.size();
        for (std::size_t w = 0; w < windows; ++w)
            for (const PortWindows& pw : res.run.occupancy)
                f << w << ',' << (pw.kind == DeviceKind::Switch ? "sw" : "nic") << pw.device << ','
                  << pw.port << ',' << pw.window_max[w] << ',' << pw.capacity_bytes << '\n';
        note(out_path("occupancy.csv"));
    }

    const std::size_t windows =
        res.run.occupancy.empty() ? 0 : res.run.occupancy.front().window_max.size();
    for (const std::int64_t w : cfg.heatmap_windows) {
        if (w < 0 || static_cast<std::size_t>(w) >= windows)
            throw std::invalid_argument("heatmap window " + std::to_string(w) +
                                        " out of range (run has " + std::to_string(windows) +
                                        " windows)");
        std::vector<PortOccupancy> occ;
        occ.reserve(res.run.occupancy.size());
        for (const PortWindows& pw : res.run.occupancy)
            occ.push_back({pw.kind, pw.device, pw.port, pw.window_max[static_cast<std::size_t>(w)],
                           pw.capacity_bytes});
        const std::string p = out_path("heatmap_window" + std::to_string(w) + ".svg");
        render_heatmap_file(topo, occ, p, cfg.normalize_heatmap_to_peak);
        note(p);
    }

    if (sessions.size() > 1) {
        for (std::size_t k = 0; k < sessions.size(); ++k) {
            std::vector<FctRecord> mine;
            for (const FctRecord& r : all)
                if (static_cast<std::size_t>(r.session) == k) mine.push_back(r);
            const std::string fct_p = out_path("fct_session" + std::to_string(k) + ".csv");
            write_fct_csv(fct_p, mine);
            note(fct_p);
            const std::string sum_p = out_path("summary_session" + std::to_string(k) + ".csv");
            write_summary_csv(sum_p, res.run.session_elapsed_ns[k], fct_summary(mine));
            note(sum_p);
        }
    }
    return res;
}

}  // namespace veft
