#pragma once
// End-to-end experiment driver: flat key=value configuration, trace loading,
// task placement, overlay synthesis, the fabric run, and the deterministic
// output bundle (summary/fct/cdf/occupancy CSVs plus heatmap SVGs).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "veft/fabric.hpp"
#include "veft/metrics.hpp"
#include "veft/network_config.hpp"
#include "veft/replay.hpp"

namespace veft {

struct IncastOverlay {
    std::int32_t num_sources = 64;
    std::uint64_t message_bytes = 10485760;
    std::int32_t dst_node = 0;
    std::int64_t start_time_ns = 0;  // injection offset; no sensible default exists
    std::uint64_t seed = 0;          // source placement
};

struct ExperimentConfig {
    std::vector<std::string> trace_files;  // one replay session per file
    std::string topology = "fat-tree-256";
    NetworkConfig net;  // defaults to the CIOQ/PFC preset
    MappingPolicy mapping = MappingPolicy::Linear;
    std::uint64_t map_seed = 0;
    std::vector<std::int32_t> explicit_map;  // used when mapping == Explicit
    std::int64_t occupancy_window_ns = OccupancyTracker::kDefaultWindowNs;
    std::vector<std::int64_t> heatmap_windows = {0};  // window indices to render
    bool normalize_heatmap_to_peak = false;
    std::optional<IncastOverlay> incast;
    std::string out_dir = "out";
};

// One "key=value" per line, '#' starts a comment. Unknown keys and malformed
// values throw std::invalid_argument. Keys:
//   trace (repeatable), topology, config, switch_arch, flow_control,
//   input_buffer_bytes, output_buffer_bytes, mtu_bytes, variable_packet_size,
//   link_bandwidth_gbps, link_length_m, link_latency_ns_per_m, header_bytes,
//   num_virtual_channels, mapping, map, seed, occupancy_window_ns,
//   heatmap_window (repeatable), normalize_to_peak, incast, out
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig parse_experiment_config_file(const std::string& path);
void apply_config_pair(ExperimentConfig& cfg, const std::string& key, const std::string& value);

// "sources=64,bytes=10485760,dst=0,at=0[,seed=0]" -> overlay spec.
IncastOverlay parse_incast_overlay(const std::string& text);

struct ExperimentResult {
    RunResult run;
    FctSummary fct;  // across every session
    std::vector<std::string> files;
};

// Runs the configured experiment and writes the bundle under cfg.out_dir:
// summary.csv, fct.csv (ordered by session then msg_id), fct_cdf.csv,
// occupancy.csv, heatmap_window<k>.svg, and per-session fct/summary files
// when more than one session ran. Byte-identical bundles for equal configs.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace veft
