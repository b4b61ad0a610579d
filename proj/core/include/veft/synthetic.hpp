#pragma once
// Synthetic traffic generation. The flagship pattern is the incast burst:
// many sources fire one message each at a single destination at the same
// instant. Output is an ordinary trace, so it can be validated, analyzed,
// written to disk, or replayed as an overlay session next to a real trace.

#include <cstdint>
#include <vector>

#include "veft/replay.hpp"
#include "veft/trace.hpp"

namespace veft {

struct IncastSpec {
    std::int32_t num_sources = 64;
    std::int32_t dst_task = 0;  // destination task id within the emitted trace
    std::uint64_t message_bytes = 10485760;  // 10 MiB
    std::int64_t start_time_ns = 0;
};

// Builds a trace with num_sources+1 tasks: every task except dst_task sends
// one message of message_bytes to dst_task, eligible at start_time_ns (INIT
// dependency with delay = start_time_ns). Throws std::invalid_argument for
// num_sources < 1 or dst_task outside [0, num_sources].
Trace synth_incast(const IncastSpec& spec);

// Places the incast tasks onto fabric nodes for overlay runs: dst_task ->
// dst_node, source tasks (ascending task id) -> source_nodes in order, or
// seeded-random distinct nodes != dst_node when source_nodes is empty.
Mapping incast_overlay_mapping(const IncastSpec& spec, std::int32_t dst_node,
                               std::int32_t num_nodes,
                               std::vector<std::int32_t> source_nodes = {},
                               std::uint64_t seed = 0);

}  // namespace veft
