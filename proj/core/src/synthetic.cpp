#include "veft/synthetic.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>
#include <string>

namespace veft {

Trace synth_incast(const IncastSpec& spec) {
    if (spec.num_sources < 1) throw std::invalid_argument("incast needs at least one source");
    if (spec.dst_task < 0 || spec.dst_task > spec.num_sources)
        throw std::invalid_argument("incast destination task " + std::to_string(spec.dst_task) +
                                    " outside [0, " + std::to_string(spec.num_sources) + "]");
    if (spec.start_time_ns < 0) throw std::invalid_argument("incast start time must be >= 0");
    Trace t;
    t.header.num_tasks = spec.num_sources + 1;
    std::int64_t rid = 0;
    for (std::int32_t task = 0; task <= spec.num_sources; ++task) {
        if (task == spec.dst_task) continue;
        TraceRecord r;
        r.record_id = rid++;
        r.body = P2PSend{task, spec.dst_task, spec.message_bytes};
        r.dep = Dependency{DepKind::Init, -1, spec.start_time_ns};
        t.records.push_back(std::move(r));
    }
    t.header.num_records = static_cast<std::int64_t>(t.records.size());
    return t;
}

Mapping incast_overlay_mapping(const IncastSpec& spec, std::int32_t dst_node,
                               std::int32_t num_nodes, std::vector<std::int32_t> source_nodes,
                               std::uint64_t seed) {
    if (spec.num_sources < 1) throw std::invalid_argument("incast needs at least one source");
    if (dst_node < 0 || dst_node >= num_nodes)
        throw std::invalid_argument("incast destination node out of range");
    if (spec.num_sources > num_nodes - 1)
        throw std::invalid_argument("not enough nodes for " + std::to_string(spec.num_sources) +
                                    " distinct incast sources");
    if (source_nodes.empty()) {
        std::vector<std::int32_t> candidates;
        candidates.reserve(static_cast<std::size_t>(num_nodes) - 1);
        for (std::int32_t n = 0; n < num_nodes; ++n)
            if (n != dst_node) candidates.push_back(n);
        std::mt19937_64 rng(seed);
        for (std::int32_t i = 0; i < spec.num_sources; ++i) {
            const std::size_t remaining = candidates.size() - static_cast<std::size_t>(i);
            const std::size_t j = static_cast<std::size_t>(i) + rng() % remaining;
            std::swap(candidates[static_cast<std::size_t>(i)], candidates[j]);
        }
        candidates.resize(static_cast<std::size_t>(spec.num_sources));
        source_nodes = std::move(candidates);
    } else {
        if (static_cast<std::int32_t>(source_nodes.size()) != spec.num_sources)
            throw std::invalid_argument("explicit source list size != num_sources");
        std::vector<std::int32_t> sorted = source_nodes;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw std::invalid_argument("incast sources must be distinct");
        for (std::int32_t n : source_nodes)
            if (n < 0 || n >= num_nodes || n == dst_node)
                throw std::invalid_argument("incast source node out of range or equal to dst");
    }
    std::vector<std::int32_t> table(static_cast<std::size_t>(spec.num_sources) + 1, -1);
    std::size_t next_source = 0;
    for (std::int32_t task = 0; task <= spec.num_sources; ++task)
        table[static_cast<std::size_t>(task)] =
            task == spec.dst_task ? dst_node : source_nodes[next_source++];
    return explicit_mapping(std::move(table), num_nodes);
}

}  // namespace veft
