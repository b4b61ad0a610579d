#pragma once
// Switch-level topology descriptions with per-switch destination routing
// tables. Two fixed fabrics are built in:
//
//   fat-tree-256: two-level folded Clos. Switch ids 0-15 are leaves (ports
//   0-15 down to nodes 16*leaf+p, ports 16+u up to spine u), ids 16-31 are
//   spines (port l down to leaf l). Minimal routing spreads by destination:
//   uplink u = dst mod 16.
//
//   megafly-288: 9 groups of 4 leaves + 4 spines, 8 nodes per leaf. Switch
//   id = group*8 + local (local 0-3 leaf, 4-7 spine). Leaf ports 0-7 down to
//   nodes, 8+2s+k up to local spine s over parallel link k; spine ports 2l+k
//   down to leaf l, 8+adj to the same-numbered spine of each other group.
//   Routing: spine = dst mod 4, parallel link k = (dst/4) mod 2, one global
//   hop to the destination group.

#include <cstdint>
#include <string>
#include <vector>

namespace veft {

enum class DeviceKind : int { None = 0, Node, Switch };

struct PortRef {
    DeviceKind kind = DeviceKind::None;
    std::int32_t device = -1;
    std::int32_t port = 0;  // always 0 on a node
    bool operator==(const PortRef&) const = default;
};

struct Hop {
    PortRef from;  // transmitting endpoint
    PortRef to;    // receiving endpoint; its input port names the link
    bool operator==(const Hop&) const = default;
};

class Topology {
public:
    const std::string& name() const { return name_; }
    std::int32_t num_nodes() const { return static_cast<std::int32_t>(attach_.size()); }
    std::int32_t num_switches() const { return static_cast<std::int32_t>(wiring_.size()); }
    std::int32_t radix() const { return radix_; }

    // Switch-side port a node is cabled to.
    PortRef attach(std::int32_t node) const { return attach_.at(static_cast<std::size_t>(node)); }
    // The far end of a switch port (kind None when unwired).
    PortRef peer(std::int32_t sw, std::int32_t port) const {
        return wiring_.at(static_cast<std::size_t>(sw)).at(static_cast<std::size_t>(port));
    }
    // Output port on sw toward dst_node; throws when the table has no entry.
    std::int32_t route_port(std::int32_t sw, std::int32_t dst_node) const;
    // Directed links traversed from src to dst (empty when src == dst).
    std::vector<Hop> route_path(std::int32_t src_node, std::int32_t dst_node) const;
    std::int32_t hop_count(std::int32_t src_node, std::int32_t dst_node) const {
        return static_cast<std::int32_t>(route_path(src_node, dst_node).size());
    }
    // Wired switch ports, node attachments included.
    std::int64_t used_port_count() const;

private:
    friend class TopologyBuilder;
    std::string name_;
    std::int32_t radix_ = 0;
    std::vector<PortRef> attach_;
    std::vector<std::vector<PortRef>> wiring_;        // [switch][port]
    std::vector<std::vector<std::int32_t>> routes_;   // [switch][dst_node], -1 = none
};

class TopologyBuilder {
public:
    TopologyBuilder(std::string name, std::int32_t num_nodes, std::int32_t num_switches,
                    std::int32_t radix);
    TopologyBuilder& attach_node(std::int32_t node, std::int32_t sw, std::int32_t port);
    TopologyBuilder& connect(std::int32_t sw_a, std::int32_t port_a, std::int32_t sw_b,
                             std::int32_t port_b);
    TopologyBuilder& route(std::int32_t sw, std::int32_t dst_node, std::int32_t port);
    // Verifies every node is attached and hands the result over.
    Topology build();

private:
    Topology t_;
    std::vector<bool> attached_;
};

Topology fat_tree_256();
Topology megafly_288();
// "fat-tree-256" or "megafly-288"; throws std::invalid_argument otherwise.
Topology topology_by_name(const std::string& name);

}  // namespace veft
