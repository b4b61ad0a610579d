#include "veft/topology.hpp"

#include <stdexcept>

namespace veft {

std::int32_t Topology::route_port(std::int32_t sw, std::int32_t dst_node) const {
    std::int32_t p = routes_.at(static_cast<std::size_t>(sw)).at(static_cast<std::size_t>(dst_node));
    if (p < 0)
        throw std::logic_error("no route from switch " + std::to_string(sw) + " to node " +
                               std::to_string(dst_node));
    return p;
}

std::vector<Hop> Topology::route_path(std::int32_t src_node, std::int32_t dst_node) const {
    std::vector<Hop> hops;
    if (src_node == dst_node) return hops;
    PortRef at{DeviceKind::Node, src_node, 0};
    PortRef next = attach(src_node);
    hops.push_back({at, next});
    while (next.kind == DeviceKind::Switch) {
        if (hops.size() > wiring_.size() + 2)
            throw std::logic_error("routing loop toward node " + std::to_string(dst_node));
        const std::int32_t out = route_port(next.device, dst_node);
        PortRef tx{DeviceKind::Switch, next.device, out};
        next = peer(next.device, out);
        if (next.kind == DeviceKind::None)
            throw std::logic_error("route uses unwired port " + std::to_string(out) +
                                   " on switch " + std::to_string(tx.device));
        hops.push_back({tx, next});
    }
    if (next.device != dst_node)
        throw std::logic_error("route delivered to node " + std::to_string(next.device) +
                               " instead of " + std::to_string(dst_node));
    return hops;
}

std::int64_t Topology::used_port_count() const {
    std::int64_t n = 0;
    for (const auto& ports : wiring_)
        for (const PortRef& p : ports)
            if (p.kind != DeviceKind::None) ++n;
    return n;
}

TopologyBuilder::TopologyBuilder(std::string name, std::int32_t num_nodes,
                                 std::int32_t num_switches, std::int32_t radix) {
    if (num_nodes < 1 || num_switches < 1 || radix < 1)
        throw std::invalid_argument("topology needs at least one node, switch and port");
    t_.name_ = std::move(name);
    t_.radix_ = radix;
    t_.attach_.resize(static_cast<std::size_t>(num_nodes));
    t_.wiring_.assign(static_cast<std::size_t>(num_switches),
                      std::vector<PortRef>(static_cast<std::size_t>(radix)));
    t_.routes_.assign(static_cast<std::size_t>(num_switches),
                      std::vector<std::int32_t>(static_cast<std::size_t>(num_nodes), -1));
    attached_.assign(static_cast<std::size_t>(num_nodes), false);
}

namespace {

void check_port(const Topology& t, std::int32_t sw, std::int32_t port) {
    if (sw < 0 || sw >= t.num_switches())
        throw std::invalid_argument("switch id " + std::to_string(sw) + " out of range");
    if (port < 0 || port >= t.radix())
        throw std::invalid_argument("port " + std::to_string(port) + " out of range");
}

}  // namespace

TopologyBuilder& TopologyBuilder::attach_node(std::int32_t node, std::int32_t sw,
                                              std::int32_t port) {
    check_port(t_, sw, port);
    if (node < 0 || node >= t_.num_nodes())
        throw std::invalid_argument("node id " + std::to_string(node) + " out of range");
    if (attached_[static_cast<std::size_t>(node)])
        throw std::invalid_argument("node " + std::to_string(node) + " attached twice");
    auto& slot = t_.wiring_[static_cast<std::size_t>(sw)][static_cast<std::size_t>(port)];
    if (slot.kind != DeviceKind::None)
        throw std::invalid_argument("port already wired on switch " + std::to_string(sw));
    slot = {DeviceKind::Node, node, 0};
    t_.attach_[static_cast<std::size_t>(node)] = {DeviceKind::Switch, sw, port};
    attached_[static_cast<std::size_t>(node)] = true;
    return *this;
}

TopologyBuilder& TopologyBuilder::connect(std::int32_t sw_a, std::int32_t port_a,
                                          std::int32_t sw_b, std::int32_t port_b) {
    check_port(t_, sw_a, port_a);
    check_port(t_, sw_b, port_b);
    auto& a = t_.wiring_[static_cast<std::size_t>(sw_a)][static_cast<std::size_t>(port_a)];
    auto& b = t_.wiring_[static_cast<std::size_t>(sw_b)][static_cast<std::size_t>(port_b)];
    if (a.kind != DeviceKind::None || b.kind != DeviceKind::None)
        throw std::invalid_argument("cable endpoint already wired");
    a = {DeviceKind::Switch, sw_b, port_b};
    b = {DeviceKind::Switch, sw_a, port_a};
    return *this;
}

TopologyBuilder& TopologyBuilder::route(std::int32_t sw, std::int32_t dst_node,
                                        std::int32_t port) {
    check_port(t_, sw, port);
    if (dst_node < 0 || dst_node >= t_.num_nodes())
        throw std::invalid_argument("destination node out of range");
    t_.routes_[static_cast<std::size_t>(sw)][static_cast<std::size_t>(dst_node)] = port;
    return *this;
}

Topology TopologyBuilder::build() {
    for (std::size_t n = 0; n < attached_.size(); ++n)
        if (!attached_[n])
            throw std::invalid_argument("node " + std::to_string(n) + " is not attached");
    return std::move(t_);
}

Topology fat_tree_256() {
    constexpr std::int32_t kLeaves = 16, kSpines = 16, kNodesPerLeaf = 16;
    constexpr std::int32_t kNodes = kLeaves * kNodesPerLeaf;
    TopologyBuilder b("fat-tree-256", kNodes, kLeaves + kSpines, 32);
    for (std::int32_t n = 0; n < kNodes; ++n)
        b.attach_node(n, n / kNodesPerLeaf, n % kNodesPerLeaf);
    for (std::int32_t l = 0; l < kLeaves; ++l)
        for (std::int32_t u = 0; u < kSpines; ++u)
            b.connect(l, kNodesPerLeaf + u, kLeaves + u, l);
    for (std::int32_t d = 0; d < kNodes; ++d) {
        const std::int32_t leaf = d / kNodesPerLeaf;
        for (std::int32_t l = 0; l < kLeaves; ++l)
            b.route(l, d, l == leaf ? d % kNodesPerLeaf : kNodesPerLeaf + d % kSpines);
        for (std::int32_t u = 0; u < kSpines; ++u) b.route(kLeaves + u, d, leaf);
    }
    return b.build();
}

Topology megafly_288() {
    constexpr std::int32_t kGroups = 9, kLeaves = 4, kSpines = 4, kNodesPerLeaf = 8;
    constexpr std::int32_t kNodes = kGroups * kLeaves * kNodesPerLeaf;
    const auto leaf_id = [](std::int32_t g, std::int32_t l) { return g * 8 + l; };
    const auto spine_id = [](std::int32_t g, std::int32_t s) { return g * 8 + 4 + s; };
    TopologyBuilder b("megafly-288", kNodes, kGroups * 8, 16);

    for (std::int32_t n = 0; n < kNodes; ++n)
        b.attach_node(n, leaf_id(n / 32, (n / kNodesPerLeaf) % kLeaves), n % kNodesPerLeaf);
    for (std::int32_t g = 0; g < kGroups; ++g)
        for (std::int32_t l = 0; l < kLeaves; ++l)
            for (std::int32_t s = 0; s < kSpines; ++s)
                for (std::int32_t k = 0; k < 2; ++k)  // two parallel leaf-spine cables
                    b.connect(leaf_id(g, l), 8 + 2 * s + k, spine_id(g, s), 2 * l + k);
    for (std::int32_t g = 0; g < kGroups; ++g)
        for (std::int32_t h = g + 1; h < kGroups; ++h)
            for (std::int32_t s = 0; s < kSpines; ++s)
                b.connect(spine_id(g, s), 8 + (h - 1), spine_id(h, s), 8 + g);

    for (std::int32_t d = 0; d < kNodes; ++d) {
        const std::int32_t dg = d / 32, dl = (d / kNodesPerLeaf) % kLeaves;
        const std::int32_t ds = d % 4, k = (d / 4) % 2;
        for (std::int32_t g = 0; g < kGroups; ++g) {
            for (std::int32_t l = 0; l < kLeaves; ++l)
                b.route(leaf_id(g, l), d,
                        g == dg && l == dl ? d % kNodesPerLeaf : 8 + 2 * ds + k);
            for (std::int32_t s = 0; s < kSpines; ++s)
                b.route(spine_id(g, s), d,
                        g == dg ? 2 * dl + k : 8 + (dg < g ? dg : dg - 1));
        }
    }
    return b.build();
}

Topology topology_by_name(const std::string& name) {
    if (name == "fat-tree-256") return fat_tree_256();
    if (name == "megafly-288") return megafly_288();
    throw std::invalid_argument("unknown topology '" + name + "'");
}

}  // namespace veft
