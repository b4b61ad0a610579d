#include "doctest.h"
#include "helpers.hpp"
#include "veft/network_config.hpp"
#include "veft/topology.hpp"

#include <map>
#include <set>

using namespace veft;

TEST_SUITE_BEGIN("network");

TEST_CASE("serialization time rounds half-up at the configured rate") {
    CHECK(serialization_ns(9600, 400) == 192);
    CHECK(serialization_ns(4096, 100) == 328);  // 327.68 rounds up
    CHECK(serialization_ns(4096, 400) == 82);   // 81.92 rounds up
    CHECK(serialization_ns(2048, 400) == 41);   // 40.96 rounds up
    CHECK(serialization_ns(400, 400) == 8);
    CHECK(serialization_ns(0, 400) == 0);
    CHECK(serialization_ns(1, 400) == 0);       // 0.02 rounds down
    CHECK(serialization_ns(30, 400) == 1);      // 0.6 rounds up
}

TEST_CASE("packetization") {
    NetworkConfig c1 = config1();
    SUBCASE("variable sizing keeps the tail packet short") {
        auto p = packetize(c1, 10000);
        REQUIRE(p.size() == 2);
        CHECK(p[0].payload_bytes == 9600);
        CHECK(p[0].wire_bytes == 9600);
        CHECK(p[1].payload_bytes == 400);
        CHECK(p[1].wire_bytes == 400);
    }
    SUBCASE("fixed sizing pads every packet to the MTU") {
        NetworkConfig c2 = config2();
        auto p = packetize(c2, 10000);
        REQUIRE(p.size() == 3);
        for (const auto& pk : p) CHECK(pk.wire_bytes == 4096);
        CHECK(p[0].payload_bytes == 4096);
        CHECK(p[2].payload_bytes == 10000 - 2 * 4096);
        CHECK(packet_count(c2, 10000) == 3);
    }
    SUBCASE("zero-byte messages still make one packet") {
        auto p = packetize(c1, 0);
        REQUIRE(p.size() == 1);
        CHECK(p[0].payload_bytes == 0);
        CHECK(p[0].wire_bytes == 0);
        CHECK(packet_count(c1, 0) == 1);
        CHECK(packetize(config2(), 0).front().wire_bytes == 4096);  // padded even when empty
    }
    SUBCASE("exact multiples have no tail") {
        auto p = packetize(c1, 19200);
        REQUIRE(p.size() == 2);
        CHECK(p[1].payload_bytes == 9600);
    }
    SUBCASE("header bytes ride on every packet") {
        NetworkConfig c = c1;
        c.header_bytes = 40;
        auto p = packetize(c, 10000);
        REQUIRE(p.size() == 2);
        CHECK(p[0].wire_bytes == 9640);
        CHECK(p[1].wire_bytes == 440);
    }
    SUBCASE("payload always sums to the message size") {
        NetworkConfig c2 = config2();
        for (std::uint64_t bytes : {1ull, 4095ull, 4096ull, 4097ull, 1048576ull, 999999ull}) {
            std::uint64_t total = 0;
            for (const auto& pk : packetize(c2, bytes)) {
                total += pk.payload_bytes;
                CHECK(pk.payload_bytes <= c2.mtu_bytes);
            }
            CHECK(total == bytes);
        }
    }
}

TEST_CASE("built-in configurations") {
    NetworkConfig c1 = config1();
    CHECK(c1.arch == SwitchArch::CIOQ);
    CHECK(c1.flow_control == FlowControl::PFC);
    CHECK(c1.input_buffer_bytes == 131072);
    CHECK(c1.output_buffer_bytes == 49152);
    CHECK(c1.mtu_bytes == 9600);
    CHECK(c1.sizing == PacketSizing::Variable);
    CHECK(c1.link_rate_gbps == 400);
    CHECK(c1.propagation_ns() == 15);
    CHECK(c1.header_bytes == 0);
    CHECK(c1.virtual_channels == 1);
    CHECK_NOTHROW(c1.validate());

    NetworkConfig c2 = config2();
    CHECK(c2.arch == SwitchArch::IQ);
    CHECK(c2.flow_control == FlowControl::Credit);
    CHECK(c2.input_buffer_bytes == 131072);
    CHECK(c2.mtu_bytes == 4096);
    CHECK(c2.sizing == PacketSizing::FixedPadded);
    CHECK(c2.link_rate_gbps == 100);
    CHECK(c2.propagation_ns() == 15);
    CHECK_NOTHROW(c2.validate());

    CHECK(preset_by_name("config1").has_value());
    CHECK(preset_by_name("config2").has_value());
    CHECK_FALSE(preset_by_name("config3").has_value());
}

TEST_CASE("configuration validation") {
    auto bad = [](auto mutate) {
        NetworkConfig c = config1();
        mutate(c);
        CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    };
    bad([](NetworkConfig& c) { c.virtual_channels = 2; });
    bad([](NetworkConfig& c) { c.virtual_channels = 0; });
    bad([](NetworkConfig& c) { c.link_rate_gbps = 0; });
    bad([](NetworkConfig& c) { c.mtu_bytes = 0; });
    bad([](NetworkConfig& c) { c.input_buffer_bytes = c.mtu_bytes - 1; });
    bad([](NetworkConfig& c) { c.output_buffer_bytes = c.mtu_bytes - 1; });  // CIOQ needs room
    bad([](NetworkConfig& c) { c.input_buffer_bytes = 4 * c.mtu_bytes - 1; });  // PFC headroom
    {
        NetworkConfig c = config2();
        c.output_buffer_bytes = 0;  // fine: IQ has no output queue
        CHECK_NOTHROW(c.validate());
        c.input_buffer_bytes = 2 * c.mtu_bytes;  // fine: credit needs no PFC headroom
        CHECK_NOTHROW(c.validate());
    }
}

TEST_CASE("fat tree shape") {
    Topology t = fat_tree_256();
    CHECK(t.name() == "fat-tree-256");
    CHECK(t.num_nodes() == 256);
    CHECK(t.num_switches() == 32);
    CHECK(t.radix() == 32);
    CHECK(t.used_port_count() == 768);
    // 16 nodes per leaf, ascending.
    for (std::int32_t n : {0, 15, 16, 100, 255}) {
        PortRef a = t.attach(n);
        CHECK(a.kind == DeviceKind::Switch);
        CHECK(a.device == n / 16);
        CHECK(a.port == n % 16);
    }
}

TEST_CASE("megafly shape") {
    Topology t = megafly_288();
    CHECK(t.name() == "megafly-288");
    CHECK(t.num_nodes() == 288);
    CHECK(t.num_switches() == 72);
    CHECK(t.radix() == 16);
    CHECK(t.used_port_count() == 1152);
    PortRef a = t.attach(100);  // group 3, first leaf, local slot 4
    CHECK(a.device == 24);
    CHECK(a.port == 4);
    // Every port of every switch is cabled: terminals + switch links fill the radix.
    std::int64_t wired = 0;
    for (std::int32_t sw = 0; sw < t.num_switches(); ++sw)
        for (std::int32_t p = 0; p < t.radix(); ++p)
            if (t.peer(sw, p).kind != DeviceKind::None) ++wired;
    CHECK(wired == 1152);
}

TEST_CASE("cabling is symmetric") {
    for (const Topology& t : {fat_tree_256(), megafly_288()}) {
        CAPTURE(t.name());
        for (std::int32_t n = 0; n < t.num_nodes(); ++n) {
            PortRef a = t.attach(n);
            REQUIRE(a.kind == DeviceKind::Switch);
            PortRef back = t.peer(a.device, a.port);
            REQUIRE(back.kind == DeviceKind::Node);
            REQUIRE(back.device == n);
        }
        for (std::int32_t sw = 0; sw < t.num_switches(); ++sw) {
            for (std::int32_t p = 0; p < t.radix(); ++p) {
                PortRef peer = t.peer(sw, p);
                if (peer.kind != DeviceKind::Switch) continue;
                PortRef back = t.peer(peer.device, peer.port);
                REQUIRE(back == PortRef{DeviceKind::Switch, sw, p});
            }
        }
    }
}

TEST_CASE("routes deliver and have the expected length") {
    for (const Topology& t : {fat_tree_256(), megafly_288()}) {
        CAPTURE(t.name());
        std::mt19937_64 rng(5);
        for (int i = 0; i < 400; ++i) {
            const auto src = static_cast<std::int32_t>(rng() % t.num_nodes());
            const auto dst = static_cast<std::int32_t>(rng() % t.num_nodes());
            auto path = t.route_path(src, dst);
            if (src == dst) {
                REQUIRE(path.empty());
                continue;
            }
            REQUIRE(path.front().from == PortRef{DeviceKind::Node, src, 0});
            REQUIRE(path.back().to == PortRef{DeviceKind::Node, dst, 0});
            for (std::size_t h = 0; h + 1 < path.size(); ++h) {
                REQUIRE(path[h].to.kind == DeviceKind::Switch);
                REQUIRE(path[h].to.device == path[h + 1].from.device);
                // Each hop follows an actual cable.
                REQUIRE(t.peer(path[h + 1].from.device, path[h + 1].from.port) ==
                        path[h + 1].to);
            }
            REQUIRE(t.hop_count(src, dst) == static_cast<std::int32_t>(path.size()));
        }
    }
}

TEST_CASE("fat tree path lengths") {
    Topology t = fat_tree_256();
    CHECK(t.hop_count(3, 3) == 0);
    CHECK(t.hop_count(0, 1) == 2);     // same leaf: NIC->leaf->NIC
    CHECK(t.hop_count(0, 100) == 4);   // cross leaf: NIC->leaf->spine->leaf->NIC
    CHECK(t.hop_count(255, 0) == 4);
    // Up-port selection spreads by destination: dst mod 16 picks the spine.
    auto path = t.route_path(0, 255);
    REQUIRE(path.size() == 4);
    CHECK(path[1].to.device == 16 + 15);
}

TEST_CASE("megafly path lengths") {
    Topology t = megafly_288();
    CHECK(t.hop_count(0, 1) == 2);    // same leaf
    CHECK(t.hop_count(0, 8) == 4);    // same group, different leaf
    CHECK(t.hop_count(0, 100) == 5);  // different group
    CHECK(t.hop_count(0, 287) == 5);
    // Inter-group routes make exactly one global hop (direct group-to-group link).
    auto path = t.route_path(0, 287);
    REQUIRE(path.size() == 5);
    CHECK(path[1].to.device == 7);    // group-0 spine 3 (dst mod 4)
    CHECK(path[2].to.device == 71);   // group-8 spine 3
    CHECK(path[3].to.device == 67);   // destination leaf
}

TEST_CASE("routing next-hop ports are consistent with full routes") {
    for (const Topology& t : {fat_tree_256(), megafly_288()}) {
        std::mt19937_64 rng(17);
        for (int i = 0; i < 200; ++i) {
            const auto src = static_cast<std::int32_t>(rng() % t.num_nodes());
            const auto dst = static_cast<std::int32_t>(rng() % t.num_nodes());
            if (src == dst) continue;
            for (const Hop& h : t.route_path(src, dst))
                if (h.from.kind == DeviceKind::Switch)
                    REQUIRE(t.route_port(h.from.device, dst) == h.from.port);
        }
    }
}

TEST_CASE("deterministic single-path routing") {
    // D-mod-K style selection: the route depends only on (src, dst).
    Topology t = megafly_288();
    CHECK(t.route_path(10, 200) == t.route_path(10, 200));
    Topology t2 = megafly_288();
    CHECK(t.route_path(10, 200) == t2.route_path(10, 200));
}

TEST_CASE("unknown topology name throws") {
    CHECK_THROWS_AS(topology_by_name("torus-64"), std::invalid_argument);
    CHECK(topology_by_name("fat-tree-256").num_nodes() == 256);
    CHECK(topology_by_name("megafly-288").num_nodes() == 288);
}

TEST_SUITE_END();
