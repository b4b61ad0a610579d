#include "doctest.h"
#include "helpers.hpp"
#include "veft/fabric.hpp"
#include "veft/static_analysis.hpp"

#include <algorithm>
#include <map>
#include <random>

using namespace veft;

TEST_SUITE_BEGIN("fabric");

namespace {

RunResult run_text(const Topology& topo, const NetworkConfig& cfg, const std::string& text,
                   std::vector<std::int32_t> nodes, RunOptions opt = {}) {
    Trace t = parse_trace_string(text);
    Session s(t, explicit_mapping(std::move(nodes), topo.num_nodes()));
    PacketFabric f(topo, cfg, opt);
    RunResult r = f.run({&s});
    REQUIRE(r.finished);
    return r;
}

std::string one_send(std::uint64_t bytes) {
    return "VEFT 1 2 0 1\nSEND 0 0 1 " + std::to_string(bytes) + " I 0\n";
}

std::int64_t deliver_of(const RunResult& r, std::int64_t msg_id) {
    for (const FctRecord& f : r.fcts)
        if (f.msg_id == msg_id) return f.deliver_ns;
    FAIL("no completion for message ", msg_id);
    return -1;
}

}  // namespace

TEST_CASE("uncontended flows match the closed-form completion time") {
    const Topology topos[] = {fat_tree_256(), megafly_288()};
    const NetworkConfig cfgs[] = {config1(), config2()};
    // same switch / one intermediate level / full diameter, per topology
    const std::pair<std::int32_t, std::int32_t> routes[2][3] = {
        {{0, 1}, {0, 100}, {255, 0}},
        {{0, 1}, {0, 9}, {0, 287}},
    };
    const std::uint64_t sizes[] = {0, 1, 4096, 10000, 100000};
    for (std::size_t ti = 0; ti < 2; ++ti) {
        for (const NetworkConfig& cfg : cfgs) {
            for (auto [src, dst] : routes[ti]) {
                for (std::uint64_t bytes : sizes) {
                    CAPTURE(topos[ti].name());
                    CAPTURE(src);
                    CAPTURE(dst);
                    CAPTURE(bytes);
                    RunResult r = run_text(topos[ti], cfg, one_send(bytes), {src, dst},
                                           {1'000'000'000, true});
                    const std::int64_t want = th::fct_oracle(topos[ti], cfg, src, dst, bytes);
                    REQUIRE(r.fcts.size() == 1);
                    REQUIRE(r.fcts[0].fct_ns() == want);
                    REQUIRE(r.execution_time_ns == want);
                    REQUIRE(r.packets_injected == packet_count(cfg, bytes));
                    REQUIRE(r.packets_delivered == r.packets_injected);
                }
            }
        }
    }
}

TEST_CASE("known completion times") {
    // 4096 B needs one padded packet: 2 links x (328 + 15) ns on one leaf.
    RunResult r = run_text(fat_tree_256(), config2(), one_send(4096), {0, 1});
    CHECK(r.fcts[0].fct_ns() == 686);
    // Variable sizing, full message in one 9600 B packet across the spine.
    RunResult r2 = run_text(fat_tree_256(), config1(), one_send(9600), {0, 100});
    CHECK(r2.fcts[0].fct_ns() == 4 * (192 + 15));
}

TEST_CASE("propagation delay scales with cable length") {
    NetworkConfig cfg = config1();
    cfg.cable_m = 100;  // 500 ns per link
    RunResult r = run_text(fat_tree_256(), cfg, one_send(9600), {0, 1});
    CHECK(r.fcts[0].fct_ns() == 2 * (192 + 500));
    CHECK(r.fcts[0].fct_ns() == th::fct_oracle(fat_tree_256(), cfg, 0, 1, 9600));
}

TEST_CASE("input-queued switches suffer head-of-line blocking; CIOQ does not") {
    // Three flows on one fat-tree leaf (nodes 0..3). At t=96 node 0 queues a
    // packet to node 1 and one to node 2 while a two-packet burst from node 3
    // occupies the output toward node 1. Under IQ the packet to node 2 waits
    // behind the blocked head; under CIOQ it proceeds through its idle output.
    const std::string text =
        "VEFT 1 4 0 3\n"
        "SEND 0 0 1 9600 I 96\n"
        "SEND 1 0 2 9600 I 96\n"
        "SEND 2 3 1 19200 I 0\n";
    NetworkConfig cioq = config1();
    NetworkConfig iq = config1();
    iq.arch = SwitchArch::IQ;

    RunResult rc = run_text(fat_tree_256(), cioq, text, {0, 1, 2, 3}, {1'000'000'000, true});
    CHECK(deliver_of(rc, 0) == 606);
    CHECK(deliver_of(rc, 1) == 702);  // uncontended: 96 + 192 (NIC wait) + 2*(192+15)
    CHECK(deliver_of(rc, 2) == 798);

    RunResult ri = run_text(fat_tree_256(), iq, text, {0, 1, 2, 3}, {1'000'000'000, true});
    CHECK(deliver_of(ri, 0) == 606);
    CHECK(deliver_of(ri, 1) == 798);  // +96 ns head-of-line penalty
    CHECK(deliver_of(ri, 2) == 798);
}

TEST_CASE("round robin shares a bottleneck between two flows") {
    // Two 10-packet flows from different leaves converge on one destination;
    // the spine-to-leaf serializer must clock all 20 packets.
    const std::uint64_t bytes = 40960;  // 10 x 4096
    const std::string text =
        "VEFT 1 3 0 2\n"
        "SEND 0 0 2 40960 I 0\n"
        "SEND 1 1 2 40960 I 0\n";
    const Topology ft = fat_tree_256();
    const NetworkConfig cfg = config2();
    RunResult r = run_text(ft, cfg, text, {16, 32, 0}, {1'000'000'000, true});
    REQUIRE(r.fcts.size() == 2);
    const std::int64_t T = serialization_ns(4096, cfg.link_rate_gbps);
    const std::int64_t P = cfg.propagation_ns();
    const std::int64_t K = 10;
    const std::int64_t uncontended = th::fct_oracle(ft, cfg, 16, 0, bytes);
    const std::int64_t lo = std::min(r.fcts[0].fct_ns(), r.fcts[1].fct_ns());
    const std::int64_t hi = std::max(r.fcts[0].fct_ns(), r.fcts[1].fct_ns());
    CHECK(lo >= uncontended);
    // Lower bound: earliest packet reaches the bottleneck after two links,
    // 2K packets serialize there, the last one still has a link and a half.
    CHECK(hi >= 2 * (T + P) + 2 * K * T + (T + 2 * P));
    CHECK(hi <= 2 * uncontended);  // no worse than strictly serial flows
    CHECK(hi - lo <= 2 * (T + P));  // fair arbitration: both finish together-ish
}

TEST_CASE("pause frames keep every buffer within capacity under incast") {
    // 32 sources on two remote leaves all target node 0; the offered load far
    // exceeds the buffering, so only PFC back-pressure prevents overflow.
    Trace t;
    t.header.num_tasks = 33;
    std::vector<std::int32_t> nodes;
    nodes.push_back(0);  // task 0 = destination at node 0
    for (int i = 0; i < 32; ++i) {
        t.records.push_back({i, P2PSend{i + 1, 0, 65536}, {}});
        nodes.push_back(16 + i);  // leaves 1 and 2
    }
    t.header.num_records = 32;
    const Topology ft = fat_tree_256();
    const NetworkConfig cfg = config1();
    Session s(t, explicit_mapping(nodes, ft.num_nodes()));
    PacketFabric f(ft, cfg, {1'000'000'000, true});
    RunResult r = f.run({&s});
    REQUIRE(r.finished);
    CHECK(r.packets_injected == 32 * 7);  // 65536 -> 6 full + 1 tail packet
    CHECK(r.packets_delivered == r.packets_injected);
    std::uint64_t busiest = 0;
    for (const PortWindows& w : r.occupancy) {
        if (w.kind != DeviceKind::Switch) continue;
        for (std::uint64_t m : w.window_max) {
            CHECK(m <= cfg.input_buffer_bytes);
            busiest = std::max(busiest, m);
        }
    }
    // The pause threshold (free space < 2 MTU) really was crossed.
    CHECK(busiest > cfg.input_buffer_bytes - 2 * cfg.mtu_bytes);
}

TEST_CASE("credit flow control sustains incast without loss") {
    Trace t;
    t.header.num_tasks = 9;
    std::vector<std::int32_t> nodes{0};
    for (int i = 0; i < 8; ++i) {
        t.records.push_back({i, P2PSend{i + 1, 0, 32768}, {}});
        nodes.push_back(8 * (i + 1));  // eight different megafly leaves
    }
    t.header.num_records = 8;
    const Topology mf = megafly_288();
    Session s(t, explicit_mapping(nodes, mf.num_nodes()));
    PacketFabric f(mf, config2(), {1'000'000'000, true});
    RunResult r = f.run({&s});
    REQUIRE(r.finished);
    CHECK(r.packets_delivered == r.packets_injected);
    CHECK(r.packets_injected == 8 * 8);  // 32768 = 8 x 4096
}

TEST_CASE("messages between co-located tasks bypass the network") {
    RunResult r = run_text(fat_tree_256(), config1(),
                           "VEFT 1 2 0 1\nSEND 0 0 1 100000 I 3\n", {7, 7});
    CHECK(r.packets_injected == 0);
    CHECK(r.packets_delivered == 0);
    CHECK(r.fcts.empty());
    CHECK(r.execution_time_ns == 3);
}

TEST_CASE("zero-byte barrier crosses the fabric as empty packets") {
    const std::string text = "VEFT 1 3 1 1\nCOMM 1 3 0 1 2\nCOLL 0 1 BARRIER 0 0 I 0\n";
    SUBCASE("variable packets serialize in zero time") {
        RunResult r = run_text(fat_tree_256(), config1(), text, {0, 16, 32});
        CHECK(r.packets_injected == 4);  // 2 reduce + 2 broadcast
        CHECK(r.execution_time_ns == 2 * (4 * 15));  // two phases of pure propagation
        for (const FctRecord& f : r.fcts) CHECK(f.fct_ns() == 60);
    }
    SUBCASE("padded packets still pay full serialization") {
        RunResult r = run_text(fat_tree_256(), config2(), text, {0, 16, 32});
        const std::int64_t per_phase = th::fct_oracle(fat_tree_256(), config2(), 0, 16, 0);
        CHECK(per_phase == 4 * (328 + 15));
        // The two packets of each phase share one serializer (the spine output
        // inbound, the hub NIC outbound), so the second runs one slot late.
        CHECK(r.execution_time_ns == 2 * per_phase + 2 * 328);
    }
}

TEST_CASE("per-link traffic accounting covers exactly the route") {
    const Topology ft = fat_tree_256();
    const NetworkConfig cfg = config2();
    RunResult r = run_text(ft, cfg, one_send(40960), {3, 200});
    const std::uint64_t K = 10;
    std::map<std::tuple<int, int, int>, std::uint64_t> expect;
    for (const Hop& h : ft.route_path(3, 200))
        expect[{static_cast<int>(h.to.kind), h.to.device, h.to.port}] = K;
    for (const PortTraffic& pt : r.traffic) {
        const auto key = std::make_tuple(static_cast<int>(pt.kind), pt.device, pt.port);
        const auto it = expect.find(key);
        const std::uint64_t want = it == expect.end() ? 0 : it->second;
        REQUIRE(pt.packets == want);
        REQUIRE(pt.bytes == want * 4096);
    }
    // Traffic rows enumerate wired switch inputs then every NIC.
    CHECK(r.traffic.size() == 768 + 256);
    CHECK(r.occupancy.size() == r.traffic.size());
}

TEST_CASE("nic receive statistics") {
    const Topology ft = fat_tree_256();
    const NetworkConfig cfg = config2();
    RunResult r = run_text(ft, cfg, one_send(40960), {0, 1});
    const NicRxStats& rx = r.nic_rx[1];
    CHECK(rx.node == 1);
    CHECK(rx.packets == 10);
    CHECK(rx.bytes == 10 * 4096);
    CHECK(rx.busy_ns == 10 * 328);
    // A saturated pipe keeps the destination NIC continuously busy.
    CHECK(rx.last_rx_end - rx.first_rx_start == rx.busy_ns);
    CHECK(rx.last_rx_end == r.fcts[0].deliver_ns);
    const NicRxStats& idle = r.nic_rx[5];
    CHECK(idle.packets == 0);
    CHECK(idle.first_rx_start == -1);
}

TEST_CASE("two sessions run side by side with tagged completions") {
    Trace a = parse_trace_string(one_send(9600));
    Trace b = parse_trace_string(one_send(19200));
    const Topology ft = fat_tree_256();
    Session sa(a, explicit_mapping({0, 1}, 256));
    Session sb(b, explicit_mapping({32, 48}, 256));
    PacketFabric f(ft, config1(), {1'000'000'000, true});
    RunResult r = f.run({&sa, &sb});
    REQUIRE(r.finished);
    REQUIRE(r.fcts.size() == 2);
    std::map<std::int32_t, std::int64_t> by_session;
    for (const FctRecord& rec : r.fcts) by_session[rec.session] = rec.fct_ns();
    CHECK(by_session[0] == th::fct_oracle(ft, config1(), 0, 1, 9600));
    CHECK(by_session[1] == th::fct_oracle(ft, config1(), 32, 48, 19200));
    CHECK(r.session_elapsed_ns.size() == 2);
    CHECK(r.execution_time_ns ==
          std::max(r.session_elapsed_ns[0], r.session_elapsed_ns[1]));
}

TEST_CASE("random soaks conserve packets and dominate the ideal bus") {
    std::mt19937_64 rng(6021023);
    const Topology topos[] = {fat_tree_256(), megafly_288()};
    const NetworkConfig cfgs[] = {config1(), config2()};
    for (int iter = 0; iter < 12; ++iter) {
        Trace t = th::random_valid_trace(rng, 24, 80, 50000);
        IdealReplayResult ideal = ideal_replay(t);
        REQUIRE(ideal.ok());
        for (const Topology& topo : topos) {
            for (const NetworkConfig& cfg : cfgs) {
                CAPTURE(iter);
                CAPTURE(topo.name());
                Session s(t, map_tasks(MappingPolicy::Linear, t.header.num_tasks,
                                       iota_nodes(topo.num_nodes())));
                PacketFabric f(topo, cfg, {1'000'000'000, true});
                RunResult r = f.run({&s});
                REQUIRE(r.finished);
                REQUIRE(r.packets_delivered == r.packets_injected);
                REQUIRE(r.execution_time_ns >= ideal.duration_ns);
                // Delivery order is time-sorted.
                for (std::size_t i = 1; i < r.fcts.size(); ++i)
                    REQUIRE(r.fcts[i].deliver_ns >= r.fcts[i - 1].deliver_ns);
                // Each flow is bounded below by its uncontended completion.
                std::uint64_t expected_packets = 0;
                std::size_t non_self = 0;
                for (const LoggedMessage& lm : s.message_log()) {
                    if (lm.self) continue;
                    ++non_self;
                    expected_packets += packet_count(cfg, lm.msg.length_bytes);
                    const std::int64_t floor = th::fct_oracle(
                        topo, cfg, lm.msg.src_node, lm.msg.dst_node, lm.msg.length_bytes);
                    REQUIRE(lm.delivered_ns - lm.msg.gen_time_ns >= floor);
                }
                REQUIRE(r.fcts.size() == non_self);
                REQUIRE(r.packets_injected == expected_packets);
            }
        }
    }
}

TEST_CASE("a stalled session surfaces as an unfinished run") {
    Trace t = parse_trace_string(
        "VEFT 1 3 0 3\n"
        "SEND 0 0 1 100 I 0\n"
        "SEND 1 1 2 100 I 0\n"
        "SEND 2 2 0 100 R 0 0\n");
    const Topology ft = fat_tree_256();
    Session s(t, explicit_mapping({0, 1, 2}, 256));
    PacketFabric f(ft, config1());
    RunResult r = f.run({&s});
    CHECK_FALSE(r.finished);
    CHECK(s.first_incomplete_record() == std::int64_t{2});
    CHECK(r.packets_delivered == r.packets_injected);  // what was sent, arrived
}

TEST_SUITE_END();
