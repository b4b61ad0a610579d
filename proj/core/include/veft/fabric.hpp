#pragma once
// Packet-level fabric simulation: store-and-forward links, IQ or CIOQ
// switches with per-output round-robin arbitration, credit-based or PFC
// flow control, and NIC endpoints that drive replay sessions through the
// next_ready/notify contract. Everything runs on one EventQueue; identical
// inputs give identical event sequences.

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "veft/event_queue.hpp"
#include "veft/metrics.hpp"
#include "veft/network_config.hpp"
#include "veft/replay.hpp"
#include "veft/topology.hpp"

namespace veft {

class SimError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunOptions {
    std::int64_t occupancy_window_ns = OccupancyTracker::kDefaultWindowNs;
    // Re-check buffer/credit conservation after every event (tests).
    bool paranoid_checks = false;
};

struct PortTraffic {
    DeviceKind kind = DeviceKind::Switch;  // receiving device of the directed link
    std::int32_t device = 0;
    std::int32_t port = 0;
    std::uint64_t packets = 0;
    std::uint64_t bytes = 0;
};

struct NicRxStats {
    std::int32_t node = 0;
    std::uint64_t packets = 0;
    std::uint64_t bytes = 0;
    std::int64_t busy_ns = 0;        // serialization time summed over received packets
    std::int64_t first_rx_start = -1;
    std::int64_t last_rx_end = -1;
};

struct PortWindows {
    DeviceKind kind = DeviceKind::Switch;
    std::int32_t device = 0;
    std::int32_t port = 0;
    std::uint64_t capacity_bytes = 0;
    std::vector<std::uint64_t> window_max;
};

struct RunResult {
    bool finished = false;            // every session completed every record
    std::int64_t execution_time_ns = 0;
    std::vector<std::int64_t> session_elapsed_ns;
    std::vector<FctRecord> fcts;      // delivery order; non-self messages only
    std::uint64_t packets_injected = 0;
    std::uint64_t packets_delivered = 0;
    std::vector<PortTraffic> traffic;     // wired switch inputs, then NIC inputs
    std::vector<PortWindows> occupancy;   // same port order as traffic
    std::vector<NicRxStats> nic_rx;
};

class PacketFabric {
public:
    // The topology must outlive the fabric; only a reference is kept.
    PacketFabric(const Topology& topo, const NetworkConfig& cfg, RunOptions opt = {});
    PacketFabric(Topology&&, const NetworkConfig&, RunOptions = {}) = delete;

    // Drives the sessions to completion (or until no progress is possible,
    // e.g. a stalled dependency) and collects metrics.
    RunResult run(std::vector<Session*> sessions);

private:
    struct Packet {
        std::int32_t session = 0;
        std::int64_t msg_id = 0;
        std::uint32_t seq = 0;
        bool last = false;
        std::uint64_t payload = 0;
        std::uint64_t wire = 0;
        std::int32_t src_node = 0;
        std::int32_t dst_node = 0;
    };

    struct TxRef {  // transmitting endpoint of a directed link
        DeviceKind kind = DeviceKind::None;
        std::int32_t device = -1;
        std::int32_t port = 0;
    };

    struct SwInput {
        bool wired = false;
        PortRef upstream_peer;  // who transmits into this port
        std::deque<Packet> q;
        std::uint64_t bytes = 0;
        bool busy = false;      // IQ: head packet being serialized out
        bool xoff_sent = false;
        OccupancyTracker tracker;
        std::uint64_t pkts_rx = 0, bytes_rx = 0;
        SwInput() : tracker(1) {}
    };

    struct TxPort {
        bool wired = false;
        PortRef peer;           // receiving endpoint downstream
        bool busy = false;
        bool paused = false;    // PFC pause as currently seen by this sender
        std::uint64_t credits = 0;
        std::uint64_t in_flight = 0;  // granted bytes not yet in the downstream buffer
        std::int32_t rr = 0;          // arbitration pointer (switch outputs)
        std::deque<Packet> outq;      // CIOQ output queue
        std::uint64_t out_bytes = 0;
        std::int64_t next_grant = 0;
        bool grant_scheduled = false;
    };

    struct SwitchState {
        std::vector<SwInput> in;
        std::vector<TxPort> out;
    };

    struct NicState {
        std::deque<Packet> txq;
        TxPort tx;
        OccupancyTracker rx_tracker;
        NicRxStats rx;
        NicState() : rx_tracker(1) {}
    };

    struct MsgProgress {
        std::uint32_t packets_left = 0;
        std::uint64_t bytes = 0;
        std::int64_t gen_ns = 0;
    };

    // --- injection / session driving ---
    void pump_sessions();
    void schedule_pump();
    void inject(const Message& m, std::int32_t session);
    // --- transmit paths ---
    void nic_try_tx(std::int32_t node);
    void iq_try_serve(std::int32_t sw, std::int32_t out);
    void cioq_try_grant(std::int32_t sw, std::int32_t out);
    void cioq_try_tx(std::int32_t sw, std::int32_t out);
    void kick_tx(const TxRef& tx);
    // --- receive paths ---
    void switch_arrive(std::int32_t sw, std::int32_t port, const Packet& p);
    void nic_arrive(std::int32_t node, const Packet& p);
    void input_dequeued(std::int32_t sw, std::int32_t port, std::uint64_t wire);
    // --- flow control ---
    void pfc_after_enqueue(std::int32_t sw, std::int32_t port);
    void pfc_after_dequeue(std::int32_t sw, std::int32_t port);
    void return_credits(const TxRef& tx, std::uint64_t wire);
    TxRef upstream_of(const PortRef& receiver_peer) const;
    TxPort& tx_port(const TxRef& r);
    // --- bookkeeping ---
    std::int64_t now() const { return eq_.now(); }
    std::int32_t route_out(std::int32_t sw, std::int32_t dst_node) const;
    void check_conservation();
    static std::uint64_t msg_key(std::int32_t session, std::int64_t msg_id);

    const Topology* topo_;
    NetworkConfig cfg_;
    RunOptions opt_;
    EventQueue eq_;
    std::vector<Session*> sessions_;
    std::vector<SwitchState> switches_;
    std::vector<NicState> nics_;
    std::unordered_map<std::uint64_t, MsgProgress> progress_;
    std::int64_t pump_at_ = -1;
    std::uint64_t packets_injected_ = 0;
    std::uint64_t packets_delivered_ = 0;
    std::vector<FctRecord> fcts_;
};

}  // namespace veft
