#include "veft/fabric.hpp"

#include <algorithm>

namespace veft {

PacketFabric::PacketFabric(const Topology& topo, const NetworkConfig& cfg, RunOptions opt)
    : topo_(&topo), cfg_(cfg), opt_(opt) {
    cfg_.validate();
    switches_.resize(static_cast<std::size_t>(topo.num_switches()));
    for (std::int32_t sw = 0; sw < topo.num_switches(); ++sw) {
        SwitchState& S = switches_[static_cast<std::size_t>(sw)];
        S.in.resize(static_cast<std::size_t>(topo.radix()));
        S.out.resize(static_cast<std::size_t>(topo.radix()));
        for (std::int32_t p = 0; p < topo.radix(); ++p) {
            const PortRef peer = topo.peer(sw, p);
            if (peer.kind == DeviceKind::None) continue;
            SwInput& in = S.in[static_cast<std::size_t>(p)];
            in.wired = true;
            in.upstream_peer = peer;
            in.tracker = OccupancyTracker(opt_.occupancy_window_ns);
            TxPort& out = S.out[static_cast<std::size_t>(p)];
            out.wired = true;
            out.peer = peer;
            out.credits = cfg_.input_buffer_bytes;
        }
    }
    nics_.resize(static_cast<std::size_t>(topo.num_nodes()));
    for (std::int32_t n = 0; n < topo.num_nodes(); ++n) {
        NicState& nic = nics_[static_cast<std::size_t>(n)];
        nic.tx.wired = true;
        nic.tx.peer = topo.attach(n);
        nic.tx.credits = cfg_.input_buffer_bytes;
        nic.rx_tracker = OccupancyTracker(opt_.occupancy_window_ns);
        nic.rx.node = n;
    }
}

std::uint64_t PacketFabric::msg_key(std::int32_t session, std::int64_t msg_id) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(session)) << 40) |
           static_cast<std::uint64_t>(msg_id);
}

std::int32_t PacketFabric::route_out(std::int32_t sw, std::int32_t dst_node) const {
    return topo_->route_port(sw, dst_node);
}

PacketFabric::TxRef PacketFabric::upstream_of(const PortRef& transmitter) const {
    if (transmitter.kind == DeviceKind::Node) return {DeviceKind::Node, transmitter.device, 0};
    return {DeviceKind::Switch, transmitter.device, transmitter.port};
}

PacketFabric::TxPort& PacketFabric::tx_port(const TxRef& r) {
    if (r.kind == DeviceKind::Node) return nics_[static_cast<std::size_t>(r.device)].tx;
    return switches_[static_cast<std::size_t>(r.device)].out[static_cast<std::size_t>(r.port)];
}

void PacketFabric::kick_tx(const TxRef& tx) {
    if (tx.kind == DeviceKind::Node) {
        nic_try_tx(tx.device);
    } else if (cfg_.arch == SwitchArch::IQ) {
        iq_try_serve(tx.device, tx.port);
    } else {
        cioq_try_tx(tx.device, tx.port);
    }
}

// ---------------------------------------------------------------- sessions

void PacketFabric::schedule_pump() {
    std::optional<std::int64_t> next;
    for (Session* s : sessions_) {
        const auto t = s->next_pending_time();
        if (t && (!next || *t < *next)) next = t;
    }
    if (!next) return;
    if (pump_at_ >= 0 && pump_at_ <= *next) return;  // an earlier pump already covers it
    pump_at_ = *next;
    eq_.schedule(*next, [this] {
        pump_at_ = -1;
        pump_sessions();
    });
}

void PacketFabric::pump_sessions() {
    struct Item {
        Message m;
        std::int32_t session;
    };
    std::vector<Item> batch;
    for (std::size_t si = 0; si < sessions_.size(); ++si)
        for (const Message& m : sessions_[si]->next_ready_messages(now()))
            batch.push_back({m, static_cast<std::int32_t>(si)});
    std::sort(batch.begin(), batch.end(), [](const Item& a, const Item& b) {
        if (a.m.gen_time_ns != b.m.gen_time_ns) return a.m.gen_time_ns < b.m.gen_time_ns;
        if (a.session != b.session) return a.session < b.session;
        return a.m.msg_id < b.m.msg_id;
    });
    for (const Item& it : batch) inject(it.m, it.session);
    schedule_pump();
}

void PacketFabric::inject(const Message& m, std::int32_t session) {
    const auto pkts = packetize(cfg_, m.length_bytes);
    progress_[msg_key(session, m.msg_id)] =
        MsgProgress{static_cast<std::uint32_t>(pkts.size()), m.length_bytes, m.gen_time_ns};
    for (std::size_t i = 0; i < pkts.size(); ++i) {
        Packet p;
        p.session = session;
        p.msg_id = m.msg_id;
        p.seq = static_cast<std::uint32_t>(i);
        p.last = i + 1 == pkts.size();
        p.payload = pkts[i].payload_bytes;
        p.wire = pkts[i].wire_bytes;
        p.src_node = m.src_node;
        p.dst_node = m.dst_node;
        nics_[static_cast<std::size_t>(m.src_node)].txq.push_back(p);
        ++packets_injected_;
    }
    nic_try_tx(m.src_node);
}

// ---------------------------------------------------------------- transmit

void PacketFabric::nic_try_tx(std::int32_t node) {
    NicState& n = nics_[static_cast<std::size_t>(node)];
    if (n.tx.busy || n.tx.paused || n.txq.empty()) return;
    const Packet p = n.txq.front();
    if (cfg_.flow_control == FlowControl::Credit && n.tx.credits < p.wire) return;
    n.txq.pop_front();
    n.tx.busy = true;
    if (cfg_.flow_control == FlowControl::Credit) n.tx.credits -= p.wire;
    n.tx.in_flight += p.wire;
    eq_.schedule(now() + serialization_ns(p.wire, cfg_.link_rate_gbps), [this, node, p] {
        NicState& nic = nics_[static_cast<std::size_t>(node)];
        nic.tx.busy = false;
        if (p.last) sessions_[static_cast<std::size_t>(p.session)]->notify_send_complete(p.msg_id, now());
        const PortRef peer = nic.tx.peer;
        eq_.schedule(now() + cfg_.propagation_ns(),
                     [this, peer, p] { switch_arrive(peer.device, peer.port, p); });
        nic_try_tx(node);
        if (p.last) pump_sessions();
    });
}

void PacketFabric::iq_try_serve(std::int32_t sw, std::int32_t out) {
    SwitchState& S = switches_[static_cast<std::size_t>(sw)];
    TxPort& o = S.out[static_cast<std::size_t>(out)];
    if (!o.wired || o.busy || o.paused) return;
    const std::int32_t R = topo_->radix();
    std::int32_t winner = -1;
    for (std::int32_t k = 0; k < R; ++k) {
        const std::int32_t i = (o.rr + k) % R;
        const SwInput& in = S.in[static_cast<std::size_t>(i)];
        if (!in.wired || in.busy || in.q.empty()) continue;
        if (route_out(sw, in.q.front().dst_node) != out) continue;
        winner = i;
        break;
    }
    if (winner < 0) return;
    SwInput& in = S.in[static_cast<std::size_t>(winner)];
    const Packet p = in.q.front();
    // Selected head short of credits: the output waits, nothing overtakes.
    if (cfg_.flow_control == FlowControl::Credit && o.credits < p.wire) return;
    o.rr = (winner + 1) % R;
    in.busy = true;
    o.busy = true;
    if (cfg_.flow_control == FlowControl::Credit) o.credits -= p.wire;
    o.in_flight += p.wire;
    eq_.schedule(now() + serialization_ns(p.wire, cfg_.link_rate_gbps), [this, sw, winner, out] {
        SwitchState& St = switches_[static_cast<std::size_t>(sw)];
        SwInput& src = St.in[static_cast<std::size_t>(winner)];
        TxPort& op = St.out[static_cast<std::size_t>(out)];
        const Packet pkt = src.q.front();
        src.q.pop_front();
        src.busy = false;
        op.busy = false;
        input_dequeued(sw, winner, pkt.wire);
        const PortRef peer = op.peer;
        eq_.schedule(now() + cfg_.propagation_ns(), [this, peer, pkt] {
            if (peer.kind == DeviceKind::Node)
                nic_arrive(peer.device, pkt);
            else
                switch_arrive(peer.device, peer.port, pkt);
        });
        iq_try_serve(sw, out);
        if (!src.q.empty()) iq_try_serve(sw, route_out(sw, src.q.front().dst_node));
    });
}

void PacketFabric::cioq_try_grant(std::int32_t sw, std::int32_t out) {
    SwitchState& S = switches_[static_cast<std::size_t>(sw)];
    TxPort& o = S.out[static_cast<std::size_t>(out)];
    if (!o.wired) return;
    if (now() < o.next_grant) {  // one transfer per output per serialization slot
        if (!o.grant_scheduled) {
            o.grant_scheduled = true;
            eq_.schedule(o.next_grant, [this, sw, out] {
                switches_[static_cast<std::size_t>(sw)]
                    .out[static_cast<std::size_t>(out)]
                    .grant_scheduled = false;
                cioq_try_grant(sw, out);
            });
        }
        return;
    }
    const std::int32_t R = topo_->radix();
    std::int32_t winner = -1;
    for (std::int32_t k = 0; k < R; ++k) {
        const std::int32_t i = (o.rr + k) % R;
        const SwInput& in = S.in[static_cast<std::size_t>(i)];
        if (!in.wired || in.q.empty()) continue;
        if (route_out(sw, in.q.front().dst_node) != out) continue;
        winner = i;
        break;
    }
    if (winner < 0) return;
    SwInput& in = S.in[static_cast<std::size_t>(winner)];
    const Packet p = in.q.front();
    if (o.out_bytes + p.wire > cfg_.output_buffer_bytes) return;  // retried when space frees
    o.rr = (winner + 1) % R;
    in.q.pop_front();
    input_dequeued(sw, winner, p.wire);
    o.outq.push_back(p);
    o.out_bytes += p.wire;
    o.next_grant = now() + serialization_ns(p.wire, cfg_.link_rate_gbps);
    if (!o.grant_scheduled) {
        o.grant_scheduled = true;
        eq_.schedule(o.next_grant, [this, sw, out] {
            switches_[static_cast<std::size_t>(sw)]
                .out[static_cast<std::size_t>(out)]
                .grant_scheduled = false;
            cioq_try_grant(sw, out);
        });
    }
    cioq_try_tx(sw, out);
    if (!in.q.empty()) cioq_try_grant(sw, route_out(sw, in.q.front().dst_node));
}

void PacketFabric::cioq_try_tx(std::int32_t sw, std::int32_t out) {
    SwitchState& S = switches_[static_cast<std::size_t>(sw)];
    TxPort& o = S.out[static_cast<std::size_t>(out)];
    if (!o.wired || o.busy || o.paused || o.outq.empty()) return;
    const Packet p = o.outq.front();
    if (cfg_.flow_control == FlowControl::Credit && o.credits < p.wire) return;
    o.outq.pop_front();  // bytes stay counted until transmission finishes
    o.busy = true;
    if (cfg_.flow_control == FlowControl::Credit) o.credits -= p.wire;
    o.in_flight += p.wire;
    eq_.schedule(now() + serialization_ns(p.wire, cfg_.link_rate_gbps), [this, sw, out, p] {
        TxPort& op = switches_[static_cast<std::size_t>(sw)].out[static_cast<std::size_t>(out)];
        op.busy = false;
        op.out_bytes -= p.wire;
        const PortRef peer = op.peer;
        eq_.schedule(now() + cfg_.propagation_ns(), [this, peer, p] {
            if (peer.kind == DeviceKind::Node)
                nic_arrive(peer.device, p);
            else
                switch_arrive(peer.device, peer.port, p);
        });
        cioq_try_grant(sw, out);
        cioq_try_tx(sw, out);
    });
}

// ----------------------------------------------------------------- receive

void PacketFabric::switch_arrive(std::int32_t sw, std::int32_t port, const Packet& p) {
    SwitchState& S = switches_[static_cast<std::size_t>(sw)];
    SwInput& in = S.in[static_cast<std::size_t>(port)];
    tx_port(upstream_of(in.upstream_peer)).in_flight -= p.wire;
    in.bytes += p.wire;
    if (in.bytes > cfg_.input_buffer_bytes)
        throw SimError("input buffer overflow: switch " + std::to_string(sw) + " port " +
                       std::to_string(port) + " holds " + std::to_string(in.bytes) + " bytes");
    in.q.push_back(p);
    in.tracker.record(now(), in.bytes);
    ++in.pkts_rx;
    in.bytes_rx += p.wire;
    pfc_after_enqueue(sw, port);
    if (in.q.size() == 1) {  // packet became head: a forwarding opportunity
        const std::int32_t out = route_out(sw, p.dst_node);
        if (cfg_.arch == SwitchArch::IQ) {
            if (!in.busy) iq_try_serve(sw, out);
        } else {
            cioq_try_grant(sw, out);
        }
    }
}

void PacketFabric::input_dequeued(std::int32_t sw, std::int32_t port, std::uint64_t wire) {
    SwInput& in = switches_[static_cast<std::size_t>(sw)].in[static_cast<std::size_t>(port)];
    in.bytes -= wire;
    in.tracker.record(now(), in.bytes);
    pfc_after_dequeue(sw, port);
    if (cfg_.flow_control == FlowControl::Credit) {
        const TxRef up = upstream_of(in.upstream_peer);
        tx_port(up).credits += wire;  // returned the instant bytes leave the buffer
        kick_tx(up);
    }
}

void PacketFabric::nic_arrive(std::int32_t node, const Packet& p) {
    if (p.dst_node != node)
        throw SimError("misrouted packet: message " + std::to_string(p.msg_id) + " reached node " +
                       std::to_string(node) + " instead of " + std::to_string(p.dst_node));
    NicState& n = nics_[static_cast<std::size_t>(node)];
    const TxRef up = upstream_of(n.tx.peer);  // final switch transmits into this NIC
    tx_port(up).in_flight -= p.wire;
    n.rx_tracker.record(now(), p.wire);  // drains instantly, spike still tracked
    n.rx_tracker.record(now(), 0);
    ++n.rx.packets;
    n.rx.bytes += p.wire;
    const std::int64_t ser = serialization_ns(p.wire, cfg_.link_rate_gbps);
    n.rx.busy_ns += ser;
    if (n.rx.first_rx_start < 0) n.rx.first_rx_start = now() - ser;
    n.rx.last_rx_end = now();
    if (cfg_.flow_control == FlowControl::Credit) {
        tx_port(up).credits += p.wire;
        kick_tx(up);
    }
    ++packets_delivered_;
    auto it = progress_.find(msg_key(p.session, p.msg_id));
    if (it == progress_.end() || it->second.packets_left == 0)
        throw SimError("duplicate or unknown packet for message " + std::to_string(p.msg_id));
    if (--it->second.packets_left == 0) {
        sessions_[static_cast<std::size_t>(p.session)]->notify_delivered(p.msg_id, now());
        fcts_.push_back({p.session, p.msg_id, it->second.bytes, it->second.gen_ns, now()});
        progress_.erase(it);
        pump_sessions();
    }
}

// ------------------------------------------------------------- flow control

void PacketFabric::pfc_after_enqueue(std::int32_t sw, std::int32_t port) {
    if (cfg_.flow_control != FlowControl::PFC) return;
    SwInput& in = switches_[static_cast<std::size_t>(sw)].in[static_cast<std::size_t>(port)];
    if (in.xoff_sent) return;
    if (cfg_.input_buffer_bytes - in.bytes < 2 * cfg_.mtu_bytes) {
        in.xoff_sent = true;
        const TxRef up = upstream_of(in.upstream_peer);
        eq_.schedule(now() + cfg_.propagation_ns(), [this, up] { tx_port(up).paused = true; });
    }
}

void PacketFabric::pfc_after_dequeue(std::int32_t sw, std::int32_t port) {
    if (cfg_.flow_control != FlowControl::PFC) return;
    SwInput& in = switches_[static_cast<std::size_t>(sw)].in[static_cast<std::size_t>(port)];
    if (!in.xoff_sent) return;
    if (cfg_.input_buffer_bytes - in.bytes >= 4 * cfg_.mtu_bytes) {
        in.xoff_sent = false;
        const TxRef up = upstream_of(in.upstream_peer);
        eq_.schedule(now() + cfg_.propagation_ns(), [this, up] {
            tx_port(up).paused = false;
            kick_tx(up);
        });
    }
}

void PacketFabric::return_credits(const TxRef& tx, std::uint64_t wire) {
    tx_port(tx).credits += wire;
    kick_tx(tx);
}

// ------------------------------------------------------------------- checks

void PacketFabric::check_conservation() {
    auto downstream_bytes = [&](const PortRef& peer) -> std::uint64_t {
        if (peer.kind == DeviceKind::Node) return 0;  // NIC inputs drain instantly
        return switches_[static_cast<std::size_t>(peer.device)]
            .in[static_cast<std::size_t>(peer.port)]
            .bytes;
    };
    auto check_link = [&](const TxPort& t, const std::string& what) {
        if (!t.wired) return;
        if (cfg_.flow_control == FlowControl::Credit &&
            t.credits + t.in_flight + downstream_bytes(t.peer) != cfg_.input_buffer_bytes)
            throw SimError("credit conservation violated at " + what);
        if (cfg_.arch == SwitchArch::CIOQ && t.out_bytes > cfg_.output_buffer_bytes)
            throw SimError("output buffer overflow at " + what);
    };
    for (std::size_t sw = 0; sw < switches_.size(); ++sw) {
        for (std::size_t p = 0; p < switches_[sw].out.size(); ++p)
            check_link(switches_[sw].out[p],
                       "switch " + std::to_string(sw) + " port " + std::to_string(p));
        for (const SwInput& in : switches_[sw].in)
            if (in.wired && in.bytes > cfg_.input_buffer_bytes)
                throw SimError("input occupancy above capacity at switch " + std::to_string(sw));
    }
    for (std::size_t n = 0; n < nics_.size(); ++n)
        check_link(nics_[n].tx, "nic " + std::to_string(n));
}

// --------------------------------------------------------------------- run

RunResult PacketFabric::run(std::vector<Session*> sessions) {
    sessions_ = std::move(sessions);
    pump_sessions();
    while (!eq_.empty()) {
        eq_.step();
        if (opt_.paranoid_checks) check_conservation();
    }

    // The fabric must be idle: every injected packet delivered, all credit
    // pools refilled, nothing half-transmitted.
    check_conservation();
    for (std::size_t sw = 0; sw < switches_.size(); ++sw)
        for (std::size_t p = 0; p < switches_[sw].in.size(); ++p) {
            const SwInput& in = switches_[sw].in[p];
            if (in.bytes != 0 || !in.q.empty() || in.busy)
                throw SimError("run ended with packets stranded in a switch buffer: switch " +
                               std::to_string(sw) + " port " + std::to_string(p) + " holds " +
                               std::to_string(in.bytes) + " bytes, " + std::to_string(in.q.size()) +
                               " packets" + (in.busy ? ", input busy" : ""));
        }
    for (std::size_t sw = 0; sw < switches_.size(); ++sw)
        for (std::size_t p = 0; p < switches_[sw].out.size(); ++p) {
            const TxPort& o = switches_[sw].out[p];
            if (!o.wired) continue;
            if (o.busy || o.out_bytes != 0 || o.in_flight != 0 ||
                (cfg_.flow_control == FlowControl::Credit && o.credits != cfg_.input_buffer_bytes))
                throw SimError("run ended with a transmitter mid-flight: switch " +
                               std::to_string(sw) + " port " + std::to_string(p) +
                               (o.busy ? ", busy" : "") + ", out_bytes=" +
                               std::to_string(o.out_bytes) + ", in_flight=" +
                               std::to_string(o.in_flight) + ", credits=" +
                               std::to_string(o.credits) + "/" +
                               std::to_string(cfg_.input_buffer_bytes));
        }
    for (std::size_t n = 0; n < nics_.size(); ++n) {
        const NicState& nic = nics_[n];
        if (nic.tx.busy || !nic.txq.empty() || nic.tx.in_flight != 0)
            throw SimError("run ended with packets stranded at a NIC: node " + std::to_string(n) +
                           (nic.tx.busy ? ", busy" : "") + ", queued=" +
                           std::to_string(nic.txq.size()) + ", in_flight=" +
                           std::to_string(nic.tx.in_flight));
    }

    RunResult r;
    r.finished = true;
    for (Session* s : sessions_) {
        r.finished = r.finished && s->is_finished();
        r.session_elapsed_ns.push_back(s->elapsed_ns());
        r.execution_time_ns = std::max(r.execution_time_ns, s->elapsed_ns());
    }
    r.fcts = fcts_;
    r.packets_injected = packets_injected_;
    r.packets_delivered = packets_delivered_;
    for (std::int32_t sw = 0; sw < topo_->num_switches(); ++sw)
        for (std::int32_t p = 0; p < topo_->radix(); ++p) {
            const SwInput& in =
                switches_[static_cast<std::size_t>(sw)].in[static_cast<std::size_t>(p)];
            if (!in.wired) continue;
            r.traffic.push_back({DeviceKind::Switch, sw, p, in.pkts_rx, in.bytes_rx});
            r.occupancy.push_back({DeviceKind::Switch, sw, p, cfg_.input_buffer_bytes,
                                   in.tracker.finish(r.execution_time_ns)});
        }
    for (std::int32_t n = 0; n < topo_->num_nodes(); ++n) {
        const NicState& nic = nics_[static_cast<std::size_t>(n)];
        r.traffic.push_back({DeviceKind::Node, n, 0, nic.rx.packets, nic.rx.bytes});
        r.occupancy.push_back({DeviceKind::Node, n, 0, cfg_.input_buffer_bytes,
                               nic.rx_tracker.finish(r.execution_time_ns)});
        r.nic_rx.push_back(nic.rx);
    }
    return r;
}

}  // namespace veft
