#include "veft/replay.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace veft {

namespace {

std::vector<std::int32_t> sorted_ranks(const Communicator& comm) {
    std::vector<std::int32_t> r = comm.ranks;
    std::sort(r.begin(), r.end());
    return r;
}

bool contains(const std::vector<std::int32_t>& sorted, std::int32_t v) {
    return std::binary_search(sorted.begin(), sorted.end(), v);
}

}  // namespace

std::vector<ExpandedMessage> expand_collective(CollectiveKind kind, const Communicator& comm,
                                               std::int32_t root_rank, std::uint64_t size_bytes) {
    std::vector<std::int32_t> ranks = sorted_ranks(comm);
    std::vector<ExpandedMessage> out;
    if (ranks.size() <= 1) return out;

    const bool rooted = kind == CollectiveKind::Bcast || kind == CollectiveKind::Scatter ||
                        kind == CollectiveKind::Gather || kind == CollectiveKind::Reduce;
    if (rooted && !contains(ranks, root_rank))
        throw std::invalid_argument("collective root is not a communicator member");

    switch (kind) {
    case CollectiveKind::Bcast:
    case CollectiveKind::Scatter:
        for (std::int32_t r : ranks)
            if (r != root_rank) out.push_back({root_rank, r, size_bytes, MsgPhase::Plain});
        break;
    case CollectiveKind::Gather:
    case CollectiveKind::Reduce:
        for (std::int32_t r : ranks)
            if (r != root_rank) out.push_back({r, root_rank, size_bytes, MsgPhase::Plain});
        break;
    case CollectiveKind::Allgather:
    case CollectiveKind::Alltoall:
        for (std::int32_t s : ranks)
            for (std::int32_t d : ranks)
                if (s != d) out.push_back({s, d, size_bytes, MsgPhase::Plain});
        break;
    case CollectiveKind::Allreduce:
    case CollectiveKind::Barrier: {
        const std::uint64_t b = kind == CollectiveKind::Barrier ? 0 : size_bytes;
        const std::int32_t hub = comm.ranks.front();  // first listed rank, not lowest
        for (std::int32_t r : ranks)
            if (r != hub) out.push_back({r, hub, b, MsgPhase::ReducePhase});
        for (std::int32_t r : ranks)
            if (r != hub) out.push_back({hub, r, b, MsgPhase::BcastPhase});
        break;
    }
    }
    return out;
}

Mapping map_tasks(MappingPolicy policy, std::int32_t num_tasks,
                  std::span<const std::int32_t> node_ids, std::uint64_t seed) {
    if (num_tasks < 0) throw std::invalid_argument("negative task count");
    if (node_ids.empty()) throw std::invalid_argument("empty node list");
    Mapping m;
    m.task_to_node.resize(static_cast<std::size_t>(num_tasks));
    const std::size_t n = node_ids.size();
    switch (policy) {
    case MappingPolicy::Linear:
        for (std::size_t i = 0; i < m.task_to_node.size(); ++i)
            m.task_to_node[i] = node_ids[i % n];
        break;
    case MappingPolicy::Random: {
        std::mt19937_64 rng(seed);  // fixed engine: same seed, same mapping everywhere
        for (auto& slot : m.task_to_node) slot = node_ids[rng() % n];
        break;
    }
    case MappingPolicy::Explicit:
        throw std::invalid_argument("explicit mapping takes a table; use explicit_mapping()");
    }
    return m;
}

Mapping explicit_mapping(std::vector<std::int32_t> table, std::int32_t num_nodes) {
    for (std::size_t i = 0; i < table.size(); ++i)
        if (table[i] < 0 || table[i] >= num_nodes)
            throw std::invalid_argument("mapping entry for task " + std::to_string(i) +
                                        " is outside the node range");
    Mapping m;
    m.task_to_node = std::move(table);
    return m;
}

std::vector<std::int32_t> iota_nodes(std::int32_t n) {
    std::vector<std::int32_t> v(static_cast<std::size_t>(std::max(0, n)));
    for (std::int32_t i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
    return v;
}

Session::Session(const Trace& trace, Mapping mapping)
    : trace_(&trace), mapping_(std::move(mapping)) {
    if (mapping_.num_tasks() != trace.header.num_tasks)
        throw SessionError("mapping covers " + std::to_string(mapping_.num_tasks()) +
                           " tasks, trace declares " + std::to_string(trace.header.num_tasks));
    ValidationReport report = validate_structure(trace);
    for (const Finding& f : report.findings)
        if (f.code != FindingCode::Unobservable)  // unobservable deps replay and stall instead
            throw SessionError("invalid trace: " + f.message);

    records_.resize(trace.records.size());
    for (std::size_t i = 0; i < trace.records.size(); ++i) {
        const TraceRecord& rec = trace.records[i];
        RecordState& rs = records_[i];
        if (rec.is_p2p()) {
            const P2PSend& p = rec.p2p();
            if (p.src_rank == p.dst_rank) {
                RankState st;
                st.rank = p.src_rank;
                st.pending_send = 1;
                st.pending_recv = 1;
                rs.states.push_back(st);
            } else {
                RankState src;
                src.rank = p.src_rank;
                src.pending_send = 1;
                RankState dst;
                dst.rank = p.dst_rank;
                dst.needs_eligibility = false;  // receive side just waits for the message
                dst.pending_recv = 1;
                rs.states.push_back(src);
                rs.states.push_back(dst);
                if (rs.states[0].rank > rs.states[1].rank)
                    std::swap(rs.states[0], rs.states[1]);
            }
        } else {
            const Collective& c = rec.coll();
            const Communicator* comm = trace.find_comm(c.comm_id);
            rs.expansion = expand_collective(c.kind, *comm, c.root_rank, c.size_bytes);
            rs.two_phase =
                c.kind == CollectiveKind::Allreduce || c.kind == CollectiveKind::Barrier;
            if (rs.two_phase) rs.reduce_root = comm->ranks.front();
            std::vector<std::int32_t> ranks = sorted_ranks(*comm);
            rs.states.resize(ranks.size());
            for (std::size_t k = 0; k < ranks.size(); ++k) rs.states[k].rank = ranks[k];
            for (const ExpandedMessage& m : rs.expansion) {
                find_state(i, m.src_rank)->pending_send++;
                find_state(i, m.dst_rank)->pending_recv++;
                if (m.phase == MsgPhase::ReducePhase) rs.reduce_remaining++;
            }
        }
        incomplete_states_ += static_cast<std::int64_t>(rs.states.size());

        if (rec.dep.kind != DepKind::Init) {
            std::size_t tgt = *trace.record_index(rec.dep.target_record);
            records_[tgt].dependents.push_back(i);
            const TraceRecord& trec = trace.records[tgt];
            std::vector<std::int32_t> observers = rec.dep.kind == DepKind::AfterSend
                                                      ? send_observer_ranks(trec, trace)
                                                      : recv_observer_ranks(trec, trace);
            std::vector<std::int32_t> execs = executing_ranks(rec, trace);
            std::sort(observers.begin(), observers.end());
            std::sort(execs.begin(), execs.end());
            for (std::int32_t r : execs)
                (contains(observers, r) ? rs.shared_observers : rs.fallback_ranks).push_back(r);
            rs.observers_remaining = static_cast<std::int32_t>(rs.shared_observers.size());
        }
    }

    for (std::size_t i = 0; i < trace.records.size(); ++i) {
        const TraceRecord& rec = trace.records[i];
        if (rec.dep.kind != DepKind::Init) continue;
        for (std::int32_t r : executing_ranks(rec, trace)) push_activate(i, r, rec.dep.delay_ns);
    }
    drain();
}

Session::RankState* Session::find_state(std::size_t rec_idx, std::int32_t rank) {
    auto& states = records_[rec_idx].states;
    auto it = std::lower_bound(states.begin(), states.end(), rank,
                               [](const RankState& s, std::int32_t r) { return s.rank < r; });
    if (it == states.end() || it->rank != rank)
        throw SessionError("internal: untracked rank " + std::to_string(rank) + " for record " +
                           std::to_string(trace_->records[rec_idx].record_id));
    return &*it;
}

void Session::push_activate(std::size_t rec_idx, std::int32_t rank, std::int64_t t) {
    actions_.push_back({Action::Kind::Activate, rec_idx, rank, t, 0});
}

void Session::drain() {
    while (!actions_.empty()) {
        Action a = actions_.front();
        actions_.pop_front();
        if (a.kind == Action::Kind::Activate)
            do_activate(a.record_index, a.rank, a.time);
        else
            do_self_settle(a.log_index);
    }
}

void Session::do_activate(std::size_t rec_idx, std::int32_t rank, std::int64_t t) {
    RankState* st = find_state(rec_idx, rank);
    if (st->activated)
        throw SessionError("internal: double activation of record " +
                           std::to_string(trace_->records[rec_idx].record_id));
    st->activated = true;
    st->eligible_at = t;
    st->latest_event = std::max(st->latest_event, t);

    const TraceRecord& rec = trace_->records[rec_idx];
    RecordState& rs = records_[rec_idx];
    if (rec.is_p2p()) {
        const P2PSend& p = rec.p2p();
        generate_message(rec_idx, MsgPhase::Plain, p.src_rank, p.dst_rank, p.size_bytes, t);
    } else {
        for (const ExpandedMessage& m : rs.expansion) {
            if (m.src_rank != rank || m.phase == MsgPhase::BcastPhase) continue;
            generate_message(rec_idx, m.phase, m.src_rank, m.dst_rank, m.bytes, t);
        }
        if (rs.two_phase && rank == rs.reduce_root) maybe_generate_bcast(rec_idx);
    }
    check_completion(rec_idx, *find_state(rec_idx, rank));
}

void Session::generate_message(std::size_t rec_idx, MsgPhase phase, std::int32_t src_rank,
                               std::int32_t dst_rank, std::uint64_t bytes, std::int64_t t) {
    LoggedMessage lm;
    lm.msg.msg_id = static_cast<std::int64_t>(log_.size());
    lm.msg.record_id = trace_->records[rec_idx].record_id;
    lm.msg.phase = phase;
    lm.msg.src_rank = src_rank;
    lm.msg.dst_rank = dst_rank;
    lm.msg.src_node = mapping_.node_of(src_rank);
    lm.msg.dst_node = mapping_.node_of(dst_rank);
    lm.msg.length_bytes = bytes;
    lm.msg.gen_time_ns = t;
    lm.op = trace_->records[rec_idx].op();
    lm.self = src_rank == dst_rank || lm.msg.src_node == lm.msg.dst_node;
    MsgState ms;
    ms.log_index = log_.size();
    log_.push_back(lm);
    msg_states_.push_back(ms);
    if (lm.self) {
        actions_.push_back({Action::Kind::SelfSettle, rec_idx, 0, t, ms.log_index});
    } else {
        ready_.emplace(std::make_tuple(t, lm.msg.record_id, src_rank, dst_rank), lm.msg.msg_id);
    }
}

void Session::do_self_settle(std::size_t log_index) {
    LoggedMessage& lm = log_[log_index];
    MsgState& ms = msg_states_[log_index];
    const std::int64_t t = lm.msg.gen_time_ns;
    ms.sent = true;
    ms.delivered = true;
    lm.send_complete_ns = t;
    lm.delivered_ns = t;
    ++settled_;
    std::size_t rec_idx = *trace_->record_index(lm.msg.record_id);
    apply_send_effect(rec_idx, lm.msg.src_rank, t);
    apply_recv_effect(rec_idx, lm.msg.phase, lm.msg.dst_rank, t);
}

void Session::apply_send_effect(std::size_t rec_idx, std::int32_t src_rank, std::int64_t t) {
    RankState* st = find_state(rec_idx, src_rank);
    st->pending_send--;
    st->latest_event = std::max(st->latest_event, t);
    check_completion(rec_idx, *st);
}

void Session::apply_recv_effect(std::size_t rec_idx, MsgPhase phase, std::int32_t dst_rank,
                                std::int64_t t) {
    RecordState& rs = records_[rec_idx];
    RankState* st = find_state(rec_idx, dst_rank);
    st->pending_recv--;
    st->latest_event = std::max(st->latest_event, t);
    if (rs.two_phase && phase == MsgPhase::ReducePhase) {
        rs.reduce_remaining--;
        rs.last_reduce_delivery = std::max(rs.last_reduce_delivery, t);
        if (rs.reduce_remaining == 0) maybe_generate_bcast(rec_idx);
    }
    check_completion(rec_idx, *st);
}

void Session::maybe_generate_bcast(std::size_t rec_idx) {
    RecordState& rs = records_[rec_idx];
    if (rs.bcast_generated || rs.reduce_remaining != 0) return;
    RankState* root = find_state(rec_idx, rs.reduce_root);
    if (!root->activated) return;
    // Fan-out starts once the hub is eligible and the last contribution landed.
    const std::int64_t t = std::max(root->eligible_at, rs.last_reduce_delivery);
    rs.bcast_generated = true;
    for (const ExpandedMessage& m : rs.expansion)
        if (m.phase == MsgPhase::BcastPhase)
            generate_message(rec_idx, m.phase, m.src_rank, m.dst_rank, m.bytes, t);
}

void Session::check_completion(std::size_t rec_idx, RankState& st) {
    if (st.complete) return;
    const bool gate = st.needs_eligibility ? st.activated : true;
    if (!gate || st.pending_send != 0 || st.pending_recv != 0) return;
    st.complete = true;
    st.complete_at = st.latest_event;
    --incomplete_states_;
    elapsed_ = std::max(elapsed_, st.complete_at);

    const TraceRecord& rec = trace_->records[rec_idx];
    Side side = Side::Both;
    if (rec.is_p2p() && rec.p2p().src_rank != rec.p2p().dst_rank)
        side = st.rank == rec.p2p().src_rank ? Side::Send : Side::Recv;
    fire_completion(rec_idx, side, st.rank, st.complete_at);
}

void Session::fire_completion(std::size_t rec_idx, Side side, std::int32_t rank, std::int64_t t) {
    for (std::size_t d : records_[rec_idx].dependents) {
        const Dependency& dep = trace_->records[d].dep;
        const bool match = dep.kind == DepKind::AfterSend
                               ? (side == Side::Send || side == Side::Both)
                               : (side == Side::Recv || side == Side::Both);
        if (!match) continue;
        RecordState& rs = records_[d];
        if (!contains(rs.shared_observers, rank)) continue;
        push_activate(d, rank, t + dep.delay_ns);
        rs.last_observed = std::max(rs.last_observed, t);
        if (--rs.observers_remaining == 0)
            for (std::int32_t fb : rs.fallback_ranks)
                push_activate(d, fb, rs.last_observed + dep.delay_ns);
    }
}

std::vector<Message> Session::next_ready_messages(std::int64_t now) {
    if (now < clock_)
        throw SessionError("time regression: asked for messages at " + std::to_string(now) +
                           " after clock reached " + std::to_string(clock_));
    clock_ = now;
    std::vector<Message> out;
    auto it = ready_.begin();
    while (it != ready_.end() && std::get<0>(it->first) <= now) {
        msg_states_[static_cast<std::size_t>(it->second)].handed = true;
        out.push_back(log_[static_cast<std::size_t>(it->second)].msg);
        it = ready_.erase(it);
    }
    return out;
}

Session::MsgState& Session::checked_msg(std::int64_t msg_id, std::int64_t t, const char* op) {
    if (msg_id < 0 || msg_id >= static_cast<std::int64_t>(msg_states_.size()))
        throw SessionError(std::string(op) + ": unknown message id " + std::to_string(msg_id));
    MsgState& ms = msg_states_[static_cast<std::size_t>(msg_id)];
    if (!ms.handed)
        throw SessionError(std::string(op) + ": message " + std::to_string(msg_id) +
                           " was never handed out");
    if (t < clock_)
        throw SessionError(std::string(op) + ": time regression to " + std::to_string(t) +
                           " with clock at " + std::to_string(clock_));
    if (t < log_[ms.log_index].msg.gen_time_ns)
        throw SessionError(std::string(op) + ": message " + std::to_string(msg_id) +
                           " settled before its generation time");
    return ms;
}

void Session::notify_send_complete(std::int64_t msg_id, std::int64_t t) {
    MsgState& ms = checked_msg(msg_id, t, "notify_send_complete");
    if (ms.sent)
        throw SessionError("notify_send_complete: duplicate for message " +
                           std::to_string(msg_id));
    clock_ = t;
    ms.sent = true;
    LoggedMessage& lm = log_[ms.log_index];
    lm.send_complete_ns = t;
    apply_send_effect(*trace_->record_index(lm.msg.record_id), lm.msg.src_rank, t);
    drain();
}

void Session::notify_delivered(std::int64_t msg_id, std::int64_t t) {
    MsgState& ms = checked_msg(msg_id, t, "notify_delivered");
    if (ms.delivered)
        throw SessionError("notify_delivered: duplicate for message " + std::to_string(msg_id));
    clock_ = t;
    LoggedMessage& lm = log_[ms.log_index];
    std::size_t rec_idx = *trace_->record_index(lm.msg.record_id);
    if (!ms.sent) {  // delivery subsumes the send-side event
        ms.sent = true;
        lm.send_complete_ns = t;
        apply_send_effect(rec_idx, lm.msg.src_rank, t);
    }
    ms.delivered = true;
    lm.delivered_ns = t;
    ++settled_;
    apply_recv_effect(rec_idx, lm.msg.phase, lm.msg.dst_rank, t);
    drain();
}

std::optional<std::int64_t> Session::next_pending_time() const {
    if (ready_.empty()) return std::nullopt;
    return std::get<0>(ready_.begin()->first);
}

std::optional<std::int64_t> Session::first_incomplete_record() const {
    for (std::size_t i = 0; i < records_.size(); ++i)
        for (const RankState& st : records_[i].states)
            if (!st.complete) return trace_->records[i].record_id;
    return std::nullopt;
}

}  // namespace veft
