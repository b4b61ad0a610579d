#pragma once
// Trace replay: task-to-node mapping policies, N-delivery collective
// expansion, and the per-rank record state machine that feeds message-level
// backends (packet fabric or ideal bus) through a narrow notify contract.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "veft/trace.hpp"

namespace veft {

enum class MsgPhase : int { Plain = 0, ReducePhase, BcastPhase };

struct ExpandedMessage {
    std::int32_t src_rank = 0;
    std::int32_t dst_rank = 0;
    std::uint64_t bytes = 0;
    MsgPhase phase = MsgPhase::Plain;
    bool operator==(const ExpandedMessage&) const = default;
};

// N-delivery expansion of one collective call. Deterministic order: reduce
// phase before broadcast phase for ALLREDUCE/BARRIER, ascending
// (src_rank, dst_rank) within a phase. Rootless kinds ignore root_rank;
// ALLREDUCE reduces to the communicator's first listed rank and broadcasts
// from it, BARRIER is a zero-byte ALLREDUCE.
std::vector<ExpandedMessage> expand_collective(CollectiveKind kind, const Communicator& comm,
                                               std::int32_t root_rank, std::uint64_t size_bytes);

enum class MappingPolicy : int { Linear = 0, Random, Explicit };

struct Mapping {
    std::vector<std::int32_t> task_to_node;

    std::int32_t node_of(std::int32_t task) const {
        return task_to_node.at(static_cast<std::size_t>(task));
    }
    std::int32_t num_tasks() const { return static_cast<std::int32_t>(task_to_node.size()); }
    bool operator==(const Mapping&) const = default;
};

// LINEAR: task i -> node_ids[i mod n]. RANDOM: per-task uniform pick
// nodes[mt19937_64(seed)() % n]; mt19937_64 is fully specified, so one seed
// yields the same mapping on every platform. EXPLICIT is built with
// explicit_mapping().
Mapping map_tasks(MappingPolicy policy, std::int32_t num_tasks,
                  std::span<const std::int32_t> node_ids, std::uint64_t seed = 0);
// Validates every entry against [0, num_nodes).
Mapping explicit_mapping(std::vector<std::int32_t> table, std::int32_t num_nodes);
// Convenience: node ids 0..n-1.
std::vector<std::int32_t> iota_nodes(std::int32_t n);

// One application message as handed to a backend. Self messages (same rank,
// or both ranks mapped to one node) are never handed out; they settle inside
// the session at their generation instant.
struct Message {
    std::int64_t msg_id = 0;  // dense, unique per session, generation order
    std::int64_t record_id = 0;
    MsgPhase phase = MsgPhase::Plain;
    std::int32_t src_rank = 0, dst_rank = 0;
    std::int32_t src_node = 0, dst_node = 0;
    std::uint64_t length_bytes = 0;
    std::int64_t gen_time_ns = 0;  // eligibility instant of the generating rank
};

// Generation log entry covering network and self messages alike.
struct LoggedMessage {
    Message msg;
    OpKind op = OpKind::P2P;
    bool self = false;
    std::int64_t send_complete_ns = -1;
    std::int64_t delivered_ns = -1;
};

class SessionError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Replay state machine for one trace under one mapping.
//
// Record lifecycle per executing rank: blocked -> eligible (dependency
// satisfied + delay) -> complete (all rank-sourced messages send-complete and
// all rank-destined messages delivered, never before eligibility). A P2P
// record completes at its source rank on send-completion and at its
// destination rank on delivery. Completion events unblock dependents:
// AFTER_SEND binds to send-side completions, AFTER_RECV to receive-side ones,
// and either to a collective's per-rank completion. Executing ranks that
// cannot observe the event themselves become eligible when the last observing
// executing rank has seen it; if no executing rank can observe it, the record
// never activates and the session stalls.
class Session {
public:
    Session(const Trace& trace, Mapping mapping);

    // Messages whose generation instant is <= now and that were not handed
    // out yet, ordered by (gen_time, record_id, src_rank, dst_rank).
    std::vector<Message> next_ready_messages(std::int64_t now);
    // Last packet of the message finished serializing at the source NIC.
    void notify_send_complete(std::int64_t msg_id, std::int64_t t);
    // Last byte of the message arrived at the destination. Implies
    // send-completion at the same instant when it was not reported earlier.
    void notify_delivered(std::int64_t msg_id, std::int64_t t);

    bool is_finished() const { return incomplete_states_ == 0; }
    // Largest completion timestamp seen so far (0 for an empty trace).
    std::int64_t elapsed_ns() const { return elapsed_; }
    std::int64_t clock_ns() const { return clock_; }
    // Earliest generation instant among messages not yet handed out.
    std::optional<std::int64_t> next_pending_time() const;

    const std::vector<LoggedMessage>& message_log() const { return log_; }
    std::int64_t messages_generated() const { return static_cast<std::int64_t>(log_.size()); }
    std::int64_t messages_settled() const { return settled_; }
    std::optional<std::int64_t> first_incomplete_record() const;
    const Trace& trace() const { return *trace_; }
    const Mapping& mapping() const { return mapping_; }

private:
    struct RankState {
        std::int32_t rank = 0;
        bool needs_eligibility = true;  // false only for a passive P2P destination
        bool activated = false;
        std::int64_t eligible_at = -1;
        std::int32_t pending_send = 0;
        std::int32_t pending_recv = 0;
        std::int64_t latest_event = -1;
        bool complete = false;
        std::int64_t complete_at = -1;
    };

    struct RecordState {
        std::vector<RankState> states;  // ascending rank
        // Dependency bookkeeping for this record's own dependency.
        std::vector<std::int32_t> shared_observers;  // executing ∩ observers
        std::vector<std::int32_t> fallback_ranks;    // executing \ observers
        std::int32_t observers_remaining = 0;
        std::int64_t last_observed = -1;
        // ALLREDUCE/BARRIER internals.
        bool two_phase = false;
        std::int32_t reduce_root = -1;
        std::int32_t reduce_remaining = 0;
        std::int64_t last_reduce_delivery = -1;
        bool bcast_generated = false;
        std::vector<ExpandedMessage> expansion;
        std::vector<std::size_t> dependents;  // record indices depending on this record
    };

    struct MsgState {
        std::size_t log_index = 0;
        bool handed = false;
        bool sent = false;
        bool delivered = false;
    };

    enum class Side { Send, Recv, Both };

    struct Action {
        enum class Kind { Activate, SelfSettle } kind;
        std::size_t record_index = 0;
        std::int32_t rank = 0;
        std::int64_t time = 0;
        std::size_t log_index = 0;
    };

    RankState* find_state(std::size_t rec_idx, std::int32_t rank);
    void push_activate(std::size_t rec_idx, std::int32_t rank, std::int64_t t);
    void drain();
    void do_activate(std::size_t rec_idx, std::int32_t rank, std::int64_t t);
    void do_self_settle(std::size_t log_index);
    void generate_message(std::size_t rec_idx, MsgPhase phase, std::int32_t src_rank,
                          std::int32_t dst_rank, std::uint64_t bytes, std::int64_t t);
    void maybe_generate_bcast(std::size_t rec_idx);
    void apply_send_effect(std::size_t rec_idx, std::int32_t src_rank, std::int64_t t);
    void apply_recv_effect(std::size_t rec_idx, MsgPhase phase, std::int32_t dst_rank,
                           std::int64_t t);
    void check_completion(std::size_t rec_idx, RankState& st);
    void fire_completion(std::size_t rec_idx, Side side, std::int32_t rank, std::int64_t t);
    MsgState& checked_msg(std::int64_t msg_id, std::int64_t t, const char* op);

    const Trace* trace_;
    Mapping mapping_;
    std::vector<RecordState> records_;
    std::vector<MsgState> msg_states_;  // indexed by msg_id
    std::vector<LoggedMessage> log_;
    // Ready queue key: (gen_time, record_id, src_rank, dst_rank) -> msg_id.
    std::map<std::tuple<std::int64_t, std::int64_t, std::int32_t, std::int32_t>, std::int64_t>
        ready_;
    std::deque<Action> actions_;
    std::int64_t clock_ = 0;
    std::int64_t elapsed_ = 0;
    std::int64_t incomplete_states_ = 0;
    std::int64_t settled_ = 0;
};

}  // namespace veft
