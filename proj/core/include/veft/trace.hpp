#pragma once
// Dependency-annotated communication trace model: record/communicator types,
// the VEFT text format (parser + canonical writer), and structural validation.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace veft {

// Operation kinds in canonical reporting order: collectives in grammar token
// order, point-to-point last.
enum class OpKind : int {
    Bcast = 0,
    Scatter,
    Gather,
    Reduce,
    Allreduce,
    Allgather,
    Alltoall,
    Barrier,
    P2P,
};
inline constexpr int kNumOpKinds = 9;
const char* to_string(OpKind k);

enum class CollectiveKind : int {
    Bcast = 0,
    Scatter,
    Gather,
    Reduce,
    Allreduce,
    Allgather,
    Alltoall,
    Barrier,
};
const char* to_string(CollectiveKind k);
std::optional<CollectiveKind> collective_kind_from_token(std::string_view tok);
OpKind op_kind(CollectiveKind k);

enum class DepKind : int { Init = 0, AfterSend, AfterRecv };

struct Dependency {
    DepKind kind = DepKind::Init;
    std::int64_t target_record = -1;  // meaningful for AfterSend/AfterRecv
    std::int64_t delay_ns = 0;
    bool operator==(const Dependency&) const = default;
};

struct Communicator {
    std::int64_t comm_id = 0;
    std::vector<std::int32_t> ranks;  // distinct task ids, file order preserved
    bool operator==(const Communicator&) const = default;
};

struct P2PSend {
    std::int32_t src_rank = 0;
    std::int32_t dst_rank = 0;
    std::uint64_t size_bytes = 0;
    bool operator==(const P2PSend&) const = default;
};

struct Collective {
    std::int64_t comm_id = 0;
    CollectiveKind kind = CollectiveKind::Bcast;
    std::int32_t root_rank = 0;  // must be a comm member; rootless kinds ignore it
    std::uint64_t size_bytes = 0;
    bool operator==(const Collective&) const = default;
};

struct TraceRecord {
    std::int64_t record_id = 0;
    std::variant<P2PSend, Collective> body;
    Dependency dep;

    bool operator==(const TraceRecord&) const = default;
    bool is_p2p() const { return std::holds_alternative<P2PSend>(body); }
    const P2PSend& p2p() const { return std::get<P2PSend>(body); }
    const Collective& coll() const { return std::get<Collective>(body); }
    OpKind op() const { return is_p2p() ? OpKind::P2P : op_kind(coll().kind); }
};

struct TraceHeader {
    std::int32_t version = 1;
    std::int32_t num_tasks = 0;
    std::int64_t num_comms = 0;
    std::int64_t num_records = 0;
    bool operator==(const TraceHeader&) const = default;
};

struct Trace {
    TraceHeader header;
    std::vector<Communicator> comms;   // file order
    std::vector<TraceRecord> records;  // strictly ascending record_id

    bool operator==(const Trace&) const = default;
    const Communicator* find_comm(std::int64_t comm_id) const;
    const TraceRecord* find_record(std::int64_t record_id) const;
    std::optional<std::size_t> record_index(std::int64_t record_id) const;
};

// Parse failure with 1-based line/column location.
class TraceParseError : public std::runtime_error {
public:
    TraceParseError(int line, int column, const std::string& reason);
    int line() const { return line_; }
    int column() const { return column_; }
    const std::string& reason() const { return reason_; }

private:
    int line_;
    int column_;
    std::string reason_;
};

Trace parse_trace(std::istream& in);
Trace parse_trace_string(const std::string& text);
Trace parse_trace_file(const std::string& path);

// Canonical form: header, communicators and records in stored order, single
// spaces, LF endings, no comments. Throws std::invalid_argument when the
// trace violates a structural invariant.
std::string write_trace(const Trace& t);
void write_trace_file(const Trace& t, const std::string& path);

enum class FindingCode : int {
    HeaderMismatch,
    BadVersion,
    BadComm,
    RankOutOfRange,
    RecordOrder,
    DanglingComm,
    RootNotMember,
    BarrierBytes,
    SelfDependency,
    ForwardDependency,
    DanglingTarget,
    NegativeDelay,
    // The dependency can never be observed by any rank executing the
    // dependent record; replay of such a trace stalls.
    Unobservable,
};

struct Finding {
    FindingCode code = FindingCode::HeaderMismatch;
    std::int64_t record_id = -1;  // -1 marks a trace-level finding
    std::string message;
    bool operator==(const Finding&) const = default;
};

struct ValidationReport {
    std::vector<Finding> findings;
    bool ok() const { return findings.empty(); }
};

// Structural audit of an in-memory trace. Findings are data, not failures:
// an empty report means every reference resolves, dependencies point
// backwards, and every dependency is observable at a rank that executes the
// dependent record.
ValidationReport validate_structure(const Trace& t);

// Ownership rules shared by validation and replay. Send-side completion of a
// P2P record is observable at its source rank only, receive-side completion
// at its destination rank only; a collective's per-rank completion is
// observable at every communicator rank.
std::vector<std::int32_t> send_observer_ranks(const TraceRecord& r, const Trace& t);
std::vector<std::int32_t> recv_observer_ranks(const TraceRecord& r, const Trace& t);
// Ranks that execute a record and therefore can be gated by its dependency
// (P2P: source rank; collective: all communicator ranks).
std::vector<std::int32_t> executing_ranks(const TraceRecord& r, const Trace& t);

}  // namespace veft
