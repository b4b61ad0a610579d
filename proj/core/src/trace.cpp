#include "veft/trace.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace veft {

namespace {

const char* kCollectiveTokens[] = {"BCAST",     "SCATTER",   "GATHER",
                                   "REDUCE",    "ALLREDUCE", "ALLGATHER",
                                   "ALLTOALL",  "BARRIER"};

}  // namespace

const char* to_string(CollectiveKind k) {
    return kCollectiveTokens[static_cast<int>(k)];
}

const char* to_string(OpKind k) {
    if (k == OpKind::P2P) return "P2P";
    return kCollectiveTokens[static_cast<int>(k)];
}

std::optional<CollectiveKind> collective_kind_from_token(std::string_view tok) {
    for (int i = 0; i < 8; ++i) {
        if (tok == kCollectiveTokens[i]) return static_cast<CollectiveKind>(i);
    }
    return std::nullopt;
}

OpKind op_kind(CollectiveKind k) { return static_cast<OpKind>(static_cast<int>(k)); }

const Communicator* Trace::find_comm(std::int64_t comm_id) const {
    for (const auto& c : comms) {
        if (c.comm_id == comm_id) return &c;
    }
    return nullptr;
}

std::optional<std::size_t> Trace::record_index(std::int64_t record_id) const {
    auto it = std::lower_bound(records.begin(), records.end(), record_id,
                               [](const TraceRecord& r, std::int64_t id) {
                                   return r.record_id < id;
                               });
    if (it == records.end() || it->record_id != record_id) return std::nullopt;
    return static_cast<std::size_t>(it - records.begin());
}

const TraceRecord* Trace::find_record(std::int64_t record_id) const {
    auto idx = record_index(record_id);
    return idx ? &records[*idx] : nullptr;
}

TraceParseError::TraceParseError(int line, int column, const std::string& reason)
    : std::runtime_error("line " + std::to_string(line) + ", column " +
                         std::to_string(column) + ": " + reason),
      line_(line),
      column_(column),
      reason_(reason) {}

namespace {

struct Token {
    std::string_view text;
    int column;  // 1-based
};

// Splits one raw line into whitespace-separated tokens, dropping '#' comments.
std::vector<Token> tokenize(std::string_view line) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        char c = line[i];
        if (c == '#') break;
        if (c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f') {
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) &&
               line[i] != '#') {
            ++i;
        }
        out.push_back({line.substr(start, i - start), static_cast<int>(start) + 1});
    }
    return out;
}

class Parser {
public:
    explicit Parser(std::istream& in) : in_(in) {}

    Trace run() {
        parse_header();
        for (std::int64_t i = 0; i < trace_.header.num_comms; ++i) parse_comm_line();
        for (std::int64_t i = 0; i < trace_.header.num_records; ++i) parse_record_line();
        // Anything left over beyond comments/blank lines is an error.
        std::vector<Token> extra;
        if (next_statement(extra)) {
            fail(extra[0].column, "unexpected content after declared records");
        }
        return std::move(trace_);
    }

private:
    std::istream& in_;
    Trace trace_;
    int line_no_ = 0;
    std::vector<Token> toks_;
    std::string line_buf_;
    std::set<std::int64_t> comm_ids_;
    std::int64_t last_record_id_ = -1;

    [[noreturn]] void fail(int column, const std::string& reason) const {
        throw TraceParseError(line_no_, column, reason);
    }

    // Advances to the next non-empty statement line; returns false at EOF.
    bool next_statement(std::vector<Token>& toks) {
        while (std::getline(in_, line_buf_)) {
            ++line_no_;
            toks = tokenize(line_buf_);
            if (!toks.empty()) return true;
        }
        ++line_no_;
        return false;
    }

    void require_statement(const std::string& what) {
        if (!next_statement(toks_)) {
            throw TraceParseError(line_no_, 1, "unexpected end of file, expected " + what);
        }
    }

    template <typename T>
    T parse_int(const Token& tok, const std::string& field) const {
        T value{};
        const char* first = tok.text.data();
        const char* last = first + tok.text.size();
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc() || ptr != last) {
            fail(tok.column, "expected non-negative integer for " + field + ", got '" +
                                 std::string(tok.text) + "'");
        }
        return value;
    }

    void expect_token_count(std::size_t n, const std::string& shape) const {
        if (toks_.size() != n) {
            int col = toks_.size() > n ? toks_[n].column
                                       : toks_.back().column + static_cast<int>(toks_.back().text.size());
            fail(col, "expected " + shape);
        }
    }

    void parse_header() {
        require_statement("header");
        if (toks_[0].text != "VEFT") {
            fail(toks_[0].column, "expected VEFT magic token");
        }
        expect_token_count(5, "header 'VEFT <version> <num_tasks> <num_comms> <num_records>'");
        trace_.header.version = parse_int<std::int32_t>(toks_[1], "version");
        if (trace_.header.version != 1) {
            fail(toks_[1].column, "unsupported trace version " + std::string(toks_[1].text));
        }
        trace_.header.num_tasks = parse_int<std::int32_t>(toks_[2], "num_tasks");
        if (trace_.header.num_tasks < 1) {
            fail(toks_[2].column, "num_tasks must be at least 1");
        }
        trace_.header.num_comms = parse_int<std::int64_t>(toks_[3], "num_comms");
        trace_.header.num_records = parse_int<std::int64_t>(toks_[4], "num_records");
    }

    void check_rank(const Token& tok, std::int32_t rank, const std::string& field) const {
        if (rank < 0 || rank >= trace_.header.num_tasks) {
            fail(tok.column, field + " " + std::to_string(rank) + " out of range [0, " +
                                 std::to_string(trace_.header.num_tasks) + ")");
        }
    }

    void parse_comm_line() {
        require_statement("COMM line");
        if (toks_[0].text != "COMM") {
            fail(toks_[0].column, "expected COMM keyword");
        }
        if (toks_.size() < 3) {
            fail(toks_.back().column, "expected 'COMM <comm_id> <size> <ranks...>'");
        }
        Communicator c;
        c.comm_id = parse_int<std::int64_t>(toks_[1], "comm_id");
        if (!comm_ids_.insert(c.comm_id).second) {
            fail(toks_[1].column, "duplicate comm_id " + std::to_string(c.comm_id));
        }
        std::int64_t size = parse_int<std::int64_t>(toks_[2], "comm size");
        if (size < 1) fail(toks_[2].column, "communicator size must be at least 1");
        expect_token_count(static_cast<std::size_t>(3 + size),
                           "exactly " + std::to_string(size) + " ranks after comm size");
        std::unordered_set<std::int32_t> seen;
        for (std::int64_t i = 0; i < size; ++i) {
            const Token& tok = toks_[3 + static_cast<std::size_t>(i)];
            std::int32_t rank = parse_int<std::int32_t>(tok, "comm rank");
            check_rank(tok, rank, "comm rank");
            if (!seen.insert(rank).second) {
                fail(tok.column, "duplicate rank " + std::to_string(rank) + " in communicator");
            }
            c.ranks.push_back(rank);
        }
        trace_.comms.push_back(std::move(c));
    }

    // Parses '<dep> <delay_ns>' starting at token index i; returns (dep, next index).
    Dependency parse_dep(std::size_t i, std::int64_t record_id) {
        Dependency dep;
        if (i >= toks_.size()) {
            fail(toks_.back().column + static_cast<int>(toks_.back().text.size()),
                 "expected dependency ('I', 'S <target>' or 'R <target>')");
        }
        std::string_view tag = toks_[i].text;
        if (tag == "I") {
            dep.kind = DepKind::Init;
            ++i;
        } else if (tag == "S" || tag == "R") {
            dep.kind = tag == "S" ? DepKind::AfterSend : DepKind::AfterRecv;
            if (i + 1 >= toks_.size()) {
                fail(toks_[i].column, "dependency tag requires a target record id");
            }
            dep.target_record = parse_int<std::int64_t>(toks_[i + 1], "dependency target");
            if (dep.target_record == record_id) {
                fail(toks_[i + 1].column, "self dependency on record " + std::to_string(record_id));
            }
            if (dep.target_record > record_id) {
                fail(toks_[i + 1].column,
                     "forward dependency: target " + std::to_string(dep.target_record) +
                         " does not precede record " + std::to_string(record_id));
            }
            if (!trace_.record_index(dep.target_record)) {
                fail(toks_[i + 1].column,
                     "dangling dependency target " + std::to_string(dep.target_record));
            }
            i += 2;
        } else {
            fail(toks_[i].column, "unknown dependency tag '" + std::string(tag) + "'");
        }
        if (i >= toks_.size()) {
            fail(toks_.back().column + static_cast<int>(toks_.back().text.size()),
                 "expected delay_ns after dependency");
        }
        dep.delay_ns = parse_int<std::int64_t>(toks_[i], "delay_ns");
        if (i + 1 != toks_.size()) {
            fail(toks_[i + 1].column, "unexpected trailing token on record line");
        }
        return dep;
    }

    std::int64_t parse_record_id(const Token& tok) {
        std::int64_t id = parse_int<std::int64_t>(tok, "record_id");
        if (id <= last_record_id_) {
            fail(tok.column, "record_id " + std::to_string(id) +
                                 " not strictly increasing (previous " +
                                 std::to_string(last_record_id_) + ")");
        }
        return id;
    }

    void parse_record_line() {
        require_statement("record line");
        std::string_view kw = toks_[0].text;
        if (kw == "SEND") {
            if (toks_.size() < 5) {
                fail(toks_.back().column,
                     "expected 'SEND <id> <src> <dst> <bytes> <dep> <delay_ns>'");
            }
            TraceRecord rec;
            rec.record_id = parse_record_id(toks_[1]);
            P2PSend body;
            body.src_rank = parse_int<std::int32_t>(toks_[2], "src_rank");
            check_rank(toks_[2], body.src_rank, "src_rank");
            body.dst_rank = parse_int<std::int32_t>(toks_[3], "dst_rank");
            check_rank(toks_[3], body.dst_rank, "dst_rank");
            body.size_bytes = parse_int<std::uint64_t>(toks_[4], "size_bytes");
            rec.body = body;
            rec.dep = parse_dep(5, rec.record_id);
            last_record_id_ = rec.record_id;
            trace_.records.push_back(std::move(rec));
        } else if (kw == "COLL") {
            if (toks_.size() < 6) {
                fail(toks_.back().column,
                     "expected 'COLL <id> <comm_id> <kind> <root> <bytes> <dep> <delay_ns>'");
            }
            TraceRecord rec;
            rec.record_id = parse_record_id(toks_[1]);
            Collective body;
            body.comm_id = parse_int<std::int64_t>(toks_[2], "comm_id");
            const Communicator* comm = trace_.find_comm(body.comm_id);
            if (comm == nullptr) {
                fail(toks_[2].column, "dangling comm_id " + std::to_string(body.comm_id));
            }
            auto kind = collective_kind_from_token(toks_[3].text);
            if (!kind) {
                fail(toks_[3].column,
                     "unknown collective kind '" + std::string(toks_[3].text) + "'");
            }
            body.kind = *kind;
            body.root_rank = parse_int<std::int32_t>(toks_[4], "root_rank");
            if (std::find(comm->ranks.begin(), comm->ranks.end(), body.root_rank) ==
                comm->ranks.end()) {
                fail(toks_[4].column, "root_rank " + std::to_string(body.root_rank) +
                                          " is not a member of comm " +
                                          std::to_string(body.comm_id));
            }
            body.size_bytes = parse_int<std::uint64_t>(toks_[5], "size_bytes");
            if (body.kind == CollectiveKind::Barrier && body.size_bytes != 0) {
                fail(toks_[5].column, "BARRIER requires size_bytes 0");
            }
            rec.body = body;
            rec.dep = parse_dep(6, rec.record_id);
            last_record_id_ = rec.record_id;
            trace_.records.push_back(std::move(rec));
        } else {
            fail(toks_[0].column, "expected SEND or COLL keyword, got '" + std::string(kw) + "'");
        }
    }
};

}  // namespace

Trace parse_trace(std::istream& in) {
    Parser p(in);
    return p.run();
}

Trace parse_trace_string(const std::string& text) {
    std::istringstream in(text);
    return parse_trace(in);
}

Trace parse_trace_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open trace file: " + path);
    return parse_trace(in);
}

std::string write_trace(const Trace& t) {
    ValidationReport report = validate_structure(t);
    if (!report.ok()) {
        throw std::invalid_argument("trace invariant violation: " +
                                    report.findings.front().message);
    }
    std::string out;
    out.reserve(64 + t.comms.size() * 32 + t.records.size() * 40);
    auto app = [&out](std::int64_t v) { out += std::to_string(v); };
    out += "VEFT ";
    app(t.header.version);
    out += ' ';
    app(t.header.num_tasks);
    out += ' ';
    app(t.header.num_comms);
    out += ' ';
    app(t.header.num_records);
    out += '\n';
    for (const auto& c : t.comms) {
        out += "COMM ";
        app(c.comm_id);
        out += ' ';
        app(static_cast<std::int64_t>(c.ranks.size()));
        for (std::int32_t r : c.ranks) {
            out += ' ';
            app(r);
        }
        out += '\n';
    }
    auto append_dep = [&](const Dependency& d) {
        switch (d.kind) {
            case DepKind::Init: out += "I"; break;
            case DepKind::AfterSend:
                out += "S ";
                app(d.target_record);
                break;
            case DepKind::AfterRecv:
                out += "R ";
                app(d.target_record);
                break;
        }
        out += ' ';
        app(d.delay_ns);
    };
    for (const auto& rec : t.records) {
        if (rec.is_p2p()) {
            const auto& b = rec.p2p();
            out += "SEND ";
            app(rec.record_id);
            out += ' ';
            app(b.src_rank);
            out += ' ';
            app(b.dst_rank);
            out += ' ';
            out += std::to_string(b.size_bytes);
            out += ' ';
        } else {
            const auto& b = rec.coll();
            out += "COLL ";
            app(rec.record_id);
            out += ' ';
            app(b.comm_id);
            out += ' ';
            out += to_string(b.kind);
            out += ' ';
            app(b.root_rank);
            out += ' ';
            out += std::to_string(b.size_bytes);
            out += ' ';
        }
        append_dep(rec.dep);
        out += '\n';
    }
    return out;
}

void write_trace_file(const Trace& t, const std::string& path) {
    std::string text = write_trace(t);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("failed writing trace file: " + path);
}

std::vector<std::int32_t> executing_ranks(const TraceRecord& r, const Trace& t) {
    if (r.is_p2p()) return {r.p2p().src_rank};
    const Communicator* comm = t.find_comm(r.coll().comm_id);
    if (comm == nullptr) return {};
    return comm->ranks;
}

std::vector<std::int32_t> send_observer_ranks(const TraceRecord& r, const Trace& t) {
    if (r.is_p2p()) return {r.p2p().src_rank};
    return executing_ranks(r, t);
}

std::vector<std::int32_t> recv_observer_ranks(const TraceRecord& r, const Trace& t) {
    if (r.is_p2p()) return {r.p2p().dst_rank};
    return executing_ranks(r, t);
}

ValidationReport validate_structure(const Trace& t) {
    ValidationReport rep;
    auto add = [&rep](FindingCode code, std::int64_t rec, const std::string& msg) {
        rep.findings.push_back({code, rec, msg});
    };

    if (t.header.version != 1) {
        add(FindingCode::BadVersion, -1,
            "unsupported trace version " + std::to_string(t.header.version));
    }
    if (t.header.num_tasks < 1) add(FindingCode::HeaderMismatch, -1, "num_tasks must be at least 1");
    if (t.header.num_comms != static_cast<std::int64_t>(t.comms.size())) {
        add(FindingCode::HeaderMismatch, -1,
            "header declares " + std::to_string(t.header.num_comms) + " comms, trace has " +
                std::to_string(t.comms.size()));
    }
    if (t.header.num_records != static_cast<std::int64_t>(t.records.size())) {
        add(FindingCode::HeaderMismatch, -1,
            "header declares " + std::to_string(t.header.num_records) + " records, trace has " +
                std::to_string(t.records.size()));
    }

    std::set<std::int64_t> comm_ids;
    for (const auto& c : t.comms) {
        if (!comm_ids.insert(c.comm_id).second) {
            add(FindingCode::BadComm, -1, "duplicate comm_id " + std::to_string(c.comm_id));
        }
        if (c.ranks.empty()) {
            add(FindingCode::BadComm, -1,
                "communicator " + std::to_string(c.comm_id) + " is empty");
        }
        std::unordered_set<std::int32_t> seen;
        for (std::int32_t r : c.ranks) {
            if (r < 0 || r >= t.header.num_tasks) {
                add(FindingCode::RankOutOfRange, -1,
                    "comm " + std::to_string(c.comm_id) + " rank " + std::to_string(r) +
                        " out of range");
            }
            if (!seen.insert(r).second) {
                add(FindingCode::BadComm, -1,
                    "comm " + std::to_string(c.comm_id) + " has duplicate rank " +
                        std::to_string(r));
            }
        }
    }

    std::int64_t prev_id = -1;
    for (const auto& rec : t.records) {
        if (rec.record_id <= prev_id) {
            add(FindingCode::RecordOrder, rec.record_id, "record ids not strictly increasing");
        }
        prev_id = rec.record_id;

        if (rec.is_p2p()) {
            const auto& b = rec.p2p();
            if (b.src_rank < 0 || b.src_rank >= t.header.num_tasks) {
                add(FindingCode::RankOutOfRange, rec.record_id, "src_rank out of range");
            }
            if (b.dst_rank < 0 || b.dst_rank >= t.header.num_tasks) {
                add(FindingCode::RankOutOfRange, rec.record_id, "dst_rank out of range");
            }
        } else {
            const auto& b = rec.coll();
            const Communicator* comm = t.find_comm(b.comm_id);
            if (comm == nullptr) {
                add(FindingCode::DanglingComm, rec.record_id,
                    "dangling comm_id " + std::to_string(b.comm_id));
            } else if (std::find(comm->ranks.begin(), comm->ranks.end(), b.root_rank) ==
                       comm->ranks.end()) {
                add(FindingCode::RootNotMember, rec.record_id,
                    "root_rank " + std::to_string(b.root_rank) + " not a member of comm " +
                        std::to_string(b.comm_id));
            }
            if (b.kind == CollectiveKind::Barrier && b.size_bytes != 0) {
                add(FindingCode::BarrierBytes, rec.record_id, "BARRIER with nonzero size_bytes");
            }
        }

        if (rec.dep.delay_ns < 0) {
            add(FindingCode::NegativeDelay, rec.record_id, "negative delay_ns");
        }
        if (rec.dep.kind != DepKind::Init) {
            if (rec.dep.target_record == rec.record_id) {
                add(FindingCode::SelfDependency, rec.record_id, "self dependency");
                continue;
            }
            if (rec.dep.target_record > rec.record_id) {
                add(FindingCode::ForwardDependency, rec.record_id,
                    "forward dependency on record " + std::to_string(rec.dep.target_record));
                continue;
            }
            const TraceRecord* target = t.find_record(rec.dep.target_record);
            if (target == nullptr) {
                add(FindingCode::DanglingTarget, rec.record_id,
                    "dangling dependency target " + std::to_string(rec.dep.target_record));
                continue;
            }
            std::vector<std::int32_t> observers = rec.dep.kind == DepKind::AfterSend
                                                      ? send_observer_ranks(*target, t)
                                                      : recv_observer_ranks(*target, t);
            std::vector<std::int32_t> owners = executing_ranks(rec, t);
            bool observable = false;
            for (std::int32_t o : owners) {
                if (std::find(observers.begin(), observers.end(), o) != observers.end()) {
                    observable = true;
                    break;
                }
            }
            if (!observable) {
                add(FindingCode::Unobservable, rec.record_id,
                    "dependency not observable at owning task");
            }
        }
    }
    return rep;
}

}  // namespace veft
