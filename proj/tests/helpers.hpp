#pragma once
// Shared test utilities: a random generator for structurally valid traces,
// independent oracles (collective expansion by pair enumeration, closed-form
// store-and-forward completion time), and small file helpers.

#include <unistd.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "veft/network_config.hpp"
#include "veft/replay.hpp"
#include "veft/topology.hpp"
#include "veft/trace.hpp"

namespace th {

inline bool intersects(const std::vector<std::int32_t>& a, const std::vector<std::int32_t>& b) {
    for (std::int32_t x : a)
        if (std::find(b.begin(), b.end(), x) != b.end()) return true;
    return false;
}

// Structurally valid trace with random comms, kinds, sizes, and dependency
// edges. Dependencies are only attached where at least one executing rank of
// the dependent record observes the target event, so replay never stalls.
inline veft::Trace random_valid_trace(std::mt19937_64& rng, std::int32_t max_tasks = 16,
                                      std::int32_t max_records = 60,
                                      std::uint64_t max_bytes = 100000) {
    using namespace veft;
    auto pick = [&rng](std::uint64_t n) { return n == 0 ? 0 : rng() % n; };
    Trace t;
    t.header.num_tasks = static_cast<std::int32_t>(1 + pick(static_cast<std::uint64_t>(max_tasks)));
    const int ncomms = static_cast<int>(pick(4));
    for (int c = 0; c < ncomms; ++c) {
        Communicator comm;
        comm.comm_id = c + 1;
        std::vector<std::int32_t> pool(static_cast<std::size_t>(t.header.num_tasks));
        for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = static_cast<std::int32_t>(i);
        for (std::size_t i = pool.size(); i > 1; --i)
            std::swap(pool[i - 1], pool[pick(i)]);
        const std::size_t k = 1 + static_cast<std::size_t>(pick(pool.size()));
        comm.ranks.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
        t.comms.push_back(std::move(comm));
    }
    t.header.num_comms = ncomms;
    const int nrec = static_cast<int>(pick(static_cast<std::uint64_t>(max_records) + 1));
    std::int64_t id = -1;
    for (int i = 0; i < nrec; ++i) {
        id += 1 + static_cast<std::int64_t>(pick(3));
        TraceRecord rec;
        rec.record_id = id;
        const bool coll = ncomms > 0 && pick(2) == 0;
        if (coll) {
            const Communicator& comm = t.comms[pick(static_cast<std::uint64_t>(ncomms))];
            const auto kind = static_cast<CollectiveKind>(pick(8));
            const std::int32_t root = comm.ranks[pick(comm.ranks.size())];
            const std::uint64_t bytes = kind == CollectiveKind::Barrier ? 0 : pick(max_bytes);
            rec.body = Collective{comm.comm_id, kind, root, bytes};
        } else {
            rec.body = P2PSend{static_cast<std::int32_t>(pick(
                                   static_cast<std::uint64_t>(t.header.num_tasks))),
                               static_cast<std::int32_t>(pick(
                                   static_cast<std::uint64_t>(t.header.num_tasks))),
                               pick(max_bytes)};
        }
        Dependency dep{DepKind::Init, -1, static_cast<std::int64_t>(pick(1000))};
        if (!t.records.empty() && pick(2) == 0) {
            for (int attempt = 0; attempt < 6; ++attempt) {
                const TraceRecord& target = t.records[pick(t.records.size())];
                const DepKind k = pick(2) == 0 ? DepKind::AfterSend : DepKind::AfterRecv;
                const auto obs = k == DepKind::AfterSend ? send_observer_ranks(target, t)
                                                         : recv_observer_ranks(target, t);
                if (intersects(obs, executing_ranks(rec, t))) {
                    dep = Dependency{k, target.record_id, static_cast<std::int64_t>(pick(1000))};
                    break;
                }
            }
        }
        rec.dep = dep;
        t.records.push_back(std::move(rec));
    }
    t.header.num_records = static_cast<std::int64_t>(t.records.size());
    return t;
}

// Collective expansion oracle: enumerate every ordered rank pair of the
// communicator and keep the ones a kind's delivery predicate selects.
inline std::vector<veft::ExpandedMessage> oracle_expand(veft::CollectiveKind kind,
                                                        const veft::Communicator& comm,
                                                        std::int32_t root,
                                                        std::uint64_t bytes) {
    using namespace veft;
    std::vector<ExpandedMessage> out;
    if (comm.ranks.size() <= 1) return out;
    std::vector<std::int32_t> sorted = comm.ranks;
    std::sort(sorted.begin(), sorted.end());
    auto pairs = [&](auto pred, std::uint64_t b, MsgPhase phase) {
        for (std::int32_t s : sorted)
            for (std::int32_t d : sorted)
                if (s != d && pred(s, d)) out.push_back({s, d, b, phase});
    };
    const std::int32_t hub = comm.ranks.front();  // first listed, not smallest
    switch (kind) {
    case CollectiveKind::Bcast:
    case CollectiveKind::Scatter:
        pairs([&](std::int32_t s, std::int32_t) { return s == root; }, bytes, MsgPhase::Plain);
        break;
    case CollectiveKind::Gather:
    case CollectiveKind::Reduce:
        pairs([&](std::int32_t, std::int32_t d) { return d == root; }, bytes, MsgPhase::Plain);
        break;
    case CollectiveKind::Allreduce:
    case CollectiveKind::Barrier: {
        const std::uint64_t b = kind == CollectiveKind::Barrier ? 0 : bytes;
        pairs([&](std::int32_t, std::int32_t d) { return d == hub; }, b, MsgPhase::ReducePhase);
        pairs([&](std::int32_t s, std::int32_t) { return s == hub; }, b, MsgPhase::BcastPhase);
        break;
    }
    case CollectiveKind::Allgather:
    case CollectiveKind::Alltoall:
        pairs([](std::int32_t, std::int32_t) { return true; }, bytes, MsgPhase::Plain);
        break;
    }
    return out;
}

// Uncontended store-and-forward completion for K packets over H links.
// Full-size packets stream back to back, keeping every transmitter busy for
// one full serialization per packet; the tail packet (possibly shorter)
// queues behind its predecessor on every hop and pays one final propagation:
//   fct = (K - 2 + H) * T_full + T_last + H * P
// (K = 1 degenerates to H * (T + P) since T_full == T_last.)
inline std::int64_t fct_oracle(const veft::Topology& topo, const veft::NetworkConfig& cfg,
                               std::int32_t src_node, std::int32_t dst_node,
                               std::uint64_t bytes) {
    const auto pkts = veft::packetize(cfg, bytes);
    const auto path = topo.route_path(src_node, dst_node);
    const auto links = static_cast<std::int64_t>(path.size());
    const auto count = static_cast<std::int64_t>(pkts.size());
    const std::int64_t full = veft::serialization_ns(pkts.front().wire_bytes, cfg.link_rate_gbps);
    const std::int64_t last = veft::serialization_ns(pkts.back().wire_bytes, cfg.link_rate_gbps);
    return (count - 2 + links) * full + last + links * cfg.propagation_ns();
}

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE_MESSAGE(static_cast<bool>(f), "missing file: ", path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// Fresh directory under the system temp root; unique per call.
inline std::string fresh_dir(const std::string& tag) {
    static int counter = 0;
    const auto p = std::filesystem::temp_directory_path() /
                   ("veft_" + tag + "_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter++));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

}  // namespace th
