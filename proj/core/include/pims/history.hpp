#pragma once

#include <set>
#include <span>
#include <utility>
#include <vector>

#include "pims/transaction.hpp"

namespace pims {

enum class HistoryOp { Read, Write, Commit, Abort };

struct HistoryEvent {
    TxnId txn = 0;
    HistoryOp op = HistoryOp::Read;
    TupleId tuple = 0;  // meaningful for Read/Write only
    Tick timestamp = 0;
    std::uint64_t seq = 0;  // commit sequence number on Commit events

    static HistoryEvent read(TxnId t, TupleId o, Tick ts = 0) { return {t, HistoryOp::Read, o, ts, 0}; }
    static HistoryEvent write(TxnId t, TupleId o, Tick ts = 0) { return {t, HistoryOp::Write, o, ts, 0}; }
    static HistoryEvent commit(TxnId t, Tick ts = 0, std::uint64_t seq = 0) { return {t, HistoryOp::Commit, 0, ts, seq}; }
    static HistoryEvent abort(TxnId t, Tick ts = 0) { return {t, HistoryOp::Abort, 0, ts, 0}; }
};

/// Directed write->read dependency graph over committed transactions.
struct PrecedenceGraph {
    std::vector<TxnId> nodes;                       // sorted
    std::vector<std::pair<TxnId, TxnId>> edges;     // sorted, unique

    bool contains(TxnId t) const;
    bool has_edge(TxnId from, TxnId to) const;
    std::vector<TxnId> successors(TxnId t) const;

    friend bool operator==(const PrecedenceGraph&, const PrecedenceGraph&) = default;
};

/// True iff `j` reads some tuple whose last committed writer before `j` is `i`.
/// Returns false when `i` does not commit before `j`.
bool direct_dependency(std::span<const HistoryEvent> history, TxnId i, TxnId j);

PrecedenceGraph build_precedence_graph(std::span<const HistoryEvent> history);

/// Nodes reachable from any malicious node, excluding the malicious nodes.
std::set<TxnId> affected_closure(const PrecedenceGraph& pg, const std::set<TxnId>& malicious);

}  // namespace pims
