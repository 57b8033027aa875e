#include "pims/history.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

namespace pims {

namespace {

struct TxnTrace {
    std::vector<Operation> ops;
    bool committed = false;
    bool aborted = false;
    Tick commit_ts = 0;
    std::uint64_t commit_seq = 0;
    std::size_t commit_pos = 0;
};

struct Indexed {
    std::map<TxnId, TxnTrace> txns;
    std::vector<TxnId> commit_order;
};

Indexed index_history(std::span<const HistoryEvent> history) {
    Indexed idx;
    for (std::size_t pos = 0; pos < history.size(); ++pos) {
        const auto& ev = history[pos];
        auto& tr = idx.txns[ev.txn];
        switch (ev.op) {
        case HistoryOp::Read: tr.ops.push_back({OpType::Read, ev.tuple}); break;
        case HistoryOp::Write: tr.ops.push_back({OpType::Write, ev.tuple}); break;
        case HistoryOp::Commit:
            tr.committed = true;
            tr.commit_ts = ev.timestamp;
            tr.commit_seq = ev.seq;
            tr.commit_pos = pos;
            break;
        case HistoryOp::Abort: tr.aborted = true; break;
        }
    }
    for (const auto& [id, tr] : idx.txns) {
        if (tr.committed) idx.commit_order.push_back(id);
    }
    std::sort(idx.commit_order.begin(), idx.commit_order.end(), [&](TxnId a, TxnId b) {
        const auto& x = idx.txns.at(a);
        const auto& y = idx.txns.at(b);
        return std::tie(x.commit_ts, x.commit_seq, x.commit_pos) < std::tie(y.commit_ts, y.commit_seq, y.commit_pos);
    });
    return idx;
}

// Tuples that `tr` reads before writing them itself.
std::vector<TupleId> external_reads(const TxnTrace& tr) {
    std::unordered_set<TupleId> own;
    std::vector<TupleId> out;
    for (const auto& op : tr.ops) {
        if (op.type == OpType::Write) {
            own.insert(op.tuple);
        } else if (own.count(op.tuple) == 0U) {
            out.push_back(op.tuple);
        }
    }
    return out;
}

}  // namespace

bool PrecedenceGraph::contains(TxnId t) const { return std::binary_search(nodes.begin(), nodes.end(), t); }

bool PrecedenceGraph::has_edge(TxnId from, TxnId to) const {
    return std::binary_search(edges.begin(), edges.end(), std::make_pair(from, to));
}

std::vector<TxnId> PrecedenceGraph::successors(TxnId t) const {
    std::vector<TxnId> out;
    auto it = std::lower_bound(edges.begin(), edges.end(), std::make_pair(t, TxnId{0}));
    for (; it != edges.end() && it->first == t; ++it) out.push_back(it->second);
    return out;
}

bool direct_dependency(std::span<const HistoryEvent> history, TxnId i, TxnId j) {
    const auto idx = index_history(history);
    for (TxnId t : {i, j}) {
        auto it = idx.txns.find(t);
        if (it == idx.txns.end()) throw Error(ErrorCode::UnknownTransaction, "txn " + std::to_string(t));
        if (!it->second.committed) throw Error(ErrorCode::NotCommitted, "txn " + std::to_string(t));
    }
    const auto pos_i = std::find(idx.commit_order.begin(), idx.commit_order.end(), i);
    const auto pos_j = std::find(idx.commit_order.begin(), idx.commit_order.end(), j);
    if (pos_i >= pos_j) return false;

    for (TupleId o : external_reads(idx.txns.at(j))) {
        TxnId last_writer = j;
        bool found = false;
        for (auto it = idx.commit_order.begin(); it != pos_j; ++it) {
            for (const auto& op : idx.txns.at(*it).ops) {
                if (op.type == OpType::Write && op.tuple == o) {
                    last_writer = *it;
                    found = true;
                }
            }
        }
        if (found && last_writer == i) return true;
    }
    return false;
}

PrecedenceGraph build_precedence_graph(std::span<const HistoryEvent> history) {
    const auto idx = index_history(history);
    for (const auto& [id, tr] : idx.txns) {
        if (!tr.committed && !tr.aborted) {
            throw Error(ErrorCode::IncompleteHistory, "txn " + std::to_string(id) + " neither commits nor aborts");
        }
    }

    PrecedenceGraph pg;
    pg.nodes = idx.commit_order;
    std::sort(pg.nodes.begin(), pg.nodes.end());

    std::unordered_map<TupleId, TxnId> last_writer;
    for (TxnId j : idx.commit_order) {
        const auto& tr = idx.txns.at(j);
        for (TupleId o : external_reads(tr)) {
            auto it = last_writer.find(o);
            if (it != last_writer.end() && it->second != j) pg.edges.emplace_back(it->second, j);
        }
        for (const auto& op : tr.ops) {
            if (op.type == OpType::Write) last_writer[op.tuple] = j;
        }
    }
    std::sort(pg.edges.begin(), pg.edges.end());
    pg.edges.erase(std::unique(pg.edges.begin(), pg.edges.end()), pg.edges.end());
    return pg;
}

std::set<TxnId> affected_closure(const PrecedenceGraph& pg, const std::set<TxnId>& malicious) {
    std::set<TxnId> reached;
    std::deque<TxnId> frontier;
    for (TxnId m : malicious) {
        if (!pg.contains(m)) throw Error(ErrorCode::UnknownTransaction, "malicious txn " + std::to_string(m) + " not in PG");
        frontier.push_back(m);
    }
    while (!frontier.empty()) {
        const TxnId t = frontier.front();
        frontier.pop_front();
        for (TxnId s : pg.successors(t)) {
            if (reached.insert(s).second) frontier.push_back(s);
        }
    }
    for (TxnId m : malicious) reached.erase(m);
    return reached;
}

}  // namespace pims
