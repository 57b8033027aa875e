#include "pims/transaction.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

namespace pims {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::UnknownTransaction: return "UnknownTransaction";
    case ErrorCode::NotCommitted: return "NotCommitted";
    case ErrorCode::IncompleteHistory: return "IncompleteHistory";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidAssignment: return "InvalidAssignment";
    case ErrorCode::TooFewTransactions: return "TooFewTransactions";
    case ErrorCode::TooFewIBs: return "TooFewIBs";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::InsufficientTuples: return "InsufficientTuples";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidTransaction: return "InvalidTransaction";
    case ErrorCode::SimulationComplete: return "SimulationComplete";
    case ErrorCode::LogGap: return "LogGap";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::PartialFailure: return "PartialFailure";
    }
    return "Unknown";
}

std::string_view to_string(TxnKind kind) {
    switch (kind) {
    case TxnKind::Distribute: return "distribute";
    case TxnKind::Collect: return "collect";
    case TxnKind::ManyToMany: return "many_to_many";
    case TxnKind::Malicious: return "malicious";
    }
    return "unknown";
}

TxnKind txn_kind_from_string(std::string_view name) {
    if (name == "distribute") return TxnKind::Distribute;
    if (name == "collect") return TxnKind::Collect;
    if (name == "many_to_many") return TxnKind::ManyToMany;
    if (name == "malicious") return TxnKind::Malicious;
    throw Error(ErrorCode::ParseError, "unknown transaction kind '" + std::string(name) + "'");
}

std::vector<TupleId> TransactionSpec::accessed() const {
    std::vector<TupleId> out(reads);
    out.insert(out.end(), writes.begin(), writes.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<TupleId> TransactionSpec::read_modify_write() const {
    std::unordered_set<TupleId> seen_read;
    std::unordered_set<TupleId> rmw;
    for (const auto& op : op_order) {
        if (op.type == OpType::Read) {
            seen_read.insert(op.tuple);
        } else if (seen_read.count(op.tuple) != 0U) {
            rmw.insert(op.tuple);
        }
    }
    std::vector<TupleId> out;
    for (TupleId t : writes) {
        if (rmw.count(t) != 0U) out.push_back(t);
    }
    return out;
}

std::vector<Operation> rmw_op_order(const std::vector<TupleId>& reads, const std::vector<TupleId>& writes) {
    std::vector<Operation> ops;
    std::set<TupleId> read_set(reads.begin(), reads.end());
    std::set<TupleId> written;
    for (TupleId t : writes) {
        if (read_set.count(t) != 0U) ops.push_back({OpType::Read, t});
        ops.push_back({OpType::Write, t});
        written.insert(t);
    }
    for (TupleId t : reads) {
        if (written.count(t) == 0U) ops.push_back({OpType::Read, t});
    }
    return ops;
}

void check_transaction(const TransactionSpec& txn, std::size_t size_max) {
    auto fail = [&](const std::string& why) {
        throw Error(ErrorCode::InvalidTransaction, "txn " + std::to_string(txn.id) + ": " + why);
    };
    const auto all = txn.accessed();
    if (all.empty()) fail("empty read/write set");
    if (size_max != 0 && all.size() > size_max) fail("larger than Size_max");

    std::multiset<TupleId> op_reads;
    std::multiset<TupleId> op_writes;
    for (const auto& op : txn.op_order) {
        (op.type == OpType::Read ? op_reads : op_writes).insert(op.tuple);
    }
    if (op_reads != std::multiset<TupleId>(txn.reads.begin(), txn.reads.end()) ||
        op_writes != std::multiset<TupleId>(txn.writes.begin(), txn.writes.end())) {
        fail("op_order does not match reads/writes");
    }
    if (txn.is_malicious()) {
        if (!txn.reads.empty()) fail("malicious transaction reads prior state");
        return;
    }
    const auto rmw = txn.read_modify_write();
    if (rmw.size() != txn.writes.size() && !txn.blind_value) {
        fail("benign blind write without a blind value");
    }
    if (!rmw.empty() && (txn.gamma_bp < kMinGammaBp || txn.gamma_bp > kMaxGammaBp)) {
        fail("gamma outside [0.01, 0.1]");
    }
}

Cents fraction_of(Cents balance, BasisPoints bp) {
    const Cents scaled = balance * bp;
    if (scaled >= 0) return (scaled + 5000) / 10000;
    return -((-scaled + 5000) / 10000);
}

namespace {

// Splits `total` evenly over `dests`; the first destination takes the remainder.
void credit_evenly(std::vector<Cents>& post, const std::vector<std::size_t>& dests, Cents total) {
    if (dests.empty()) return;
    const auto d = static_cast<Cents>(dests.size());
    const Cents share = total / d;
    const Cents rest = total - share * d;
    for (std::size_t i = 0; i < dests.size(); ++i) post[dests[i]] += share + (i == 0 ? rest : 0);
}

}  // namespace

std::vector<Cents> compute_writes(const TransactionSpec& txn, const ValueLookup& value) {
    std::vector<Cents> post;
    post.reserve(txn.writes.size());
    for (TupleId t : txn.writes) post.push_back(value(t));

    if (txn.is_malicious()) {
        for (auto& v : post) v += txn.tamper;
        return post;
    }

    const auto rmw = txn.read_modify_write();
    std::vector<std::size_t> roles;  // indexes into writes, in rmw order
    for (TupleId t : rmw) {
        roles.push_back(static_cast<std::size_t>(std::find(txn.writes.begin(), txn.writes.end(), t) - txn.writes.begin()));
    }
    for (std::size_t i = 0; i < txn.writes.size(); ++i) {
        if (std::find(roles.begin(), roles.end(), i) == roles.end()) post[i] = txn.blind_value.value_or(post[i]);
    }
    if (roles.size() < 2) return post;

    std::vector<std::size_t> sources;
    std::vector<std::size_t> dests;
    switch (txn.kind) {
    case TxnKind::Distribute:
        sources.assign(roles.begin(), roles.begin() + 1);
        dests.assign(roles.begin() + 1, roles.end());
        break;
    case TxnKind::Collect:
        sources.assign(roles.begin(), roles.end() - 1);
        dests.assign(roles.end() - 1, roles.end());
        break;
    case TxnKind::ManyToMany: {
        const auto half = static_cast<std::ptrdiff_t>((roles.size() + 1) / 2);
        sources.assign(roles.begin(), roles.begin() + half);
        dests.assign(roles.begin() + half, roles.end());
        break;
    }
    case TxnKind::Malicious:
        break;
    }

    Cents pool = 0;
    for (std::size_t s : sources) {
        const Cents amount = fraction_of(post[s], txn.gamma_bp);
        post[s] -= amount;
        pool += amount;
    }
    credit_evenly(post, dests, pool);
    return post;
}

}  // namespace pims
