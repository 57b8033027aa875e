#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pims/engine.hpp"

namespace pims {

enum class ResponseScope {
    IbScoped,  // only tuples sharing an IB with the malicious transaction
    Temporal,  // every tuple written since the malicious commit
};

struct ResponseRecord {
    TxnId malicious_txn = 0;
    Tick commit_tick = 0;
    Tick detect_tick = 0;
    std::vector<IbIndex> spanned_ibs;
    std::set<TupleId> suspected;
};

/// Marks every tuple that may carry damage from `malicious` as Suspected in
/// the CTT. Runs as soon as the IDS reports.
ResponseRecord respond(Engine& engine, TxnId malicious, Tick detect_tick, ResponseScope scope = ResponseScope::IbScoped);

struct RecoveryPlan {
    TxnId malicious_txn = 0;
    std::vector<TxnId> affected;                        // original commit order
    std::set<TupleId> corrupted;                        // S
    std::map<TupleId, std::vector<std::uint64_t>> invalid_writes;  // lsns per tuple in S
    std::map<TupleId, TxnId> last_affected_writer;
    std::uint64_t window_records = 0;
    std::uint64_t commit_seq_bound = 0;  // store commit_seq when the scan ran
    std::size_t passes = 1;              // longest dependency chain from the malicious txn
};

/// Dependency analysis over the log from the malicious transaction's first record.
RecoveryPlan analyze(const Engine& engine, TxnId malicious);

struct RecoveryReport {
    TxnId malicious_txn = 0;
    std::vector<TxnId> affected;
    std::vector<TupleId> corrupted;
    std::size_t undo_count = 0;
    std::size_t redo_count = 0;
    Tick detect_tick = 0;
    Tick start_tick = 0;
    Tick assessed_tick = 0;
    Tick end_tick = 0;
    std::uint64_t commit_seq_bound = 0;
    std::size_t blocked_txns = 0;
};

nlohmann::json report_to_json(const RecoveryReport& report);

/// One recovery run split into the steps the simulator schedules.
class Recovery {
public:
    explicit Recovery(ResponseRecord response);

    const ResponseRecord& response() const noexcept { return response_; }
    const RecoveryPlan& plan() const noexcept { return plan_; }
    RecoveryReport& report() noexcept { return report_; }
    const RecoveryReport& report() const noexcept { return report_; }

    /// Analysis plus damage assessment: suspects outside S leave the CTT and
    /// S is confirmed. Returns the tuples that became accessible.
    std::vector<TupleId> assess(Engine& engine, Tick now);
    /// Phase one. Restores every tuple of S; returns released tuples.
    std::vector<TupleId> undo(Engine& engine, Tick now);
    bool redo_pending() const noexcept { return next_redo_ < plan_.affected.size(); }
    /// Re-executes the next affected txn; returns released tuples.
    std::vector<TupleId> redo_next(Engine& engine, Tick now);

private:
    ResponseRecord response_;
    RecoveryPlan plan_;
    RecoveryReport report_;
    std::size_t next_redo_ = 0;
    bool assessed_ = false;
};

/// Runs assessment, undo and every redo at tick `now`.
RecoveryReport recover(Engine& engine, const ResponseRecord& response, Tick now);

/// For each recovery, the earlier ones it must wait for: those sharing an IB.
std::vector<std::vector<std::size_t>> coordinate(std::span<const ResponseRecord> responses);

/// Online form of coordinate(): recoveries over overlapping IBs run one at a
/// time in detection order, disjoint ones concurrently.
class RecoveryCoordinator {
public:
    std::size_t enqueue(std::vector<IbIndex> ibs);
    bool ready(std::size_t id) const;
    void complete(std::size_t id);
    std::vector<std::size_t> runnable() const;  // enqueued, not started, not done, ready
    void mark_started(std::size_t id);

private:
    struct Item {
        std::vector<IbIndex> ibs;
        bool started = false;
        bool done = false;
    };
    std::vector<Item> items_;
};

}  // namespace pims
