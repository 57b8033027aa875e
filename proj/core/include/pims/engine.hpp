#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string_view>
#include <vector>

#include "pims/history.hpp"
#include "pims/partition.hpp"
#include "pims/transaction.hpp"

namespace pims {

struct Store {
    std::vector<Cents> balances;
    std::uint64_t commit_seq = 0;

    Cents total() const;
};

enum class RecordOrigin { Original, Redo, Undo };

struct LogRecord {
    std::uint64_t lsn = 0;
    TxnId txn = 0;  // the recovering malicious txn for Undo records
    TupleId tuple = 0;
    OpType op = OpType::Read;
    Cents before_image = 0;
    Cents after_image = 0;
    Tick timestamp = 0;
    std::uint64_t commit_seq = 0;
    RecordOrigin origin = RecordOrigin::Original;
    std::optional<TxnId> source_txn;  // Undo: writer of the restored version, if any
    bool compensated = false;         // undone by some recovery
    std::vector<TxnId> taint_before;  // Write: malicious origins of the overwritten version
};

/// Append-only read/write log with before and after images.
class TransactionsLog {
public:
    const LogRecord& append(LogRecord record);
    const std::vector<LogRecord>& records() const noexcept { return records_; }
    const LogRecord& at(std::uint64_t lsn) const { return records_.at(lsn); }
    void mark_compensated(std::uint64_t lsn) { records_.at(lsn).compensated = true; }
    std::size_t size() const noexcept { return records_.size(); }

    /// txn_id,tuple,op,before,after,tick,commit_seq
    void write_csv(std::ostream& out) const;

private:
    std::vector<LogRecord> records_;
};

enum class CttStatus { Suspected, Confirmed };

struct CttEntry {
    CttStatus status = CttStatus::Suspected;
    TxnId source_malicious = 0;
    Tick added_at = 0;
    std::set<TxnId> owners;  // malicious txns whose recovery still covers the tuple
};

/// Corrupted Tuples Table: one entry per tuple, released when no owner remains.
class CorruptedTuplesTable {
public:
    /// Returns true when the tuple was not in the table before.
    bool add(TupleId tuple, TxnId owner, CttStatus status, Tick now);
    /// Drops `owner`; returns true when the entry disappears.
    bool release(TupleId tuple, TxnId owner);
    /// Removes the entry regardless of owners and returns them.
    std::set<TxnId> evict(TupleId tuple);

    bool contains(TupleId tuple) const { return entries_.count(tuple) != 0U; }
    const CttEntry* find(TupleId tuple) const;
    bool empty() const noexcept { return entries_.empty(); }
    std::size_t size() const noexcept { return entries_.size(); }
    const std::map<TupleId, CttEntry>& entries() const noexcept { return entries_; }

private:
    std::map<TupleId, CttEntry> entries_;
};

enum class SimStrategy { BFA, BA, RA, SA, Exact, OneIB, ITDB };

std::string_view to_string(SimStrategy s);
SimStrategy sim_strategy_from_string(std::string_view name);

struct SimConfig {
    Tick delta = 100;
    double lambda = 1.0;  // arrivals per tick
    std::uint32_t k = 10;
    SimStrategy strategy = SimStrategy::BFA;
    bool delayed_access = true;
    std::optional<Tick> boundary_hold;  // defaults to ceil(1.5 * delta)
    std::uint64_t seed = 1;
    double ids_false_positive = 0.0;
    double ids_false_negative = 0.0;
    std::size_t scan_rate = 100;  // log records per tick during dependency analysis
    Tick undo_step_ticks = 1;
    Tick redo_step_ticks = 1;

    Tick hold() const { return boundary_hold.value_or((3 * delta + 1) / 2); }
    bool ib_scoped() const { return strategy != SimStrategy::ITDB; }
    bool quiesces() const { return strategy != SimStrategy::ITDB; }
    bool uses_single_ib() const { return strategy == SimStrategy::OneIB || strategy == SimStrategy::ITDB; }
    bool effective_delayed_access() const { return delayed_access && !uses_single_ib(); }
    void check() const;
};

struct BoundaryLock {
    TxnId holder = 0;
    Tick release_at = 0;
};

struct IBRuntime {
    std::vector<std::uint32_t> quiesced;  // active recovery blocks per IB
    std::map<TupleId, BoundaryLock> bt_locks;
};

enum class AdmissionStatus { Executed, SuspendedOnBT, SuspendedOnCTT, SuspendedOnIBLock };

std::string_view to_string(AdmissionStatus s);

struct AdmissionOutcome {
    AdmissionStatus status = AdmissionStatus::Executed;
    std::uint64_t commit_seq = 0;
};

struct Detection {
    TxnId malicious_txn = 0;
    Tick detect_time = 0;
};

/// Simulated IDS: reports each malicious commit exactly `delta` ticks later.
/// False positive / negative rates are hooks; both default to zero.
class IntrusionDetector {
public:
    explicit IntrusionDetector(Tick delta, double false_positive = 0.0, double false_negative = 0.0,
                               std::uint64_t seed = 0);

    /// Records a commit; returns the detection tick if an alarm will fire.
    std::optional<Tick> observe_commit(const TransactionSpec& txn, Tick commit_tick);
    /// Alarms due at or before `now`, in commit order; removes them.
    std::vector<Detection> report(Tick now);

private:
    Tick delta_;
    double false_positive_;
    double false_negative_;
    std::mt19937_64 rng_;
    std::vector<Detection> pending_;
};

struct CrossIbRead {
    TxnId reader = 0;
    TxnId origin = 0;
    TupleId tuple = 0;
};

struct EngineOptions {
    bool delayed_access = true;
    Tick boundary_hold = 0;
};

/// In-memory Checking store plus everything admission and recovery mutate.
class Engine {
public:
    Engine(std::vector<TransactionSpec> txns, std::size_t tuple_count, Cents initial_balance, IBAssignment assignment,
           EngineOptions options);

    /// Admission control: suspend on held boundary tuples, on reads of
    /// corrupted tuples, or on quiesced IBs; otherwise execute and commit.
    AdmissionOutcome admit(TxnId txn, Tick now);

    /// Boundary locks taken by the executions since the last call.
    std::vector<std::pair<TupleId, BoundaryLock>> take_new_locks();
    /// Releases the lock if it is still the one that expires at `release_at`.
    bool release_boundary(TupleId tuple, Tick release_at);

    void quiesce(const std::vector<IbIndex>& ibs);
    void resume(const std::vector<IbIndex>& ibs);

    struct Restore {
        TupleId tuple;
        Cents value;
        std::optional<TxnId> source;
        std::vector<TxnId> taint;
    };
    /// Compensating undo writes, logged as one unit under `owner`.
    void restore(TxnId owner, const std::vector<Restore>& steps, Tick now);
    /// Semantic re-execution of a committed txn against current balances.
    /// Writes to `skip` keep their current value.
    void reexecute(TxnId txn, Tick now, const std::set<TupleId>& skip);

    void exclude_from_recovery(TupleId tuple, TxnId owner);
    bool excluded(TupleId tuple, TxnId owner) const;

    const TransactionSpec& txn(TxnId id) const;
    std::size_t txn_count() const noexcept { return txns_.size(); }
    bool committed(TxnId id) const;
    Tick commit_tick(TxnId id) const;
    std::uint64_t commit_seq_of(TxnId id) const;
    std::uint64_t first_lsn(TxnId id) const;
    const std::vector<IbIndex>& spanned_ibs(TxnId id) const { return spanned_.at(id); }

    const Store& store() const noexcept { return store_; }
    const TransactionsLog& log() const noexcept { return log_; }
    TransactionsLog& log() noexcept { return log_; }
    CorruptedTuplesTable& ctt() noexcept { return ctt_; }
    const CorruptedTuplesTable& ctt() const noexcept { return ctt_; }
    const IBRuntime& runtime() const noexcept { return runtime_; }
    const IBAssignment& assignment() const noexcept { return assignment_; }
    const std::vector<HistoryEvent>& history() const noexcept { return history_; }
    const std::vector<TxnId>& taint(TupleId tuple) const { return taint_.at(tuple); }
    void clear_taint(TupleId tuple, TxnId origin);
    const std::vector<CrossIbRead>& cross_ib_reads() const noexcept { return cross_ib_reads_; }
    Cents initial_balance() const noexcept { return initial_balance_; }

private:
    std::uint64_t execute(const TransactionSpec& t, Tick now, RecordOrigin origin, const std::set<TupleId>& skip);

    std::vector<TransactionSpec> txns_;
    Cents initial_balance_;
    IBAssignment assignment_;
    EngineOptions options_;
    std::vector<std::vector<IbIndex>> spanned_;

    Store store_;
    TransactionsLog log_;
    CorruptedTuplesTable ctt_;
    IBRuntime runtime_;
    std::vector<HistoryEvent> history_;
    std::vector<std::vector<TxnId>> taint_;
    std::map<TupleId, std::set<TxnId>> excluded_;
    std::vector<std::pair<TupleId, BoundaryLock>> new_locks_;
    std::vector<CrossIbRead> cross_ib_reads_;

    struct CommitInfo {
        Tick tick = 0;
        std::uint64_t seq = 0;
        std::uint64_t first_lsn = 0;
    };
    std::vector<std::optional<CommitInfo>> commits_;
};

}  // namespace pims
