#include "pims/engine.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <ostream>

namespace pims {

Cents Store::total() const { return std::accumulate(balances.begin(), balances.end(), Cents{0}); }

const LogRecord& TransactionsLog::append(LogRecord record) {
    record.lsn = records_.size();
    records_.push_back(std::move(record));
    return records_.back();
}

void TransactionsLog::write_csv(std::ostream& out) const {
    out << "txn_id,tuple,op,before,after,tick,commit_seq\n";
    for (const auto& r : records_) {
        out << r.txn << ',' << r.tuple << ',' << (r.op == OpType::Read ? 'r' : 'w') << ',' << r.before_image << ','
            << r.after_image << ',' << r.timestamp << ',' << r.commit_seq << '\n';
    }
}

bool CorruptedTuplesTable::add(TupleId tuple, TxnId owner, CttStatus status, Tick now) {
    auto [it, inserted] = entries_.try_emplace(tuple);
    auto& e = it->second;
    if (inserted) {
        e.status = status;
        e.source_malicious = owner;
        e.added_at = now;
    } else if (status == CttStatus::Confirmed) {
        e.status = CttStatus::Confirmed;
    }
    e.owners.insert(owner);
    return inserted;
}

bool CorruptedTuplesTable::release(TupleId tuple, TxnId owner) {
    auto it = entries_.find(tuple);
    if (it == entries_.end()) return false;
    it->second.owners.erase(owner);
    if (!it->second.owners.empty()) return false;
    entries_.erase(it);
    return true;
}

std::set<TxnId> CorruptedTuplesTable::evict(TupleId tuple) {
    auto it = entries_.find(tuple);
    if (it == entries_.end()) return {};
    auto owners = std::move(it->second.owners);
    entries_.erase(it);
    return owners;
}

const CttEntry* CorruptedTuplesTable::find(TupleId tuple) const {
    auto it = entries_.find(tuple);
    return it == entries_.end() ? nullptr : &it->second;
}

std::string_view to_string(SimStrategy s) {
    switch (s) {
        case SimStrategy::BFA: return "BFA";
        case SimStrategy::BA: return "BA";
        case SimStrategy::RA: return "RA";
        case SimStrategy::SA: return "SA";
        case SimStrategy::Exact: return "Exact";
        case SimStrategy::OneIB: return "OneIB";
        case SimStrategy::ITDB: return "ITDB";
    }
    return "?";
}

SimStrategy sim_strategy_from_string(std::string_view name) {
    for (auto s : {SimStrategy::BFA, SimStrategy::BA, SimStrategy::RA, SimStrategy::SA, SimStrategy::Exact,
                   SimStrategy::OneIB, SimStrategy::ITDB}) {
        std::string a(to_string(s));
        std::string b(name);
        auto lower = [](std::string x) {
            std::transform(x.begin(), x.end(), x.begin(), [](unsigned char c) { return std::tolower(c); });
            return x;
        };
        if (lower(a) == lower(b)) return s;
    }
    throw Error(ErrorCode::ConfigError, "unknown strategy: " + std::string(name));
}

void SimConfig::check() const {
    auto fail = [](const std::string& why) { throw Error(ErrorCode::ConfigError, why); };
    if (delta < 0) fail("delta must be non-negative");
    if (!(lambda > 0.0)) fail("lambda must be positive");
    if (k == 0) fail("k must be positive");
    if (boundary_hold && *boundary_hold != 0 && *boundary_hold < delta) fail("boundary_hold must be 0 or >= delta");
    if (scan_rate == 0) fail("scan_rate must be positive");
    if (undo_step_ticks < 0 || redo_step_ticks < 0) fail("step costs must be non-negative");
    if (ids_false_positive < 0 || ids_false_positive > 1 || ids_false_negative < 0 || ids_false_negative > 1) {
        fail("IDS rates must be in [0, 1]");
    }
}

std::string_view to_string(AdmissionStatus s) {
    switch (s) {
        case AdmissionStatus::Executed: return "executed";
        case AdmissionStatus::SuspendedOnBT: return "boundary";
        case AdmissionStatus::SuspendedOnCTT: return "ctt";
        case AdmissionStatus::SuspendedOnIBLock: return "ib_lock";
    }
    return "?";
}

IntrusionDetector::IntrusionDetector(Tick delta, double false_positive, double false_negative, std::uint64_t seed)
    : delta_(delta), false_positive_(false_positive), false_negative_(false_negative), rng_(seed) {}

std::optional<Tick> IntrusionDetector::observe_commit(const TransactionSpec& txn, Tick commit_tick) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    bool alarm = false;
    if (txn.is_malicious()) {
        alarm = !(false_negative_ > 0.0 && unit(rng_) < false_negative_);
    } else if (false_positive_ > 0.0) {
        alarm = unit(rng_) < false_positive_;
    }
    if (!alarm) return std::nullopt;
    pending_.push_back({txn.id, commit_tick + delta_});
    return commit_tick + delta_;
}

std::vector<Detection> IntrusionDetector::report(Tick now) {
    std::vector<Detection> due;
    auto it = std::stable_partition(pending_.begin(), pending_.end(),
                                    [now](const Detection& d) { return d.detect_time > now; });
    due.assign(it, pending_.end());
    pending_.erase(it, pending_.end());
    return due;
}

Engine::Engine(std::vector<TransactionSpec> txns, std::size_t tuple_count, Cents initial_balance,
               IBAssignment assignment, EngineOptions options)
    : txns_(std::move(txns)),
      initial_balance_(initial_balance),
      assignment_(std::move(assignment)),
      options_(options) {
    if (assignment_.tuple_count() != tuple_count || assignment_.txn_count() != txns_.size()) {
        throw Error(ErrorCode::DimensionMismatch, "assignment does not match workload");
    }
    for (std::size_t i = 0; i < txns_.size(); ++i) {
        if (txns_[i].id != i) throw Error(ErrorCode::InvalidTransaction, "txn ids must equal their positions");
        check_transaction(txns_[i]);
        spanned_.push_back(assignment_.spanned_ibs(txns_[i]));
    }
    store_.balances.assign(tuple_count, initial_balance);
    taint_.assign(tuple_count, {});
    runtime_.quiesced.assign(assignment_.k, 0);
    commits_.assign(txns_.size(), std::nullopt);
}

const TransactionSpec& Engine::txn(TxnId id) const {
    if (id >= txns_.size()) throw Error(ErrorCode::UnknownTransaction, "unknown txn " + std::to_string(id));
    return txns_[id];
}

bool Engine::committed(TxnId id) const { return id < commits_.size() && commits_[id].has_value(); }

namespace {
[[noreturn]] void not_committed(TxnId id) {
    throw Error(ErrorCode::NotCommitted, "txn " + std::to_string(id) + " has not committed");
}
}  // namespace

Tick Engine::commit_tick(TxnId id) const {
    if (!committed(id)) not_committed(id);
    return commits_[id]->tick;
}

std::uint64_t Engine::commit_seq_of(TxnId id) const {
    if (!committed(id)) not_committed(id);
    return commits_[id]->seq;
}

std::uint64_t Engine::first_lsn(TxnId id) const {
    if (!committed(id)) not_committed(id);
    return commits_[id]->first_lsn;
}

AdmissionOutcome Engine::admit(TxnId id, Tick now) {
    const auto& t = txn(id);
    if (committed(id)) throw Error(ErrorCode::InvalidTransaction, "txn " + std::to_string(id) + " already committed");

    for (TupleId o : t.accessed()) {
        if (runtime_.bt_locks.count(o) != 0U) return {AdmissionStatus::SuspendedOnBT, 0};
    }
    for (TupleId o : t.reads) {
        if (ctt_.contains(o)) return {AdmissionStatus::SuspendedOnCTT, 0};
    }
    for (IbIndex ib : spanned_[id]) {
        if (runtime_.quiesced[ib] > 0) return {AdmissionStatus::SuspendedOnIBLock, 0};
    }

    // A blind write replaces a corrupted value outright, so recovery must leave it alone.
    const auto rmw = t.read_modify_write();
    for (TupleId o : t.writes) {
        if (std::find(rmw.begin(), rmw.end(), o) != rmw.end()) continue;
        for (TxnId owner : ctt_.evict(o)) exclude_from_recovery(o, owner);
    }

    const std::uint64_t seq = execute(t, now, RecordOrigin::Original, {});

    if (options_.delayed_access && options_.boundary_hold > 0) {
        for (TupleId o : t.writes) {
            if (!assignment_.boundary[o]) continue;
            BoundaryLock lock{id, now + options_.boundary_hold};
            runtime_.bt_locks[o] = lock;
            new_locks_.emplace_back(o, lock);
        }
    }
    return {AdmissionStatus::Executed, seq};
}

std::uint64_t Engine::execute(const TransactionSpec& t, Tick now, RecordOrigin origin,
                              const std::set<TupleId>& skip) {
    const auto post = compute_writes(t, [this](TupleId o) { return store_.balances.at(o); });
    const std::uint64_t seq = ++store_.commit_seq;
    const std::uint64_t first = log_.size();

    std::vector<TxnId> in_taint;
    for (TupleId r : t.reads) {
        const auto& tr = taint_[r];
        in_taint.insert(in_taint.end(), tr.begin(), tr.end());
        if (origin == RecordOrigin::Original) {
            for (TxnId m : tr) {
                const auto& span = spanned_[m];
                if (!std::binary_search(span.begin(), span.end(), assignment_.txn_ib[t.id])) {
                    cross_ib_reads_.push_back({t.id, m, r});
                }
            }
        }
    }
    if (origin == RecordOrigin::Original && t.is_malicious()) in_taint.push_back(t.id);
    std::sort(in_taint.begin(), in_taint.end());
    in_taint.erase(std::unique(in_taint.begin(), in_taint.end()), in_taint.end());

    for (const auto& op : t.op_order) {
        LogRecord rec;
        rec.txn = t.id;
        rec.tuple = op.tuple;
        rec.op = op.type;
        rec.timestamp = now;
        rec.commit_seq = seq;
        rec.origin = origin;
        Cents& bal = store_.balances.at(op.tuple);
        rec.before_image = bal;
        if (op.type == OpType::Read) {
            rec.after_image = bal;
        } else {
            if (skip.count(op.tuple) != 0U) continue;
            const auto pos = static_cast<std::size_t>(std::find(t.writes.begin(), t.writes.end(), op.tuple) -
                                                      t.writes.begin());
            rec.after_image = post.at(pos);
            rec.taint_before = taint_[op.tuple];
            bal = rec.after_image;
            taint_[op.tuple] = in_taint;
        }
        log_.append(std::move(rec));
        if (origin == RecordOrigin::Original) {
            history_.push_back(op.type == OpType::Read ? HistoryEvent::read(t.id, op.tuple, now)
                                                       : HistoryEvent::write(t.id, op.tuple, now));
        }
    }
    if (origin == RecordOrigin::Original) {
        history_.push_back(HistoryEvent::commit(t.id, now, seq));
        commits_[t.id] = CommitInfo{now, seq, first};
    }
    return seq;
}

std::vector<std::pair<TupleId, BoundaryLock>> Engine::take_new_locks() {
    std::vector<std::pair<TupleId, BoundaryLock>> out;
    out.swap(new_locks_);
    return out;
}

bool Engine::release_boundary(TupleId tuple, Tick release_at) {
    auto it = runtime_.bt_locks.find(tuple);
    if (it == runtime_.bt_locks.end() || it->second.release_at != release_at) return false;
    runtime_.bt_locks.erase(it);
    return true;
}

void Engine::quiesce(const std::vector<IbIndex>& ibs) {
    for (IbIndex ib : ibs) ++runtime_.quiesced.at(ib);
}

void Engine::resume(const std::vector<IbIndex>& ibs) {
    for (IbIndex ib : ibs) {
        auto& q = runtime_.quiesced.at(ib);
        if (q > 0) --q;
    }
}

void Engine::restore(TxnId owner, const std::vector<Restore>& steps, Tick now) {
    if (steps.empty()) return;
    const std::uint64_t seq = ++store_.commit_seq;
    for (const auto& s : steps) {
        LogRecord rec;
        rec.txn = owner;
        rec.tuple = s.tuple;
        rec.op = OpType::Write;
        rec.timestamp = now;
        rec.commit_seq = seq;
        rec.origin = RecordOrigin::Undo;
        rec.source_txn = s.source;
        rec.before_image = store_.balances.at(s.tuple);
        rec.after_image = s.value;
        rec.taint_before = taint_[s.tuple];
        store_.balances[s.tuple] = s.value;
        taint_[s.tuple] = s.taint;
        log_.append(std::move(rec));
    }
}

void Engine::reexecute(TxnId id, Tick now, const std::set<TupleId>& skip) {
    if (!committed(id)) not_committed(id);
    execute(txn(id), now, RecordOrigin::Redo, skip);
}

void Engine::exclude_from_recovery(TupleId tuple, TxnId owner) { excluded_[tuple].insert(owner); }

bool Engine::excluded(TupleId tuple, TxnId owner) const {
    auto it = excluded_.find(tuple);
    return it != excluded_.end() && it->second.count(owner) != 0U;
}

void Engine::clear_taint(TupleId tuple, TxnId origin) {
    auto& t = taint_.at(tuple);
    t.erase(std::remove(t.begin(), t.end(), origin), t.end());
}

}  // namespace pims
