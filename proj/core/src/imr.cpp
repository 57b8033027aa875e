#include "pims/imr.hpp"

#include <algorithm>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace pims {

namespace {

bool intersects(const std::vector<IbIndex>& a, const std::vector<IbIndex>& b) {
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i == *j) return true;
        if (*i < *j) {
            ++i;
        } else {
            ++j;
        }
    }
    return false;
}

}  // namespace

ResponseRecord respond(Engine& engine, TxnId malicious, Tick detect_tick, ResponseScope scope) {
    ResponseRecord r;
    r.malicious_txn = malicious;
    r.commit_tick = engine.commit_tick(malicious);
    r.detect_tick = detect_tick;
    r.spanned_ibs = engine.spanned_ibs(malicious);
    const auto& tuple_ibs = engine.assignment().tuple_ibs;
    const auto& records = engine.log().records();
    for (std::size_t lsn = engine.first_lsn(malicious); lsn < records.size(); ++lsn) {
        const auto& rec = records[lsn];
        if (rec.timestamp > detect_tick) break;
        if (rec.op != OpType::Write) continue;
        if (scope == ResponseScope::IbScoped && !intersects(tuple_ibs[rec.tuple], r.spanned_ibs)) continue;
        if (engine.excluded(rec.tuple, malicious)) continue;
        engine.ctt().add(rec.tuple, malicious, CttStatus::Suspected, detect_tick);
        r.suspected.insert(rec.tuple);
    }
    return r;
}

RecoveryPlan analyze(const Engine& engine, TxnId malicious) {
    if (!engine.txn(malicious).is_malicious()) {
        throw Error(ErrorCode::InvalidTransaction, "txn " + std::to_string(malicious) + " is not malicious");
    }
    RecoveryPlan plan;
    plan.malicious_txn = malicious;
    plan.commit_seq_bound = engine.store().commit_seq;

    const auto& records = engine.log().records();
    const std::size_t start = engine.first_lsn(malicious);
    plan.window_records = records.size() - start;

    std::set<TxnId> invalid{malicious};
    std::unordered_map<TxnId, std::size_t> depth{{malicious, 0}};
    std::unordered_map<TupleId, bool> tainted;
    std::unordered_map<TupleId, std::size_t> tuple_depth;
    std::size_t max_depth = 0;

    std::size_t i = start;
    while (i < records.size()) {
        const std::uint64_t seq = records[i].commit_seq;
        if (seq == 0) throw Error(ErrorCode::LogGap, "log record " + std::to_string(i) + " has no commit");
        std::size_t j = i;
        while (j < records.size() && records[j].commit_seq == seq) ++j;

        const auto& head = records[i];
        if (head.origin == RecordOrigin::Undo) {
            for (std::size_t l = i; l < j; ++l) {
                const auto& rec = records[l];
                const bool bad = rec.source_txn && invalid.count(*rec.source_txn) != 0U;
                tainted[rec.tuple] = bad;
                tuple_depth[rec.tuple] = bad ? depth[*rec.source_txn] : 0;
            }
            i = j;
            continue;
        }

        const TxnId t = head.txn;
        bool bad = false;
        std::size_t d = 0;
        if (t == malicious) {
            bad = head.origin == RecordOrigin::Original;
        } else if (!engine.txn(t).is_malicious()) {
            bad = invalid.count(t) != 0U;
            if (bad) d = depth[t];
            for (std::size_t l = i; l < j; ++l) {
                const auto& rec = records[l];
                if (rec.op != OpType::Read) continue;
                auto it = tainted.find(rec.tuple);
                if (it != tainted.end() && it->second) {
                    bad = true;
                    d = std::max(d, tuple_depth[rec.tuple] + 1);
                }
            }
            if (bad && invalid.insert(t).second) plan.affected.push_back(t);
            if (bad) {
                depth[t] = d;
                max_depth = std::max(max_depth, d);
            }
        }
        for (std::size_t l = i; l < j; ++l) {
            const auto& rec = records[l];
            if (rec.op != OpType::Write) continue;
            tainted[rec.tuple] = bad;
            tuple_depth[rec.tuple] = bad ? d : 0;
            if (bad) plan.invalid_writes[rec.tuple].push_back(rec.lsn);
        }
        i = j;
    }

    std::sort(plan.affected.begin(), plan.affected.end(),
              [&](TxnId a, TxnId b) { return engine.commit_seq_of(a) < engine.commit_seq_of(b); });
    for (auto it = plan.invalid_writes.begin(); it != plan.invalid_writes.end();) {
        if (engine.excluded(it->first, malicious)) {
            it = plan.invalid_writes.erase(it);
        } else {
            plan.corrupted.insert(it->first);
            ++it;
        }
    }
    for (TxnId t : plan.affected) {
        for (TupleId o : engine.txn(t).writes) {
            if (plan.corrupted.count(o) != 0U) plan.last_affected_writer[o] = t;
        }
    }
    plan.passes = max_depth + 1;
    return plan;
}

nlohmann::json report_to_json(const RecoveryReport& r) {
    return {{"malicious_txn", r.malicious_txn}, {"affected", r.affected},       {"corrupted", r.corrupted},
            {"undo_count", r.undo_count},       {"redo_count", r.redo_count},   {"detect_tick", r.detect_tick},
            {"start_tick", r.start_tick},       {"assessed_tick", r.assessed_tick}, {"end_tick", r.end_tick},
            {"blocked_txns", r.blocked_txns}};
}

Recovery::Recovery(ResponseRecord response) : response_(std::move(response)) {
    report_.malicious_txn = response_.malicious_txn;
    report_.detect_tick = response_.detect_tick;
}

std::vector<TupleId> Recovery::assess(Engine& engine, Tick now) {
    const TxnId m = response_.malicious_txn;
    plan_ = analyze(engine, m);
    assessed_ = true;
    std::vector<TupleId> released;
    std::vector<TupleId> owned;
    for (const auto& [o, entry] : engine.ctt().entries()) {
        if (entry.owners.count(m) != 0U && plan_.corrupted.count(o) == 0U) owned.push_back(o);
    }
    for (TupleId o : owned) {
        if (engine.ctt().release(o, m)) released.push_back(o);
    }
    for (TupleId o : plan_.corrupted) engine.ctt().add(o, m, CttStatus::Confirmed, now);
    report_.affected = plan_.affected;
    report_.corrupted.assign(plan_.corrupted.begin(), plan_.corrupted.end());
    report_.assessed_tick = now;
    report_.commit_seq_bound = plan_.commit_seq_bound;
    return released;
}

std::vector<TupleId> Recovery::undo(Engine& engine, Tick now) {
    if (!assessed_) throw Error(ErrorCode::InvalidSpec, "undo before assessment");
    const TxnId m = response_.malicious_txn;
    auto& log = engine.log();
    const auto& records = log.records();

    std::vector<std::pair<std::uint64_t, Engine::Restore>> steps;
    for (const auto& [o, lsns] : plan_.invalid_writes) {
        auto live = std::find_if(lsns.begin(), lsns.end(), [&](std::uint64_t l) { return !records[l].compensated; });
        if (live == lsns.end()) continue;
        const auto& chosen = records[*live];
        Engine::Restore r{o, chosen.before_image, std::nullopt, chosen.taint_before};
        r.taint.erase(std::remove(r.taint.begin(), r.taint.end(), m), r.taint.end());
        for (std::uint64_t l = chosen.lsn; l-- > 0;) {
            const auto& prev = records[l];
            if (prev.tuple != o || prev.op != OpType::Write) continue;
            r.source = prev.origin == RecordOrigin::Undo ? prev.source_txn : std::optional<TxnId>(prev.txn);
            break;
        }
        steps.emplace_back(chosen.lsn, std::move(r));
    }
    for (const auto& [o, lsns] : plan_.invalid_writes) {
        for (std::uint64_t l : lsns) log.mark_compensated(l);
    }
    std::sort(steps.begin(), steps.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Engine::Restore> ordered;
    ordered.reserve(steps.size());
    for (auto& s : steps) ordered.push_back(std::move(s.second));
    engine.restore(m, ordered, now);
    report_.undo_count = ordered.size();

    std::vector<TupleId> released;
    for (TupleId o : plan_.corrupted) {
        if (plan_.last_affected_writer.count(o) == 0U && engine.ctt().release(o, m)) released.push_back(o);
    }
    if (!redo_pending()) report_.end_tick = now;
    return released;
}

std::vector<TupleId> Recovery::redo_next(Engine& engine, Tick now) {
    if (!redo_pending()) return {};
    const TxnId m = response_.malicious_txn;
    const TxnId t = plan_.affected[next_redo_++];
    const auto& spec = engine.txn(t);

    std::set<TupleId> skip;
    for (TupleId o : spec.writes) {
        if (engine.excluded(o, m)) skip.insert(o);
    }
    engine.reexecute(t, now, skip);
    ++report_.redo_count;

    std::vector<TupleId> released;
    for (TupleId o : spec.writes) {
        if (skip.count(o) != 0U) continue;
        engine.clear_taint(o, m);
        auto it = plan_.last_affected_writer.find(o);
        if (it == plan_.last_affected_writer.end() || it->second != t) continue;
        if (engine.ctt().release(o, m)) released.push_back(o);
    }
    if (!redo_pending()) report_.end_tick = now;
    return released;
}

RecoveryReport recover(Engine& engine, const ResponseRecord& response, Tick now) {
    Recovery r(response);
    r.report().start_tick = now;
    r.assess(engine, now);
    r.undo(engine, now);
    while (r.redo_pending()) r.redo_next(engine, now);
    r.report().end_tick = now;
    return r.report();
}

std::vector<std::vector<std::size_t>> coordinate(std::span<const ResponseRecord> responses) {
    std::vector<std::vector<std::size_t>> waits(responses.size());
    for (std::size_t i = 0; i < responses.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (intersects(responses[i].spanned_ibs, responses[j].spanned_ibs)) waits[i].push_back(j);
        }
    }
    return waits;
}

std::size_t RecoveryCoordinator::enqueue(std::vector<IbIndex> ibs) {
    std::sort(ibs.begin(), ibs.end());
    ibs.erase(std::unique(ibs.begin(), ibs.end()), ibs.end());
    items_.push_back({std::move(ibs), false, false});
    return items_.size() - 1;
}

bool RecoveryCoordinator::ready(std::size_t id) const {
    const auto& me = items_.at(id);
    for (std::size_t j = 0; j < id; ++j) {
        if (!items_[j].done && intersects(items_[j].ibs, me.ibs)) return false;
    }
    return true;
}

void RecoveryCoordinator::complete(std::size_t id) { items_.at(id).done = true; }

void RecoveryCoordinator::mark_started(std::size_t id) { items_.at(id).started = true; }

std::vector<std::size_t> RecoveryCoordinator::runnable() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < items_.size(); ++i) {
        if (!items_[i].started && !items_[i].done && ready(i)) out.push_back(i);
    }
    return out;
}

}  // namespace pims
