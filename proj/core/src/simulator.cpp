#include "pims/simulator.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <random>

#include <nlohmann/json.hpp>

namespace pims {

namespace {

constexpr TraceKind kAllKinds[] = {TraceKind::Setup,        TraceKind::Arrival,   TraceKind::Commit,
                                   TraceKind::Suspend,      TraceKind::BTRelease, TraceKind::Detection,
                                   TraceKind::ResponseDone, TraceKind::RecoveryPhaseDone, TraceKind::Signal};

Strategy partition_strategy(SimStrategy s) {
    switch (s) {
        case SimStrategy::BA: return Strategy::BA;
        case SimStrategy::RA: return Strategy::RA;
        case SimStrategy::SA: return Strategy::SA;
        case SimStrategy::Exact: return Strategy::Exact;
        default: return Strategy::BFA;
    }
}

}  // namespace

std::string_view to_string(TraceKind k) {
    switch (k) {
        case TraceKind::Setup: return "Setup";
        case TraceKind::Arrival: return "Arrival";
        case TraceKind::Commit: return "Commit";
        case TraceKind::Suspend: return "Suspend";
        case TraceKind::BTRelease: return "BTRelease";
        case TraceKind::Detection: return "Detection";
        case TraceKind::ResponseDone: return "ResponseDone";
        case TraceKind::RecoveryPhaseDone: return "RecoveryPhaseDone";
        case TraceKind::Signal: return "Signal";
    }
    return "?";
}

TraceKind trace_kind_from_string(std::string_view name) {
    for (TraceKind k : kAllKinds) {
        if (to_string(k) == name) return k;
    }
    throw Error(ErrorCode::ParseError, "unknown trace kind: " + std::string(name));
}

nlohmann::json trace_event_to_json(const TraceEvent& e) {
    nlohmann::json j = {{"tick", e.tick},
                        {"kind", std::string(to_string(e.kind))},
                        {"txn", e.txn ? nlohmann::json(*e.txn) : nlohmann::json(nullptr)},
                        {"tuples", e.tuples},
                        {"detail", e.detail},
                        {"txns", e.txns}};
    if (e.boundary) j["boundary"] = *e.boundary;
    if (e.fairness) j["fairness"] = *e.fairness;
    return j;
}

TraceEvent trace_event_from_json(const nlohmann::json& j) {
    TraceEvent e;
    try {
        e.tick = j.at("tick").get<Tick>();
        e.kind = trace_kind_from_string(j.at("kind").get<std::string>());
        if (j.contains("txn") && !j.at("txn").is_null()) e.txn = j.at("txn").get<TxnId>();
        e.tuples = j.value("tuples", std::vector<TupleId>{});
        e.detail = j.value("detail", std::string{});
        e.txns = j.value("txns", std::vector<TxnId>{});
        if (j.contains("boundary")) e.boundary = j.at("boundary").get<std::size_t>();
        if (j.contains("fairness")) e.fairness = j.at("fairness").get<double>();
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::ParseError, std::string("trace event: ") + ex.what());
    }
    return e;
}

void write_trace(std::ostream& out, const std::vector<TraceEvent>& trace) {
    for (const auto& e : trace) out << trace_event_to_json(e).dump() << '\n';
}

std::vector<TraceEvent> read_trace(std::istream& in) {
    std::vector<TraceEvent> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(trace_event_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& ex) {
            throw Error(ErrorCode::ParseError, std::string("trace line: ") + ex.what());
        }
    }
    return out;
}

IBAssignment make_assignment(const Workload& workload, const SimConfig& config) {
    if (config.uses_single_ib()) {
        return derive_assignment(workload.txns, workload.tuple_count(), 1,
                                 std::vector<IbIndex>(workload.txns.size(), 0));
    }
    return assign(partition_strategy(config.strategy), workload.txns, workload.tuple_count(), config.k, config.seed);
}

bool Simulator::Later::operator()(const Item& x, const Item& y) const {
    if (x.tick != y.tick) return x.tick > y.tick;
    if (x.prio != y.prio) return x.prio > y.prio;
    return x.seq > y.seq;
}

Simulator::Simulator(const Workload& workload, SimConfig config)
    : Simulator(workload, make_assignment(workload, config), config) {}

Simulator::Simulator(const Workload& workload, IBAssignment assignment, SimConfig config)
    : workload_(&workload),
      config_(config),
      ids_(config.delta, config.ids_false_positive, config.ids_false_negative, config.seed * 0x9E3779B97F4A7C15ULL) {
    config_.check();
    const auto q = quality(assignment, workload.txns);
    TraceEvent setup;
    setup.kind = TraceKind::Setup;
    setup.detail = std::string(to_string(config_.strategy));
    setup.boundary = q.boundary_tuples.size();
    setup.fairness = q.fairness;
    trace_.push_back(std::move(setup));

    EngineOptions opts{config_.effective_delayed_access(), config_.hold()};
    engine_ = std::make_unique<Engine>(workload.txns, workload.tuple_count(), workload.spec.initial_balance,
                                       std::move(assignment), opts);
    init();
}

void Simulator::init() {
    std::mt19937_64 rng(config_.seed);
    std::exponential_distribution<double> gap(config_.lambda);
    double t = 0.0;
    arrival_tick_.resize(workload_->txns.size());
    for (std::size_t i = 0; i < workload_->txns.size(); ++i) {
        t += gap(rng);
        arrival_tick_[i] = static_cast<Tick>(t);
        push(arrival_tick_[i], Priority::Arrival, i);
    }
}

void Simulator::push(Tick tick, Priority prio, std::uint64_t a, Tick b) {
    queue_.push(Item{tick, prio, next_seq_++, a, b});
}

void Simulator::emit(TraceEvent e) {
    e.tick = now_;
    pending_.push_back(std::move(e));
}

std::vector<TraceEvent> Simulator::step() {
    if (queue_.empty() && pending_.empty()) throw Error(ErrorCode::SimulationComplete, "simulation complete");
    if (!queue_.empty()) {
        now_ = queue_.top().tick;
        while (!queue_.empty() && queue_.top().tick == now_) {
            const Item item = queue_.top();
            queue_.pop();
            process(item);
        }
    }
    std::vector<TraceEvent> out;
    out.swap(pending_);
    trace_.insert(trace_.end(), out.begin(), out.end());
    return out;
}

const std::vector<TraceEvent>& Simulator::run() {
    while (!done()) step();
    return trace_;
}

void Simulator::process(const Item& item) {
    switch (item.prio) {
        case Priority::Arrival: {
            const auto txn = static_cast<TxnId>(item.a);
            TraceEvent e;
            e.kind = TraceKind::Arrival;
            e.txn = txn;
            emit(std::move(e));
            try_admit(txn, true);
            break;
        }
        case Priority::Retry: {
            retry_scheduled_for_ = -1;
            std::vector<TxnId> waiting;
            waiting.reserve(suspended_.size());
            for (const auto& [seq, txn] : suspended_) waiting.push_back(txn);
            for (TxnId txn : waiting) {
                if (suspension_.count(txn) != 0U) try_admit(txn, false);
            }
            break;
        }
        case Priority::BTRelease: {
            const auto tuple = static_cast<TupleId>(item.a);
            if (engine_->release_boundary(tuple, item.b)) {
                TraceEvent e;
                e.kind = TraceKind::BTRelease;
                e.tuples = {tuple};
                emit(std::move(e));
                schedule_retry();
            }
            break;
        }
        case Priority::Detection:
            for (const auto& d : ids_.report(now_)) on_detection(d.malicious_txn);
            break;
        case Priority::RecoveryStep:
            advance_recovery(static_cast<std::size_t>(item.a));
            break;
    }
}

void Simulator::try_admit(TxnId txn, bool fresh) {
    const auto outcome = engine_->admit(txn, now_);
    if (outcome.status == AdmissionStatus::Executed) {
        if (auto it = suspension_.find(txn); it != suspension_.end()) {
            suspended_.erase(it->second.first);
            suspension_.erase(it);
        }
        const auto& spec = engine_->txn(txn);
        TraceEvent e;
        e.kind = TraceKind::Commit;
        e.txn = txn;
        e.tuples = spec.writes;
        emit(std::move(e));
        if (auto d = ids_.observe_commit(spec, now_)) push(*d, Priority::Detection, txn);
        for (const auto& [tuple, lock] : engine_->take_new_locks()) {
            push(lock.release_at, Priority::BTRelease, tuple, lock.release_at);
        }
        return;
    }

    auto it = suspension_.find(txn);
    bool record = false;
    if (it == suspension_.end()) {
        const std::uint64_t seq = suspend_seq_++;
        suspended_[seq] = txn;
        suspension_[txn] = {seq, outcome.status};
        record = true;
    } else if (it->second.second != outcome.status) {
        it->second.second = outcome.status;
        record = true;
    }
    (void)fresh;
    if (!record) return;
    TraceEvent e;
    e.kind = TraceKind::Suspend;
    e.txn = txn;
    e.detail = std::string(to_string(outcome.status));
    emit(std::move(e));
    if (outcome.status == AdmissionStatus::SuspendedOnIBLock) {
        const auto& span = engine_->spanned_ibs(txn);
        for (auto& r : recoveries_) {
            if (r.phase != Phase::Analysis && r.phase != Phase::Waiting) continue;
            const bool hit = std::any_of(span.begin(), span.end(), [&](IbIndex ib) {
                return std::find(r.quiesced.begin(), r.quiesced.end(), ib) != r.quiesced.end();
            });
            if (hit) ++r.recovery->report().blocked_txns;
        }
    }
}

void Simulator::schedule_retry() {
    if (retry_scheduled_for_ == now_) return;
    retry_scheduled_for_ = now_;
    push(now_, Priority::Retry, 0);
}

void Simulator::on_detection(TxnId malicious) {
    TraceEvent d;
    d.kind = TraceKind::Detection;
    d.txn = malicious;
    emit(std::move(d));

    const auto scope = config_.ib_scoped() ? ResponseScope::IbScoped : ResponseScope::Temporal;
    auto response = respond(*engine_, malicious, now_, scope);
    TraceEvent r;
    r.kind = TraceKind::ResponseDone;
    r.txn = malicious;
    r.tuples.assign(response.suspected.begin(), response.suspected.end());
    emit(std::move(r));

    RecoveryState state;
    state.quiesced = config_.quiesces() ? response.spanned_ibs : std::vector<IbIndex>{};
    state.coord_id = coordinator_.enqueue(response.spanned_ibs);
    // The IBs stay closed while this recovery waits behind earlier overlapping ones.
    engine_->quiesce(state.quiesced);
    state.recovery = std::make_unique<Recovery>(std::move(response));
    recoveries_.push_back(std::move(state));
    start_ready_recoveries();
}

void Simulator::start_ready_recoveries() {
    for (std::size_t id : coordinator_.runnable()) {
        auto& r = recoveries_.at(id);
        coordinator_.mark_started(id);
        r.phase = Phase::Analysis;
        r.recovery->report().start_tick = now_;
        const TxnId m = r.recovery->response().malicious_txn;
        const auto window = engine_->log().size() - engine_->first_lsn(m);
        Tick cost = 1 + static_cast<Tick>(window / config_.scan_rate);
        if (config_.strategy == SimStrategy::ITDB) {
            // Without IB scoping the scan repeats once per level of the dependency chain.
            cost *= static_cast<Tick>(analyze(*engine_, m).passes);
        }
        TraceEvent e;
        e.kind = TraceKind::RecoveryPhaseDone;
        e.txn = m;
        e.detail = "start";
        emit(std::move(e));
        push(now_ + cost, Priority::RecoveryStep, id);
    }
}

void Simulator::signal(std::size_t idx, const std::vector<TupleId>& released) {
    if (released.empty()) return;
    TraceEvent e;
    e.kind = TraceKind::Signal;
    e.txn = recoveries_[idx].recovery->response().malicious_txn;
    e.tuples = released;
    emit(std::move(e));
    schedule_retry();
}

void Simulator::advance_recovery(std::size_t idx) {
    auto& r = recoveries_.at(idx);
    auto& rec = *r.recovery;
    const TxnId m = rec.response().malicious_txn;
    TraceEvent e;
    e.kind = TraceKind::RecoveryPhaseDone;
    e.txn = m;

    auto finish = [&] {
        r.phase = Phase::Done;
        rec.report().end_tick = now_;
        TraceEvent done;
        done.kind = TraceKind::RecoveryPhaseDone;
        done.txn = m;
        done.detail = "done";
        emit(std::move(done));
        coordinator_.complete(r.coord_id);
        start_ready_recoveries();
        schedule_retry();
    };

    switch (r.phase) {
        case Phase::Analysis: {
            const auto released = rec.assess(*engine_, now_);
            engine_->resume(r.quiesced);
            e.detail = "assessment";
            e.txns = rec.plan().affected;
            e.tuples.assign(rec.plan().corrupted.begin(), rec.plan().corrupted.end());
            emit(std::move(e));
            signal(idx, released);
            schedule_retry();
            r.phase = Phase::Undo;
            push(now_ + static_cast<Tick>(rec.plan().corrupted.size()) * config_.undo_step_ticks,
                 Priority::RecoveryStep, idx);
            break;
        }
        case Phase::Undo: {
            const auto released = rec.undo(*engine_, now_);
            e.detail = "undo";
            e.tuples.assign(rec.plan().corrupted.begin(), rec.plan().corrupted.end());
            emit(std::move(e));
            signal(idx, released);
            if (rec.redo_pending()) {
                r.phase = Phase::Redo;
                push(now_ + config_.redo_step_ticks, Priority::RecoveryStep, idx);
            } else {
                finish();
            }
            break;
        }
        case Phase::Redo: {
            const TxnId t = rec.plan().affected.at(rec.report().redo_count);
            const auto released = rec.redo_next(*engine_, now_);
            e.detail = "redo";
            e.txns = {t};
            e.tuples = engine_->txn(t).writes;
            emit(std::move(e));
            signal(idx, released);
            if (rec.redo_pending()) {
                push(now_ + config_.redo_step_ticks, Priority::RecoveryStep, idx);
            } else {
                finish();
            }
            break;
        }
        case Phase::Waiting:
        case Phase::Done:
            break;
    }
}

std::vector<RecoveryReport> Simulator::recovery_reports() const {
    std::vector<RecoveryReport> out;
    out.reserve(recoveries_.size());
    for (const auto& r : recoveries_) out.push_back(r.recovery->report());
    return out;
}

}  // namespace pims
