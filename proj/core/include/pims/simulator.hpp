#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pims/engine.hpp"
#include "pims/imr.hpp"
#include "pims/workload.hpp"

namespace pims {

enum class TraceKind {
    Setup,
    Arrival,
    Commit,
    Suspend,
    BTRelease,
    Detection,
    ResponseDone,
    RecoveryPhaseDone,
    Signal,
};

std::string_view to_string(TraceKind k);
TraceKind trace_kind_from_string(std::string_view name);

struct TraceEvent {
    Tick tick = 0;
    TraceKind kind = TraceKind::Setup;
    std::optional<TxnId> txn;
    std::vector<TupleId> tuples;
    std::string detail;
    std::vector<TxnId> txns;
    std::optional<std::size_t> boundary;  // Setup only
    std::optional<double> fairness;       // Setup only

    friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

nlohmann::json trace_event_to_json(const TraceEvent& e);
TraceEvent trace_event_from_json(const nlohmann::json& j);
void write_trace(std::ostream& out, const std::vector<TraceEvent>& trace);  // JSON lines
std::vector<TraceEvent> read_trace(std::istream& in);

/// Builds the IB assignment the strategy calls for; single-IB modes ignore `config.k`.
IBAssignment make_assignment(const Workload& workload, const SimConfig& config);

/// Discrete-event simulation of arrivals, admission, detection and recovery.
class Simulator {
public:
    Simulator(const Workload& workload, SimConfig config);
    Simulator(const Workload& workload, IBAssignment assignment, SimConfig config);

    /// Processes every event of the next tick. Throws SimulationComplete when
    /// nothing is left.
    std::vector<TraceEvent> step();
    /// Runs to completion and returns the whole trace.
    const std::vector<TraceEvent>& run();
    bool done() const noexcept { return queue_.empty() && pending_.empty(); }

    const std::vector<TraceEvent>& trace() const noexcept { return trace_; }
    const Engine& engine() const noexcept { return *engine_; }
    const SimConfig& config() const noexcept { return config_; }
    const std::vector<Tick>& arrivals() const noexcept { return arrival_tick_; }
    std::vector<RecoveryReport> recovery_reports() const;
    std::size_t stuck_transactions() const noexcept { return suspended_.size(); }

private:
    enum class Priority : int { Detection = 0, RecoveryStep = 1, BTRelease = 2, Retry = 3, Arrival = 4 };
    struct Item {
        Tick tick;
        Priority prio;
        std::uint64_t seq;
        std::uint64_t a;  // txn, tuple or recovery index
        Tick b;           // lock expiry for BTRelease
    };
    struct Later {
        bool operator()(const Item& x, const Item& y) const;
    };
    enum class Phase { Waiting, Analysis, Undo, Redo, Done };
    struct RecoveryState {
        std::unique_ptr<Recovery> recovery;
        std::vector<IbIndex> quiesced;
        Phase phase = Phase::Waiting;
        std::size_t coord_id = 0;
    };

    void init();
    void push(Tick tick, Priority prio, std::uint64_t a, Tick b = 0);
    void emit(TraceEvent e);
    void process(const Item& item);
    void try_admit(TxnId txn, bool fresh);
    void schedule_retry();
    void on_detection(TxnId malicious);
    void start_ready_recoveries();
    void advance_recovery(std::size_t idx);
    void signal(std::size_t idx, const std::vector<TupleId>& released);

    const Workload* workload_;
    SimConfig config_;
    std::unique_ptr<Engine> engine_;
    IntrusionDetector ids_;
    RecoveryCoordinator coordinator_;
    std::vector<RecoveryState> recoveries_;

    std::priority_queue<Item, std::vector<Item>, Later> queue_;
    std::uint64_t next_seq_ = 0;
    Tick now_ = 0;
    Tick retry_scheduled_for_ = -1;
    std::vector<TraceEvent> trace_;
    std::vector<TraceEvent> pending_;  // emitted during the current step
    std::vector<Tick> arrival_tick_;
    std::map<std::uint64_t, TxnId> suspended_;  // suspension order -> txn
    std::map<TxnId, std::pair<std::uint64_t, AdmissionStatus>> suspension_;
    std::uint64_t suspend_seq_ = 0;
};

}  // namespace pims
