#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pims/engine.hpp"
#include "pims/imr.hpp"
#include "pims/simulator.hpp"
#include "pims/workload.hpp"

namespace pims {

/// Per-run metrics, derived from the event trace alone.
struct SimReport {
    std::size_t affected_count = 0;  // sum of |AT| over recoveries
    std::size_t blocked_count = 0;   // suspension episodes
    std::optional<double> mean_recovery_ticks;  // detection to recovery done
    std::optional<double> mean_response_ticks;  // detection to damage assessment
    double throughput = 0.0;                    // commits per 1000 ticks
    std::size_t boundary_tuples = 0;
    double fairness = 1.0;
    std::size_t commits = 0;
    std::size_t detections = 0;
    std::map<std::string, std::size_t> histogram;  // events per kind
};

SimReport report_from_trace(std::span<const TraceEvent> trace);
nlohmann::json sim_report_to_json(const SimReport& report);

nlohmann::json config_to_json(const SimConfig& config);
SimConfig config_from_json(const nlohmann::json& doc, SimConfig base = {});

struct RunResult {
    SimReport report;
    std::vector<TraceEvent> trace;
    std::vector<RecoveryReport> recoveries;
    Store final_store;
    std::size_t cross_ib_reads = 0;
    std::size_t stuck = 0;
};

/// Simulates `workload` to completion. Uses `assignment` when given,
/// otherwise builds one from `config.strategy`.
RunResult run(const Workload& workload, const SimConfig& config, const IBAssignment* assignment = nullptr);

struct GridCell {
    std::size_t run_id = 0;
    std::uint64_t seed = 0;
    SimStrategy strategy = SimStrategy::BFA;
    std::uint32_t k = 1;
    double pi = 0.0;
    Tick delta = 0;
    double lambda = 1.0;
};

struct ExperimentGrid {
    std::vector<std::uint32_t> k{10};
    std::vector<double> pi{0.05};
    std::vector<Tick> delta{100};
    std::vector<double> lambda{1.0};
    std::vector<SimStrategy> strategies{SimStrategy::BFA};
    std::vector<std::uint64_t> seeds{1};
    WorkloadSpec workload;  // m, n, beta, ... shared by every cell
    SimConfig config;       // remaining simulation knobs

    void check() const;
    /// Cartesian product in the order strategy, k, pi, delta, lambda, seed.
    std::vector<GridCell> cells() const;
};

ExperimentGrid grid_from_json(const nlohmann::json& doc);

struct SweepRow {
    GridCell cell;
    SimReport report;
};

struct SweepFailure {
    GridCell cell;
    std::string message;
};

struct SweepResult {
    std::vector<SweepRow> rows;  // run_id order
    std::vector<SweepFailure> failures;
};

/// Runs every cell on `workers` threads (0 = hardware concurrency).
SweepResult sweep(const ExperimentGrid& grid, unsigned workers = 0);

inline constexpr const char* kCsvHeader =
    "run_id,seed,strategy,k,pi,delta,lambda,affected,blocked,mean_recovery,mean_response,boundary,fairness";

void write_csv(std::ostream& out, const SweepResult& result);

/// Writes the CSV, then throws PartialFailure naming the failed cells if any.
void sweep_to_csv(const ExperimentGrid& grid, std::ostream& out, unsigned workers = 0);

}  // namespace pims
