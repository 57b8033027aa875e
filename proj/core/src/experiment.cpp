#include "pims/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <map>
#include <ostream>
#include <thread>

#include <nlohmann/json.hpp>

namespace pims {

SimReport report_from_trace(std::span<const TraceEvent> trace) {
    SimReport r;
    std::map<TxnId, Tick> detected;
    std::vector<double> recovery;
    std::vector<double> response;
    Tick last = 0;
    for (const auto& e : trace) {
        ++r.histogram[std::string(to_string(e.kind))];
        last = std::max(last, e.tick);
        switch (e.kind) {
            case TraceKind::Setup:
                r.boundary_tuples = e.boundary.value_or(0);
                r.fairness = e.fairness.value_or(1.0);
                break;
            case TraceKind::Commit: ++r.commits; break;
            case TraceKind::Suspend: ++r.blocked_count; break;
            case TraceKind::Detection:
                ++r.detections;
                if (e.txn) detected[*e.txn] = e.tick;
                break;
            case TraceKind::RecoveryPhaseDone: {
                if (!e.txn) break;
                auto it = detected.find(*e.txn);
                if (e.detail == "assessment") {
                    r.affected_count += e.txns.size();
                    if (it != detected.end()) response.push_back(static_cast<double>(e.tick - it->second));
                } else if (e.detail == "done" && it != detected.end()) {
                    recovery.push_back(static_cast<double>(e.tick - it->second));
                }
                break;
            }
            default: break;
        }
    }
    auto mean = [](const std::vector<double>& v) -> std::optional<double> {
        if (v.empty()) return std::nullopt;
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    r.mean_recovery_ticks = mean(recovery);
    r.mean_response_ticks = mean(response);
    r.throughput = static_cast<double>(r.commits) * 1000.0 / static_cast<double>(last + 1);
    return r;
}

nlohmann::json sim_report_to_json(const SimReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    return {{"affected_count", r.affected_count},
            {"blocked_count", r.blocked_count},
            {"mean_recovery_ticks", opt(r.mean_recovery_ticks)},
            {"mean_response_ticks", opt(r.mean_response_ticks)},
            {"throughput", r.throughput},
            {"boundary_tuples", r.boundary_tuples},
            {"fairness", r.fairness},
            {"commits", r.commits},
            {"detections", r.detections},
            {"histogram", r.histogram}};
}

nlohmann::json config_to_json(const SimConfig& c) {
    nlohmann::json j = {{"delta", c.delta},
                        {"lambda", c.lambda},
                        {"k", c.k},
                        {"strategy", std::string(to_string(c.strategy))},
                        {"delayed_access", c.delayed_access},
                        {"seed", c.seed},
                        {"ids_false_positive", c.ids_false_positive},
                        {"ids_false_negative", c.ids_false_negative},
                        {"scan_rate", c.scan_rate},
                        {"undo_step_ticks", c.undo_step_ticks},
                        {"redo_step_ticks", c.redo_step_ticks}};
    if (c.boundary_hold) j["boundary_hold"] = *c.boundary_hold;
    return j;
}

SimConfig config_from_json(const nlohmann::json& doc, SimConfig c) {
    try {
        c.delta = doc.value("delta", c.delta);
        c.lambda = doc.value("lambda", c.lambda);
        c.k = doc.value("k", c.k);
        if (doc.contains("strategy")) c.strategy = sim_strategy_from_string(doc.at("strategy").get<std::string>());
        c.delayed_access = doc.value("delayed_access", c.delayed_access);
        if (doc.contains("boundary_hold")) c.boundary_hold = doc.at("boundary_hold").get<Tick>();
        c.seed = doc.value("seed", c.seed);
        c.ids_false_positive = doc.value("ids_false_positive", c.ids_false_positive);
        c.ids_false_negative = doc.value("ids_false_negative", c.ids_false_negative);
        c.scan_rate = doc.value("scan_rate", c.scan_rate);
        c.undo_step_ticks = doc.value("undo_step_ticks", c.undo_step_ticks);
        c.redo_step_ticks = doc.value("redo_step_ticks", c.redo_step_ticks);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("config: ") + e.what());
    }
    c.check();
    return c;
}

RunResult run(const Workload& workload, const SimConfig& config, const IBAssignment* assignment) {
    Simulator sim = assignment ? Simulator(workload, *assignment, config) : Simulator(workload, config);
    RunResult out;
    out.trace = sim.run();
    out.report = report_from_trace(out.trace);
    out.recoveries = sim.recovery_reports();
    out.final_store = sim.engine().store();
    out.cross_ib_reads = sim.engine().cross_ib_reads().size();
    out.stuck = sim.stuck_transactions();
    return out;
}

void ExperimentGrid::check() const {
    auto fail = [](const std::string& why) { throw Error(ErrorCode::ConfigError, "grid: " + why); };
    if (k.empty() || pi.empty() || delta.empty() || lambda.empty() || strategies.empty() || seeds.empty()) {
        fail("every axis needs at least one value");
    }
    for (double p : pi) {
        if (!(p >= 0.0 && p < 1.0)) fail("pi must be in [0, 1)");
    }
    for (auto kk : k) {
        if (kk == 0) fail("k must be positive");
    }
}

std::vector<GridCell> ExperimentGrid::cells() const {
    std::vector<GridCell> out;
    for (auto s : strategies) {
        for (auto kk : k) {
            for (double p : pi) {
                for (Tick d : delta) {
                    for (double l : lambda) {
                        for (auto seed : seeds) {
                            GridCell c;
                            c.run_id = out.size();
                            c.seed = seed;
                            c.strategy = s;
                            c.k = kk;
                            c.pi = p;
                            c.delta = d;
                            c.lambda = l;
                            out.push_back(c);
                        }
                    }
                }
            }
        }
    }
    return out;
}

ExperimentGrid grid_from_json(const nlohmann::json& doc) {
    ExperimentGrid g;
    try {
        g.k = doc.value("k", g.k);
        g.pi = doc.value("pi", g.pi);
        g.delta = doc.value("delta", g.delta);
        g.lambda = doc.value("lambda", g.lambda);
        g.seeds = doc.value("seeds", g.seeds);
        if (doc.contains("strategy")) {
            g.strategies.clear();
            for (const auto& s : doc.at("strategy")) g.strategies.push_back(sim_strategy_from_string(s.get<std::string>()));
        }
        if (doc.contains("workload")) g.workload = spec_from_json(doc.at("workload"));
        if (doc.contains("config")) g.config = config_from_json(doc.at("config"));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("grid: ") + e.what());
    }
    g.check();
    return g;
}

namespace {

SimReport run_cell(const ExperimentGrid& grid, const GridCell& cell) {
    WorkloadSpec spec = grid.workload;
    spec.seed = cell.seed;
    spec.pi = cell.pi;
    const Workload w = generate(spec);
    SimConfig cfg = grid.config;
    cfg.seed = cell.seed;
    cfg.strategy = cell.strategy;
    cfg.k = cell.k;
    cfg.delta = cell.delta;
    cfg.lambda = cell.lambda;
    return run(w, cfg).report;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

SweepResult sweep(const ExperimentGrid& grid, unsigned workers) {
    grid.check();
    const auto cells = grid.cells();
    std::vector<std::optional<SimReport>> reports(cells.size());
    std::vector<std::string> errors(cells.size());
    if (workers == 0) workers = std::max(1U, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(cells.size(), 1)));

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            try {
                reports[i] = run_cell(grid, cells[i]);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    SweepResult out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (reports[i]) {
            out.rows.push_back({cells[i], *reports[i]});
        } else {
            out.failures.push_back({cells[i], errors[i]});
        }
    }
    return out;
}

void write_csv(std::ostream& out, const SweepResult& result) {
    out << kCsvHeader << '\n';
    for (const auto& row : result.rows) {
        const auto& c = row.cell;
        const auto& r = row.report;
        const std::uint32_t k = (c.strategy == SimStrategy::OneIB || c.strategy == SimStrategy::ITDB) ? 1 : c.k;
        out << c.run_id << ',' << c.seed << ',' << to_string(c.strategy) << ',' << k << ',' << fmt(c.pi) << ','
            << c.delta << ',' << fmt(c.lambda) << ',' << r.affected_count << ',' << r.blocked_count << ','
            << (r.mean_recovery_ticks ? fmt(*r.mean_recovery_ticks) : "") << ','
            << (r.mean_response_ticks ? fmt(*r.mean_response_ticks) : "") << ',' << r.boundary_tuples << ','
            << fmt(r.fairness) << '\n';
    }
}

void sweep_to_csv(const ExperimentGrid& grid, std::ostream& out, unsigned workers) {
    const auto result = sweep(grid, workers);
    write_csv(out, result);
    if (result.failures.empty()) return;
    std::string msg = std::to_string(result.failures.size()) + " cell(s) failed:";
    for (const auto& f : result.failures) msg += " [run " + std::to_string(f.cell.run_id) + ": " + f.message + "]";
    throw Error(ErrorCode::PartialFailure, msg);
}

}  // namespace pims
