// pims: workload generation, partitioning, simulation and sweeps.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pims/experiment.hpp"
#include "pims/partition.hpp"
#include "pims/simulator.hpp"
#include "pims/workload.hpp"

namespace {

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw pims::Error(pims::ErrorCode::ParseError, "cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw pims::Error(pims::ErrorCode::ParseError, path + ": " + e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw pims::Error(pims::ErrorCode::ConfigError, "cannot write " + path);
    out << text;
}

template <typename T>
void override_if(const std::optional<T>& v, T& target) {
    if (v) target = *v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Partition-based intrusion management simulator"};
    app.require_subcommand(1);

    // gen-workload
    auto* gen = app.add_subcommand("gen-workload", "Generate a grouped random workload");
    pims::WorkloadSpec spec;
    std::string gen_config;
    std::string gen_out;
    gen->add_option("--config", gen_config, "JSON file with WorkloadSpec fields");
    gen->add_option("--m", spec.m, "transactions");
    gen->add_option("--n", spec.n, "tuples");
    gen->add_option("--beta", spec.beta, "dependency threshold");
    gen->add_option("--tx-max", spec.tx_max, "max dependents per transaction");
    gen->add_option("--size-max", spec.size_max, "max tuples per transaction");
    gen->add_option("--group-size", spec.group_size, "transactions per group");
    gen->add_option("--pi", spec.pi, "attack intensity in [0, 1)");
    gen->add_option("--seed", spec.seed, "RNG seed");
    gen->add_option("--out", gen_out, "output file (default stdout)");

    // partition
    auto* part = app.add_subcommand("partition", "Assign transactions to intrusion boundaries");
    std::string part_workload;
    std::string part_strategy = "bfa";
    std::uint32_t part_k = 10;
    std::uint64_t part_seed = 1;
    std::string part_out;
    part->add_option("--workload", part_workload, "workload JSON")->required();
    part->add_option("--strategy", part_strategy, "bfa|ba|ra|sa|exact");
    part->add_option("--k", part_k, "number of IBs");
    part->add_option("--seed", part_seed, "seed for randomized strategies");
    part->add_option("--out", part_out, "output file (default stdout)");

    // run
    auto* runc = app.add_subcommand("run", "Simulate one workload to completion");
    std::string run_workload;
    std::string run_assignment;
    std::string run_config;
    std::optional<std::string> run_strategy;
    std::optional<std::uint32_t> run_k;
    std::optional<pims::Tick> run_delta;
    std::optional<double> run_lambda;
    std::optional<std::uint64_t> run_seed;
    std::optional<bool> run_delayed;
    std::string run_trace;
    std::string run_log;
    std::string run_recoveries;
    std::string run_out;
    runc->add_option("--workload", run_workload, "workload JSON")->required();
    runc->add_option("--assignment", run_assignment, "assignment JSON (overrides --strategy)");
    runc->add_option("--config", run_config, "JSON file with SimConfig fields");
    runc->add_option("--strategy", run_strategy, "bfa|ba|ra|sa|exact|oneib|itdb");
    runc->add_option("--k", run_k);
    runc->add_option("--delta", run_delta);
    runc->add_option("--lambda", run_lambda);
    runc->add_option("--seed", run_seed);
    runc->add_option("--delayed-access", run_delayed);
    runc->add_option("--trace", run_trace, "write the JSON-lines event trace here");
    runc->add_option("--log", run_log, "write the read/write log CSV here");
    runc->add_option("--recoveries", run_recoveries, "write recovery reports JSON here");
    runc->add_option("--out", run_out, "report JSON (default stdout)");

    // sweep
    auto* sw = app.add_subcommand("sweep", "Run an experiment grid and emit CSV");
    std::string sweep_grid;
    std::string sweep_out;
    unsigned sweep_workers = 0;
    sw->add_option("--grid", sweep_grid, "grid JSON")->required();
    sw->add_option("--out", sweep_out, "CSV file (default stdout)");
    sw->add_option("--workers", sweep_workers, "threads (0 = all cores)");

    // report
    auto* rep = app.add_subcommand("report", "Recompute a SimReport from a trace");
    std::string rep_trace;
    rep->add_option("--trace", rep_trace, "JSON-lines trace")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            if (!gen_config.empty()) {
                const auto base = pims::spec_from_json(read_json(gen_config));
                // command-line flags win over the file
                pims::WorkloadSpec def;
                auto pick = [&](auto field) {
                    if (spec.*field == def.*field) spec.*field = base.*field;
                };
                pick(&pims::WorkloadSpec::m);
                pick(&pims::WorkloadSpec::n);
                pick(&pims::WorkloadSpec::beta);
                pick(&pims::WorkloadSpec::tx_max);
                pick(&pims::WorkloadSpec::size_max);
                pick(&pims::WorkloadSpec::group_size);
                pick(&pims::WorkloadSpec::seed);
                pick(&pims::WorkloadSpec::pi);
                pick(&pims::WorkloadSpec::initial_balance);
            }
            const auto w = pims::generate(spec);
            write_text(gen_out, pims::workload_to_json(w).dump() + "\n");
        } else if (*part) {
            const auto w = pims::workload_from_json(read_json(part_workload));
            const auto a = pims::assign(pims::strategy_from_string(part_strategy), w.txns, w.tuple_count(), part_k,
                                        part_seed);
            write_text(part_out, pims::assignment_to_json(a).dump() + "\n");
        } else if (*runc) {
            const auto w = pims::workload_from_json(read_json(run_workload));
            pims::SimConfig cfg;
            if (!run_config.empty()) cfg = pims::config_from_json(read_json(run_config));
            if (run_strategy) cfg.strategy = pims::sim_strategy_from_string(*run_strategy);
            override_if(run_k, cfg.k);
            override_if(run_delta, cfg.delta);
            override_if(run_lambda, cfg.lambda);
            override_if(run_seed, cfg.seed);
            override_if(run_delayed, cfg.delayed_access);
            cfg.check();

            std::optional<pims::IBAssignment> given;
            if (!run_assignment.empty()) given = pims::assignment_from_json(read_json(run_assignment), w.txns);
            pims::Simulator sim = given ? pims::Simulator(w, *given, cfg) : pims::Simulator(w, cfg);
            const auto& trace = sim.run();
            if (!run_trace.empty()) {
                std::ofstream out(run_trace);
                pims::write_trace(out, trace);
            }
            if (!run_log.empty()) {
                std::ofstream out(run_log);
                sim.engine().log().write_csv(out);
            }
            if (!run_recoveries.empty()) {
                nlohmann::json arr = nlohmann::json::array();
                for (const auto& r : sim.recovery_reports()) arr.push_back(pims::report_to_json(r));
                write_text(run_recoveries, arr.dump(2) + "\n");
            }
            write_text(run_out, pims::sim_report_to_json(pims::report_from_trace(trace)).dump(2) + "\n");
        } else if (*sw) {
            const auto grid = pims::grid_from_json(read_json(sweep_grid));
            if (sweep_out.empty() || sweep_out == "-") {
                pims::sweep_to_csv(grid, std::cout, sweep_workers);
            } else {
                std::ofstream out(sweep_out);
                pims::sweep_to_csv(grid, out, sweep_workers);
            }
        } else if (*rep) {
            std::ifstream in(rep_trace);
            if (!in) throw pims::Error(pims::ErrorCode::ParseError, "cannot open " + rep_trace);
            const auto trace = pims::read_trace(in);
            std::cout << pims::sim_report_to_json(pims::report_from_trace(trace)).dump(2) << "\n";
        }
    } catch (const pims::Error& e) {
        std::cerr << "pims: " << pims::to_string(e.code()) << ": " << e.what() << "\n";
        return 2;
    }
    return 0;
}
