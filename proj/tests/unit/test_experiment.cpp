#include <doctest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "pims/experiment.hpp"

using namespace pims;

namespace {

ExperimentGrid small_grid() {
    ExperimentGrid g;
    g.workload.m = 300;
    g.workload.n = 6000;
    g.workload.group_size = 30;
    g.k = {5};
    g.pi = {0.05};
    g.delta = {20};
    g.lambda = {1.0};
    g.seeds = {1};
    return g;
}

}  // namespace

TEST_CASE("report is recomputed from the trace") {
    std::vector<TraceEvent> t;
    TraceEvent setup;
    setup.kind = TraceKind::Setup;
    setup.boundary = 4;
    setup.fairness = 0.9;
    t.push_back(setup);
    auto ev = [](Tick tick, TraceKind k, std::optional<TxnId> txn, std::string detail = "",
                 std::vector<TxnId> txns = {}) {
        TraceEvent e;
        e.tick = tick;
        e.kind = k;
        e.txn = txn;
        e.detail = std::move(detail);
        e.txns = std::move(txns);
        return e;
    };
    t.push_back(ev(1, TraceKind::Commit, 0));
    t.push_back(ev(2, TraceKind::Suspend, 1, "ctt"));
    t.push_back(ev(3, TraceKind::Suspend, 1, "ib_lock"));
    t.push_back(ev(10, TraceKind::Detection, 0));
    t.push_back(ev(14, TraceKind::RecoveryPhaseDone, 0, "assessment", {1, 2, 3}));
    t.push_back(ev(19, TraceKind::RecoveryPhaseDone, 0, "done"));
    t.push_back(ev(19, TraceKind::Commit, 1));
    const auto r = report_from_trace(t);
    CHECK(r.affected_count == 3);
    CHECK(r.blocked_count == 2);
    CHECK(r.mean_response_ticks == doctest::Approx(4.0));
    CHECK(r.mean_recovery_ticks == doctest::Approx(9.0));
    CHECK(r.boundary_tuples == 4);
    CHECK(r.fairness == doctest::Approx(0.9));
    CHECK(r.throughput == doctest::Approx(100.0));
    CHECK(r.histogram.at("Suspend") == 2);
}

TEST_CASE("no attack means no recovery activity") {
    WorkloadSpec spec;
    spec.m = 200;
    spec.n = 4000;
    spec.pi = 0.0;
    const auto w = generate(spec);
    SimConfig cfg;
    cfg.k = 5;
    const auto res = run(w, cfg);
    CHECK(res.report.affected_count == 0);
    CHECK_FALSE(res.report.mean_recovery_ticks.has_value());
    CHECK(res.report.histogram.count("ResponseDone") == 0);
    CHECK(sim_report_to_json(res.report)["mean_recovery_ticks"].is_null());
}

TEST_CASE("quiescence blocks more than the unscoped baseline") {
    WorkloadSpec spec;
    spec.m = 1000;
    spec.n = 20000;
    spec.pi = 0.1;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        spec.seed = seed;
        const auto w = generate(spec);
        SimConfig cfg;
        cfg.seed = seed;
        cfg.strategy = SimStrategy::OneIB;
        const auto one = run(w, cfg).report;
        cfg.strategy = SimStrategy::ITDB;
        const auto itdb = run(w, cfg).report;
        cfg.strategy = SimStrategy::BFA;
        const auto bfa = run(w, cfg).report;
        CHECK(one.blocked_count >= itdb.blocked_count);
        CHECK(bfa.affected_count <= one.affected_count);
    }
}

TEST_CASE("grid enumeration and sweep") {
    auto g = small_grid();
    g.k = {5, 10};
    g.seeds = {1, 2};
    g.strategies = {SimStrategy::BFA, SimStrategy::OneIB};
    const auto cells = g.cells();
    REQUIRE(cells.size() == 8);
    CHECK(cells[0].strategy == SimStrategy::BFA);
    CHECK(cells[0].k == 5);
    CHECK(cells[1].seed == 2);
    CHECK(cells[7].run_id == 7);

    std::ostringstream one;
    std::ostringstream many;
    write_csv(one, sweep(g, 1));
    write_csv(many, sweep(g, 4));
    CHECK(one.str() == many.str());
    CHECK(one.str().rfind(std::string(kCsvHeader) + "\n", 0) == 0);
}

TEST_CASE("single cell gives a single row") {
    const auto res = sweep(small_grid(), 2);
    CHECK(res.rows.size() == 1);
    CHECK(res.failures.empty());
}

TEST_CASE("failed cells are reported and the rest complete") {
    auto g = small_grid();
    g.strategies = {SimStrategy::BFA, SimStrategy::SA};
    g.k = {3};  // SA needs k >= 5
    std::ostringstream out;
    try {
        sweep_to_csv(g, out, 2);
        FAIL("expected PartialFailure");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::PartialFailure);
    }
    std::size_t lines = 0;
    for (char c : out.str()) lines += c == '\n' ? 1 : 0;
    CHECK(lines == 2);
}

TEST_CASE("config and grid JSON") {
    const auto c = config_from_json(nlohmann::json{{"delta", 7}, {"strategy", "itdb"}, {"boundary_hold", 0}});
    CHECK(c.delta == 7);
    CHECK(c.strategy == SimStrategy::ITDB);
    CHECK(config_from_json(config_to_json(c)).boundary_hold == c.boundary_hold);
    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"lambda", -1.0}}), Error);
    const auto g = grid_from_json(nlohmann::json{{"k", {5, 10}}, {"strategy", {"bfa", "ba"}}, {"seeds", {1, 2, 3}}});
    CHECK(g.cells().size() == 12);
    CHECK_THROWS_AS(grid_from_json(nlohmann::json{{"k", std::vector<int>{}}}), Error);
}
