#include <doctest.h>

#include "../support/builders.hpp"
#include "../support/gold.hpp"
#include "pims/imr.hpp"

using namespace pims;

namespace {

Engine make_engine(std::vector<TransactionSpec> txns, std::size_t n, std::uint32_t k, std::vector<IbIndex> txn_ib,
                   Cents initial = 1000) {
    auto a = derive_assignment(txns, n, k, std::move(txn_ib));
    return Engine(std::move(txns), n, initial, std::move(a), EngineOptions{false, 0});
}

}  // namespace

TEST_CASE("response scope") {
    // m writes o0 in IB 0; txn 1 updates o4,o5 in IB 0; txn 2 updates o8,o9 in IB 1
    std::vector<TransactionSpec> txns{build::malicious(0, {0}, 300), build::txn(1, {4, 5}), build::txn(2, {8, 9})};
    SUBCASE("no commits after the attack") {
        auto e = make_engine(txns, 10, 2, {0, 0, 1});
        e.admit(0, 1);
        const auto r = respond(e, 0, 11);
        CHECK(r.suspected == std::set<TupleId>{0});
    }
    SUBCASE("other IB stays out, same IB is suspected then cleared") {
        auto e = make_engine(txns, 10, 2, {0, 0, 1});
        e.admit(0, 1);
        e.admit(1, 2);
        e.admit(2, 3);
        const auto r = respond(e, 0, 11);
        CHECK(r.suspected == std::set<TupleId>{0, 4, 5});
        CHECK_FALSE(e.ctt().contains(9));
        CHECK(e.ctt().find(4)->status == CttStatus::Suspected);
        const auto rep = recover(e, r, 12);
        CHECK(rep.affected.empty());
        CHECK(e.ctt().empty());
        CHECK(e.store().balances[0] == 1000);
    }
    SUBCASE("temporal scope ignores IBs") {
        auto e = make_engine(txns, 10, 2, {0, 0, 1});
        e.admit(0, 1);
        e.admit(2, 3);
        const auto r = respond(e, 0, 11, ResponseScope::Temporal);
        CHECK(r.suspected == std::set<TupleId>{0, 8, 9});
    }
}

TEST_CASE("two-transaction recovery equals running only the benign transfer") {
    // X = o0 starts at 10000; the attack adds 5000; the transfer then moves 10% of X to Y.
    // (10% is the largest transfer fraction the transaction model allows.)
    std::vector<TransactionSpec> txns{build::malicious(0, {0}, 5000),
                                      build::txn(1, {0, 1}, TxnKind::Distribute, 1000)};
    auto e = make_engine(txns, 2, 1, {0, 0}, 10000);
    e.admit(0, 1);
    e.admit(1, 2);
    CHECK(e.store().balances == std::vector<Cents>{13500, 11500});
    const auto rep = recover(e, respond(e, 0, 5), 6);
    CHECK(rep.affected == std::vector<TxnId>{1});
    CHECK(rep.undo_count == 2);
    CHECK(rep.redo_count == 1);
    const auto expect = oracle::serial_replay(txns, {1}, 2, 10000);
    CHECK(expect == std::vector<Cents>{9000, 11000});
    CHECK(e.store().balances == expect);
    CHECK(e.ctt().empty());
}

TEST_CASE("attack without dependents restores the pre-attack values") {
    std::vector<TransactionSpec> txns{build::txn(0, {0, 1}), build::malicious(1, {0, 1}, 99), build::txn(2, {5, 6})};
    auto e = make_engine(txns, 7, 1, {0, 0, 0});
    e.admit(0, 1);
    const auto before = e.store().balances;
    e.admit(1, 2);
    e.admit(2, 3);
    const auto rep = recover(e, respond(e, 1, 4), 4);
    CHECK(rep.affected.empty());
    CHECK(e.store().balances[0] == before[0]);
    CHECK(e.store().balances[1] == before[1]);
}

TEST_CASE("fresh blind write is excluded from undo and redo") {
    std::vector<TransactionSpec> txns{build::malicious(0, {0, 1}, 400), build::blind(1, {0}, 777)};
    auto e = make_engine(txns, 2, 1, {0, 0});
    e.admit(0, 1);
    const auto resp = respond(e, 0, 2);
    CHECK(e.admit(1, 3).status == AdmissionStatus::Executed);
    const auto plan = analyze(e, 0);
    CHECK(plan.corrupted == std::set<TupleId>{1});
    const auto rep = recover(e, resp, 4);
    CHECK(rep.undo_count == 1);
    CHECK(e.store().balances == std::vector<Cents>{777, 1000});
    CHECK(e.ctt().empty());
}

TEST_CASE("analysis rejects benign transactions") {
    std::vector<TransactionSpec> txns{build::txn(0, {0, 1})};
    auto e = make_engine(txns, 2, 1, {0});
    e.admit(0, 1);
    CHECK_THROWS_AS(analyze(e, 0), Error);
}

TEST_CASE("coordination follows IB overlap in detection order") {
    std::vector<ResponseRecord> rs(3);
    rs[0].spanned_ibs = {1};
    rs[1].spanned_ibs = {2};
    rs[2].spanned_ibs = {1, 2};
    const auto waits = coordinate(rs);
    CHECK(waits[0].empty());
    CHECK(waits[1].empty());
    CHECK(waits[2] == std::vector<std::size_t>{0, 1});

    RecoveryCoordinator c;
    for (const auto& r : rs) c.enqueue(r.spanned_ibs);
    CHECK(c.runnable() == std::vector<std::size_t>{0, 1});
    c.mark_started(0);
    c.mark_started(1);
    c.complete(0);
    CHECK_FALSE(c.ready(2));
    c.complete(1);
    CHECK(c.runnable() == std::vector<std::size_t>{2});

    RecoveryCoordinator same;
    same.enqueue({3});
    same.enqueue({3});
    CHECK(same.runnable() == std::vector<std::size_t>{0});
}

TEST_CASE("concurrent recoveries in disjoint IBs reach the serial result") {
    // two independent attack chains in different IBs
    std::vector<TransactionSpec> txns{build::malicious(0, {0}, 100), build::malicious(1, {5}, 200),
                                      build::txn(2, {0, 1}), build::txn(3, {5, 6}), build::txn(4, {1, 2}),
                                      build::txn(5, {6, 7})};
    Workload w;
    w.spec.m = txns.size();
    w.spec.n = 10;
    w.spec.initial_balance = 1000;
    w.txns = txns;
    w.malicious_ids = {0, 1};
    for (Tick delta : {0, 3, 40}) {
        SimConfig cfg;
        cfg.strategy = SimStrategy::BFA;
        cfg.k = 2;
        cfg.delta = delta;
        cfg.lambda = 0.5;
        const auto g = oracle::gold_check(w, cfg);
        CHECK_MESSAGE(g.ok(), g.detail);
        CHECK(g.recoveries == 2);
    }
}

TEST_CASE("simulated recoveries match the serial oracle on generated workloads") {
    WorkloadSpec spec;
    spec.m = 150;
    spec.n = 1500;
    spec.pi = 0.05;
    spec.group_size = 25;
    std::size_t runs = 0;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        spec.seed = seed;
        const auto w = generate(spec);
        for (auto s : {SimStrategy::BFA, SimStrategy::BA, SimStrategy::OneIB, SimStrategy::ITDB}) {
            for (Tick delta : {0, 10, 50}) {
                SimConfig cfg;
                cfg.strategy = s;
                cfg.k = 5;
                cfg.delta = delta;
                cfg.seed = seed;
                const auto g = oracle::gold_check(w, cfg);
                CHECK_MESSAGE(g.ok(), "seed " << seed << " " << to_string(s) << " delta " << delta << ": "
                                              << g.detail);
                ++runs;
            }
        }
    }
    CHECK(runs == 72);
}
