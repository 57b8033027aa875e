#include <doctest.h>

#include <random>

#include <nlohmann/json.hpp>

#include "../support/builders.hpp"
#include "../support/oracles.hpp"
#include "pims/partition.hpp"
#include "pims/workload.hpp"

using namespace pims;

namespace {

std::set<std::pair<Constraint, std::size_t>> as_set(const std::vector<ConstraintViolation>& v) {
    std::set<std::pair<Constraint, std::size_t>> out;
    for (const auto& x : v) out.emplace(x.constraint, x.index);
    return out;
}

std::vector<TransactionSpec> random_tiny(std::mt19937_64& rng, std::size_t m, std::size_t n) {
    std::uniform_int_distribution<std::size_t> size(1, 3);
    std::uniform_int_distribution<TupleId> pick(0, static_cast<TupleId>(n - 1));
    std::vector<TransactionSpec> w;
    for (std::size_t i = 0; i < m; ++i) {
        std::set<TupleId> s;
        const auto want = size(rng);
        while (s.size() < want) s.insert(pick(rng));
        w.push_back(build::txn(static_cast<TxnId>(i), {s.begin(), s.end()}));
    }
    return w;
}

}  // namespace

TEST_CASE("single IB holding everything is valid with no boundary") {
    const auto w = build::independent(5);
    const auto a = derive_assignment(w, 10, 1, std::vector<IbIndex>(5, 0));
    CHECK(validate(a, w).empty());
    CHECK(std::none_of(a.boundary.begin(), a.boundary.end(), [](bool b) { return b; }));
    const auto q = quality(a, w);
    CHECK(q.f1_weighted == 0);
    CHECK(q.fairness == doctest::Approx(1.0));
}

TEST_CASE("txn placed outside the IB of one of its tuples breaks containment") {
    std::vector<TransactionSpec> w{build::txn(0, {1, 2}), build::txn(1, {2, 3})};
    auto a = derive_assignment(w, 4, 2, {0, 1});
    // force tuple 2 to live only in IB 1 while txn 0 sits in IB 0
    a.tuple_ibs[2] = {1};
    a.boundary[2] = false;
    const auto v = as_set(validate(a, w));
    CHECK(v.count({Constraint::C3, 0}) == 1);
}

TEST_CASE("validate agrees with brute-force evaluation on perturbed assignments") {
    std::mt19937_64 rng(7);
    for (int round = 0; round < 200; ++round) {
        const auto w = random_tiny(rng, 6, 8);
        auto a = derive_assignment(w, 8, 3, {0, 1, 2, 0, 1, 2});
        REQUIRE(validate(a, w).empty());
        std::uniform_int_distribution<int> what(0, 4);
        std::uniform_int_distribution<std::size_t> tup(0, 7);
        std::uniform_int_distribution<IbIndex> ib(0, 3);  // 3 is out of range on purpose
        for (int p = 0; p < 2; ++p) {
            switch (what(rng)) {
                case 0: a.boundary[tup(rng)] = !a.boundary[tup(rng)]; break;
                case 1: a.txn_ib[tup(rng) % 6] = ib(rng); break;
                case 2: a.tuple_ibs[tup(rng)] = {ib(rng)}; break;
                case 3: a.tuple_ibs[tup(rng)].clear(); break;
                default: a.tuple_ibs[tup(rng)] = {2, 1}; break;
            }
        }
        CHECK(as_set(validate(a, w)) == oracle::violations(a, w));
    }
}

TEST_CASE("validate rejects wrong dimensions") {
    const auto w = build::independent(2);
    auto a = derive_assignment(w, 4, 1, {0, 0});
    a.txn_ib.pop_back();
    CHECK_THROWS_AS(validate(a, w), Error);
}

TEST_CASE("quality arithmetic") {
    SUBCASE("one tuple in two IBs") {
        std::vector<TransactionSpec> w{build::txn(0, {0, 1}), build::txn(1, {1, 2})};
        const auto a = derive_assignment(w, 3, 2, {0, 1});
        const auto q = quality(a, w);
        CHECK(q.f1_weighted == 1);
        CHECK(q.boundary_tuples == std::vector<TupleId>{1});
    }
    SUBCASE("Jain index of (8, 2)") {
        const std::vector<std::size_t> sizes{8, 2};
        CHECK(jain_fairness(sizes) == doctest::Approx(100.0 / 136.0));
        CHECK(jain_fairness(sizes) == doctest::Approx(oracle::jain({8, 2})));
        const std::vector<std::size_t> zero{0, 0, 0};
        CHECK(jain_fairness(zero) == 1.0);
    }
    SUBCASE("pairwise imbalance") {
        const std::vector<std::size_t> sizes{3, 1, 1};
        CHECK(pairwise_imbalance(sizes) == doctest::Approx(std::sqrt(8.0)));
    }
}

TEST_CASE("BFA hand example") {
    // A={o0,o1}, B={o1,o2}, C={o3,o4}
    std::vector<TransactionSpec> w{build::txn(0, {0, 1}), build::txn(1, {1, 2}), build::txn(2, {3, 4})};
    const auto a = bfa_assign(w, 5, 2);
    CHECK(a.txn_ib == std::vector<IbIndex>{1, 1, 0});
    CHECK(validate(a, w).empty());
    const auto q = quality(a, w);
    CHECK(q.boundary_tuples.empty());
    CHECK(q.f1_weighted == 0);
}

TEST_CASE("k = 1 places everything together") {
    const auto w = build::independent(6);
    for (auto s : {Strategy::BFA, Strategy::BA, Strategy::RA}) {
        const auto a = assign(s, w, 12, 1, 3);
        CHECK(std::all_of(a.txn_ib.begin(), a.txn_ib.end(), [](IbIndex i) { return i == 0; }));
        CHECK(quality(a, w).boundary_tuples.empty());
    }
    CHECK(ra_assign(w, 12, 1, 9).txn_ib == bfa_assign(w, 12, 1).txn_ib);
}

TEST_CASE("BA balances independent transactions") {
    const auto four = build::independent(4);
    auto a = ba_assign(four, 8, 2);
    CHECK(a.ib_txn_counts() == std::vector<std::size_t>{2, 2});
    CHECK(quality(a, four).fairness == doctest::Approx(1.0));

    const auto nine = build::independent(9);
    a = ba_assign(nine, 18, 3);
    CHECK(a.ib_txn_counts() == std::vector<std::size_t>{3, 3, 3});
}

TEST_CASE("SA concentrates about 80% of transactions in the hot IBs") {
    const auto w = build::independent(1000);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto a = sa_assign(w, 2000, 10, seed);
        const auto counts = a.ib_txn_counts();
        const double hot = static_cast<double>(counts[0] + counts[1]) / 1000.0;
        CHECK(hot >= 0.75);
        CHECK(hot <= 0.85);
    }
    CHECK_THROWS_AS(sa_assign(w, 2000, 4, 1), Error);
}

TEST_CASE("heuristics always produce valid assignments") {
    WorkloadSpec spec;
    spec.m = 300;
    spec.n = 5000;
    spec.group_size = 30;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        spec.seed = seed;
        const auto wl = generate(spec);
        for (auto s : {Strategy::BFA, Strategy::BA, Strategy::RA, Strategy::SA}) {
            const auto a = assign(s, wl.txns, spec.n, 10, seed);
            CHECK(validate(a, wl.txns).empty());
        }
        const auto bfa = quality(bfa_assign(wl.txns, spec.n, 10), wl.txns);
        const auto ba = quality(ba_assign(wl.txns, spec.n, 10), wl.txns);
        const auto sa = quality(sa_assign(wl.txns, spec.n, 10, seed), wl.txns);
        CHECK(ba.fairness >= sa.fairness);
        CHECK(bfa.f1_weighted <= quality(ra_assign(wl.txns, spec.n, 10, seed), wl.txns).f1_weighted);
    }
}

TEST_CASE("exact solver") {
    SUBCASE("independent transactions split evenly") {
        const auto w = build::independent(4);
        const auto a = exact_solve(w, 8, 2);
        CHECK(quality(a, w).f1_weighted == 0);
        CHECK(a.ib_txn_counts() == std::vector<std::size_t>{2, 2});
    }
    SUBCASE("two overlapping transactions with k = 2") {
        // Co-locating leaves IB 1 empty, which the non-empty constraint forbids,
        // so the only feasible maps split the pair across the shared tuple.
        std::vector<TransactionSpec> w{build::txn(0, {0, 1}), build::txn(1, {1, 2})};
        const auto a = exact_solve(w, 3, 2);
        CHECK(validate(a, w).empty());
        CHECK(ibdp_objective(a) == doctest::Approx(1.0));
        CHECK(oracle::objective(a) == doctest::Approx(1.0));
    }
    SUBCASE("preconditions") {
        const auto w = build::independent(2);
        CHECK_THROWS_AS(exact_solve(w, 4, 3), Error);
        const auto big = build::independent(25);
        try {
            exact_solve(big, 50, 2);
            FAIL("expected BudgetExceeded");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::BudgetExceeded);
        }
    }
    SUBCASE("no heuristic beats enumeration") {
        std::mt19937_64 rng(11);
        for (int round = 0; round < 30; ++round) {
            const auto w = random_tiny(rng, 7, 9);
            const auto ex = exact_solve(w, 9, 3);
            CHECK(validate(ex, w).empty());
            const double best = ibdp_objective(ex);
            for (auto s : {Strategy::BFA, Strategy::BA, Strategy::RA}) {
                const auto h = assign(s, w, 9, 3, static_cast<std::uint64_t>(round));
                if (!validate(h, w).empty()) continue;
                CHECK(ibdp_objective(h) >= best - 1e-9);
            }
        }
    }
}

TEST_CASE("assignment JSON round trip") {
    const auto w = build::independent(6);
    const auto a = ba_assign(w, 12, 3);
    const auto back = assignment_from_json(assignment_to_json(a), w);
    CHECK(back.txn_ib == a.txn_ib);
    CHECK(back.tuple_ibs == a.tuple_ibs);
    CHECK(back.boundary == a.boundary);
    CHECK(back.access == a.access);
    CHECK(strategy_from_string("bfa") == Strategy::BFA);
    CHECK_THROWS_AS(strategy_from_string("nope"), Error);
}
