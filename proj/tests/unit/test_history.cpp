#include <doctest.h>

#include <random>

#include "../support/oracles.hpp"
#include "pims/history.hpp"

using namespace pims;
using HE = HistoryEvent;

namespace {

// t1: w[o1] w[o2]; t2: r[o2]; t3: r[o1] w[o3]; t4: r[o3]
std::vector<HE> h1() {
    return {HE::write(1, 1, 1), HE::write(1, 2, 1), HE::commit(1, 1, 1), HE::read(2, 2, 2), HE::commit(2, 2, 2),
            HE::read(3, 1, 3),  HE::write(3, 3, 3), HE::commit(3, 3, 3), HE::read(4, 3, 4), HE::commit(4, 4, 4)};
}

std::vector<HE> random_history(std::uint64_t seed, std::size_t txns, std::size_t tuples) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, tuples - 1);
    std::uniform_int_distribution<int> nops(1, 4);
    std::bernoulli_distribution coin(0.5);
    std::vector<HE> h;
    for (TxnId t = 0; t < txns; ++t) {
        const int k = nops(rng);
        for (int i = 0; i < k; ++i) {
            const auto o = static_cast<TupleId>(pick(rng));
            h.push_back(coin(rng) ? HE::read(t, o, t) : HE::write(t, o, t));
        }
        h.push_back(HE::commit(t, t, t + 1));
    }
    return h;
}

}  // namespace

TEST_CASE("direct dependency on the four-transaction history") {
    const auto h = h1();
    CHECK(direct_dependency(h, 1, 2));
    CHECK(direct_dependency(h, 1, 3));
    CHECK(direct_dependency(h, 3, 4));
    CHECK_FALSE(direct_dependency(h, 2, 3));
    CHECK_FALSE(direct_dependency(h, 2, 1));
}

TEST_CASE("disjoint read and write sets do not depend") {
    std::vector<HE> h{HE::write(1, 1), HE::commit(1, 0, 1), HE::read(2, 2), HE::commit(2, 0, 2)};
    CHECK_FALSE(direct_dependency(h, 1, 2));
}

TEST_CASE("an intermediate writer hides the earlier one") {
    std::vector<HE> h{HE::write(1, 5, 1), HE::commit(1, 1, 1), HE::write(3, 5, 2), HE::commit(3, 2, 2),
                      HE::read(4, 5, 3),  HE::commit(4, 3, 3)};
    CHECK(direct_dependency(h, 1, 4) == oracle::depends(h, 1, 4));
    CHECK_FALSE(direct_dependency(h, 1, 4));
    CHECK(direct_dependency(h, 3, 4));
}

TEST_CASE("dependency errors") {
    std::vector<HE> h{HE::write(1, 1), HE::commit(1), HE::read(2, 1), HE::abort(2)};
    CHECK_THROWS_AS(direct_dependency(h, 1, 9), Error);
    try {
        direct_dependency(h, 1, 2);
        FAIL("expected NotCommitted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotCommitted);
    }
    std::vector<HE> open{HE::write(1, 1)};
    try {
        build_precedence_graph(open);
        FAIL("expected IncompleteHistory");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IncompleteHistory);
    }
}

TEST_CASE("precedence graph of the four-transaction history") {
    const auto pg = build_precedence_graph(h1());
    CHECK(pg.nodes == std::vector<TxnId>{1, 2, 3, 4});
    CHECK(pg.edges == std::vector<std::pair<TxnId, TxnId>>{{1, 2}, {1, 3}, {3, 4}});
}

TEST_CASE("single transaction history has one node and no edges") {
    std::vector<HE> h{HE::write(7, 1), HE::read(7, 1), HE::commit(7)};
    const auto pg = build_precedence_graph(h);
    CHECK(pg.nodes == std::vector<TxnId>{7});
    CHECK(pg.edges.empty());
}

TEST_CASE("precedence graph matches pairwise scan on random histories") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const auto h = random_history(seed, 10, 6);
        const auto pg = build_precedence_graph(h);
        const auto expect = oracle::pg_edges(h);
        CHECK(std::set<std::pair<TxnId, TxnId>>(pg.edges.begin(), pg.edges.end()) == expect);
    }
}

TEST_CASE("affected closure") {
    const auto pg = build_precedence_graph(h1());
    CHECK(affected_closure(pg, {1}) == std::set<TxnId>{2, 3, 4});
    CHECK(affected_closure(pg, {4}).empty());
    CHECK_THROWS_AS(affected_closure(pg, {42}), Error);

    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto h = random_history(seed, 12, 5);
        const auto g = build_precedence_graph(h);
        std::set<std::pair<TxnId, TxnId>> edges(g.edges.begin(), g.edges.end());
        const std::set<TxnId> mal{static_cast<TxnId>(seed % 12), static_cast<TxnId>((seed * 7) % 12)};
        const auto got = affected_closure(g, mal);
        CHECK(got == oracle::reach(edges, mal));
        std::set<TxnId> uni;
        for (TxnId m : mal) {
            auto part = affected_closure(g, {m});
            uni.insert(part.begin(), part.end());
        }
        for (TxnId m : mal) uni.erase(m);
        CHECK(got == uni);
    }
}
