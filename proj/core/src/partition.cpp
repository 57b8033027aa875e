#include "pims/partition.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

namespace pims {

namespace {

std::size_t check_tuple_bounds(std::span<const TransactionSpec> workload, std::size_t tuple_count) {
    for (const auto& t : workload) {
        for (TupleId o : t.accessed()) {
            if (o >= tuple_count) {
                throw Error(ErrorCode::DimensionMismatch,
                            "txn " + std::to_string(t.id) + " touches tuple " + std::to_string(o) + " >= n");
            }
        }
    }
    return tuple_count;
}

std::vector<std::vector<std::size_t>> build_access(std::span<const TransactionSpec> workload, std::size_t tuple_count) {
    std::vector<std::vector<std::size_t>> access(tuple_count);
    for (std::size_t pos = 0; pos < workload.size(); ++pos) {
        for (TupleId o : workload[pos].accessed()) access[o].push_back(pos);
    }
    return access;
}

void require_k(std::span<const TransactionSpec> workload, std::uint32_t k) {
    if (k == 0) throw Error(ErrorCode::InvalidSpec, "k must be >= 1");
    if (workload.size() < k) {
        throw Error(ErrorCode::TooFewTransactions,
                    std::to_string(workload.size()) + " transactions for " + std::to_string(k) + " IBs");
    }
}

// Incremental placement state shared by the greedy heuristics.
class GreedyState {
public:
    GreedyState(std::span<const TransactionSpec> workload, std::size_t tuple_count, std::uint32_t k)
        : workload_(workload), k_(k), tuple_ibs_(tuple_count), sizes_(k, 0), txn_ib_(workload.size(), 0) {}

    void place(std::size_t pos, IbIndex ib) {
        txn_ib_[pos] = ib;
        ++sizes_[ib];
        for (TupleId o : workload_[pos].accessed()) {
            auto& ibs = tuple_ibs_[o];
            auto it = std::lower_bound(ibs.begin(), ibs.end(), ib);
            if (it == ibs.end() || *it != ib) ibs.insert(it, ib);
        }
    }

    // Number of the transaction's tuples already present in each IB.
    std::vector<std::size_t> shared_counts(std::size_t pos) const {
        std::vector<std::size_t> shared(k_, 0);
        for (TupleId o : workload_[pos].accessed()) {
            for (IbIndex ib : tuple_ibs_[o]) ++shared[ib];
        }
        return shared;
    }

    IbIndex smallest() const {
        return static_cast<IbIndex>(std::min_element(sizes_.begin(), sizes_.end()) - sizes_.begin());
    }

    std::size_t size(IbIndex ib) const { return sizes_[ib]; }
    std::uint32_t k() const { return k_; }
    std::vector<IbIndex> take_txn_ib() { return std::move(txn_ib_); }

private:
    std::span<const TransactionSpec> workload_;
    std::uint32_t k_;
    std::vector<std::vector<IbIndex>> tuple_ibs_;
    std::vector<std::size_t> sizes_;
    std::vector<IbIndex> txn_ib_;
};

// Positions sorted by number of internal tuples (touched by exactly one
// transaction), descending; ties keep workload order.
std::vector<std::size_t> internal_tuple_order(std::span<const TransactionSpec> workload,
                                              const std::vector<std::vector<std::size_t>>& access) {
    std::vector<std::size_t> internal(workload.size(), 0);
    for (const auto& accessors : access) {
        if (accessors.size() == 1) ++internal[accessors.front()];
    }
    std::vector<std::size_t> order(workload.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return internal[a] > internal[b]; });
    return order;
}

enum class GreedyRule { BestFit, Balanced };

IBAssignment greedy_assign(std::span<const TransactionSpec> workload, std::size_t tuple_count, std::uint32_t k,
                           GreedyRule rule) {
    require_k(workload, k);
    check_tuple_bounds(workload, tuple_count);
    const auto access = build_access(workload, tuple_count);
    const auto order = internal_tuple_order(workload, access);

    GreedyState state(workload, tuple_count, k);
    for (std::uint32_t i = 0; i < k; ++i) state.place(order[i], i);

    for (std::size_t idx = k; idx < order.size(); ++idx) {
        const std::size_t pos = order[idx];
        const auto shared = state.shared_counts(pos);
        std::optional<IbIndex> best;
        for (IbIndex ib = 0; ib < k; ++ib) {
            if (shared[ib] == 0) continue;
            if (!best) {
                best = ib;
                continue;
            }
            const bool better = rule == GreedyRule::BestFit
                                    ? (shared[ib] > shared[*best] ||
                                       (shared[ib] == shared[*best] && state.size(ib) < state.size(*best)))
                                    : (state.size(ib) < state.size(*best) ||
                                       (state.size(ib) == state.size(*best) && shared[ib] > shared[*best]));
            if (better) best = ib;
        }
        state.place(pos, best.value_or(state.smallest()));
    }
    return derive_assignment(workload, tuple_count, k, state.take_txn_ib());
}

// Moves transactions from the largest IBs into empty ones so every IB holds a tuple.
void fill_empty_ibs(std::vector<IbIndex>& txn_ib, std::uint32_t k) {
    std::vector<std::vector<std::size_t>> members(k);
    for (std::size_t pos = 0; pos < txn_ib.size(); ++pos) members[txn_ib[pos]].push_back(pos);
    for (IbIndex e = 0; e < k; ++e) {
        if (!members[e].empty()) continue;
        auto largest = std::max_element(members.begin(), members.end(),
                                        [](const auto& a, const auto& b) { return a.size() < b.size(); });
        const std::size_t pos = largest->back();
        largest->pop_back();
        members[e].push_back(pos);
        txn_ib[pos] = e;
    }
}

}  // namespace

std::vector<IbIndex> IBAssignment::spanned_ibs(const TransactionSpec& txn) const {
    std::vector<IbIndex> out;
    for (TupleId o : txn.accessed()) {
        if (o < tuple_ibs.size()) out.insert(out.end(), tuple_ibs[o].begin(), tuple_ibs[o].end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<std::size_t> IBAssignment::ib_txn_counts() const {
    std::vector<std::size_t> counts(k, 0);
    for (IbIndex ib : txn_ib) {
        if (ib < k) ++counts[ib];
    }
    return counts;
}

std::vector<std::size_t> IBAssignment::ib_tuple_counts() const {
    std::vector<std::size_t> counts(k, 0);
    for (const auto& ibs : tuple_ibs) {
        for (IbIndex ib : ibs) {
            if (ib < k) ++counts[ib];
        }
    }
    return counts;
}

IBAssignment derive_assignment(std::span<const TransactionSpec> workload, std::size_t tuple_count, std::uint32_t k,
                               std::vector<IbIndex> txn_ib) {
    if (txn_ib.size() != workload.size()) {
        throw Error(ErrorCode::DimensionMismatch, "txn_ib has " + std::to_string(txn_ib.size()) + " rows for " +
                                                      std::to_string(workload.size()) + " transactions");
    }
    check_tuple_bounds(workload, tuple_count);
    IBAssignment a;
    a.k = k;
    a.access = build_access(workload, tuple_count);
    a.tuple_ibs.resize(tuple_count);
    a.boundary.assign(tuple_count, false);
    for (std::size_t o = 0; o < tuple_count; ++o) {
        auto& ibs = a.tuple_ibs[o];
        for (std::size_t pos : a.access[o]) ibs.push_back(txn_ib[pos]);
        std::sort(ibs.begin(), ibs.end());
        ibs.erase(std::unique(ibs.begin(), ibs.end()), ibs.end());
        a.boundary[o] = ibs.size() >= 2;
    }
    a.txn_ib = std::move(txn_ib);
    return a;
}

std::string_view to_string(Constraint c) {
    switch (c) {
    case Constraint::C1: return "c1";
    case Constraint::C2: return "c2";
    case Constraint::C3: return "c3";
    case Constraint::C4: return "c4";
    case Constraint::C5: return "c5";
    case Constraint::C6: return "c6";
    }
    return "?";
}

std::vector<ConstraintViolation> validate(const IBAssignment& a, std::span<const TransactionSpec> workload) {
    const std::size_t n = a.tuple_ibs.size();
    if (a.k == 0 || a.boundary.size() != n || a.txn_ib.size() != workload.size()) {
        throw Error(ErrorCode::DimensionMismatch, "assignment dimensions do not match the workload");
    }
    check_tuple_bounds(workload, n);

    std::vector<ConstraintViolation> out;
    for (std::size_t o = 0; o < n; ++o) {
        const auto& ibs = a.tuple_ibs[o];
        for (std::size_t i = 0; i < ibs.size(); ++i) {
            if (ibs[i] >= a.k || (i > 0 && ibs[i] <= ibs[i - 1])) {
                out.push_back({Constraint::C6, o, ibs[i], "tuple IB set is not a subset of {0..k-1}"});
                break;
            }
        }
        const bool shared = ibs.size() >= 2;
        if (shared && !a.boundary[o]) out.push_back({Constraint::C1, o, std::nullopt, "tuple in several IBs not flagged boundary"});
        if (!shared && a.boundary[o]) out.push_back({Constraint::C2, o, std::nullopt, "boundary flag on a tuple in fewer than 2 IBs"});
    }
    for (std::size_t pos = 0; pos < workload.size(); ++pos) {
        const IbIndex ib = a.txn_ib[pos];
        if (ib >= a.k) {
            out.push_back({Constraint::C4, pos, ib, "transaction not assigned to exactly one IB"});
            continue;
        }
        for (TupleId o : workload[pos].accessed()) {
            if (std::find(a.tuple_ibs[o].begin(), a.tuple_ibs[o].end(), ib) == a.tuple_ibs[o].end()) {
                out.push_back({Constraint::C3, pos, ib,
                               "tuple " + std::to_string(o) + " of the transaction is missing from its IB"});
                break;
            }
        }
    }
    const auto tuples_per_ib = a.ib_tuple_counts();
    for (IbIndex ib = 0; ib < a.k; ++ib) {
        if (tuples_per_ib[ib] == 0) out.push_back({Constraint::C5, ib, ib, "IB holds no tuple"});
    }
    return out;
}

double pairwise_imbalance(std::span<const std::size_t> sizes) {
    double sum = 0.0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        for (std::size_t j = i + 1; j < sizes.size(); ++j) {
            const double d = static_cast<double>(sizes[i]) - static_cast<double>(sizes[j]);
            sum += d * d;
        }
    }
    return std::sqrt(sum);
}

double jain_fairness(std::span<const std::size_t> sizes) {
    double total = 0.0;
    double squares = 0.0;
    for (std::size_t s : sizes) {
        total += static_cast<double>(s);
        squares += static_cast<double>(s) * static_cast<double>(s);
    }
    if (squares == 0.0) return 1.0;
    return total * total / (static_cast<double>(sizes.size()) * squares);
}

PartitionQuality quality(const IBAssignment& a, std::span<const TransactionSpec> workload) {
    const auto violations = validate(a, workload);
    if (!violations.empty()) {
        const auto& v = violations.front();
        throw Error(ErrorCode::InvalidAssignment, std::string(to_string(v.constraint)) + ": " + v.message);
    }
    PartitionQuality q;
    for (std::size_t o = 0; o < a.tuple_ibs.size(); ++o) {
        if (!a.boundary[o]) continue;
        q.boundary_tuples.push_back(static_cast<TupleId>(o));
        ++q.f1_simple;
        q.f1_weighted += static_cast<std::int64_t>(a.tuple_ibs[o].size()) - 1;
    }
    const auto txn_counts = a.ib_txn_counts();
    const auto tuple_counts = a.ib_tuple_counts();
    q.f2_imbalance = pairwise_imbalance(txn_counts);
    q.f2_tuple_imbalance = pairwise_imbalance(tuple_counts);
    q.fairness = jain_fairness(txn_counts);
    return q;
}

double ibdp_objective(const IBAssignment& a, double f2_weight) {
    std::int64_t f1 = 0;
    for (std::size_t o = 0; o < a.tuple_ibs.size(); ++o) {
        if (a.boundary[o]) f1 += static_cast<std::int64_t>(a.tuple_ibs[o].size()) - 1;
    }
    return static_cast<double>(f1) + f2_weight * pairwise_imbalance(a.ib_tuple_counts());
}

std::string_view to_string(Strategy s) {
    switch (s) {
    case Strategy::BFA: return "bfa";
    case Strategy::BA: return "ba";
    case Strategy::RA: return "ra";
    case Strategy::SA: return "sa";
    case Strategy::Exact: return "exact";
    }
    return "?";
}

Strategy strategy_from_string(std::string_view name) {
    if (name == "bfa") return Strategy::BFA;
    if (name == "ba") return Strategy::BA;
    if (name == "ra") return Strategy::RA;
    if (name == "sa") return Strategy::SA;
    if (name == "exact") return Strategy::Exact;
    throw Error(ErrorCode::ConfigError, "unknown partition strategy '" + std::string(name) + "'");
}

IBAssignment bfa_assign(std::span<const TransactionSpec> workload, std::size_t tuple_count, std::uint32_t k,
                        std::uint64_t /*seed*/) {
    return greedy_assign(workload, tuple_count, k, GreedyRule::BestFit);
}

IBAssignment ba_assign(std::span<const TransactionSpec> workload, std::size_t tuple_count, std::uint32_t k,
                       std::uint64_t /*seed*/) {
    return greedy_assign(workload, tuple_count, k, GreedyRule::Balanced);
}

IBAssignment ra_assign(std::span<const TransactionSpec> workload, std::size_t tuple_count, std::uint32_t k,
                       std::uint64_t seed) {
    require_k(workload, k);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<IbIndex> pick(0, k - 1);
    std::vector<IbIndex> txn_ib(workload.size());
    for (auto& ib : txn_ib) ib = pick(rng);
    fill_empty_ibs(txn_ib, k);
    return derive_assignment(workload, tuple_count, k, std::move(txn_ib));
}

IBAssignment sa_assign(std::span<const TransactionSpec> workload, std::size_t tuple_count, std::uint32_t k,
                       std::uint64_t seed) {
    if (k < 5) throw Error(ErrorCode::TooFewIBs, "skewed assignment needs k >= 5");
    require_k(workload, k);
    const auto hot = static_cast<IbIndex>((k + 4) / 5);  // ceil(0.2 k)
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution to_hot(0.8);
    std::uniform_int_distribution<IbIndex> pick_hot(0, hot - 1);
    std::uniform_int_distribution<IbIndex> pick_cold(hot, k - 1);
    std::vector<IbIndex> txn_ib(workload.size());
    for (auto& ib : txn_ib) ib = to_hot(rng) ? pick_hot(rng) : pick_cold(rng);
    fill_empty_ibs(txn_ib, k);
    return derive_assignment(workload, tuple_count, k, std::move(txn_ib));
}

IBAssignment exact_solve(std::span<const TransactionSpec> workload, std::size_t tuple_count, std::uint32_t k,
                         const ExactOptions& options) {
    require_k(workload, k);
    check_tuple_bounds(workload, tuple_count);
    const std::size_t m = workload.size();
    std::uint64_t space = 1;
    for (std::size_t i = 0; i < m; ++i) {
        space *= k;
        if (space > options.budget) {
            throw Error(ErrorCode::BudgetExceeded, "k^m exceeds enumeration budget " + std::to_string(options.budget));
        }
    }
    if (k > 64) throw Error(ErrorCode::BudgetExceeded, "k > 64");

    std::vector<std::vector<TupleId>> tuples(m);
    for (std::size_t pos = 0; pos < m; ++pos) tuples[pos] = workload[pos].accessed();

    std::vector<IbIndex> current(m, 0);
    std::vector<IbIndex> best;
    double best_value = 0.0;
    std::vector<std::uint64_t> mask(tuple_count);
    std::vector<std::size_t> sizes(k);

    for (std::uint64_t iter = 0; iter < space; ++iter) {
        std::fill(mask.begin(), mask.end(), 0);
        std::uint64_t used = 0;
        for (std::size_t pos = 0; pos < m; ++pos) {
            used |= std::uint64_t{1} << current[pos];
            for (TupleId o : tuples[pos]) mask[o] |= std::uint64_t{1} << current[pos];
        }
        if (std::popcount(used) == static_cast<int>(k)) {
            std::fill(sizes.begin(), sizes.end(), 0);
            std::int64_t f1 = 0;
            for (std::uint64_t bits : mask) {
                const int c = std::popcount(bits);
                if (c >= 2) f1 += c - 1;
                for (IbIndex ib = 0; ib < k; ++ib) {
                    if ((bits >> ib) & 1U) ++sizes[ib];
                }
            }
            const double value = static_cast<double>(f1) + options.f2_weight * pairwise_imbalance(sizes);
            if (best.empty() || value < best_value - 1e-9) {
                best = current;
                best_value = value;
            }
        }
        // odometer with the last transaction as least significant digit -> lexicographic order
        for (std::size_t d = m; d-- > 0;) {
            if (++current[d] < k) break;
            current[d] = 0;
        }
    }
    return derive_assignment(workload, tuple_count, k, std::move(best));
}

IBAssignment assign(Strategy strategy, std::span<const TransactionSpec> workload, std::size_t tuple_count,
                    std::uint32_t k, std::uint64_t seed) {
    switch (strategy) {
    case Strategy::BFA: return bfa_assign(workload, tuple_count, k, seed);
    case Strategy::BA: return ba_assign(workload, tuple_count, k, seed);
    case Strategy::RA: return ra_assign(workload, tuple_count, k, seed);
    case Strategy::SA: return sa_assign(workload, tuple_count, k, seed);
    case Strategy::Exact: return exact_solve(workload, tuple_count, k);
    }
    throw Error(ErrorCode::ConfigError, "unknown strategy");
}

nlohmann::json assignment_to_json(const IBAssignment& a) {
    nlohmann::json doc;
    doc["k"] = a.k;
    doc["txn_ib"] = a.txn_ib;
    doc["tuple_ibs"] = a.tuple_ibs;
    doc["boundary"] = a.boundary;
    return doc;
}

IBAssignment assignment_from_json(const nlohmann::json& doc, std::span<const TransactionSpec> workload) {
    IBAssignment a;
    try {
        a.k = doc.at("k").get<std::uint32_t>();
        a.txn_ib = doc.at("txn_ib").get<std::vector<IbIndex>>();
        a.tuple_ibs = doc.at("tuple_ibs").get<std::vector<std::vector<IbIndex>>>();
        a.boundary = doc.at("boundary").get<std::vector<bool>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("assignment: ") + e.what());
    }
    if (a.txn_ib.size() != workload.size() || a.boundary.size() != a.tuple_ibs.size()) {
        throw Error(ErrorCode::DimensionMismatch, "assignment file does not match the workload");
    }
    a.access = build_access(workload, check_tuple_bounds(workload, a.tuple_ibs.size()));
    return a;
}

}  // namespace pims
