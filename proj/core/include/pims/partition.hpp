#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pims/transaction.hpp"

namespace pims {

/// Transaction-to-IB placement plus the tuple-side view derived from it.
///
/// Transactions are addressed by their position in the workload, tuples by id.
struct IBAssignment {
    std::uint32_t k = 1;
    std::vector<std::vector<IbIndex>> tuple_ibs;  // sorted IB set per tuple
    std::vector<IbIndex> txn_ib;
    std::vector<bool> boundary;
    std::vector<std::vector<std::size_t>> access;  // accessing txn positions per tuple

    std::size_t tuple_count() const noexcept { return tuple_ibs.size(); }
    std::size_t txn_count() const noexcept { return txn_ib.size(); }

    /// IBs containing any tuple the transaction touches.
    std::vector<IbIndex> spanned_ibs(const TransactionSpec& txn) const;

    std::vector<std::size_t> ib_txn_counts() const;
    std::vector<std::size_t> ib_tuple_counts() const;
};

/// Places each tuple in exactly the IBs of the transactions touching it.
IBAssignment derive_assignment(std::span<const TransactionSpec> workload, std::size_t tuple_count, std::uint32_t k,
                               std::vector<IbIndex> txn_ib);

enum class Constraint { C1, C2, C3, C4, C5, C6 };

std::string_view to_string(Constraint c);

struct ConstraintViolation {
    Constraint constraint;
    std::size_t index;  // tuple id for C1/C2, txn position for C3/C4, IB for C5
    std::optional<IbIndex> ib;
    std::string message;
};

std::vector<ConstraintViolation> validate(const IBAssignment& assignment, std::span<const TransactionSpec> workload);

struct PartitionQuality {
    std::int64_t f1_simple = 0;
    std::int64_t f1_weighted = 0;
    double f2_imbalance = 0.0;        // pairwise differences of per-IB transaction counts
    double f2_tuple_imbalance = 0.0;  // same over per-IB tuple counts
    double fairness = 1.0;            // Jain index over per-IB transaction counts
    std::vector<TupleId> boundary_tuples;
};

PartitionQuality quality(const IBAssignment& assignment, std::span<const TransactionSpec> workload);

/// sqrt(sum_{i<j} (s_i - s_j)^2)
double pairwise_imbalance(std::span<const std::size_t> sizes);

/// (sum s)^2 / (k * sum s^2); 1 when every size is zero.
double jain_fairness(std::span<const std::size_t> sizes);

/// f1_weighted + f2_weight * f2 over tuple counts.
double ibdp_objective(const IBAssignment& assignment, double f2_weight = 1.0);

enum class Strategy { BFA, BA, RA, SA, Exact };

std::string_view to_string(Strategy s);
Strategy strategy_from_string(std::string_view name);

IBAssignment bfa_assign(std::span<const TransactionSpec> workload, std::size_t tuple_count, std::uint32_t k,
                        std::uint64_t seed = 0);
IBAssignment ba_assign(std::span<const TransactionSpec> workload, std::size_t tuple_count, std::uint32_t k,
                       std::uint64_t seed = 0);
IBAssignment ra_assign(std::span<const TransactionSpec> workload, std::size_t tuple_count, std::uint32_t k,
                       std::uint64_t seed);
IBAssignment sa_assign(std::span<const TransactionSpec> workload, std::size_t tuple_count, std::uint32_t k,
                       std::uint64_t seed);

struct ExactOptions {
    double f2_weight = 1.0;
    std::uint64_t budget = 1'000'000;
};

/// Enumerates every transaction-to-IB map; returns the lexicographically
/// smallest minimiser of ibdp_objective among maps leaving no IB empty.
IBAssignment exact_solve(std::span<const TransactionSpec> workload, std::size_t tuple_count, std::uint32_t k,
                         const ExactOptions& options = {});

IBAssignment assign(Strategy strategy, std::span<const TransactionSpec> workload, std::size_t tuple_count,
                    std::uint32_t k, std::uint64_t seed);

nlohmann::json assignment_to_json(const IBAssignment& assignment);

/// Parses {k, txn_ib, tuple_ibs, boundary}; `access` is rebuilt from `workload`.
IBAssignment assignment_from_json(const nlohmann::json& doc, std::span<const TransactionSpec> workload);

}  // namespace pims
