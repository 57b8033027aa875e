#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pims/history.hpp"
#include "pims/transaction.hpp"

namespace pims {

struct WorkloadSpec {
    std::size_t m = 1000;             // transactions
    std::size_t n = 100000;           // tuples
    double beta = 0.75;               // dependency threshold: a pair depends when p > beta
    std::size_t tx_max = 3;           // max dependents per transaction
    std::size_t size_max = 6;         // max tuples per transaction
    std::size_t group_size = 50;      // transactions per dependency group
    std::uint64_t seed = 1;
    double pi = 0.0;                  // attack intensity, fraction of m
    Cents initial_balance = 1'000'000;

    std::size_t malicious_count() const;
    void check() const;

    friend bool operator==(const WorkloadSpec&, const WorkloadSpec&) = default;
};

/// Per-group pair draws, recorded before any Tx_max / slot capping.
struct GroupStats {
    std::size_t pairs = 0;
    std::size_t hits = 0;  // draws with p > beta

    friend bool operator==(const GroupStats&, const GroupStats&) = default;
};

struct Workload {
    WorkloadSpec spec;
    std::vector<TransactionSpec> txns;  // arrival order; txns[i].id == i
    PrecedenceGraph planned_pg;
    std::set<TxnId> malicious_ids;
    std::vector<GroupStats> groups;

    std::size_t tuple_count() const noexcept { return spec.n; }

    friend bool operator==(const Workload&, const Workload&) = default;
};

Workload generate(const WorkloadSpec& spec);

struct ScaleSummary {
    std::size_t edges = 0;
    std::size_t shared_tuples = 0;  // tuples touched by two or more transactions
    double mean_size = 0.0;
};

ScaleSummary scale_summary(const Workload& workload);

/// Total balance over every tuple when each starts at `initial`.
Cents initial_total(const WorkloadSpec& spec);

nlohmann::json workload_to_json(const Workload& workload);
Workload workload_from_json(const nlohmann::json& doc);

nlohmann::json spec_to_json(const WorkloadSpec& spec);
WorkloadSpec spec_from_json(const nlohmann::json& doc);

}  // namespace pims
