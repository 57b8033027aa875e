#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pims {

using TupleId = std::uint32_t;
using TxnId = std::uint32_t;
using IbIndex = std::uint32_t;
using Tick = std::int64_t;
using Cents = std::int64_t;

enum class ErrorCode {
    UnknownTransaction,
    NotCommitted,
    IncompleteHistory,
    DimensionMismatch,
    InvalidAssignment,
    TooFewTransactions,
    TooFewIBs,
    BudgetExceeded,
    InsufficientTuples,
    InvalidSpec,
    InvalidTransaction,
    SimulationComplete,
    LogGap,
    ParseError,
    ConfigError,
    PartialFailure,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

enum class TxnKind { Distribute, Collect, ManyToMany, Malicious };

std::string_view to_string(TxnKind kind);
TxnKind txn_kind_from_string(std::string_view name);

enum class OpType { Read, Write };

struct Operation {
    OpType type;
    TupleId tuple;

    friend bool operator==(const Operation&, const Operation&) = default;
};

/// Fraction of a source balance moved by a transfer, in basis points
/// (100 = 1%). Integer so that transfer amounts are bit-exact.
using BasisPoints = std::int32_t;

inline constexpr BasisPoints kMinGammaBp = 100;
inline constexpr BasisPoints kMaxGammaBp = 1000;

/// A read/write program over tuple ids.
///
/// Tuples that are read before being written are read-modify-write tuples
/// and take part in the transfer. A Malicious transaction blind-writes each
/// target to `old + tamper`. A benign blind write (a write with no earlier
/// read of the same tuple) installs `blind_value`.
struct TransactionSpec {
    TxnId id = 0;
    TxnKind kind = TxnKind::Distribute;
    std::vector<TupleId> reads;
    std::vector<TupleId> writes;
    BasisPoints gamma_bp = kMinGammaBp;
    std::vector<Operation> op_order;
    Cents tamper = 0;
    std::optional<Cents> blind_value;

    bool is_malicious() const noexcept { return kind == TxnKind::Malicious; }

    /// Sorted, de-duplicated union of reads and writes.
    std::vector<TupleId> accessed() const;

    /// Written tuples whose write is preceded in op_order by a read of the same tuple.
    std::vector<TupleId> read_modify_write() const;

    friend bool operator==(const TransactionSpec&, const TransactionSpec&) = default;
};

/// Builds the canonical read-then-write op order: for each tuple of
/// `writes`, r[o] w[o]; then any pure reads.
std::vector<Operation> rmw_op_order(const std::vector<TupleId>& reads, const std::vector<TupleId>& writes);

/// Throws InvalidTransaction when the spec breaks its structural invariants
/// (empty access set, op_order inconsistent with reads/writes, transfer
/// writes without a preceding read, malicious reads).
void check_transaction(const TransactionSpec& txn, std::size_t size_max = 0);

/// `round(balance * bp / 10000)`, halves away from zero.
Cents fraction_of(Cents balance, BasisPoints bp);

using ValueLookup = std::function<Cents(TupleId)>;

/// Post-values for every tuple in `txn.writes`, in that order, computed from
/// the pre-transaction values supplied by `value`.
std::vector<Cents> compute_writes(const TransactionSpec& txn, const ValueLookup& value);

}  // namespace pims
