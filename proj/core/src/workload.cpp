#include "pims/workload.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace pims {

std::size_t WorkloadSpec::malicious_count() const {
    return static_cast<std::size_t>(std::floor(pi * static_cast<double>(m) + 1e-9));
}

void WorkloadSpec::check() const {
    auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidSpec, why); };
    if (m == 0) fail("m must be positive");
    if (size_max < 2) fail("size_max must be >= 2");
    if (group_size == 0 || group_size > m) fail("group_size must be in (0, m]");
    if (!(beta >= 0.0 && beta <= 1.0)) fail("beta must be in [0, 1]");
    if (!(pi >= 0.0 && pi < 1.0)) fail("pi must be in [0, 1)");
    if (initial_balance < 0) fail("initial_balance must be non-negative");
}

namespace {

std::vector<bool> place_malicious(const WorkloadSpec& spec, std::mt19937_64& rng) {
    std::vector<bool> malicious(spec.m, false);
    const std::size_t count = spec.malicious_count();
    if (count == 0) return malicious;
    const auto half = static_cast<std::int64_t>(spec.group_size / 2);
    std::uniform_int_distribution<std::int64_t> jitter(-half, half);
    const auto m = static_cast<std::int64_t>(spec.m);
    for (std::size_t i = 0; i < count; ++i) {
        const auto base = static_cast<std::int64_t>((static_cast<double>(i) + 0.5) * static_cast<double>(spec.m) /
                                                    static_cast<double>(count));
        std::int64_t pos = std::clamp<std::int64_t>(base + jitter(rng), 0, m - 1);
        while (malicious[static_cast<std::size_t>(pos)]) pos = (pos + 1) % m;
        malicious[static_cast<std::size_t>(pos)] = true;
    }
    return malicious;
}

}  // namespace

Workload generate(const WorkloadSpec& spec) {
    spec.check();
    std::mt19937_64 rng(spec.seed);
    const std::size_t m = spec.m;

    std::uniform_int_distribution<std::size_t> size_dist(2, spec.size_max);
    std::uniform_int_distribution<int> kind_dist(0, 2);
    std::uniform_int_distribution<BasisPoints> gamma_dist(kMinGammaBp, kMaxGammaBp);
    std::uniform_int_distribution<Cents> tamper_dist(1000, 100000);

    std::vector<std::size_t> sizes(m);
    std::vector<TxnKind> kinds(m);
    std::vector<BasisPoints> gammas(m);
    for (std::size_t i = 0; i < m; ++i) {
        sizes[i] = size_dist(rng);
        kinds[i] = static_cast<TxnKind>(kind_dist(rng));
        gammas[i] = gamma_dist(rng);
    }
    const auto malicious = place_malicious(spec, rng);

    Workload w;
    w.spec = spec;
    std::vector<std::size_t> out_degree(m, 0);
    std::vector<std::size_t> slots(m, 0);  // shared tuples already reserved
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t g0 = 0; g0 < m; g0 += spec.group_size) {
        const std::size_t g1 = std::min(m, g0 + spec.group_size);
        GroupStats stats;
        for (std::size_t i = g0; i < g1; ++i) {
            for (std::size_t j = i + 1; j < g1; ++j) {
                const double p = unit(rng);
                ++stats.pairs;
                if (!(p > spec.beta)) continue;
                ++stats.hits;
                if (malicious[j] || out_degree[i] >= spec.tx_max) continue;
                if (slots[i] >= sizes[i] || slots[j] >= sizes[j]) continue;
                ++out_degree[i];
                ++slots[i];
                ++slots[j];
                w.planned_pg.edges.emplace_back(static_cast<TxnId>(i), static_cast<TxnId>(j));
            }
        }
        w.groups.push_back(stats);
    }

    // One fresh tuple per planned dependency, then private tuples up to the drawn size.
    std::vector<std::vector<TupleId>> tuples(m);
    std::size_t next = 0;
    for (const auto& [i, j] : w.planned_pg.edges) {
        tuples[i].push_back(static_cast<TupleId>(next));
        tuples[j].push_back(static_cast<TupleId>(next));
        ++next;
    }
    for (std::size_t i = 0; i < m; ++i) {
        while (tuples[i].size() < sizes[i]) tuples[i].push_back(static_cast<TupleId>(next++));
        std::shuffle(tuples[i].begin(), tuples[i].end(), rng);
    }
    if (next > spec.n) {
        throw Error(ErrorCode::InsufficientTuples,
                    "workload needs " + std::to_string(next) + " tuples, n = " + std::to_string(spec.n));
    }

    w.txns.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        TransactionSpec t;
        t.id = static_cast<TxnId>(i);
        t.gamma_bp = gammas[i];
        t.writes = tuples[i];
        if (malicious[i]) {
            t.kind = TxnKind::Malicious;
            t.tamper = tamper_dist(rng);
            w.malicious_ids.insert(t.id);
        } else {
            t.kind = kinds[i];
            t.reads = tuples[i];
        }
        t.op_order = rmw_op_order(t.reads, t.writes);
        w.txns.push_back(std::move(t));
    }
    w.planned_pg.nodes.resize(m);
    for (std::size_t i = 0; i < m; ++i) w.planned_pg.nodes[i] = static_cast<TxnId>(i);
    std::sort(w.planned_pg.edges.begin(), w.planned_pg.edges.end());
    return w;
}

ScaleSummary scale_summary(const Workload& workload) {
    ScaleSummary s;
    s.edges = workload.planned_pg.edges.size();
    std::unordered_map<TupleId, std::size_t> touches;
    std::size_t total = 0;
    for (const auto& t : workload.txns) {
        const auto acc = t.accessed();
        total += acc.size();
        for (TupleId o : acc) ++touches[o];
    }
    for (const auto& [o, c] : touches) {
        if (c >= 2) ++s.shared_tuples;
    }
    if (!workload.txns.empty()) s.mean_size = static_cast<double>(total) / static_cast<double>(workload.txns.size());
    return s;
}

Cents initial_total(const WorkloadSpec& spec) { return static_cast<Cents>(spec.n) * spec.initial_balance; }

nlohmann::json spec_to_json(const WorkloadSpec& s) {
    return {{"m", s.m},           {"n", s.n},
            {"beta", s.beta},     {"tx_max", s.tx_max},
            {"size_max", s.size_max}, {"group_size", s.group_size},
            {"seed", s.seed},     {"pi", s.pi},
            {"initial_balance", s.initial_balance}};
}

WorkloadSpec spec_from_json(const nlohmann::json& doc) {
    WorkloadSpec s;
    try {
        s.m = doc.value("m", s.m);
        s.n = doc.value("n", s.n);
        s.beta = doc.value("beta", s.beta);
        s.tx_max = doc.value("tx_max", s.tx_max);
        s.size_max = doc.value("size_max", s.size_max);
        s.group_size = doc.value("group_size", s.group_size);
        s.seed = doc.value("seed", s.seed);
        s.pi = doc.value("pi", s.pi);
        s.initial_balance = doc.value("initial_balance", s.initial_balance);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("workload spec: ") + e.what());
    }
    return s;
}

nlohmann::json workload_to_json(const Workload& w) {
    nlohmann::json txns = nlohmann::json::array();
    for (const auto& t : w.txns) {
        nlohmann::json j = {{"id", t.id},
                            {"kind", std::string(to_string(t.kind))},
                            {"reads", t.reads},
                            {"writes", t.writes},
                            {"gamma", static_cast<double>(t.gamma_bp) / 10000.0},
                            {"malicious", t.is_malicious()}};
        if (t.is_malicious()) j["tamper"] = t.tamper;
        if (t.blind_value) j["blind_value"] = *t.blind_value;
        if (t.op_order != rmw_op_order(t.reads, t.writes)) {
            nlohmann::json ops = nlohmann::json::array();
            for (const auto& op : t.op_order) ops.push_back({op.type == OpType::Read ? "r" : "w", op.tuple});
            j["ops"] = std::move(ops);
        }
        txns.push_back(std::move(j));
    }
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : w.groups) groups.push_back({g.pairs, g.hits});
    return {{"spec", spec_to_json(w.spec)},
            {"txns", std::move(txns)},
            {"planned_edges", w.planned_pg.edges},
            {"groups", std::move(groups)}};
}

Workload workload_from_json(const nlohmann::json& doc) {
    Workload w;
    try {
        w.spec = spec_from_json(doc.at("spec"));
        for (const auto& j : doc.at("txns")) {
            TransactionSpec t;
            t.id = j.at("id").get<TxnId>();
            t.kind = txn_kind_from_string(j.at("kind").get<std::string>());
            t.reads = j.at("reads").get<std::vector<TupleId>>();
            t.writes = j.at("writes").get<std::vector<TupleId>>();
            t.gamma_bp = static_cast<BasisPoints>(std::lround(j.value("gamma", 0.01) * 10000.0));
            t.tamper = j.value("tamper", Cents{0});
            if (j.contains("blind_value")) t.blind_value = j.at("blind_value").get<Cents>();
            if (j.value("malicious", false) && !t.is_malicious()) {
                throw Error(ErrorCode::ParseError, "txn " + std::to_string(t.id) + " flagged malicious with benign kind");
            }
            if (j.contains("ops")) {
                for (const auto& op : j.at("ops")) {
                    t.op_order.push_back({op.at(0).get<std::string>() == "r" ? OpType::Read : OpType::Write,
                                          op.at(1).get<TupleId>()});
                }
            } else {
                t.op_order = rmw_op_order(t.reads, t.writes);
            }
            if (t.id != w.txns.size()) throw Error(ErrorCode::ParseError, "transaction ids must be 0..m-1 in order");
            if (t.is_malicious()) w.malicious_ids.insert(t.id);
            w.txns.push_back(std::move(t));
        }
        w.planned_pg.edges = doc.value("planned_edges", std::vector<std::pair<TxnId, TxnId>>{});
        if (doc.contains("groups")) {
            for (const auto& g : doc.at("groups")) w.groups.push_back({g.at(0).get<std::size_t>(), g.at(1).get<std::size_t>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("workload: ") + e.what());
    }
    w.spec.m = w.txns.size();
    for (TxnId i = 0; i < w.txns.size(); ++i) w.planned_pg.nodes.push_back(i);
    std::sort(w.planned_pg.edges.begin(), w.planned_pg.edges.end());
    for (const auto& t : w.txns) {
        check_transaction(t);
        for (TupleId o : t.accessed()) {
            if (o >= w.spec.n) throw Error(ErrorCode::ParseError, "tuple id out of range in txn " + std::to_string(t.id));
        }
    }
    return w;
}

}  // namespace pims
