#include <sharedb/oracle.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace sharedb {

namespace {

/// primary key -> row, per dimension
std::unordered_map<std::int32_t, std::uint64_t> key_map(const ColumnarTable &dim)
{
    std::unordered_map<std::int32_t, std::uint64_t> m;
    for (std::uint64_t r = 0; r < dim.row_count; ++r) m.emplace(dim.columns[0][r], r);
    return m;
}

} // namespace

std::int64_t qat_sum(const Database &db, const Query &q)
{
    const auto &s = db.schema;
    std::vector<std::pair<std::uint32_t, std::unordered_map<std::int32_t, std::uint64_t>>> joins;
    for (std::uint32_t d = 0; d < s.dims.size(); ++d)
        if (q.joins & dim_bit(d)) joins.emplace_back(d, key_map(db.dims[d]));

    std::int64_t sum = 0;
    for (std::uint64_t r = 0; r < db.fact.row_count; ++r) {
        bool ok = true;
        for (auto &f : q.filters)
            if (f.column.table == kFactTable && !f.range.contains(db.fact.columns[f.column.column][r])) ok = false;
        for (auto &[d, keys] : joins) {
            if (!ok) break;
            auto it = keys.find(db.fact.columns[s.fk_column(d)][r]);
            if (it == keys.end()) {
                ok = false;
                break;
            }
            for (auto &f : q.filters)
                if (f.column.table == d + 1 && !f.range.contains(db.dims[d].columns[f.column.column][it->second]))
                    ok = false;
        }
        if (ok) sum += db.fact.columns[q.measure][r];
    }
    return sum;
}

std::vector<std::int64_t> qat_results(const Database &db, const Batch &batch)
{
    std::vector<std::int64_t> out;
    out.reserve(batch.queries.size());
    for (auto &q : batch.queries) out.push_back(qat_sum(db, q));
    return out;
}

std::uint64_t qat_join_count(const Database &db, std::span<const std::uint32_t> fact_rows, DimMask tables)
{
    std::vector<std::pair<std::uint32_t, std::unordered_map<std::int32_t, std::uint64_t>>> joins;
    for (std::uint32_t d = 0; d < db.schema.dims.size(); ++d)
        if (tables & dim_bit(d)) joins.emplace_back(d, key_map(db.dims[d]));
    std::uint64_t n = 0;
    for (auto r : fact_rows) {
        bool ok = true;
        for (auto &[d, keys] : joins)
            if (!keys.count(db.fact.columns[db.schema.fk_column(d)][r])) ok = false;
        n += ok;
    }
    return n;
}


double eliminated_cost(const WorkloadGraph &g, std::span<const int> domain)
{
    auto &nodes = g.nodes();
    std::vector<char> in_domain(g.keys().size(), 0);
    for (auto k : domain) in_domain.at(k) = 1;
    std::vector<char> gone(nodes.size(), 0);
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t x = 0; x < nodes.size(); ++x) {
            if (gone[x]) continue;
            auto &n = nodes[x];
            bool elim = n.key >= 0 && in_domain[n.key];
            if (!elim && !n.children.empty()) {
                elim = true;
                for (auto c : n.children) elim = elim && gone[c];
            }
            if (elim) {
                gone[x] = 1;
                changed = true;
            }
        }
    }
    double s = 0;
    for (std::size_t x = 0; x < nodes.size(); ++x)
        if (gone[x]) s += nodes[x].cost;
    return s;
}

namespace {

std::vector<std::uint32_t> subset(std::uint64_t mask, std::size_t n)
{
    std::vector<std::uint32_t> s;
    for (std::uint32_t i = 0; i < n; ++i)
        if (mask >> i & 1) s.push_back(i);
    return s;
}

void check_small(std::size_t n)
{
    if (n > 24) throw ConfigError("exhaustive search limited to 24 items");
}

} // namespace

ExhaustiveSelection exhaustive_selection(const WorkloadGraph &g, const CutSet &cuts, double budget_limit)
{
    const auto n = cuts.cuts.size();
    check_small(n);
    ExhaustiveSelection best;
    for (std::uint64_t m = 0; m < (std::uint64_t{1} << n); ++m) {
        auto s = subset(m, n);
        if (budget(g, cuts, s) > budget_limit) continue;
        auto r = reduction(g, cuts, s);
        if (r > best.reduction) best = {r, s};
    }
    return best;
}

GreedyBound greedy_bound(const WorkloadGraph &g, const CutSet &cuts, double budget_limit)
{
    const auto n = cuts.cuts.size();
    check_small(n);
    std::vector<char> feasible(std::size_t{1} << n);
    for (std::uint64_t m = 0; m < feasible.size(); ++m) feasible[m] = budget(g, cuts, subset(m, n)) <= budget_limit;
    GreedyBound b;
    b.small = n;
    for (std::uint64_t m = 0; m < feasible.size(); ++m) {
        if (!feasible[m]) continue;
        std::size_t size = std::popcount(m);
        b.large = std::max(b.large, size);
        bool maximal = true;
        for (std::size_t j = 0; j < n && maximal; ++j)
            if (!(m >> j & 1) && feasible[m | (std::uint64_t{1} << j)]) maximal = false;
        if (maximal) b.small = std::min(b.small, size);
    }
    if (b.large == 0) {
        b.factor = 1.0;
        return b;
    }
    double k = static_cast<double>(b.large);
    b.factor = 1.0 - std::pow((k - 1.0) / k, static_cast<double>(b.small));
    return b;
}

double exhaustive_rewrite_cost(const GlobalPlan &plan, std::span<const ReuseCandidate> candidates)
{
    std::vector<std::uint32_t> mat;
    for (auto &n : plan.nodes)
        if (candidates[n.id].materialized) mat.push_back(n.id);
    check_small(mat.size());
    double best = std::numeric_limits<double>::infinity();
    std::vector<char> gone(plan.nodes.size());
    for (std::uint64_t m = 0; m < (std::uint64_t{1} << mat.size()); ++m) {
        std::fill(gone.begin(), gone.end(), 0);
        double cost = 0;
        for (std::size_t i = 0; i < mat.size(); ++i)
            if (m >> i & 1) {
                gone[mat[i]] = 1;
                cost += candidates[mat[i]].view_cost;
            }
        // successors have larger ids
        for (std::size_t x = plan.nodes.size(); x-- > 0;) {
            auto &n = plan.nodes[x];
            if (!gone[x] && !n.successors.empty())
                gone[x] = std::all_of(n.successors.begin(), n.successors.end(), [&](auto s) { return gone[s]; });
            if (!gone[x]) cost += n.cost;
        }
        best = std::min(best, cost);
    }
    return best;
}

} // namespace sharedb
