#include <sharedb/global_plan.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace sharedb {

const char *to_string(NodeKind k)
{
    switch (k) {
        case NodeKind::Scan: return "scan";
        case NodeKind::Filter: return "filter";
        case NodeKind::Probe: return "probe";
        case NodeKind::Aggregate: return "aggregate";
        case NodeKind::ViewScan: return "viewscan";
    }
    return "?";
}

PlanNode &GlobalPlan::add(PlanNode n)
{
    n.id = static_cast<std::uint32_t>(nodes.size());
    if (n.queries.num_words() != words_for(width)) n.queries = QuerySet(width);
    if (n.input >= 0) {
        SHAREDB_CHECK(static_cast<std::size_t>(n.input) < nodes.size(), "plan input must precede its consumer");
        nodes[n.input].successors.push_back(n.id);
    }
    if (n.is_source()) sources.push_back(n.id);
    if (n.kind == NodeKind::Aggregate) {
        if (roots.size() < width) roots.resize(width, -1);
        roots.at(n.query) = static_cast<int>(n.id);
    }
    nodes.push_back(std::move(n));
    return nodes.back();
}

void GlobalPlan::validate() const
{
    std::vector<QuerySet> below(nodes.size(), QuerySet(width));
    for (std::size_t i = nodes.size(); i-- > 0;) {
        auto &n = nodes[i];
        SHAREDB_CHECK(n.id == i, "node ids must be positions");
        if (n.is_source()) {
            SHAREDB_CHECK(n.input < 0, "sources have no input");
        } else {
            SHAREDB_CHECK(n.input >= 0 && static_cast<std::size_t>(n.input) < i, "inputs must precede consumers");
            auto &in = nodes[n.input];
            SHAREDB_CHECK(std::count(in.successors.begin(), in.successors.end(), n.id) == 1, "input/successor link");
            if (n.kind == NodeKind::Probe) {
                SHAREDB_CHECK(!(in.tables & dim_bit(n.dim)), "dimension probed twice on one path");
                SHAREDB_CHECK(n.tables == (in.tables | dim_bit(n.dim)), "probe table set");
            } else {
                SHAREDB_CHECK(n.tables == in.tables, "table set changes only at probes");
            }
        }
        if (n.kind == NodeKind::Aggregate) {
            SHAREDB_CHECK(n.successors.empty(), "aggregates are roots");
            below[i].set(n.query);
            SHAREDB_CHECK(roots.at(n.query) == static_cast<int>(i), "one root per query");
        }
        for (auto s : n.successors) {
            SHAREDB_CHECK(s > i && nodes[s].input == static_cast<int>(i), "successor link");
            below[i] |= below[s];
        }
        SHAREDB_CHECK(below[i] == n.queries, "node query set must equal the union of its aggregates");
    }
}

std::string GlobalPlan::to_text(const Schema &schema) const
{
    auto tables_text = [&](DimMask m) {
        if (!m) return std::string("-");
        std::string s;
        for (std::uint32_t d = 0; d < schema.dims.size(); ++d)
            if (m & dim_bit(d)) s += (s.empty() ? "" : ",") + schema.dims[d].name;
        return s;
    };
    std::ostringstream os;
    os << "plan width=" << width << " nodes=" << nodes.size() << '\n';
    char cost[32];
    for (auto &n : nodes) {
        os << n.id << ' ' << sharedb::to_string(n.kind);
        switch (n.kind) {
            case NodeKind::Filter: os << ' ' << schema.column_name(n.column) << (n.on_view ? " view" : ""); break;
            case NodeKind::Probe: os << ' ' << schema.dims.at(n.dim).name; break;
            case NodeKind::Aggregate: os << " q" << n.query; break;
            case NodeKind::ViewScan: os << " v" << n.view; break;
            case NodeKind::Scan: break;
        }
        std::snprintf(cost, sizeof cost, "%.6g", n.cost);
        os << " in=" << (n.input < 0 ? std::string("-") : std::to_string(n.input)) << " tables=" << tables_text(n.tables)
           << " queries=" << n.queries.to_hex() << " cost=" << cost << '\n';
    }
    return os.str();
}

/*======================================================================================================================
 * Planner
 *====================================================================================================================*/

namespace {

struct Planner
{
    const Batch &batch;
    GlobalPlan &plan;

    QuerySet set_of(std::span<const std::uint32_t> qs) const
    {
        QuerySet s(plan.width);
        for (auto q : qs) s.set(q);
        return s;
    }

    void grow(std::uint32_t node, std::vector<std::uint32_t> group, DimMask joined)
    {
        std::vector<std::uint32_t> rest;
        for (auto q : group) {
            if (batch.queries[q].joins == joined) {
                PlanNode a;
                a.kind = NodeKind::Aggregate;
                a.query = q;
                a.input = static_cast<int>(node);
                a.tables = joined;
                a.queries = set_of(std::span(&q, 1));
                plan.add(std::move(a));
            } else {
                rest.push_back(q);
            }
        }
        while (!rest.empty()) {
            std::array<int, kMaxDimensions> count{};
            for (auto q : rest)
                for (std::size_t d = 0; d < kMaxDimensions; ++d)
                    if ((batch.queries[q].joins & ~joined) & dim_bit(d)) ++count[d];
            auto best = static_cast<std::uint32_t>(std::max_element(count.begin(), count.end()) - count.begin());
            SHAREDB_CHECK(count[best] > 0, "every remaining query needs another join");
            std::vector<std::uint32_t> sub, keep;
            for (auto q : rest) (batch.queries[q].joins & dim_bit(best) ? sub : keep).push_back(q);
            PlanNode p;
            p.kind = NodeKind::Probe;
            p.dim = best;
            p.input = static_cast<int>(node);
            p.tables = joined | dim_bit(best);
            p.queries = set_of(sub);
            auto id = plan.add(std::move(p)).id;
            grow(id, std::move(sub), joined | dim_bit(best));
            rest = std::move(keep);
        }
    }
};

} // namespace

GlobalPlan build_global_plan(const Batch &batch, const QuerySet &active)
{
    GlobalPlan plan;
    plan.width = batch.width();
    plan.roots.assign(plan.width, -1);
    std::vector<std::uint32_t> group;
    active.for_each([&](std::size_t q) {
        if (q < batch.width()) group.push_back(static_cast<std::uint32_t>(q));
    });
    if (group.empty()) return plan;

    QuerySet all(plan.width);
    for (auto q : group) all.set(q);

    PlanNode scan;
    scan.kind = NodeKind::Scan;
    scan.queries = all;
    std::uint32_t top = plan.add(std::move(scan)).id;

    std::vector<ColumnRef> fact_columns;
    for (auto q : group)
        for (auto &f : batch.queries[q].filters)
            if (f.column.table == kFactTable) fact_columns.push_back(f.column);
    std::sort(fact_columns.begin(), fact_columns.end());
    fact_columns.erase(std::unique(fact_columns.begin(), fact_columns.end()), fact_columns.end());
    for (auto c : fact_columns) {
        PlanNode f;
        f.kind = NodeKind::Filter;
        f.column = c;
        f.input = static_cast<int>(top);
        f.queries = all;
        top = plan.add(std::move(f)).id;
    }
    Planner{batch, plan}.grow(top, std::move(group), 0);
    return plan;
}

/*======================================================================================================================
 * Cost model
 *====================================================================================================================*/

void CostModel::validate() const
{
    for (auto [name, v] : {std::pair{"c_scan", c_scan}, {"c_filter", c_filter}, {"c_probe", c_probe},
                           {"c_agg", c_agg}, {"c_f", c_f}, {"filter_exponent", filter_exponent}})
        if (!(v > 0) || !std::isfinite(v))
            throw ConfigError(std::string("cost constant ") + name + " must be a positive number");
}

std::string CostModel::to_text() const
{
    char buf[256];
    std::snprintf(buf, sizeof buf, "c_scan=%.6g c_filter=%.6g c_probe=%.6g c_agg=%.6g c_f=%.6g filter_exponent=%.6g",
                  c_scan, c_filter, c_probe, c_agg, c_f, filter_exponent);
    return buf;
}

CostModel CostModel::parse(std::string_view text)
{
    CostModel m;
    std::istringstream is{std::string(text)};
    for (std::string kv; is >> kv;) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("cost model: expected key=value, got '" + kv + "'");
        auto key = kv.substr(0, eq);
        double *slot = key == "c_scan"            ? &m.c_scan
                       : key == "c_filter"        ? &m.c_filter
                       : key == "c_probe"         ? &m.c_probe
                       : key == "c_agg"           ? &m.c_agg
                       : key == "c_f"             ? &m.c_f
                       : key == "filter_exponent" ? &m.filter_exponent
                                                  : nullptr;
        if (!slot) throw ConfigError("cost model: unknown constant '" + key + "'");
        try {
            std::size_t used = 0;
            *slot = std::stod(kv.substr(eq + 1), &used);
            if (used != kv.size() - eq - 1) throw std::invalid_argument(kv);
        } catch (const std::logic_error &) {
            throw ConfigError("cost model: bad number in '" + kv + "'");
        }
    }
    m.validate();
    return m;
}

double estimate_plan_cost(GlobalPlan &plan, std::span<const NodeLoad> loads, const CostModel &m)
{
    SHAREDB_CHECK(loads.size() == plan.nodes.size(), "one load per node");
    double total = 0;
    for (auto &n : plan.nodes) {
        auto &l = loads[n.id];
        switch (n.kind) {
            case NodeKind::Scan: n.cost = m.c_scan * l.input_rows; break;
            case NodeKind::Filter: n.cost = n.on_view ? 0.0 : m.c_filter * l.filter_load; break;
            case NodeKind::Probe: n.cost = m.c_probe * l.input_rows; break;
            case NodeKind::Aggregate: n.cost = m.c_agg * l.input_rows; break;
            case NodeKind::ViewScan: n.cost = m.c_f * l.view_load; break;
        }
        total += n.cost;
    }
    return total;
}

std::vector<NodeLoad> estimate_loads(const GlobalPlan &plan, const Batch &batch, const BlockLayout &blocks,
                                     const SkipAnalysis &skip, const DimensionState &dims, double alpha)
{
    std::vector<NodeLoad> loads(plan.nodes.size());
    if (plan.empty()) return loads;
    for (auto &n : plan.nodes)
        SHAREDB_CHECK(n.kind != NodeKind::ViewScan, "estimate_loads covers scan-sourced plans only");

    const std::size_t w = plan.width;
    std::vector<float> pass(plan.nodes.size() * w, 0.0f);      // output pass probability per node and query
    std::vector<std::optional<std::size_t>> zone(plan.nodes.size()), slot(plan.nodes.size());
    for (auto &n : plan.nodes)
        if (n.kind == NodeKind::Filter) {
            zone[n.id] = blocks.zone_slot(n.column);
            slot[n.id] = skip.slot(n.column);
        }

    auto union_rows = [&](const PlanNode &n, const float *in, double rows) {
        double none = 1.0;
        n.queries.for_each([&](std::size_t q) { none *= 1.0 - in[q]; });
        return rows * (1.0 - none);
    };

    for (std::size_t b = 0; b < blocks.num_blocks(); ++b) {
        double rows = static_cast<double>(blocks.block_rows(b));
        auto &alive = skip.alive[b];
        for (auto &n : plan.nodes) {
            float *out = pass.data() + n.id * w;
            const float *in = n.input >= 0 ? pass.data() + n.input * w : nullptr;
            auto &load = loads[n.id];
            switch (n.kind) {
                case NodeKind::Scan: {
                    bool any = false;
                    n.queries.for_each([&](std::size_t q) {
                        out[q] = alive.test(q) ? 1.0f : 0.0f;
                        any |= alive.test(q);
                    });
                    if (any) load.input_rows += rows;
                    break;
                }
                case NodeKind::Filter: {
                    double input = union_rows(n, in, rows);
                    load.input_rows += input;
                    std::size_t amb = 0;
                    if (slot[n.id]) {
                        auto a = skip.ambivalent_at(b, *slot[n.id]) & n.queries;
                        amb = a.count();
                    }
                    if (amb) load.filter_load += input * std::pow(static_cast<double>(amb), alpha);
                    n.queries.for_each([&](std::size_t q) {
                        double s = 1.0;
                        if (auto *p = batch.queries[q].filter_on(n.column)) {
                            if (!zone[n.id]) {
                                s = 0.5;
                            } else {
                                auto z = blocks.zone(*zone[n.id], b);
                                switch (classify_predicate(z, p->range)) {
                                    case PredicateClassification::AlwaysTrue: s = 1.0; break;
                                    case PredicateClassification::AlwaysFalse: s = 0.0; break;
                                    case PredicateClassification::Ambivalent: s = overlap_fraction(z, p->range); break;
                                }
                            }
                        }
                        out[q] = static_cast<float>(in[q] * s);
                    });
                    break;
                }
                case NodeKind::Probe: {
                    load.input_rows += union_rows(n, in, rows);
                    auto &sel = dims.dims.at(n.dim)->selectivity;
                    n.queries.for_each([&](std::size_t q) { out[q] = static_cast<float>(in[q] * sel[q]); });
                    break;
                }
                case NodeKind::Aggregate:
                    load.input_rows += rows * in[n.query];
                    out[n.query] = in[n.query];
                    break;
                case NodeKind::ViewScan: break;
            }
        }
    }
    return loads;
}

double view_filter_load(const BlockLayout &blocks, const SkipAnalysis &skip, const QuerySet &queries)
{
    double load = 0;
    for (std::size_t b = 0; b < skip.num_blocks(); ++b) {
        auto live = skip.alive[b] & queries;
        if (live.none()) continue;
        std::size_t rf = 0;
        for (std::size_t s = 0; s < skip.columns.size(); ++s)
            if ((skip.ambivalent_at(b, s) & live).any()) ++rf;
        load += static_cast<double>(blocks.block_rows(b)) * static_cast<double>(rf);
    }
    return load;
}

} // namespace sharedb
