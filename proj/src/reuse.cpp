#include <sharedb/reuse.hpp>

#include <algorithm>
#include <limits>
#include <optional>

namespace sharedb {

namespace {

/** Nodes on the input paths from each cut node up to `anchor`, inclusive, ascending. */
std::vector<std::uint32_t> between(const GlobalPlan &plan, std::span<const std::uint32_t> cut, std::uint32_t anchor)
{
    std::vector<std::uint32_t> out;
    for (auto u : cut) {
        int x = static_cast<int>(u);
        for (; x >= 0 && x != static_cast<int>(anchor); x = plan.nodes[x].input) out.push_back(static_cast<std::uint32_t>(x));
        SHAREDB_CHECK(x == static_cast<int>(anchor), "cut node is not below its anchor");
    }
    out.push_back(anchor);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

using PendingCut = std::optional<std::vector<std::uint32_t>>;     // nullopt: no cut can eliminate the node

class ReusePass
{
    const GlobalPlan &plan_;
    std::span<const ReuseCandidate> cand_;
    ReuseDecision &out_;

    public:
    ReusePass(const GlobalPlan &plan, std::span<const ReuseCandidate> cand, ReuseDecision &out)
        : plan_(plan), cand_(cand), out_(out)
    {
    }

    double benefit(const PendingCut &cut, std::uint32_t v) const
    {
        if (!cut) return -std::numeric_limits<double>::infinity();
        return cut_benefit(plan_, cand_, *cut, v);
    }

    PendingCut visit(std::uint32_t v)
    {
        auto &node = plan_.nodes[v];
        out_.kept[v] = 0;
        PendingCut cut;
        if (!node.successors.empty()) cut.emplace();
        bool at_least_one = node.successors.empty();
        for (auto s : node.successors) {
            auto sub = visit(s);
            if (!out_.kept[s]) continue;
            at_least_one = true;
            if (!cut) continue;
            if (!sub) cut.reset();
            else cut->insert(cut->end(), sub->begin(), sub->end());
        }
        if (!at_least_one) return cut;

        out_.kept[v] = 1;
        if (cut) std::sort(cut->begin(), cut->end());
        if (cand_[v].materialized) {
            std::vector<std::uint32_t> self{v};
            if (!cut || benefit(cut, v) < cut_benefit(plan_, cand_, self, v)) cut = self;
        }
        if (benefit(cut, v) >= 0) {
            for (auto x : between(plan_, *cut, v)) out_.kept[x] = 0;
            out_.replaced.insert(out_.replaced.end(), cut->begin(), cut->end());
            cut.reset();
        }
        return cut;
    }
};

} // namespace

double cut_benefit(const GlobalPlan &plan, std::span<const ReuseCandidate> candidates,
                   std::span<const std::uint32_t> cut, std::uint32_t anchor)
{
    if (cut.empty()) return -std::numeric_limits<double>::infinity();
    double b = 0;
    for (auto x : between(plan, cut, anchor)) b += plan.nodes[x].cost;
    for (auto u : cut) {
        SHAREDB_CHECK(candidates[u].materialized, "cut over a node without a view");
        b -= candidates[u].view_cost;
    }
    return b;
}

ReuseDecision reuse_phase(const GlobalPlan &plan, std::span<const ReuseCandidate> candidates)
{
    SHAREDB_CHECK(candidates.size() == plan.nodes.size(), "one reuse candidate per plan node");
    ReuseDecision out;
    out.kept.assign(plan.nodes.size(), 0);
    ReusePass pass(plan, candidates, out);
    for (auto &n : plan.nodes)
        if (n.input < 0) pass.visit(n.id);
    std::sort(out.replaced.begin(), out.replaced.end());
    for (auto &n : plan.nodes) {
        out.baseline_cost += n.cost;
        if (out.kept[n.id]) out.optimized_cost += n.cost;
    }
    for (auto u : out.replaced) out.optimized_cost += candidates[u].view_cost;
    return out;
}

std::vector<ColumnRef> view_filter_columns(const Batch &batch, const QuerySet &queries, DimMask tables)
{
    std::vector<ColumnRef> columns;
    queries.for_each([&](std::size_t q) {
        for (auto &f : batch.queries[q].filters)
            if (f.column.table == kFactTable || (tables & dim_bit(f.column.table - 1))) columns.push_back(f.column);
    });
    std::sort(columns.begin(), columns.end());
    columns.erase(std::unique(columns.begin(), columns.end()), columns.end());
    return columns;
}

GlobalPlan rewrite_plan(const GlobalPlan &plan, const ReuseDecision &decision, const Batch &batch,
                        std::span<const ReuseCandidate> candidates)
{
    GlobalPlan out;
    out.width = plan.width;
    out.roots.assign(plan.width, -1);

    auto copy_subtree = [&](auto &self, std::uint32_t v, int input) -> void {
        if (!decision.kept[v]) return;
        PlanNode n = plan.nodes[v];
        n.successors.clear();
        n.input = input;
        n.origin = static_cast<int>(v);
        auto id = static_cast<int>(out.add(std::move(n)).id);
        for (auto s : plan.nodes[v].successors) self(self, s, id);
    };

    for (auto &n : plan.nodes)
        if (n.input < 0) copy_subtree(copy_subtree, n.id, -1);

    for (auto u : decision.replaced) {
        auto &base = plan.nodes[u];
        PlanNode scan;
        scan.kind = NodeKind::ViewScan;
        scan.tables = base.tables;
        scan.view = static_cast<std::uint32_t>(out.views.size());
        scan.origin = static_cast<int>(u);
        scan.cost = candidates[u].view_cost;
        out.views.push_back(base.tables);
        int tail = static_cast<int>(out.add(std::move(scan)).id);

        auto columns = view_filter_columns(batch, base.queries, base.tables);
        for (auto c : columns) {
            PlanNode f;
            f.kind = NodeKind::Filter;
            f.column = c;
            f.tables = base.tables;
            f.on_view = true;
            f.input = tail;
            tail = static_cast<int>(out.add(std::move(f)).id);
        }
        for (auto s : base.successors) copy_subtree(copy_subtree, s, tail);
    }

    // query sets: union of the aggregates below
    for (std::size_t i = out.nodes.size(); i-- > 0;) {
        auto &n = out.nodes[i];
        if (n.kind == NodeKind::Aggregate) continue;
        QuerySet qs(out.width);
        for (auto s : n.successors) qs |= out.nodes[s].queries;
        n.queries = qs;
    }
    out.validate();
    return out;
}

} // namespace sharedb
