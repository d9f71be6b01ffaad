#pragma once

#include <sharedb/global_plan.hpp>
#include <sharedb/materializer.hpp>
#include <sharedb/reuse.hpp>
#include <sharedb/workload.hpp>

#include <random>

namespace sharedb::test {

using Rng = std::mt19937_64;

inline double uniform(Rng &rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline std::size_t pick(Rng &rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }
inline bool coin(Rng &rng, double p) { return std::bernoulli_distribution(p)(rng); }

/** Star schema with four dimensions B, C, D, E and a fact table F(b, c, d, e, x, v). */
inline const char *kFourDimSchema = R"(
schema
  fact F rows=1000
  dim B rows=10
  dim C rows=10
  dim D rows=10
  dim E rows=10
  fk F.b -> B
  fk F.c -> C
  fk F.d -> D
  fk F.e -> E
  column F.x
  column F.v
  column B.p
  column E.s
end
)";

/** Q1 joins B, C, D and Q2 joins B, E; both filter F.x.  Plan: scan, filter, B, C, D, agg Q1, E, agg Q2. */
inline Batch two_query_batch(const Schema &schema)
{
    Batch b;
    b.name = "two_branch";
    auto x = schema.resolve("F.x");
    auto v = schema.resolve("F.v").column;
    Query q1;
    q1.id = 0;
    q1.joins = dim_bit(0) | dim_bit(1) | dim_bit(2);
    q1.filters = {{x, {0, 50}}};
    q1.measure = v;
    Query q2 = q1;
    q2.id = 1;
    q2.joins = dim_bit(0) | dim_bit(3);
    q2.filters = {{x, {20, 70}}};
    b.queries = {q1, q2};
    return b;
}

/** Workload graph mirroring a plan's tree: unit costs, probes keyed by (partition 0, table set). */
inline WorkloadGraph graph_of(const GlobalPlan &plan, double budget_per_key = 1.0)
{
    WorkloadGraph g;
    auto comp = g.add_component(0, 0);
    std::vector<int> id(plan.nodes.size());
    for (auto &n : plan.nodes) {
        std::optional<ViewKey> key;
        if (n.materializable()) {
            key = ViewKey{0, n.tables};
            g.intern(*key, budget_per_key);
        }
        id[n.id] = static_cast<int>(g.add_node(comp, n.input >= 0 ? id[n.input] : -1, 1.0, key, static_cast<int>(n.id)));
    }
    return g;
}

/** Random forest of trees.  About half of the non-leaf nodes are keyed; keys are drawn from a small pool so that
 * components share materializations. */
inline WorkloadGraph random_graph(Rng &rng, std::size_t max_nodes, std::size_t components = 2)
{
    WorkloadGraph g;
    const std::size_t pool = 1 + pick(rng, 5);
    for (std::size_t k = 0; k < pool; ++k) g.intern({0, static_cast<DimMask>(k + 1)}, uniform(rng, 1, 10));
    std::size_t per = std::max<std::size_t>(2, max_nodes / components);
    for (std::size_t c = 0; c < components; ++c) {
        auto comp = g.add_component(0, static_cast<std::uint32_t>(c));
        std::size_t n = 2 + pick(rng, per - 1);
        std::vector<std::uint32_t> ids;
        for (std::size_t i = 0; i < n; ++i) {
            int parent = i == 0 ? -1 : static_cast<int>(ids[pick(rng, ids.size())]);
            std::optional<ViewKey> key;
            if (i > 0 && coin(rng, 0.6)) key = g.keys()[pick(rng, pool)];
            ids.push_back(g.add_node(comp, parent, uniform(rng, 0, 10), key));
        }
    }
    return g;
}

/** Random plan tree of at most `max_nodes` nodes: a scan root, probes and filters inside, aggregates at the leaves.
 * Only the fields the reuse phase reads are meaningful. */
inline GlobalPlan random_plan(Rng &rng, std::size_t max_nodes)
{
    GlobalPlan p;
    p.width = 64;
    PlanNode scan;
    scan.kind = NodeKind::Scan;
    scan.cost = uniform(rng, 0, 10);
    p.add(scan);
    std::size_t inner = 1 + pick(rng, std::max<std::size_t>(1, max_nodes / 2));
    for (std::size_t i = 0; i < inner && p.nodes.size() < max_nodes; ++i) {
        PlanNode n;
        n.kind = coin(rng, 0.75) ? NodeKind::Probe : NodeKind::Filter;
        n.input = static_cast<int>(pick(rng, p.nodes.size()));
        n.cost = uniform(rng, 0, 10);
        p.add(n);
    }
    // every childless node gets an aggregate
    std::uint32_t query = 0;
    for (std::size_t i = 0, n = p.nodes.size(); i < n && p.nodes.size() < max_nodes + 4; ++i) {
        if (!p.nodes[i].successors.empty()) continue;
        PlanNode a;
        a.kind = NodeKind::Aggregate;
        a.query = query++;
        a.input = static_cast<int>(i);
        a.cost = uniform(rng, 0, 10);
        p.add(a);
    }
    // a few extra aggregates on inner nodes
    for (std::size_t i = 0, n = p.nodes.size(); i < n; ++i)
        if (p.nodes[i].kind != NodeKind::Aggregate && coin(rng, 0.2)) {
            PlanNode a;
            a.kind = NodeKind::Aggregate;
            a.query = query++;
            a.input = static_cast<int>(i);
            a.cost = uniform(rng, 0, 10);
            p.add(a);
        }
    return p;
}

/** Random view availability and view costs; about one in five view costs is zero. */
inline std::vector<ReuseCandidate> random_candidates(Rng &rng, const GlobalPlan &p)
{
    std::vector<ReuseCandidate> c(p.nodes.size());
    for (auto &n : p.nodes)
        if (n.materializable() && coin(rng, 0.6)) c[n.id] = {true, coin(rng, 0.2) ? 0.0 : uniform(rng, 0, 25)};
    return c;
}

} // namespace sharedb::test
