#include <doctest.h>

#include "support.hpp"

#include <sharedb/oracle.hpp>

#include <cmath>

using namespace sharedb;
using namespace sharedb::test;

namespace {

GlobalPlan unit_cost_plan(const Batch &batch)
{
    auto plan = build_global_plan(batch, batch.all());
    for (auto &n : plan.nodes) n.cost = 1;
    return plan;
}

} // namespace

TEST_CASE("views at C and E replace the scan and the shared joins")
{
    auto w = parse_workload(kFourDimSchema);
    auto batch = two_query_batch(w.schema);
    auto plan = unit_cost_plan(batch);
    std::vector<ReuseCandidate> cand(plan.nodes.size());
    cand[3] = {true, 0};
    cand[6] = {true, 0};
    auto d = reuse_phase(plan, cand);
    CHECK(d.replaced == std::vector<std::uint32_t>{3, 6});
    std::vector<char> kept{0, 0, 0, 0, 1, 1, 0, 1};
    CHECK(d.kept == kept);
    CHECK(d.baseline_cost == doctest::Approx(8));
    CHECK(d.optimized_cost == doctest::Approx(3));

    auto r = rewrite_plan(plan, d, batch, cand);
    CHECK_NOTHROW(r.validate());
    std::size_t view_scans = 0, probes = 0, aggregates = 0;
    for (auto &n : r.nodes) {
        view_scans += n.kind == NodeKind::ViewScan;
        probes += n.kind == NodeKind::Probe;
        aggregates += n.kind == NodeKind::Aggregate;
    }
    CHECK(view_scans == 2);
    CHECK(probes == 1);         // only D is still joined
    CHECK(aggregates == 2);
}

TEST_CASE("benefit is the eliminated cost minus the view cost")
{
    auto w = parse_workload(kFourDimSchema);
    auto batch = two_query_batch(w.schema);
    auto plan = unit_cost_plan(batch);
    std::vector<ReuseCandidate> cand(plan.nodes.size());
    cand[3] = {true, 100};
    cand[6] = {true, 100};
    cand[4] = {true, 0.5};
    const std::uint32_t ce[] = {3, 6}, d[] = {4};
    CHECK(cut_benefit(plan, cand, ce, 0) == doctest::Approx(5 - 200));
    CHECK(cut_benefit(plan, cand, d, 3) == doctest::Approx(2 - 0.5));
    CHECK(std::isinf(cut_benefit(plan, cand, std::span<const std::uint32_t>{}, 0)));

    auto dec = reuse_phase(plan, cand);
    CHECK(dec.replaced == std::vector<std::uint32_t>{4});
    CHECK(dec.optimized_cost == doctest::Approx(8 - 2 + 0.5));   // C only feeds D, so it goes too
}

TEST_CASE("expensive views are never used")
{
    auto w = parse_workload(kFourDimSchema);
    auto batch = two_query_batch(w.schema);
    auto plan = unit_cost_plan(batch);
    std::vector<ReuseCandidate> cand(plan.nodes.size());
    for (auto &n : plan.nodes)
        if (n.materializable()) cand[n.id] = {true, 1e6};
    auto d = reuse_phase(plan, cand);
    CHECK(d.replaced.empty());
    CHECK(d.optimized_cost == d.baseline_cost);
    auto r = rewrite_plan(plan, d, batch, cand);
    CHECK(r.nodes.size() == plan.nodes.size());
}

TEST_CASE("a benefit of exactly zero still rewrites")
{
    auto w = parse_workload(kFourDimSchema);
    auto batch = two_query_batch(w.schema);
    auto plan = unit_cost_plan(batch);
    std::vector<ReuseCandidate> cand(plan.nodes.size());
    cand[6] = {true, 1};    // BC of {E} is E itself
    auto d = reuse_phase(plan, cand);
    CHECK(d.replaced == std::vector<std::uint32_t>{6});
    CHECK(d.optimized_cost == d.baseline_cost);
}

TEST_CASE("the reuse phase finds the cheapest rewrite" * doctest::description("random plans up to 12 nodes"))
{
    Rng rng(505);
    int checked = 0;
    while (checked < 500) {
        auto plan = random_plan(rng, 8);
        if (plan.nodes.size() > 12) continue;
        auto cand = random_candidates(rng, plan);
        auto d = reuse_phase(plan, cand);
        double best = exhaustive_rewrite_cost(plan, cand);
        CHECK(d.optimized_cost == doctest::Approx(best));
        CHECK(d.optimized_cost <= d.baseline_cost + 1e-9);
        ++checked;
    }
}

TEST_CASE("decision bookkeeping is consistent")
{
    Rng rng(606);
    for (int i = 0; i < 300; ++i) {
        auto plan = random_plan(rng, 10);
        auto cand = random_candidates(rng, plan);
        auto d = reuse_phase(plan, cand);
        double cost = 0;
        for (auto &n : plan.nodes)
            if (d.kept[n.id]) cost += n.cost;
        for (auto u : d.replaced) {
            CHECK(cand[u].materialized);
            CHECK(!d.kept[u]);
            cost += cand[u].view_cost;
            // a replaced node feeds something that still runs
            bool feeds = false;
            for (auto s : plan.nodes[u].successors) feeds |= d.kept[s] != 0;
            CHECK(feeds);
        }
        CHECK(cost == doctest::Approx(d.optimized_cost));
        // every kept non-source node reads from a kept or replaced input
        for (auto &n : plan.nodes)
            if (d.kept[n.id] && n.input >= 0)
                CHECK((d.kept[n.input] || std::binary_search(d.replaced.begin(), d.replaced.end(),
                                                              static_cast<std::uint32_t>(n.input))));
        // aggregates always run
        for (auto &n : plan.nodes)
            if (n.kind == NodeKind::Aggregate) CHECK(d.kept[n.id]);
    }
}
