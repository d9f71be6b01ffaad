#include <doctest.h>

#include "support.hpp"

#include <sharedb/executor.hpp>
#include <sharedb/oracle.hpp>
#include <sharedb/partitioner.hpp>
#include <sharedb/tuner.hpp>
#include <sharedb/views.hpp>

#include <sstream>

using namespace sharedb;
using namespace sharedb::test;

namespace {

const char *kTemplates = R"(
template a sum=F.v join=B,C filter=F.x[w=20,step=10] filter=B.p[w=30,step=10]
template b sum=F.x join=B,E filter=F.x[w=40,step=5] filter=E.s[w=50,step=25]
template c sum=F.v join=B,C,D filter=F.x[w=10,step=1]
template d sum=F.v filter=F.x[w=60,step=20]
)";

Workload random_workload()
{
    auto w = parse_workload(std::string(kFourDimSchema) + kTemplates);
    w.schema.fact.rows = 6000;
    return w;
}

Batch random_batch(Rng &rng, const Workload &w, std::int64_t shift = 0)
{
    Batch b;
    b.name = "random";
    for (auto &t : w.templates)
        for (std::size_t k = pick(rng, 5); k-- > 0;) b.queries.push_back(instantiate(t, w.schema, rng, shift));
    if (b.queries.empty()) b.queries.push_back(instantiate(w.templates[0], w.schema, rng, shift));
    for (std::uint32_t q = 0; q < b.queries.size(); ++q) b.queries[q].id = q;
    return b;
}

} // namespace

TEST_CASE("the shared plan follows the fixed join order")
{
    auto w = parse_workload(kFourDimSchema);
    auto batch = two_query_batch(w.schema);
    auto plan = build_global_plan(batch, batch.all());
    REQUIRE(plan.nodes.size() == 8);
    const NodeKind kinds[] = {NodeKind::Scan,  NodeKind::Filter,    NodeKind::Probe, NodeKind::Probe,
                              NodeKind::Probe, NodeKind::Aggregate, NodeKind::Probe, NodeKind::Aggregate};
    for (std::size_t i = 0; i < 8; ++i) CHECK(plan.nodes[i].kind == kinds[i]);
    CHECK(plan.nodes[6].input == 2);    // E hangs off the shared join with B
    CHECK(plan.nodes[3].tables == (dim_bit(0) | dim_bit(1)));
    CHECK(plan.nodes[2].queries.count() == 2);
    CHECK(plan.nodes[4].queries.count() == 1);
    CHECK_NOTHROW(plan.validate());
}

TEST_CASE("shared execution matches the oracle on random batches")
{
    Rng rng(31);
    auto w = random_workload();
    auto db = generate_database(w.schema, 4);
    BlockingConfig blk{32, 256};
    auto flat = untuned_layout(db, blk);
    for (int i = 0; i < 25; ++i) {
        auto batch = random_batch(rng, w);
        auto expect = qat_results(db, batch);
        for (bool skip : {true, false}) {
            ExecConfig ec;
            ec.skipping = skip;
            ec.threads = 1 + i % 3;
            ec.morsel_blocks = 1 + i % 4;
            CHECK(execute_batch(db, flat, nullptr, batch, ec).sums == expect);
        }
    }
}

TEST_CASE("tuned layouts and views keep answers exact under drift")
{
    Rng rng(32);
    auto w = random_workload();
    auto db = generate_database(w.schema, 5);
    std::vector<Batch> tuning{random_batch(rng, w), random_batch(rng, w)};
    TunerConfig tc;
    tc.sample_rate = 0.25;
    tc.partitioner.ps_min = 500;
    tc.blocking = {32, 256};
    tc.model.c_f = 1.0;
    auto t = tune(db, tuning, tc);
    for (int i = 0; i < 15; ++i) {
        auto batch = random_batch(rng, w, static_cast<std::int64_t>(pick(rng, 30)) - 15);
        auto expect = qat_results(db, batch);
        ExecConfig ec;
        ec.model = tc.model;
        ec.naive_reuse = i % 2;
        auto r = execute_batch(db, t.layout, &t.views, batch, ec);
        CHECK(r.sums == expect);
        CHECK(r.metrics.optimized_cost <= r.metrics.baseline_cost + 1e-6);
        double mr = r.metrics.miss_rate();
        CHECK((mr >= 0 && mr <= 1));
    }
}

TEST_CASE("skipped blocks hold no qualifying rows" * doctest::description("zone-map soundness"))
{
    Rng rng(33);
    auto w = random_workload();
    auto db = generate_database(w.schema, 6);
    auto layout = build_layout(db.fact, w.schema, PartitionTree::single_leaf(), {}, {32, 128}, false);
    auto &blocks = layout.partitions[0].blocks;
    for (int i = 0; i < 20; ++i) {
        auto batch = random_batch(rng, w);
        auto cols = fact_filter_columns(batch);
        auto skip = analyze_blocks(blocks, batch, batch.all(), cols, true);
        for (std::size_t blk = 0; blk < skip.num_blocks(); ++blk)
            for (auto &q : batch.queries) {
                if (skip.alive[blk].test(q.id)) continue;
                for (auto row = blocks.offsets[blk]; row < blocks.offsets[blk + 1]; ++row) {
                    bool pass = true;
                    for (auto &f : q.filters)
                        if (f.column.table == kFactTable) pass &= f.range.contains(layout.fact.columns[f.column.column][row]);
                    CHECK_FALSE(pass);
                }
            }
    }
}

TEST_CASE("tuned state round-trips through its files")
{
    Rng rng(34);
    auto w = random_workload();
    auto db = generate_database(w.schema, 7);
    std::vector<Batch> tuning{random_batch(rng, w)};
    TunerConfig tc;
    tc.sample_rate = 0.25;
    tc.partitioner.ps_min = 500;
    tc.blocking = {32, 256};
    tc.model.c_f = 1.0;
    auto t = tune(db, tuning, tc);

    std::stringstream vs;
    write_view_store(vs, w.schema.hash(), t.views, w.schema);
    auto views = read_view_store(vs, w.schema.hash(), w.schema);
    CHECK(views.size() == t.views.size());
    for (auto &[key, v] : t.views) {
        auto *u = views.find(key.partition, key.tables);
        REQUIRE(u);
        CHECK(u->columns == v.columns);
        CHECK(u->data == v.data);
        CHECK(u->blocks.offsets == v.blocks.offsets);
        CHECK(u->blocks.zone_min == v.blocks.zone_min);
    }
    auto layout = parse_layout(t.layout.to_text(), w.schema, t.layout.tree, t.layout.fact);
    CHECK(layout.partitions.size() == t.layout.partitions.size());
    for (std::size_t p = 0; p < layout.partitions.size(); ++p) {
        CHECK(layout.partitions[p].blocks.offsets == t.layout.partitions[p].blocks.offsets);
        CHECK(layout.partitions[p].blocks.zone_max == t.layout.partitions[p].blocks.zone_max);
    }
    CHECK_THROWS_AS(parse_layout("layout partitions=1 rows=3\n", w.schema, t.layout.tree, t.layout.fact), DataError);
}

TEST_CASE("a view store built for other data is refused")
{
    Rng rng(35);
    auto w = random_workload();
    auto db = generate_database(w.schema, 8);
    std::vector<Batch> tuning{random_batch(rng, w)};
    TunerConfig tc;
    tc.sample_rate = 0.25;
    tc.partitioner.ps_min = 500;
    tc.model.c_f = 1.0;
    auto t = tune(db, tuning, tc);
    if (t.views.empty()) return;
    auto flat = untuned_layout(db, {});
    ExecConfig ec;
    if (flat.partitions.size() != t.layout.partitions.size() || t.layout.partitions.size() > 1)
        CHECK_THROWS_AS(execute_batch(db, flat, &t.views, tuning[0], ec), ExecutionError);
}
