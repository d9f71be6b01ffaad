#include <doctest.h>

#include "support.hpp"

#include <sharedb/partitioner.hpp>
#include <sharedb/storage.hpp>
#include <sharedb/workload.hpp>

#include <algorithm>
#include <numeric>
#include <sstream>

using namespace sharedb;
using namespace sharedb::test;

TEST_CASE("predicate classification against a zone")
{
    ZoneMap z{10, 19};
    CHECK(classify_predicate(z, {10, 20}) == PredicateClassification::AlwaysTrue);
    CHECK(classify_predicate(z, {0, 100}) == PredicateClassification::AlwaysTrue);
    CHECK(classify_predicate(z, {20, 30}) == PredicateClassification::AlwaysFalse);
    CHECK(classify_predicate(z, {0, 10}) == PredicateClassification::AlwaysFalse);
    CHECK(classify_predicate(z, {15, 30}) == PredicateClassification::Ambivalent);
    CHECK(classify_predicate(z, {11, 19}) == PredicateClassification::Ambivalent);
    CHECK(classify_predicate(ZoneMap{}, {0, 100}) == PredicateClassification::AlwaysFalse);
    CHECK(overlap_fraction(z, {15, 20}) == doctest::Approx(0.5));
    CHECK(overlap_fraction(z, {30, 40}) == 0.0);
}

TEST_CASE("classification agrees with the block's actual values" * doctest::description("random blocks"))
{
    Rng rng(1);
    for (int i = 0; i < 2000; ++i) {
        std::vector<std::int32_t> v(1 + pick(rng, 20));
        for (auto &x : v) x = static_cast<std::int32_t>(pick(rng, 50));
        auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        ZoneMap z{*lo, *hi};
        std::int64_t a = static_cast<std::int64_t>(pick(rng, 60)) - 5;
        Range r{a, a + static_cast<std::int64_t>(pick(rng, 30))};
        auto in = [&](std::int32_t x) { return r.contains(x); };
        switch (classify_predicate(z, r)) {
        case PredicateClassification::AlwaysTrue: CHECK(std::all_of(v.begin(), v.end(), in)); break;
        case PredicateClassification::AlwaysFalse: CHECK(std::none_of(v.begin(), v.end(), in)); break;
        case PredicateClassification::Ambivalent: break;
        }
    }
}

TEST_CASE("zone maps are tight per block")
{
    std::vector<std::int32_t> col{5, 1, 9, 3, 7, 2, 8};
    auto layout = BlockLayout::fixed(col.size(), 3);
    CHECK(layout.num_blocks() == 3);
    ColumnRef c{kFactTable, 0};
    std::span<const std::int32_t> s(col);
    build_zone_maps(layout, std::span(&c, 1), std::span(&s, 1));
    auto slot = layout.zone_slot(c);
    REQUIRE(slot);
    CHECK(layout.zone(*slot, 0) == ZoneMap{1, 9});
    CHECK(layout.zone(*slot, 1) == ZoneMap{2, 7});
    CHECK(layout.zone(*slot, 2) == ZoneMap{8, 8});
}

TEST_CASE("generated data is deterministic and well formed")
{
    auto w = parse_workload(kFourDimSchema);
    auto a = generate_database(w.schema, 5), b = generate_database(w.schema, 5), c = generate_database(w.schema, 6);
    CHECK(a.fact == b.fact);
    CHECK(a.dims == b.dims);
    CHECK_FALSE(a.fact == c.fact);
    CHECK(a.fact.row_count == 1000);
    for (std::uint32_t d = 0; d < a.dims.size(); ++d) {
        auto pk = a.dims[d].columns[0];
        std::sort(pk.begin(), pk.end());
        std::vector<std::int32_t> expect(pk.size());
        std::iota(expect.begin(), expect.end(), 0);
        CHECK(pk == expect);
        for (auto fk : a.fact.column(w.schema.fk_column(d)))
            CHECK((fk >= 0 && static_cast<std::uint64_t>(fk) < a.dims[d].row_count));
    }
}

TEST_CASE("table snapshots round-trip and reject other schemas")
{
    auto w = parse_workload(kFourDimSchema);
    auto db = generate_database(w.schema, 3);
    std::vector<ColumnarTable> tables{db.fact, db.dims[0]};
    std::stringstream ss;
    write_table_snapshot(ss, w.schema.hash(), tables);
    auto copy = ss.str();
    CHECK(read_table_snapshot(ss, w.schema.hash()) == tables);
    std::stringstream other(copy);
    CHECK_THROWS_AS(read_table_snapshot(other, w.schema.hash() ^ 1), DataError);
    std::stringstream cut(copy.substr(0, copy.size() / 2));
    CHECK_THROWS_AS(read_table_snapshot(cut, w.schema.hash()), DataError);
}

TEST_CASE("partition trees route, bound and round-trip")
{
    auto w = parse_workload(kFourDimSchema);
    auto db = generate_database(w.schema, 3);
    auto x = w.schema.fact.find_column("x").value();
    PartitionTree t;
    t.nodes = {{x, 40, 1, 2, -1}, {0, 0, -1, -1, 0}, {x, 70, 3, 4, -1}, {0, 0, -1, -1, 1}, {0, 0, -1, -1, 2}};
    CHECK(t.num_leaves() == 3);
    CHECK(PartitionTree::parse(t.to_text(w.schema), w.schema) == t);
    auto bounds = t.leaf_bounds(1);
    REQUIRE(bounds.size() == 1);
    CHECK(bounds[0].range.lo == 40);
    CHECK(bounds[0].range.hi == 70);

    auto r = reorganize(db.fact, t);
    REQUIRE(r.partitions.size() == 3);
    std::uint64_t total = 0;
    for (auto &p : r.partitions) {
        total += p.rows();
        for (auto row = p.begin; row < p.end; ++row) {
            CHECK(t.route(r.table, row) == static_cast<int>(p.id));
            for (auto &b : p.bounds) CHECK(b.range.contains(r.table.columns[b.column.column][row]));
        }
    }
    CHECK(total == db.fact.row_count);
    // rows are a permutation of the original
    for (std::uint64_t i = 0; i < db.fact.row_count; ++i)
        for (std::size_t c = 0; c < db.fact.columns.size(); ++c)
            CHECK(r.table.columns[c][r.old_to_new[i]] == db.fact.columns[c][i]);
}

TEST_CASE("workload parser reports the offending line")
{
    auto bad = [](const std::string &text, const std::string &needle) {
        try {
            parse_workload(text);
            return false;
        } catch (const ConfigError &e) {
            return std::string(e.what()).find(needle) != std::string::npos;
        }
    };
    std::string base = kFourDimSchema;
    CHECK(bad(base + "template t sum=F.nope\n", "nope"));
    CHECK(bad(base + "template t sum=F.v join=Z\n", "Z"));
    CHECK(bad(base + "batch run R\n  frobnicate\nend\n", "line 18"));
    CHECK(bad(base + "batch run R\n  query join=B\nend\n", "sum="));
    CHECK(bad(base + "batch run R\n  query sum=F.v filter=B.p[0,5)\nend\n", "B"));
}

TEST_CASE("workload text round-trips")
{
    std::string text = std::string(kFourDimSchema) + R"(
template t sum=F.v join=B,E filter=F.x[w=10,step=5] filter=E.s[w=30]
batch tune T seed=1
  use t count=5
  query sum=F.v join=C filter=F.x[3,9)
end
batch run R seed=2
  use t count=3 shift=7
end
)";
    auto w = parse_workload(text);
    REQUIRE(w.tuning.size() == 1);
    REQUIRE(w.runtime.size() == 1);
    CHECK(w.tuning[0].queries.size() == 6);
    auto again = parse_workload(to_text(w));
    for (std::size_t b = 0; b < w.tuning.size(); ++b)
        for (std::size_t q = 0; q < w.tuning[b].queries.size(); ++q)
            CHECK(to_text(again.tuning[b].queries[q], w.schema) == to_text(w.tuning[b].queries[q], w.schema));
    CHECK(again.schema.hash() == w.schema.hash());
    // filters land in the template window
    for (auto &q : w.tuning[0].queries)
        for (auto &f : q.filters) CHECK_FALSE(f.range.empty());
}

TEST_CASE("subqueries are the non-empty subsets of join sets, per batch")
{
    auto w = parse_workload(kFourDimSchema);
    Batch b = two_query_batch(w.schema);
    std::vector<Batch> batches{b};
    auto cat = enumerate_subqueries(batches);
    // Q1 {B,C,D}: 7 subsets; Q2 {B,E}: 3, of which {B} is shared
    CHECK(cat.entries.size() == 9);
    auto bc = cat.find(0, dim_bit(0) | dim_bit(1));
    REQUIRE(bc);
    CHECK(cat.entries[*bc].weight == 3);
    CHECK(cat.of_query[0][1].size() == 3);
}

TEST_CASE("homogeneity on small matrices")
{
    AccessMatrix w;
    w.weights = {2, 3};
    w.sample_rows = {0, 1, 2};
    w.accessed = {{0}, {0}, {1}};
    std::vector<std::uint32_t> same{0, 1}, mixed{0, 2}, all{0, 1, 2};
    CHECK(homogeneity(same, w) == doctest::Approx(2.0));
    CHECK(homogeneity(mixed, w) == doctest::Approx(1.0));
    CHECK(homogeneity(all, w) == doctest::Approx((2 + 2 + 3) / 5.0));
    std::vector<std::uint32_t> none;
    CHECK(homogeneity(none, w) == 0.0);
}

TEST_CASE("the partitioner separates disjoint access patterns")
{
    auto w = parse_workload(std::string(kFourDimSchema) + R"(
batch tune T seed=1
  query sum=F.v join=B,C filter=F.x[0,50)
  query sum=F.v join=D,E filter=F.x[50,100)
end
)");
    w.schema.fact.rows = 20000;
    auto db = generate_database(w.schema, 9);
    auto cat = enumerate_subqueries(w.tuning);
    auto m = record_access_matrix(db.fact, w.tuning, cat, 0.2, 1);
    auto cuts = candidate_cuts(w.tuning);
    PartitionerConfig pc;
    pc.ps_min = 1000;
    auto tree = partition_tree(db.fact, w.schema, m, cuts, pc);
    CHECK(tree.num_leaves() >= 2);
    CHECK(tree.nodes[0].split == 50);
    auto single = PartitionTree::single_leaf();
    CHECK(aggregate_homogeneity(tree, db.fact, m) > aggregate_homogeneity(single, db.fact, m));

    pc.ps_min = 1 << 20;
    CHECK(partition_tree(db.fact, w.schema, m, cuts, pc).is_single_leaf());
}

TEST_CASE("partitioning never lowers aggregate homogeneity" * doctest::description("random workloads"))
{
    Rng rng(77);
    auto w = parse_workload(std::string(kFourDimSchema) + R"(
template a sum=F.v join=B,C filter=F.x[w=20,step=10]
template b sum=F.v join=E filter=F.x[w=40,step=5]
template c sum=F.v join=B,D,E filter=F.x[w=10,step=1]
)");
    w.schema.fact.rows = 8000;
    auto db = generate_database(w.schema, 2);
    for (int i = 0; i < 10; ++i) {
        Batch b;
        for (auto &t : w.templates)
            for (std::size_t k = pick(rng, 4); k-- > 0;) b.queries.push_back(instantiate(t, w.schema, rng));
        for (std::uint32_t q = 0; q < b.queries.size(); ++q) b.queries[q].id = q;
        if (b.queries.empty()) continue;
        std::vector<Batch> batches{b};
        auto cat = enumerate_subqueries(batches);
        auto m = record_access_matrix(db.fact, batches, cat, 0.25, i);
        PartitionerConfig pc;
        pc.ps_min = 500;
        auto tree = partition_tree(db.fact, w.schema, m, candidate_cuts(batches), pc);
        CHECK(aggregate_homogeneity(tree, db.fact, m) >=
              aggregate_homogeneity(PartitionTree::single_leaf(), db.fact, m) - 1e-9);
        for (auto &p : reorganize(db.fact, tree).partitions)
            CHECK(static_cast<double>(p.rows()) >= 0.5 * pc.ps_min);   // estimates from a 25% sample
    }
}

TEST_CASE("blocks group rows by bucket and respect the size limits")
{
    Rng rng(8);
    std::vector<std::int32_t> a(5000), b(5000);
    for (auto &x : a) x = static_cast<std::int32_t>(pick(rng, 100));
    for (auto &x : b) x = static_cast<std::int32_t>(pick(rng, 10));
    std::vector<std::span<const std::int32_t>> keys{a, b};
    std::vector<std::vector<std::int64_t>> bounds{{25, 50, 75}, {5}};
    BlockingConfig cfg{100, 400};
    auto blk = build_blocks(a.size(), keys, bounds, cfg);
    REQUIRE(blk.order.size() == a.size());
    auto sorted = blk.order;
    std::sort(sorted.begin(), sorted.end());
    for (std::uint32_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
    auto bucket = [&](std::uint32_t row) {
        auto ba = std::upper_bound(bounds[0].begin(), bounds[0].end(), a[row]) - bounds[0].begin();
        auto bb = std::upper_bound(bounds[1].begin(), bounds[1].end(), b[row]) - bounds[1].begin();
        return ba * 2 + bb;
    };
    for (std::size_t i = 1; i < blk.order.size(); ++i) CHECK(bucket(blk.order[i - 1]) <= bucket(blk.order[i]));
    CHECK(blk.offsets.back() == a.size());
    for (std::size_t k = 0; k + 1 < blk.offsets.size(); ++k) CHECK(blk.offsets[k + 1] - blk.offsets[k] <= cfg.max_block);
    CHECK(static_cast<double>(a.size()) / (blk.offsets.size() - 1) >= static_cast<double>(cfg.min_average));
}
