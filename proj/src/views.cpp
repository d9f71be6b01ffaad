#include <sharedb/views.hpp>

#include <sharedb/parallel.hpp>

#include "binary_io.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

namespace sharedb {

namespace {

void add_query_columns(const Schema &schema, const Query &q, DimMask tables, std::vector<ColumnRef> &out)
{
    out.push_back({kFactTable, q.measure});
    for (auto &f : q.filters)
        if (f.column.table == kFactTable || (dim_bit(f.column.table - 1) & tables)) out.push_back(f.column);
    for (std::uint32_t d = 0; d < schema.dims.size(); ++d)
        if ((q.joins & dim_bit(d)) && !(tables & dim_bit(d))) out.push_back({kFactTable, schema.fk_column(d)});
}

void sort_unique(std::vector<ColumnRef> &v)
{
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

} // namespace

std::vector<ColumnRef> view_columns(const Schema &schema, std::span<const Batch> tuning, DimMask tables)
{
    std::vector<ColumnRef> out;
    for (auto &b : tuning)
        for (auto &q : b.queries)
            if ((q.joins & tables) == tables) add_query_columns(schema, q, tables, out);
    sort_unique(out);
    return out;
}

std::vector<ColumnRef> required_columns(const Schema &schema, const Batch &batch, const QuerySet &queries,
                                        DimMask tables)
{
    std::vector<ColumnRef> out;
    queries.for_each([&](std::size_t q) { add_query_columns(schema, batch.queries[q], tables, out); });
    sort_unique(out);
    return out;
}

/*======================================================================================================================
 * View store
 *====================================================================================================================*/

SourceData View::source() const
{
    SourceData s;
    s.blocks = &blocks;
    s.names = columns;
    for (auto &c : data) s.columns.emplace_back(c);
    return s;
}

bool View::covers(std::span<const ColumnRef> needed) const
{
    return std::includes(columns.begin(), columns.end(), needed.begin(), needed.end());
}

void ViewStore::add(View v)
{
    auto key = v.key;
    if (!views_.emplace(key, std::move(v)).second) throw ExecutionError("duplicate view for a partition");
}

const View *ViewStore::find(std::uint32_t partition, DimMask tables) const
{
    auto it = views_.find({partition, tables});
    return it == views_.end() ? nullptr : &it->second;
}

std::uint64_t ViewStore::total_bytes() const
{
    std::uint64_t s = 0;
    for (auto &[k, v] : views_) s += v.bytes();
    return s;
}

namespace {

void build_view_zones(View &v, const Schema &schema)
{
    std::vector<ColumnRef> names;
    std::vector<std::span<const std::int32_t>> cols;
    for (std::size_t i = 0; i < v.columns.size(); ++i) {
        auto c = v.columns[i];
        if (c.table == kFactTable && schema.is_fk_column(c.column)) continue;
        names.push_back(c);
        cols.emplace_back(v.data[i]);
    }
    build_zone_maps(v.blocks, names, cols);
}

View compute_view(const Database &db, const PhysicalLayout &layout, const ViewKey &key, std::span<const Batch> tuning,
                  const MaterializeConfig &config, const std::vector<DimHashTable> &pk_index)
{
    auto &schema = db.schema;
    if (key.partition >= layout.partitions.size())
        throw ExecutionError("view refers to missing partition " + std::to_string(key.partition));
    auto &part = layout.partitions[key.partition];
    const std::uint64_t rows = part.rows();

    View v;
    v.key = key;
    v.columns = view_columns(schema, tuning, key.tables);
    if (v.columns.empty()) throw ExecutionError("view of a table set no tuning query uses");

    // dimension row of every fact row, per joined dimension
    std::vector<std::vector<std::uint32_t>> dim_row(schema.dims.size());
    for (std::uint32_t d = 0; d < schema.dims.size(); ++d) {
        if (!(key.tables & dim_bit(d))) continue;
        auto fk = std::span<const std::int32_t>(layout.fact.columns[schema.fk_column(d)]).subspan(part.begin, rows);
        auto &rowmap = dim_row[d];
        rowmap.resize(rows);
        for (std::uint64_t r = 0; r < rows; ++r) {
            auto found = pk_index[d].find(fk[r]);
            if (found < 0) throw DataError("foreign key without a matching dimension row");
            rowmap[r] = static_cast<std::uint32_t>(found);
        }
    }
    std::vector<std::vector<std::int32_t>> data(v.columns.size());
    for (std::size_t i = 0; i < v.columns.size(); ++i) {
        auto c = v.columns[i];
        auto &out = data[i];
        out.resize(rows);
        if (c.table == kFactTable) {
            auto src = std::span<const std::int32_t>(layout.fact.columns[c.column]).subspan(part.begin, rows);
            std::copy(src.begin(), src.end(), out.begin());
        } else {
            auto &src = db.dims[c.table - 1].columns[c.column];
            auto &rowmap = dim_row[c.table - 1];
            for (std::uint64_t r = 0; r < rows; ++r) out[r] = src[rowmap[r]];
        }
    }

    // cluster on the view's filter attributes
    auto keys = blocking_keys(tuning, [&](ColumnRef c) {
        if (!config.cluster) return false;
        if (c.table == kFactTable && schema.is_fk_column(c.column)) return false;
        return std::binary_search(v.columns.begin(), v.columns.end(), c);
    });
    std::vector<std::span<const std::int32_t>> key_cols;
    for (auto c : keys.columns) {
        auto pos = std::lower_bound(v.columns.begin(), v.columns.end(), c) - v.columns.begin();
        key_cols.emplace_back(data[pos]);
    }
    auto blocking = build_blocks(rows, key_cols, keys.bounds, config.blocking);
    v.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto &out = v.data[i];
        out.resize(rows);
        for (std::uint64_t r = 0; r < rows; ++r) out[r] = data[i][blocking.order[r]];
        data[i] = {};
    }
    v.blocks.offsets = std::move(blocking.offsets);
    build_view_zones(v, schema);

    double estimate = view_budget(rows, v.columns.size());
    if (static_cast<double>(v.bytes()) > estimate * config.slack)
        throw ExecutionError("view on partition " + std::to_string(key.partition) +
                             " exceeds its size estimate beyond the allowed slack");
    return v;
}

} // namespace

ViewStore materialize(const Database &db, const PhysicalLayout &layout, std::span<const ViewKey> keys,
                      std::span<const Batch> tuning, const MaterializeConfig &config)
{
    if (!(config.slack >= 1.0)) throw ConfigError("view size slack must be >= 1");
    DimMask used = 0;
    for (auto &k : keys) used |= k.tables;
    std::vector<DimHashTable> pk_index(db.schema.dims.size());
    for (std::uint32_t d = 0; d < db.schema.dims.size(); ++d)
        if (used & dim_bit(d)) pk_index[d] = DimHashTable(db.dims[d].columns[0]);

    std::vector<View> views(keys.size());
    parallel_for(keys.size(), 0, [&](std::size_t, std::size_t i) {
        views[i] = compute_view(db, layout, keys[i], tuning, config, pk_index);
    });
    ViewStore store;
    for (auto &v : views) store.add(std::move(v));
    return store;
}

/*======================================================================================================================
 * Snapshot
 *====================================================================================================================*/

namespace {

using namespace detail;

constexpr char kViewMagic[8] = {'S', 'D', 'B', 'V', 'I', 'E', 'W', '\0'};
constexpr std::uint32_t kViewVersion = 1;

} // namespace

void write_view_store(std::ostream &out, std::uint64_t schema_hash, const ViewStore &store, const Schema &)
{
    out.write(kViewMagic, sizeof kViewMagic);
    put_le<std::uint32_t>(out, kViewVersion);
    put_le<std::uint64_t>(out, schema_hash);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
    for (auto &[key, v] : store) {
        put_le<std::uint32_t>(out, key.partition);
        put_le<std::uint32_t>(out, key.tables);
        put_le<std::uint64_t>(out, v.rows());
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(v.columns.size()));
        for (auto c : v.columns) {
            put_le<std::uint32_t>(out, c.table);
            put_le<std::uint32_t>(out, c.column);
        }
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(v.blocks.num_blocks()));
        for (auto o : v.blocks.offsets) put_le<std::uint64_t>(out, o);
        for (auto &c : v.data) put_column(out, c);
    }
    if (!out) throw ExecutionError("failed to write view snapshot");
}

ViewStore read_view_store(std::istream &in, std::uint64_t expected_schema_hash, const Schema &schema)
{
    char magic[sizeof kViewMagic];
    if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, kViewMagic))
        throw DataError("not a view snapshot (bad magic)");
    if (auto ver = get_le<std::uint32_t>(in); ver != kViewVersion)
        throw DataError("unsupported view snapshot version " + std::to_string(ver));
    if (get_le<std::uint64_t>(in) != expected_schema_hash)
        throw DataError("view snapshot schema hash does not match the workload schema");
    ViewStore store;
    auto n = get_le<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < n; ++i) {
        View v;
        v.key.partition = get_le<std::uint32_t>(in);
        v.key.tables = get_le<std::uint32_t>(in);
        auto rows = get_le<std::uint64_t>(in);
        auto ncols = get_le<std::uint32_t>(in);
        for (std::uint32_t c = 0; c < ncols; ++c) {
            ColumnRef ref;
            ref.table = get_le<std::uint32_t>(in);
            ref.column = get_le<std::uint32_t>(in);
            if (ref.table >= schema.num_tables() || ref.column >= schema.table(ref.table).columns.size())
                throw DataError("view snapshot names a column outside the schema");
            v.columns.push_back(ref);
        }
        if (!std::is_sorted(v.columns.begin(), v.columns.end())) throw DataError("view columns must be sorted");
        auto nb = get_le<std::uint32_t>(in);
        v.blocks.offsets.resize(nb + 1);
        for (auto &o : v.blocks.offsets) o = get_le<std::uint64_t>(in);
        if (v.blocks.offsets.front() != 0 || v.blocks.offsets.back() != rows ||
            !std::is_sorted(v.blocks.offsets.begin(), v.blocks.offsets.end()))
            throw DataError("view snapshot has bad block offsets");
        for (std::uint32_t c = 0; c < ncols; ++c) v.data.push_back(get_column(in, rows));
        build_view_zones(v, schema);
        store.add(std::move(v));
    }
    return store;
}

/*======================================================================================================================
 * Workload graph
 *====================================================================================================================*/

std::vector<ColumnRef> fact_filter_columns(const Batch &batch)
{
    std::vector<ColumnRef> out;
    for (auto &q : batch.queries)
        for (auto &f : q.filters)
            if (f.column.table == kFactTable) out.push_back(f.column);
    sort_unique(out);
    return out;
}

WorkloadGraph build_workload_graph(const Database &db, const PhysicalLayout &layout, std::span<const Batch> tuning,
                                   const CostModel &model)
{
    model.validate();
    WorkloadGraph g;
    std::map<DimMask, std::size_t> ncols;
    auto columns_of = [&](DimMask t) {
        auto it = ncols.find(t);
        if (it == ncols.end()) it = ncols.emplace(t, view_columns(db.schema, tuning, t).size()).first;
        return it->second;
    };
    for (std::uint32_t b = 0; b < tuning.size(); ++b) {
        auto &batch = tuning[b];
        if (batch.queries.empty()) continue;
        auto dims = build_dimension_state(db, batch);
        auto cols = fact_filter_columns(batch);
        for (std::uint32_t p = 0; p < layout.partitions.size(); ++p) {
            auto &part = layout.partitions[p];
            auto skip = analyze_blocks(part.blocks, batch, batch.all(), cols, true);
            if (skip.touched.none()) continue;
            auto plan = build_global_plan(batch, skip.touched);
            auto loads = estimate_loads(plan, batch, part.blocks, skip, dims, model.filter_exponent);
            estimate_plan_cost(plan, loads, model);
            auto comp = g.add_component(p, b);
            std::vector<int> id(plan.nodes.size(), -1);
            for (auto &n : plan.nodes) {
                std::optional<ViewKey> key;
                if (n.materializable()) {
                    key = ViewKey{p, n.tables};
                    g.intern(*key, view_budget(part.rows(), columns_of(n.tables)));
                }
                int parent = n.input >= 0 ? id[n.input] : -1;
                id[n.id] = static_cast<int>(g.add_node(comp, parent, n.cost, key, static_cast<int>(n.id)));
            }
        }
    }
    return g;
}

} // namespace sharedb
