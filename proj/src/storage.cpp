#include <sharedb/storage.hpp>

#include "binary_io.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace sharedb {

/*======================================================================================================================
 * Schema
 *====================================================================================================================*/

std::optional<std::uint32_t> TableSpec::find_column(std::string_view n) const
{
    for (std::uint32_t i = 0; i < columns.size(); ++i)
        if (columns[i].name == n) return i;
    return std::nullopt;
}

std::optional<TableId> Schema::find_table(std::string_view name) const
{
    if (fact.name == name) return kFactTable;
    for (std::size_t i = 0; i < dims.size(); ++i)
        if (dims[i].name == name) return static_cast<TableId>(i + 1);
    return std::nullopt;
}

std::optional<std::uint32_t> Schema::find_dim(std::string_view name) const
{
    for (std::uint32_t i = 0; i < dims.size(); ++i)
        if (dims[i].name == name) return i;
    return std::nullopt;
}

ColumnRef Schema::resolve(std::string_view q) const
{
    auto dot = q.find('.');
    if (dot == std::string_view::npos) throw ConfigError("expected table.column, got '" + std::string(q) + "'");
    auto t = find_table(q.substr(0, dot));
    if (!t) throw ConfigError("unknown table '" + std::string(q.substr(0, dot)) + "'");
    auto c = table(*t).find_column(q.substr(dot + 1));
    if (!c) throw ConfigError("unknown attribute '" + std::string(q) + "'");
    return {*t, *c};
}

std::string Schema::column_name(ColumnRef c) const
{
    const auto &t = table(c.table);
    return t.name + "." + t.columns.at(c.column).name;
}

std::uint32_t Schema::fk_column(std::uint32_t dim) const
{
    for (auto &fk : foreign_keys)
        if (fk.dim == dim) return fk.fact_column;
    throw ConfigError("fact table has no foreign key into dimension '" + dims.at(dim).name + "'");
}

bool Schema::is_fk_column(std::uint32_t c) const
{
    return std::any_of(foreign_keys.begin(), foreign_keys.end(), [c](auto &fk) { return fk.fact_column == c; });
}

std::uint32_t Schema::add_dimension(std::string name, std::uint64_t rows)
{
    TableSpec t;
    t.name = std::move(name);
    t.rows = rows;
    t.columns.push_back({"id", 0, static_cast<std::int32_t>(rows)});
    dims.push_back(std::move(t));
    return static_cast<std::uint32_t>(dims.size() - 1);
}

void Schema::add_foreign_key(std::string column_name, std::uint32_t dim)
{
    fact.columns.push_back({std::move(column_name), 0, static_cast<std::int32_t>(dims.at(dim).rows)});
    foreign_keys.push_back({static_cast<std::uint32_t>(fact.columns.size() - 1), dim});
}

void Schema::validate() const
{
    if (fact.name.empty()) throw ConfigError("schema has no fact table");
    if (fact.rows == 0) throw ConfigError("fact table '" + fact.name + "' has zero rows");
    if (fact.rows > std::numeric_limits<std::uint32_t>::max())
        throw ConfigError("fact table '" + fact.name + "' exceeds 2^32 rows");
    if (dims.size() > kMaxDimensions) throw ConfigError("more than 32 dimensions");
    auto check_table = [](const TableSpec &t) {
        for (auto &c : t.columns)
            if (c.lo >= c.hi) throw ConfigError("column '" + t.name + "." + c.name + "' has an empty domain");
    };
    check_table(fact);
    for (auto &d : dims) {
        if (d.rows == 0) throw ConfigError("dimension '" + d.name + "' has zero rows");
        if (d.rows > static_cast<std::uint64_t>(std::numeric_limits<std::int32_t>::max()))
            throw ConfigError("dimension '" + d.name + "' is too large");
        if (d.columns.empty() || d.columns[0].name != "id")
            throw ConfigError("dimension '" + d.name + "' lacks its primary key column");
        check_table(d);
    }
    std::vector<int> seen(dims.size(), 0);
    for (auto &fk : foreign_keys) {
        if (fk.dim >= dims.size()) throw ConfigError("foreign key references a missing dimension");
        if (fk.fact_column >= fact.columns.size()) throw ConfigError("foreign key column out of range");
        if (seen[fk.dim]++) throw ConfigError("dimension '" + dims[fk.dim].name + "' is referenced twice");
        auto &c = fact.columns[fk.fact_column];
        if (c.lo != 0 || static_cast<std::uint64_t>(c.hi) != dims[fk.dim].rows)
            throw ConfigError("foreign key '" + fact.name + "." + c.name + "' does not match the key range of '" +
                              dims[fk.dim].name + "'");
    }
}

std::uint64_t Schema::hash() const
{
    std::ostringstream os;
    auto put = [&](const TableSpec &t) {
        os << t.name << ':' << t.rows << '{';
        for (auto &c : t.columns) os << c.name << '[' << c.lo << ',' << c.hi << ')';
        os << '}';
    };
    put(fact);
    for (auto &d : dims) put(d);
    for (auto &fk : foreign_keys) os << fk.fact_column << "->" << fk.dim << ';';
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : os.str()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/*======================================================================================================================
 * Data generation
 *====================================================================================================================*/

namespace {

std::vector<std::int32_t> uniform_column(std::uint64_t rows, std::int32_t lo, std::int32_t hi, std::uint64_t seed)
{
    std::mt19937_64 gen(seed);
    std::vector<std::int32_t> v(rows);
    auto span = static_cast<std::uint64_t>(static_cast<std::int64_t>(hi) - lo);
    for (auto &x : v) x = static_cast<std::int32_t>(lo + static_cast<std::int64_t>(bounded(gen, span)));
    return v;
}

std::uint64_t column_seed(std::uint64_t seed, TableId t, std::uint32_t c)
{
    return mix64(mix64(seed) ^ mix64((std::uint64_t{t} << 32) | c));
}

} // namespace

Database generate_database(const Schema &schema, std::uint64_t seed)
{
    schema.validate();
    Database db;
    db.schema = schema;

    db.fact.name = schema.fact.name;
    db.fact.row_count = schema.fact.rows;
    for (std::uint32_t c = 0; c < schema.fact.columns.size(); ++c) {
        auto &spec = schema.fact.columns[c];
        db.fact.columns.push_back(uniform_column(schema.fact.rows, spec.lo, spec.hi, column_seed(seed, 0, c)));
    }

    for (std::uint32_t d = 0; d < schema.dims.size(); ++d) {
        auto &spec = schema.dims[d];
        ColumnarTable t;
        t.name = spec.name;
        t.row_count = spec.rows;
        // primary key: shuffled dense range
        std::vector<std::int32_t> pk(spec.rows);
        std::iota(pk.begin(), pk.end(), 0);
        std::mt19937_64 gen(column_seed(seed, d + 1, 0));
        for (std::uint64_t i = spec.rows; i > 1; --i) std::swap(pk[i - 1], pk[bounded(gen, i)]);
        t.columns.push_back(std::move(pk));
        for (std::uint32_t c = 1; c < spec.columns.size(); ++c) {
            auto &cs = spec.columns[c];
            t.columns.push_back(uniform_column(spec.rows, cs.lo, cs.hi, column_seed(seed, d + 1, c)));
        }
        db.dims.push_back(std::move(t));
    }
    return db;
}

ColumnarTable apply_order(const ColumnarTable &table, std::span<const std::uint32_t> order)
{
    SHAREDB_CHECK(order.size() == table.row_count, "order must be a permutation of the rows");
    ColumnarTable out;
    out.name = table.name;
    out.row_count = table.row_count;
    out.columns.reserve(table.columns.size());
    for (auto &col : table.columns) {
        std::vector<std::int32_t> v(col.size());
        for (std::size_t i = 0; i < order.size(); ++i) v[i] = col[order[i]];
        out.columns.push_back(std::move(v));
    }
    return out;
}

/*======================================================================================================================
 * Zone maps
 *====================================================================================================================*/

PredicateClassification classify_predicate(ZoneMap zone, Range p)
{
    if (zone.empty() || p.empty() || p.hi <= zone.min || p.lo > zone.max) return PredicateClassification::AlwaysFalse;
    if (p.lo <= zone.min && zone.max < p.hi) return PredicateClassification::AlwaysTrue;
    return PredicateClassification::Ambivalent;
}

double overlap_fraction(ZoneMap zone, Range p)
{
    if (zone.empty()) return 0.0;
    std::int64_t lo = std::max(zone.min, p.lo);
    std::int64_t hi = std::min(zone.max + 1, p.hi);
    if (hi <= lo) return 0.0;
    return static_cast<double>(hi - lo) / static_cast<double>(zone.max - zone.min + 1);
}

const char *to_string(PredicateClassification c)
{
    switch (c) {
        case PredicateClassification::AlwaysTrue: return "AlwaysTrue";
        case PredicateClassification::AlwaysFalse: return "AlwaysFalse";
        case PredicateClassification::Ambivalent: return "Ambivalent";
    }
    return "?";
}

std::optional<std::size_t> BlockLayout::zone_slot(ColumnRef c) const
{
    for (std::size_t i = 0; i < zone_columns.size(); ++i)
        if (zone_columns[i] == c) return i;
    return std::nullopt;
}

BlockLayout BlockLayout::fixed(std::uint64_t rows, std::uint64_t block_rows)
{
    SHAREDB_CHECK(block_rows > 0, "block size must be positive");
    BlockLayout l;
    for (std::uint64_t r = block_rows; r < rows; r += block_rows) l.offsets.push_back(r);
    if (rows > 0) l.offsets.push_back(rows);
    return l;
}

void build_zone_maps(BlockLayout &layout, std::span<const ColumnRef> names,
                     std::span<const std::span<const std::int32_t>> columns)
{
    SHAREDB_CHECK(names.size() == columns.size(), "one value array per zone column");
    auto nb = layout.num_blocks();
    layout.zone_columns.assign(names.begin(), names.end());
    layout.zone_min.assign(names.size() * nb, 0);
    layout.zone_max.assign(names.size() * nb, -1);
    for (std::size_t s = 0; s < names.size(); ++s) {
        auto col = columns[s];
        if (col.size() < layout.num_rows())
            throw ConfigError("zone-map column is shorter than the block layout");
        for (std::size_t b = 0; b < nb; ++b) {
            auto first = col.begin() + static_cast<std::ptrdiff_t>(layout.offsets[b]);
            auto last = col.begin() + static_cast<std::ptrdiff_t>(layout.offsets[b + 1]);
            if (first == last) continue;
            auto [mn, mx] = std::minmax_element(first, last);
            layout.zone_min[s * nb + b] = *mn;
            layout.zone_max[s * nb + b] = *mx;
        }
    }
}

/*======================================================================================================================
 * Partition tree
 *====================================================================================================================*/

PartitionTree PartitionTree::single_leaf()
{
    PartitionTree t;
    Node leaf;
    leaf.leaf_id = 0;
    t.nodes.push_back(leaf);
    return t;
}

std::size_t PartitionTree::num_leaves() const
{
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](auto &n) { return n.is_leaf(); }));
}

int PartitionTree::route(const ColumnarTable &fact, std::uint64_t row) const
{
    int i = 0;
    while (!nodes[i].is_leaf()) {
        auto &n = nodes[i];
        i = fact.columns[n.column][row] < n.split ? n.left : n.right;
    }
    return nodes[i].leaf_id;
}

std::vector<Predicate> PartitionTree::leaf_bounds(int leaf_id) const
{
    // parent links are not stored; walk down from the root along the unique path
    std::vector<Predicate> out;
    std::vector<std::pair<int, std::vector<Predicate>>> stack{{0, {}}};
    while (!stack.empty()) {
        auto [i, acc] = std::move(stack.back());
        stack.pop_back();
        auto &n = nodes[i];
        if (n.is_leaf()) {
            if (n.leaf_id == leaf_id) return acc;
            continue;
        }
        auto narrow = [&](std::vector<Predicate> bounds, bool left) {
            ColumnRef c{kFactTable, n.column};
            auto it = std::find_if(bounds.begin(), bounds.end(), [&](auto &p) { return p.column == c; });
            if (it == bounds.end()) {
                bounds.push_back({c, Range{}});
                it = bounds.end() - 1;
            }
            if (left) it->range.hi = std::min(it->range.hi, n.split);
            else it->range.lo = std::max(it->range.lo, n.split);
            return bounds;
        };
        stack.push_back({n.right, narrow(acc, false)});
        stack.push_back({n.left, narrow(acc, true)});
    }
    return out;
}

std::vector<int> PartitionTree::leaves_in_order() const
{
    std::vector<int> out;
    std::vector<int> stack{0};
    while (!stack.empty()) {
        int i = stack.back();
        stack.pop_back();
        if (nodes[i].is_leaf()) {
            out.push_back(nodes[i].leaf_id);
        } else {
            stack.push_back(nodes[i].right);
            stack.push_back(nodes[i].left);
        }
    }
    return out;
}

std::string PartitionTree::to_text(const Schema &schema, std::span<const std::uint64_t> leaf_rows) const
{
    std::ostringstream os;
    auto rec = [&](auto &self, int i, int depth) -> void {
        auto &n = nodes[i];
        os << std::string(2 * depth, ' ');
        if (n.is_leaf()) {
            os << "leaf " << n.leaf_id;
            if (static_cast<std::size_t>(n.leaf_id) < leaf_rows.size()) os << " rows=" << leaf_rows[n.leaf_id];
            os << '\n';
            return;
        }
        os << "split " << schema.column_name({kFactTable, n.column}) << " < " << n.split << '\n';
        self(self, n.left, depth + 1);
        self(self, n.right, depth + 1);
    };
    rec(rec, 0, 0);
    return os.str();
}

PartitionTree PartitionTree::parse(std::string_view text, const Schema &schema)
{
    std::vector<std::string> lines;
    {
        std::istringstream is{std::string(text)};
        for (std::string l; std::getline(is, l);)
            if (l.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(l);
    }
    PartitionTree t;
    std::size_t pos = 0;
    auto rec = [&](auto &self, int depth) -> int {
        if (pos >= lines.size()) throw DataError("partition tree: unexpected end of input");
        const auto &l = lines[pos++];
        auto indent = l.find_first_not_of(' ');
        if (indent != static_cast<std::size_t>(2 * depth))
            throw DataError("partition tree: bad indentation at line " + std::to_string(pos));
        std::istringstream ls(l.substr(indent));
        std::string kw;
        ls >> kw;
        int id = static_cast<int>(t.nodes.size());
        t.nodes.emplace_back();
        if (kw == "leaf") {
            int leaf = -1;
            ls >> leaf;
            if (leaf < 0) throw DataError("partition tree: bad leaf id at line " + std::to_string(pos));
            t.nodes[id].leaf_id = leaf;
            return id;
        }
        if (kw != "split") throw DataError("partition tree: expected 'split' or 'leaf' at line " + std::to_string(pos));
        std::string col, lt;
        std::int64_t split;
        if (!(ls >> col >> lt >> split) || lt != "<")
            throw DataError("partition tree: malformed split at line " + std::to_string(pos));
        auto ref = schema.resolve(col);
        if (ref.table != kFactTable) throw DataError("partition tree: cut on non-fact attribute " + col);
        t.nodes[id].column = ref.column;
        t.nodes[id].split = split;
        int left = self(self, depth + 1);
        int right = self(self, depth + 1);
        t.nodes[id].left = left;
        t.nodes[id].right = right;
        return id;
    };
    rec(rec, 0);
    if (pos != lines.size()) throw DataError("partition tree: trailing lines");
    return t;
}

bool operator==(const PartitionTree &a, const PartitionTree &b)
{
    if (a.nodes.size() != b.nodes.size()) return false;
    for (std::size_t i = 0; i < a.nodes.size(); ++i) {
        auto &x = a.nodes[i];
        auto &y = b.nodes[i];
        if (x.leaf_id != y.leaf_id) return false;
        if (!x.is_leaf() && (x.column != y.column || x.split != y.split || x.left != y.left || x.right != y.right))
            return false;
    }
    return true;
}

Reorganized reorganize(const ColumnarTable &fact, const PartitionTree &tree)
{
    auto leaves = tree.num_leaves();
    std::vector<std::uint32_t> leaf_of(fact.row_count);
    std::vector<std::uint64_t> counts(leaves, 0);
    for (std::uint64_t r = 0; r < fact.row_count; ++r) {
        auto l = static_cast<std::uint32_t>(tree.route(fact, r));
        leaf_of[r] = l;
        ++counts[l];
    }
    Reorganized out;
    std::vector<std::uint64_t> next(leaves, 0);
    std::uint64_t off = 0;
    out.partitions.resize(leaves);
    for (std::uint32_t l = 0; l < leaves; ++l) {
        auto &p = out.partitions[l];
        p.id = l;
        p.begin = off;
        p.end = off + counts[l];
        p.bounds = tree.leaf_bounds(static_cast<int>(l));
        p.blocks = BlockLayout::fixed(counts[l], std::max<std::uint64_t>(counts[l], 1));
        next[l] = off;
        off += counts[l];
    }
    std::vector<std::uint32_t> order(fact.row_count);
    out.old_to_new.resize(fact.row_count);
    for (std::uint64_t r = 0; r < fact.row_count; ++r) {
        auto n = next[leaf_of[r]]++;
        order[n] = static_cast<std::uint32_t>(r);
        out.old_to_new[r] = static_cast<std::uint32_t>(n);
    }
    out.table = apply_order(fact, order);
    return out;
}

/*======================================================================================================================
 * Snapshots
 *====================================================================================================================*/

namespace {

using namespace detail;

constexpr char kSnapshotMagic[8] = {'S', 'D', 'B', 'S', 'N', 'A', 'P', '\0'};
constexpr std::uint32_t kSnapshotVersion = 1;

} // namespace

void write_table_snapshot(std::ostream &out, std::uint64_t schema_hash, std::span<const ColumnarTable> tables)
{
    out.write(kSnapshotMagic, sizeof kSnapshotMagic);
    put_le<std::uint32_t>(out, kSnapshotVersion);
    put_le<std::uint64_t>(out, schema_hash);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tables.size()));
    for (auto &t : tables) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
        out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        put_le<std::uint64_t>(out, t.row_count);
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.columns.size()));
        for (auto &c : t.columns) put_column(out, c);
    }
}

std::vector<ColumnarTable> read_table_snapshot(std::istream &in, std::uint64_t expected_schema_hash)
{
    char magic[sizeof kSnapshotMagic];
    if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, kSnapshotMagic))
        throw DataError("not a table snapshot (bad magic)");
    if (auto v = get_le<std::uint32_t>(in); v != kSnapshotVersion)
        throw DataError("unsupported snapshot version " + std::to_string(v));
    if (auto h = get_le<std::uint64_t>(in); h != expected_schema_hash)
        throw DataError("snapshot schema hash does not match the workload schema");
    auto n = get_le<std::uint32_t>(in);
    std::vector<ColumnarTable> tables(n);
    for (auto &t : tables) {
        auto len = get_le<std::uint32_t>(in);
        t.name.resize(len);
        if (!in.read(t.name.data(), len)) throw DataError("snapshot truncated");
        t.row_count = get_le<std::uint64_t>(in);
        auto ncols = get_le<std::uint32_t>(in);
        t.columns.resize(ncols);
        for (auto &c : t.columns) c = get_column(in, t.row_count);
    }
    return tables;
}

} // namespace sharedb
