#pragma once

#include <sharedb/common.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sharedb {

/*======================================================================================================================
 * Schema
 *====================================================================================================================*/

/** A generated integer column.  Values are drawn uniformly from [lo, hi). */
struct ColumnSpec
{
    std::string name;
    std::int32_t lo = 0;
    std::int32_t hi = 100;
};

struct TableSpec
{
    std::string name;
    std::uint64_t rows = 0;
    std::vector<ColumnSpec> columns;

    std::optional<std::uint32_t> find_column(std::string_view name) const;
};

/** Fact column `fact_column` references dimension `dim` (0-based dimension index). */
struct ForeignKey
{
    std::uint32_t fact_column = 0;
    std::uint32_t dim = 0;
};

/** Star schema.  Every dimension has an implicit primary-key column 0 named `id` holding a permutation of
 * [0, rows); dimension attribute columns follow.  The fact table references each dimension through at most
 * one foreign-key column. */
struct Schema
{
    TableSpec fact;
    std::vector<TableSpec> dims;
    std::vector<ForeignKey> foreign_keys;

    std::size_t num_tables() const { return 1 + dims.size(); }
    const TableSpec &table(TableId t) const { return t == kFactTable ? fact : dims.at(t - 1); }
    TableSpec &table(TableId t) { return t == kFactTable ? fact : dims.at(t - 1); }

    std::optional<TableId> find_table(std::string_view name) const;
    /** Resolve "table.column"; throws ConfigError naming the unknown part. */
    ColumnRef resolve(std::string_view qualified) const;
    std::string column_name(ColumnRef c) const;

    /** Fact column holding the foreign key into dimension `dim`. */
    std::uint32_t fk_column(std::uint32_t dim) const;
    std::optional<std::uint32_t> find_dim(std::string_view name) const;
    bool is_fk_column(std::uint32_t fact_column) const;

    /** Throws ConfigError on zero-row tables, dangling or duplicate foreign keys, bad domains. */
    void validate() const;

    /** Stable 64-bit hash of the schema declaration (FNV-1a over a canonical text form). */
    std::uint64_t hash() const;

    /** Adds a dimension with its primary-key column; returns its dimension index. */
    std::uint32_t add_dimension(std::string name, std::uint64_t rows);
    /** Adds a fact foreign-key column referencing `dim`. */
    void add_foreign_key(std::string column_name, std::uint32_t dim);
};

/*======================================================================================================================
 * Columnar tables
 *====================================================================================================================*/

struct ColumnarTable
{
    std::string name;
    std::uint64_t row_count = 0;
    std::vector<std::vector<std::int32_t>> columns;

    std::span<const std::int32_t> column(std::uint32_t c) const { return columns.at(c); }
    friend bool operator==(const ColumnarTable &, const ColumnarTable &) = default;
};

struct Database
{
    Schema schema;
    ColumnarTable fact;
    std::vector<ColumnarTable> dims;

    const ColumnarTable &table(TableId t) const { return t == kFactTable ? fact : dims.at(t - 1); }
};

/** Deterministic synthetic star-schema data.  Foreign keys are uniform over the referenced dimension, other
 * columns uniform over their declared domain; dimension primary keys are a random permutation. */
Database generate_database(const Schema &schema, std::uint64_t seed);

/** Reorders all columns so that new row i holds old row order[i]. */
ColumnarTable apply_order(const ColumnarTable &table, std::span<const std::uint32_t> order);

/*======================================================================================================================
 * Zone maps and predicate classification
 *====================================================================================================================*/

struct ZoneMap
{
    std::int64_t min = 0;
    std::int64_t max = -1;

    bool empty() const { return min > max; }
    friend bool operator==(ZoneMap, ZoneMap) = default;
};

enum class PredicateClassification { AlwaysTrue, AlwaysFalse, Ambivalent };

/** Compare a block's closed value range [min, max] against a half-open predicate [lo, hi). */
PredicateClassification classify_predicate(ZoneMap zone, Range predicate);

/** Fraction of the closed integer range [min, max] that lies inside the predicate, assuming uniform values. */
double overlap_fraction(ZoneMap zone, Range predicate);

const char *to_string(PredicateClassification c);

/** Contiguous blocks over a row range plus per-block min/max for a list of columns.  Zone maps are kept as parallel
 * arrays, one slab of `num_blocks()` entries per zone column. */
struct BlockLayout
{
    std::vector<std::uint64_t> offsets{0};     ///< block b spans [offsets[b], offsets[b+1]), relative to the owner
    std::vector<ColumnRef> zone_columns;
    std::vector<std::int32_t> zone_min;
    std::vector<std::int32_t> zone_max;

    std::size_t num_blocks() const { return offsets.size() - 1; }
    std::uint64_t num_rows() const { return offsets.back(); }
    std::uint64_t block_rows(std::size_t b) const { return offsets[b + 1] - offsets[b]; }

    std::optional<std::size_t> zone_slot(ColumnRef c) const;
    ZoneMap zone(std::size_t slot, std::size_t block) const {
        auto i = slot * num_blocks() + block;
        return {zone_min[i], zone_max[i]};
    }

    /** Blocks of at most `block_rows` rows each. */
    static BlockLayout fixed(std::uint64_t rows, std::uint64_t block_rows);
};

/** Computes tight min/max per block for each column; `columns[i]` holds the values of `names[i]` for the owner's
 * rows.  Replaces any previous zone maps. */
void build_zone_maps(BlockLayout &layout, std::span<const ColumnRef> names,
                     std::span<const std::span<const std::int32_t>> columns);

/*======================================================================================================================
 * Partition tree
 *====================================================================================================================*/

/** Binary tree of cuts "column < value" over fact-table attributes.  Left children satisfy the cut. */
struct PartitionTree
{
    struct Node
    {
        std::uint32_t column = 0;   ///< fact column index (internal nodes)
        std::int64_t split = 0;
        int left = -1;
        int right = -1;
        int leaf_id = -1;           ///< >= 0 for leaves
        bool is_leaf() const { return leaf_id >= 0; }
    };

    std::vector<Node> nodes;        ///< nodes[0] is the root

    static PartitionTree single_leaf();
    std::size_t num_leaves() const;
    bool is_single_leaf() const { return nodes.size() == 1; }

    /** Leaf reached by a fact row. */
    int route(const ColumnarTable &fact, std::uint64_t row) const;
    /** Conjunction of ancestor cuts as per-column ranges (only constrained columns are listed). */
    std::vector<Predicate> leaf_bounds(int leaf_id) const;
    /** Leaves in left-to-right order. */
    std::vector<int> leaves_in_order() const;

    /** Indented text form.  Parsed back by `parse`. */
    std::string to_text(const Schema &schema, std::span<const std::uint64_t> leaf_rows = {}) const;
    static PartitionTree parse(std::string_view text, const Schema &schema);

    friend bool operator==(const PartitionTree &a, const PartitionTree &b);
};

/** 1st-level partition of the reorganized fact table. */
struct Partition
{
    std::uint32_t id = 0;
    std::uint64_t begin = 0;
    std::uint64_t end = 0;
    std::vector<Predicate> bounds;
    BlockLayout blocks;

    std::uint64_t rows() const { return end - begin; }
};

/** Result of clustering fact rows leaf-by-leaf. */
struct Reorganized
{
    ColumnarTable table;
    std::vector<std::uint32_t> old_to_new;
    std::vector<Partition> partitions;      ///< one per leaf, in leaf-id order; blocks are a single block each
};

/** Clusters rows by leaf (stable within a leaf). */
Reorganized reorganize(const ColumnarTable &fact, const PartitionTree &tree);

/*======================================================================================================================
 * Snapshots
 *====================================================================================================================*/

/** Binary snapshot of a table list; layout documented in docs/FORMATS.md. */
void write_table_snapshot(std::ostream &out, std::uint64_t schema_hash, std::span<const ColumnarTable> tables);
std::vector<ColumnarTable> read_table_snapshot(std::istream &in, std::uint64_t expected_schema_hash);

} // namespace sharedb
