#pragma once

#include <sharedb/common.hpp>
#include <sharedb/query_set.hpp>
#include <sharedb/storage.hpp>
#include <sharedb/workload.hpp>

#include <span>
#include <string>
#include <vector>

namespace sharedb {

/*======================================================================================================================
 * Plans
 *====================================================================================================================*/

enum class NodeKind : std::uint8_t { Scan, Filter, Probe, Aggregate, ViewScan };

const char *to_string(NodeKind k);

/** One shared operator.  Nodes form a forest: every node but a source has exactly one input; results multicast to
 * all successors. */
struct PlanNode
{
    std::uint32_t id = 0;
    NodeKind kind = NodeKind::Scan;
    ColumnRef column;                   ///< Filter: the filtered attribute
    std::uint32_t dim = 0;              ///< Probe: dimension index
    std::uint32_t query = 0;            ///< Aggregate: query id
    std::uint32_t view = 0;             ///< ViewScan: index into the plan's view list
    QuerySet queries;                   ///< union of the aggregate descendants' queries
    DimMask tables = 0;                 ///< dimensions joined in this node's output
    int input = -1;
    std::vector<std::uint32_t> successors;
    bool on_view = false;               ///< Filter over a view; its cost is charged to the ViewScan
    int origin = -1;                    ///< baseline node this node was copied from, if any
    double cost = 0;

    bool is_source() const { return kind == NodeKind::Scan || kind == NodeKind::ViewScan; }
    bool materializable() const { return kind == NodeKind::Probe; }
};

struct GlobalPlan
{
    std::size_t width = 0;                      ///< query-set width (batch size)
    std::vector<PlanNode> nodes;                ///< inputs precede their consumers
    std::vector<int> roots;                     ///< per query id: its aggregate node, or -1
    std::vector<std::uint32_t> sources;         ///< Scan and ViewScan nodes
    std::vector<DimMask> views;                 ///< ViewScan payload: table set of each used view

    bool empty() const { return nodes.empty(); }
    PlanNode &add(PlanNode n);                  ///< assigns the id and links the input

    /** Structural checks: acyclic, query sets are unions of aggregate descendants, table sets grow by the probed
     * dimension.  Throws InvariantError. */
    void validate() const;

    /** Nodes in topological order with kinds, query sets as hex and cost estimates. */
    std::string to_text(const Schema &schema) const;
};

/** Greedy share-first baseline plan for the queries in `active`.  Fact-table filters form a chain directly above the
 * scan (one node per filtered attribute, ascending column); probes follow in order of descending sharing count with
 * ties to the lowest dimension index; dimension filters are evaluated inside probes. */
GlobalPlan build_global_plan(const Batch &batch, const QuerySet &active);

/*======================================================================================================================
 * Dimension state
 *====================================================================================================================*/

/** Open-addressing hash index from a dimension primary key to its row. */
class DimHashTable
{
    struct Slot
    {
        std::int32_t key;
        std::uint32_t row;
    };
    std::vector<Slot> slots_;
    std::uint64_t mask_ = 0;
    int shift_ = 63;
    static constexpr std::uint32_t kEmpty = ~std::uint32_t{0};

    std::uint64_t hash(std::int32_t k) const {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(k)) * 0x9e3779b97f4a7c15ULL) >> shift_;
    }

    public:
    DimHashTable() = default;
    explicit DimHashTable(std::span<const std::int32_t> keys);

    /** Row holding `key`, or -1. */
    std::int64_t find(std::int32_t key) const {
        for (auto i = hash(key);; i = (i + 1) & mask_) {
            auto &s = slots_[i];
            if (s.row == kEmpty) return -1;
            if (s.key == key) return s.row;
        }
    }
    std::size_t capacity() const { return slots_.size(); }
};

/** Per joined dimension: the hash index plus, for every dimension row, the query set of batch queries joining the
 * dimension whose filters the row satisfies. */
struct DimensionTable
{
    DimHashTable index;
    std::vector<std::uint64_t> entries;         ///< row-major, `words` per row
    std::vector<double> selectivity;            ///< per query: fraction of rows whose entry bit is set
};

struct DimensionState
{
    std::size_t width = 0;
    std::size_t words = 1;
    std::vector<std::optional<DimensionTable>> dims;

    bool has(std::uint32_t dim) const { return dim < dims.size() && dims[dim].has_value(); }
    const std::uint64_t *entry(std::uint32_t dim, std::uint64_t row) const {
        return dims[dim]->entries.data() + row * words;
    }
    QuerySet entry_set(std::uint32_t dim, std::uint64_t row) const;
};

DimensionState build_dimension_state(const Database &db, const Batch &batch);

/*======================================================================================================================
 * Sources and skipping
 *====================================================================================================================*/

/** Rows a plan source reads: a fact partition or a view partition, with its blocks and column slices. */
struct SourceData
{
    const BlockLayout *blocks = nullptr;
    std::vector<ColumnRef> names;
    std::vector<std::span<const std::int32_t>> columns;

    std::optional<std::size_t> find(ColumnRef c) const;
    std::span<const std::int32_t> column(ColumnRef c) const;   ///< throws ExecutionError when missing
    bool has(ColumnRef c) const { return find(c).has_value(); }
};

/** Per-block classification of the batch's predicates on the source's filter columns. */
struct SkipAnalysis
{
    std::size_t width = 0;
    std::vector<ColumnRef> columns;             ///< filter columns considered, one slot each
    std::vector<QuerySet> alive;                ///< per block: queries with no AlwaysFalse predicate
    std::vector<QuerySet> ambivalent;           ///< per block and slot: queries with an ambivalent predicate there
    QuerySet touched;                           ///< union of `alive`
    std::uint64_t skipped_blocks = 0;           ///< blocks where every candidate query is AlwaysFalse
    std::uint64_t skipped_filters = 0;          ///< (block, query, predicate) triples resolved as AlwaysTrue

    std::size_t num_blocks() const { return alive.size(); }
    const QuerySet &ambivalent_at(std::size_t block, std::size_t slot) const {
        return ambivalent[block * columns.size() + slot];
    }
    std::optional<std::size_t> slot(ColumnRef c) const;
};

/** Classifies every predicate of every candidate query on `columns` against each block's zone maps.  Columns without
 * zone maps classify as ambivalent.  With `skipping` off no query is dropped and every predicate counts as
 * ambivalent. */
SkipAnalysis analyze_blocks(const BlockLayout &blocks, const Batch &batch, const QuerySet &candidates,
                            std::span<const ColumnRef> columns, bool skipping);

/*======================================================================================================================
 * Cost model
 *====================================================================================================================*/

struct CostModel
{
    double c_scan = 1.0;
    double c_filter = 2.0;
    double c_probe = 10.0;
    double c_agg = 2.0;
    double c_f = 139.45;
    double filter_exponent = 1.0;               ///< filter cost ~ (ambivalent predicates)^exponent

    void validate() const;                      ///< throws ConfigError unless every constant is > 0
    std::string to_text() const;
    /** Parses `to_text` output; unknown keys and malformed numbers are ConfigErrors.  Missing keys keep defaults. */
    static CostModel parse(std::string_view text);
};

/** Estimated work per node.  `input_rows` feeds scan/probe/aggregate costs; `filter_load` is
 * sum over blocks of rows_in * (ambivalent predicates)^exponent; `view_load` is sum over blocks of rows * |RF|. */
struct NodeLoad
{
    double input_rows = 0;
    double filter_load = 0;
    double view_load = 0;
};

/** Sets each node's `cost` from its load and returns the total. */
double estimate_plan_cost(GlobalPlan &plan, std::span<const NodeLoad> loads, const CostModel &model);

/** Loads for a plan whose only source is a fact-partition Scan, from zone-map selectivities and dimension
 * selectivities, assuming independence between queries' predicates. */
std::vector<NodeLoad> estimate_loads(const GlobalPlan &plan, const Batch &batch, const BlockLayout &blocks,
                                     const SkipAnalysis &skip, const DimensionState &dims, double filter_exponent);

/** sum over blocks that some query in `queries` reads of rows * (columns with an ambivalent predicate of a live
 * query).  Used both as the ViewScan load and as |RF(v)| * v.size in the reuse benefit. */
double view_filter_load(const BlockLayout &blocks, const SkipAnalysis &skip, const QuerySet &queries);

} // namespace sharedb
