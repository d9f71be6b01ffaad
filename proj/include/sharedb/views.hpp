#pragma once

#include <sharedb/global_plan.hpp>
#include <sharedb/materializer.hpp>
#include <sharedb/partitioner.hpp>

#include <iosfwd>
#include <map>
#include <span>
#include <vector>

namespace sharedb {

/*======================================================================================================================
 * Views
 *====================================================================================================================*/

/** Columns a view of `tables` stores so that every tuning query joining at least `tables` can run on it: measures,
 * fact filter attributes, filter attributes of the joined dimensions, and foreign keys of dimensions joined later.
 * Sorted. */
std::vector<ColumnRef> view_columns(const Schema &schema, std::span<const Batch> tuning, DimMask tables);

/** Columns a set of queries needs from a view of `tables` (same rules as `view_columns`). */
std::vector<ColumnRef> required_columns(const Schema &schema, const Batch &batch, const QuerySet &queries,
                                        DimMask tables);

/** Budget estimate in bytes: 8 bytes per stored value. */
inline double view_budget(std::uint64_t rows, std::size_t columns)
{
    return static_cast<double>(rows) * 8.0 * static_cast<double>(columns);
}

/** The join of one fact partition with a dimension set, block-clustered, with zone maps. */
struct View
{
    ViewKey key;
    std::vector<ColumnRef> columns;             ///< sorted
    std::vector<std::vector<std::int32_t>> data;
    BlockLayout blocks;

    std::uint64_t rows() const { return blocks.num_rows(); }
    std::uint64_t bytes() const { return rows() * 4 * columns.size(); }
    SourceData source() const;
    bool covers(std::span<const ColumnRef> needed) const;
};

class ViewStore
{
    std::map<ViewKey, View> views_;

    public:
    void add(View v);
    const View *find(std::uint32_t partition, DimMask tables) const;
    std::size_t size() const { return views_.size(); }
    bool empty() const { return views_.empty(); }
    std::uint64_t total_bytes() const;
    auto begin() const { return views_.begin(); }
    auto end() const { return views_.end(); }
};

struct MaterializeConfig
{
    BlockingConfig blocking;
    double slack = 1.1;         ///< refuse views whose actual size exceeds the estimate by more than this factor
    bool cluster = true;
};

/** Computes and stores every requested view.  Throws ExecutionError when a view's actual size exceeds its budget
 * estimate beyond the slack, or a key names a missing partition. */
ViewStore materialize(const Database &db, const PhysicalLayout &layout, std::span<const ViewKey> keys,
                      std::span<const Batch> tuning, const MaterializeConfig &config = {});

/** Binary snapshot; layout documented in docs/FORMATS.md.  Zone maps are rebuilt on load. */
void write_view_store(std::ostream &out, std::uint64_t schema_hash, const ViewStore &store, const Schema &schema);
ViewStore read_view_store(std::istream &in, std::uint64_t expected_schema_hash, const Schema &schema);

/*======================================================================================================================
 * Workload graph from data
 *====================================================================================================================*/

/** Fact attributes filtered by some query of the batch, ascending. */
std::vector<ColumnRef> fact_filter_columns(const Batch &batch);

/** One component per (partition, batch) touched after skipping, holding the baseline plan with estimated node
 * costs; every probe node is keyed by (partition, its table set) with a budget from `view_columns`. */
WorkloadGraph build_workload_graph(const Database &db, const PhysicalLayout &layout, std::span<const Batch> tuning,
                                   const CostModel &model);

} // namespace sharedb
