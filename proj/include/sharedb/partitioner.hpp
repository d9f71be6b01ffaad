#pragma once

#include <sharedb/global_plan.hpp>
#include <sharedb/storage.hpp>
#include <sharedb/workload.hpp>

#include <algorithm>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sharedb {

/*======================================================================================================================
 * Homogeneity
 *====================================================================================================================*/

/** H(T) = sum_t (sum_j W[t][j]) / max(sum of weights of subqueries accessing some tuple of T, 1).  `tuples` index
 * the matrix's samples. */
double homogeneity(std::span<const std::uint32_t> tuples, const AccessMatrix &w);

/*======================================================================================================================
 * 1st level: homogeneity-based partitioning
 *====================================================================================================================*/

/** "column < split" over a fact attribute. */
struct CandidateCut
{
    std::uint32_t column = 0;
    std::int64_t split = 0;

    friend auto operator<=>(const CandidateCut &, const CandidateCut &) = default;
};

/** Distinct lo/hi bounds of fact-table predicates in the batches, sorted by (column, split). */
std::vector<CandidateCut> candidate_cuts(std::span<const Batch> batches);

struct PartitionerConfig
{
    std::uint64_t ps_min = std::uint64_t{1} << 16;  ///< minimum estimated partition size in rows
    double improvement = 1.01;                      ///< recurse only if best > improvement * current
};

/** Greedy recursive space cutting (the homogeneity-based partitioning algorithm).  Partition sizes are estimated as
 * sample count / sampling rate.  A cut is considered only if it falls strictly inside the current subspace. */
PartitionTree partition_tree(const ColumnarTable &fact, const Schema &schema, const AccessMatrix &w,
                             std::span<const CandidateCut> cuts, const PartitionerConfig &config);

/** Sum of H over the leaves, evaluated on the matrix's samples. */
double aggregate_homogeneity(const PartitionTree &tree, const ColumnarTable &fact, const AccessMatrix &w);

/*======================================================================================================================
 * 2nd level: blocks
 *====================================================================================================================*/

/** Attributes to cluster on, most frequently filtered first, with the sorted distinct predicate bounds of each. */
struct BlockingKeys
{
    std::vector<ColumnRef> columns;
    std::vector<std::vector<std::int64_t>> bounds;
};

/** Collects filtered attributes from the batches that satisfy `eligible`.  Ties in frequency go to the lower column. */
template<typename Eligible>
BlockingKeys blocking_keys(std::span<const Batch> batches, Eligible &&eligible);

struct BlockingConfig
{
    std::uint64_t min_average = 256;    ///< runs shorter than this are merged with their neighbours
    std::uint64_t max_block = 4096;     ///< longer runs are split evenly
};

/** Row order and block boundaries for a set of rows. */
struct Blocking
{
    std::vector<std::uint32_t> order;           ///< new position -> old position
    std::vector<std::uint64_t> offsets{0};
};

/** Sorts rows lexicographically by the bucket index of each key column (buckets are the intervals between bounds),
 * then cuts the sorted rows into blocks at run boundaries. */
Blocking build_blocks(std::uint64_t rows, std::span<const std::span<const std::int32_t>> key_columns,
                      std::span<const std::vector<std::int64_t>> bounds, const BlockingConfig &config);

/*======================================================================================================================
 * Physical layout
 *====================================================================================================================*/

/** The fact table clustered by 1st-level partition and, within each partition, by block. */
struct PhysicalLayout
{
    PartitionTree tree;
    ColumnarTable fact;
    std::vector<Partition> partitions;      ///< in leaf-id order; block offsets are partition-relative

    /** All fact columns of partition `p`, with its blocks. */
    SourceData source(std::size_t p) const;
    /** Partition row ranges and block offsets. */
    std::string to_text() const;
};

/** Fact columns that carry zone maps: every column except foreign keys. */
std::vector<ColumnRef> fact_zone_columns(const Schema &schema);

/** Reorganizes `fact` by `tree`, clusters each partition into blocks on the fact attributes filtered by `tuning`
 * (when `cluster` is set) and builds zone maps. */
PhysicalLayout build_layout(const ColumnarTable &fact, const Schema &schema, PartitionTree tree,
                            std::span<const Batch> tuning, const BlockingConfig &config, bool cluster = true);

/** Rebuilds a layout from an already clustered fact table and the text written by `PhysicalLayout::to_text`. */
PhysicalLayout parse_layout(std::string_view text, const Schema &schema, PartitionTree tree, ColumnarTable fact);

/*======================================================================================================================
 * Template definitions
 *====================================================================================================================*/

template<typename Eligible>
BlockingKeys blocking_keys(std::span<const Batch> batches, Eligible &&eligible)
{
    std::vector<std::pair<ColumnRef, std::pair<std::size_t, std::vector<std::int64_t>>>> found;
    for (auto &b : batches)
        for (auto &q : b.queries)
            for (auto &f : q.filters) {
                if (!eligible(f.column)) continue;
                auto it = std::find_if(found.begin(), found.end(), [&](auto &e) { return e.first == f.column; });
                if (it == found.end()) {
                    found.push_back({f.column, {0, {}}});
                    it = found.end() - 1;
                }
                ++it->second.first;
                it->second.second.push_back(f.range.lo);
                it->second.second.push_back(f.range.hi);
            }
    std::sort(found.begin(), found.end(), [](auto &a, auto &b) {
        if (a.second.first != b.second.first) return a.second.first > b.second.first;
        return a.first < b.first;
    });
    BlockingKeys keys;
    for (auto &[c, e] : found) {
        auto &v = e.second;
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        keys.columns.push_back(c);
        keys.bounds.push_back(std::move(v));
    }
    return keys;
}

} // namespace sharedb
