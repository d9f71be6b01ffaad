#pragma once

#include <sharedb/engine.hpp>
#include <sharedb/partitioner.hpp>
#include <sharedb/reuse.hpp>
#include <sharedb/views.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace sharedb {

struct ExecConfig
{
    CostModel model;
    bool skipping = true;           ///< data and filter skipping with zone maps
    bool reuse = true;              ///< run the reuse phase when views exist
    bool naive_reuse = false;       ///< reuse every usable view: zero filter cost, no skipping on views
    std::size_t threads = 0;        ///< 0: hardware concurrency
    std::size_t morsel_blocks = 16; ///< blocks per work item
};

struct BatchMetrics
{
    std::uint64_t wall_ns = 0;
    std::uint64_t dims_ns = 0;      ///< dimension state
    std::uint64_t plan_ns = 0;      ///< skipping analysis, planning and reuse
    std::uint64_t exec_ns = 0;
    ExecCounters counters;
    std::uint64_t partitions = 0;           ///< partitions touched by some query
    std::uint64_t skipped_blocks = 0;
    std::uint64_t skipped_filters = 0;
    std::uint64_t views_used = 0;           ///< ViewScan sources over all partitions
    double baseline_cost = 0;               ///< estimated, partitions with reuse candidates only
    double optimized_cost = 0;

    /** Fraction of rows read from base data rather than views; 0 when nothing was read. */
    double miss_rate() const;
};

struct BatchResult
{
    std::vector<std::int64_t> sums;         ///< per query id
    BatchMetrics metrics;
};

/** Runs one batch: builds the dimension state, then per touched partition analyzes skipping, builds the baseline
 * plan, injects views, and executes; partial sums are merged per query.  Throws ExecutionError when a view does not
 * match the layout's partition. */
BatchResult execute_batch(const Database &db, const PhysicalLayout &layout, const ViewStore *views, const Batch &batch,
                          const ExecConfig &config = {});

inline constexpr int kMetricsVersion = 1;

/** Comma-separated metrics: a version comment, a header, then one row per batch. */
std::string metrics_csv_header();
std::string metrics_csv_row(const std::string &label, const Batch &batch, const BatchResult &result);

} // namespace sharedb
