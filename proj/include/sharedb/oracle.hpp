#pragma once

#include <sharedb/materializer.hpp>
#include <sharedb/reuse.hpp>
#include <sharedb/storage.hpp>
#include <sharedb/workload.hpp>

#include <cstdint>
#include <vector>

namespace sharedb {

/** Query-at-a-time reference: evaluates each query on its own with plain loops over the original tables.  Shares no
 * code with the engine beyond the table containers. */
std::int64_t qat_sum(const Database &db, const Query &q);
std::vector<std::int64_t> qat_results(const Database &db, const Batch &batch);

/** Number of rows of `fact` (any row order) that join with all dimensions in `tables`; equals the row count of the
 * join since every foreign key references an existing primary key. */
std::uint64_t qat_join_count(const Database &db, std::span<const std::uint32_t> fact_rows, DimMask tables);


/** Cost eliminated by materializing the keys in `domain`, by fixpoint: a node is eliminated when its own key is
 * materialized or when it has successors and all of them are eliminated. */
double eliminated_cost(const WorkloadGraph &g, std::span<const int> domain);

struct ExhaustiveSelection
{
    double reduction = 0;
    std::vector<std::uint32_t> cuts;
};

/** Best R-bar over every subset of cuts with B-bar within the budget.  Exponential; small instances only. */
ExhaustiveSelection exhaustive_selection(const WorkloadGraph &g, const CutSet &cuts, double budget_limit);

/** K_f: size of the largest feasible cut set; k_f: size of the smallest maximal feasible cut set. */
struct GreedyBound
{
    std::size_t large = 0;
    std::size_t small = 0;
    double factor = 0;      ///< 1 - ((K_f - 1) / K_f)^k_f
};
GreedyBound greedy_bound(const WorkloadGraph &g, const CutSet &cuts, double budget_limit);

/** Minimum plan cost over every set M of nodes with usable views: nodes are eliminated when in M or when all their
 * successors are eliminated; the cost is the remaining nodes' costs plus the view costs of M. */
double exhaustive_rewrite_cost(const GlobalPlan &plan, std::span<const ReuseCandidate> candidates);

} // namespace sharedb
