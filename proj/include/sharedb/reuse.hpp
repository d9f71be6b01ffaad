#pragma once

#include <sharedb/global_plan.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace sharedb {

/** Per baseline node: whether a usable view of its result exists in this partition and what reading and filtering
 * it would cost (c_f x |RF| x rows). */
struct ReuseCandidate
{
    bool materialized = false;
    double view_cost = 0;
};

/** Outcome of the reuse phase on one baseline plan. */
struct ReuseDecision
{
    std::vector<char> kept;                     ///< per baseline node: still executed
    std::vector<std::uint32_t> replaced;        ///< nodes whose results are read from views, ascending
    double baseline_cost = 0;
    double optimized_cost = 0;                  ///< kept node costs plus the view costs of `replaced`
};

/** Net gain of reading cut `cut` from views instead of computing every kept node between `anchor` and the cut.
 * Returns -infinity for an empty cut. */
double cut_benefit(const GlobalPlan &plan, std::span<const ReuseCandidate> candidates,
                   std::span<const std::uint32_t> cut, std::uint32_t anchor);

/** Post-order rewrite pass: merges the pending cuts of kept successors, compares them with the node's own view, and
 * rewrites as soon as a cut's benefit is non-negative.  Node costs must be set on `plan`. */
ReuseDecision reuse_phase(const GlobalPlan &plan, std::span<const ReuseCandidate> candidates);

/** Attributes a view of `tables` must re-filter for `queries`: their fact-table filters and their filters on the
 * joined dimensions, ascending. */
std::vector<ColumnRef> view_filter_columns(const Batch &batch, const QuerySet &queries, DimMask tables);

/** Builds the executable plan for a decision: kept nodes in their original order, and for every replaced node a
 * ViewScan over the view of its table set followed by filters for the predicates its queries apply up to that point
 * (fact attributes and attributes of the joined dimensions, ascending), feeding its kept successors.  Query sets are
 * recomputed; node costs are copied from the baseline, and a ViewScan carries its candidate's view cost. */
GlobalPlan rewrite_plan(const GlobalPlan &plan, const ReuseDecision &decision, const Batch &batch,
                        std::span<const ReuseCandidate> candidates);

} // namespace sharedb
