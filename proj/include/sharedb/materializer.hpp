#pragma once

#include <sharedb/common.hpp>

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sharedb {

/** A materializable result: the join of one 1st-level partition of the fact table with a set of dimensions.
 * Shared by every batch whose plans produce the same table set on that partition. */
struct ViewKey
{
    std::uint32_t partition = 0;
    DimMask tables = 0;

    friend auto operator<=>(const ViewKey &, const ViewKey &) = default;
};

/*======================================================================================================================
 * Historical workload graph
 *====================================================================================================================*/

/** Union of per-(partition, batch) plan trees.  Nodes use global ids; costs are estimates in the cost model's
 * units; materializable nodes carry the key of the result they produce. */
class WorkloadGraph
{
    public:
    struct Node
    {
        std::uint32_t component = 0;
        int parent = -1;                        ///< input (upstream) node, -1 for a source
        std::vector<std::uint32_t> children;    ///< consumers
        double cost = 0;
        int key = -1;                           ///< index into keys(), -1 if not materializable
        int plan_node = -1;                     ///< node id in the component's plan
    };
    struct Component
    {
        std::uint32_t partition = 0;
        std::uint32_t batch = 0;
        std::vector<std::uint32_t> nodes;       ///< global ids, inputs first
    };

    std::uint32_t add_component(std::uint32_t partition, std::uint32_t batch);
    /** Adds a node under `parent` (or as the component's source when parent < 0). */
    std::uint32_t add_node(std::uint32_t component, int parent, double cost, std::optional<ViewKey> key = {},
                           int plan_node = -1);
    /** Interns a key; the budget of an existing key is left unchanged. */
    int intern(const ViewKey &key, double budget);

    const std::vector<Node> &nodes() const { return nodes_; }
    const std::vector<Component> &components() const { return components_; }
    const std::vector<ViewKey> &keys() const { return keys_; }
    double key_budget(int key) const { return budgets_[key]; }
    double total_cost() const;

    private:
    std::vector<Node> nodes_;
    std::vector<Component> components_;
    std::vector<ViewKey> keys_;
    std::vector<double> budgets_;
};

/*======================================================================================================================
 * Cuts
 *====================================================================================================================*/

struct Cut
{
    std::uint32_t id = 0;
    std::vector<std::uint32_t> nodes;       ///< materialized nodes, ascending
    std::uint32_t anchor = 0;               ///< minimal anchor
    std::vector<std::uint32_t> bc;          ///< nodes between the cut and the anchor, inclusive, ascending
    std::vector<int> keys;                  ///< distinct keys of `nodes`, ascending
    double bc_cost = 0;
    double budget = 0;                      ///< sum of the key budgets
};

struct CutLimits
{
    std::size_t max_width = 4;              ///< nodes per cut
    std::size_t max_per_component = 512;
};

struct CutSet
{
    std::vector<Cut> cuts;
    std::size_t truncated_components = 0;   ///< components whose enumeration hit a limit
};

/** Every cut of every component (within the limits), each listed once with its minimal anchor.  On a tree the cuts
 * anchored at a are {a} when a is materializable, plus one pick from each successor's cuts when every successor
 * has some. */
CutSet enumerate_cuts(const WorkloadGraph &g, const CutLimits &limits = {});

/*======================================================================================================================
 * Selection functions
 *====================================================================================================================*/

/** R-bar: cost of the union of the BC sets. */
double reduction(const WorkloadGraph &g, const CutSet &cuts, std::span<const std::uint32_t> selection);
/** B-bar: budget of the distinct keys in the domain. */
double budget(const WorkloadGraph &g, const CutSet &cuts, std::span<const std::uint32_t> selection);
/** d(S): distinct keys materialized by the selection, ascending. */
std::vector<int> domain(const CutSet &cuts, std::span<const std::uint32_t> selection);
/** e(S): every enumerated cut whose keys all lie in d(S), ascending. */
std::vector<std::uint32_t> enrichment(const CutSet &cuts, std::span<const std::uint32_t> selection);

struct Selection
{
    std::vector<std::uint32_t> cuts;        ///< enriched, ascending
    std::vector<int> domain;
    double reduction = 0;
    double budget = 0;
    int iterations = 0;                     ///< ISK rounds run
};

Selection make_selection(const WorkloadGraph &g, const CutSet &cuts, std::vector<std::uint32_t> chosen);

/** Greedy: repeatedly adds the cut with the largest marginal reduction among those that still fit the budget;
 * stops when nothing fits or no cut adds reduction.  The result is enriched. */
Selection solve_gr(const WorkloadGraph &g, const CutSet &cuts, double budget_limit);

struct IskConfig
{
    int max_iterations = 10;
    std::size_t prefix_size = 3;            ///< partial enumeration depth
    std::size_t prefix_pool = 24;           ///< prefixes are drawn from the cuts with the largest standalone reduction
};

/** Iterated submodular knapsack: each round replaces B-bar by its modular upper bound at the previous solution and
 * solves the resulting knapsack by partial enumeration plus greedy extension by ratio.  Stops at a fixed point. */
Selection solve_isk(const WorkloadGraph &g, const CutSet &cuts, double budget_limit, const IskConfig &config = {});

/** Text report: one line per selected cut, then totals. */
std::string selection_report(const WorkloadGraph &g, const CutSet &cuts, const Selection &s);

} // namespace sharedb
