#pragma once

#include <sharedb/global_plan.hpp>

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace sharedb {

inline constexpr std::size_t kVectorSize = 1024;

/** Work counters; summed across workers. */
struct ExecCounters
{
    std::uint64_t base_rows = 0;        ///< fact rows read by Scan sources
    std::uint64_t view_rows = 0;        ///< view rows read by ViewScan sources
    std::uint64_t blocks_read = 0;
    std::uint64_t filter_tuples = 0;    ///< tuples entering an applied filter
    std::uint64_t filter_work = 0;      ///< tuples x ambivalent predicates at applied filters
    std::uint64_t probe_tuples = 0;
    std::uint64_t agg_updates = 0;      ///< (tuple, query) additions

    ExecCounters &operator+=(const ExecCounters &o);
};

/** A plan source bound to data.  `skip` must list every column filtered under the source. */
struct SourceBinding
{
    const SourceData *data = nullptr;
    const SkipAnalysis *skip = nullptr;
};

/** Sorted predicate boundaries of one attribute with the query set passing in each range between boundaries.
 * Queries without a predicate on the attribute pass everywhere. */
class PredicateIndex
{
    std::vector<std::int64_t> bounds_;
    std::vector<std::uint64_t> masks_;      ///< (bounds + 1) ranges x words
    std::vector<std::uint16_t> dense_;      ///< value - lo -> range, for small domains
    std::int64_t dense_lo_ = 0;
    std::size_t words_ = 1;

    public:
    PredicateIndex() = default;
    PredicateIndex(const Batch &batch, const QuerySet &queries, ColumnRef column, const ColumnSpec &domain);

    std::size_t range_of(std::int64_t v) const {
        auto off = v - dense_lo_;
        if (off >= 0 && static_cast<std::uint64_t>(off) < dense_.size()) return dense_[off];
        return static_cast<std::size_t>(std::upper_bound(bounds_.begin(), bounds_.end(), v) - bounds_.begin());
    }
    const std::uint64_t *mask(std::size_t range) const { return masks_.data() + range * words_; }
    std::size_t num_ranges() const { return bounds_.size() + 1; }
    QuerySet passing(std::int64_t v) const;
};

/** Executes a plan over bound sources.  Immutable once built; `run` may be called concurrently with distinct
 * scratch objects. */
class PlanExecutor
{
    public:
    struct Scratch;
    struct ScratchDeleter
    {
        void operator()(Scratch *s) const;
    };
    using ScratchPtr = std::unique_ptr<Scratch, ScratchDeleter>;

    PlanExecutor(const GlobalPlan &plan, const Batch &batch, const Schema &schema, const DimensionState &dims,
                 std::vector<SourceBinding> bindings);
    ~PlanExecutor();

    std::size_t num_sources() const { return bindings_.size(); }
    std::size_t num_blocks(std::size_t source) const { return bindings_[source].data->blocks->num_blocks(); }
    const SourceBinding &binding(std::size_t source) const { return bindings_[source]; }

    ScratchPtr make_scratch() const;

    /** Adds the contribution of blocks [begin, end) of source `source` into `sums` (indexed by query id). */
    void run(std::size_t source, std::size_t begin, std::size_t end, std::span<std::int64_t> sums,
             ExecCounters &counters, Scratch &scratch) const;

    private:
    struct AggGroup
    {
        std::span<const std::int32_t> measure;
        QuerySet mask;
    };
    struct NodeInfo
    {
        std::vector<AggGroup> aggs;
        std::vector<std::uint32_t> children;        ///< non-aggregate successors
        std::vector<bool> child_needs_mask;
        std::span<const std::int32_t> column;       ///< filter attribute or probe foreign key
        PredicateIndex index;
        std::size_t skip_slot = 0;
        std::size_t source = 0;
    };

    template<typename Words>
    void run_impl(std::size_t source, std::size_t begin, std::size_t end, std::span<std::int64_t> sums,
                  ExecCounters &counters, Scratch &scratch, Words words) const;
    template<typename Words>
    void push(std::uint32_t node, std::size_t depth, std::span<std::int64_t> sums, ExecCounters &counters,
              Scratch &scratch, Words words) const;
    template<typename Words>
    void emit(std::uint32_t node, std::size_t depth, std::span<std::int64_t> sums, ExecCounters &counters,
              Scratch &scratch, Words words) const;

    const GlobalPlan &plan_;
    const DimensionState &dims_;
    std::vector<SourceBinding> bindings_;
    std::vector<NodeInfo> info_;
    std::size_t words_;
};

/** Single-threaded convenience: runs every source over all its blocks. */
std::vector<std::int64_t> execute_plan(const GlobalPlan &plan, const Batch &batch, const Schema &schema,
                                       const DimensionState &dims, std::vector<SourceBinding> bindings,
                                       ExecCounters *counters = nullptr);

} // namespace sharedb
