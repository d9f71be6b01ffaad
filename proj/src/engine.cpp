#include <sharedb/engine.hpp>

#include <algorithm>
#include <bit>

namespace sharedb {

ExecCounters &ExecCounters::operator+=(const ExecCounters &o)
{
    base_rows += o.base_rows;
    view_rows += o.view_rows;
    blocks_read += o.blocks_read;
    filter_tuples += o.filter_tuples;
    filter_work += o.filter_work;
    probe_tuples += o.probe_tuples;
    agg_updates += o.agg_updates;
    return *this;
}

/*======================================================================================================================
 * Predicate index
 *====================================================================================================================*/

PredicateIndex::PredicateIndex(const Batch &batch, const QuerySet &queries, ColumnRef column, const ColumnSpec &domain)
{
    words_ = words_for(batch.width());
    std::vector<std::pair<std::size_t, Range>> preds;
    queries.for_each([&](std::size_t q) {
        if (auto *p = batch.queries.at(q).filter_on(column)) {
            preds.emplace_back(q, p->range);
            bounds_.push_back(p->range.lo);
            bounds_.push_back(p->range.hi);
        }
    });
    std::sort(bounds_.begin(), bounds_.end());
    bounds_.erase(std::unique(bounds_.begin(), bounds_.end()), bounds_.end());

    // range r covers [bounds[r-1], bounds[r]); pick a representative value to test membership
    const std::size_t nr = bounds_.size() + 1;
    masks_.assign(nr * words_, 0);
    QuerySet unfiltered = queries;
    for (auto &[q, r] : preds) unfiltered.reset(q);
    for (std::size_t r = 0; r < nr; ++r) {
        auto *m = masks_.data() + r * words_;
        for (std::size_t w = 0; w < words_ && w < unfiltered.num_words(); ++w) m[w] = unfiltered.words()[w];
        if (r == 0) continue;   // below every lower bound: no predicate passes
        auto v = bounds_[r - 1];
        for (auto &[q, range] : preds)
            if (range.contains(v)) m[q / 64] |= std::uint64_t{1} << (q % 64);
    }

    auto span = static_cast<std::int64_t>(domain.hi) - domain.lo;
    if (span > 0 && span <= (1 << 16)) {
        dense_lo_ = domain.lo;
        dense_.resize(static_cast<std::size_t>(span));
        for (std::int64_t v = domain.lo; v < domain.hi; ++v)
            dense_[v - domain.lo] = static_cast<std::uint16_t>(
                std::upper_bound(bounds_.begin(), bounds_.end(), v) - bounds_.begin());
    }
}

QuerySet PredicateIndex::passing(std::int64_t v) const
{
    QuerySet s(words_ * 64);
    auto *m = mask(range_of(v));
    std::copy(m, m + words_, s.words().begin());
    return s;
}

/*======================================================================================================================
 * Executor
 *====================================================================================================================*/

struct PlanExecutor::Scratch
{
    struct Level
    {
        std::vector<std::uint32_t> rows;
        std::vector<std::uint64_t> qs;
        std::size_t n = 0;
        bool uniform = false;
    };
    std::vector<Level> levels;
    std::size_t block = 0;
    std::vector<std::uint64_t> tmp;

    Level &level(std::size_t depth, std::size_t words) {
        if (levels.size() <= depth) levels.resize(depth + 1);
        auto &l = levels[depth];
        if (l.rows.size() < kVectorSize) {
            l.rows.resize(kVectorSize);
            l.qs.resize(kVectorSize * words);
        }
        return l;
    }
};

PlanExecutor::~PlanExecutor() = default;

void PlanExecutor::ScratchDeleter::operator()(Scratch *s) const { delete s; }

PlanExecutor::ScratchPtr PlanExecutor::make_scratch() const
{
    ScratchPtr s(new Scratch);
    s->tmp.resize(words_);
    for (std::size_t d = 0; d <= plan_.nodes.size(); ++d) s->level(d, words_);   // no reallocation while running
    return s;
}

PlanExecutor::PlanExecutor(const GlobalPlan &plan, const Batch &batch, const Schema &schema, const DimensionState &dims,
                           std::vector<SourceBinding> bindings)
    : plan_(plan), dims_(dims), bindings_(std::move(bindings)), info_(plan.nodes.size()), words_(words_for(plan.width))
{
    SHAREDB_CHECK(bindings_.size() == plan.sources.size(), "one binding per plan source");
    SHAREDB_CHECK(plan.width == batch.width(), "plan and batch widths differ");
    SHAREDB_CHECK(dims.words == words_, "dimension state width differs from the plan");

    for (std::size_t s = 0; s < plan.sources.size(); ++s) info_[plan.sources[s]].source = s;
    for (auto &n : plan.nodes) {
        auto &ni = info_[n.id];
        if (n.input >= 0) ni.source = info_[n.input].source;
        auto &bind = bindings_[ni.source];
        SHAREDB_CHECK(bind.data && bind.skip, "source binding incomplete");
        switch (n.kind) {
            case NodeKind::Filter: {
                ni.column = bind.data->column(n.column);
                auto slot = bind.skip->slot(n.column);
                if (!slot) throw ExecutionError("skip analysis lacks a filtered column");
                ni.skip_slot = *slot;
                ni.index = PredicateIndex(batch, n.queries, n.column, schema.table(n.column.table).columns.at(n.column.column));
                break;
            }
            case NodeKind::Probe:
                if (!dims.has(n.dim)) throw ExecutionError("dimension state missing for a probed dimension");
                ni.column = bind.data->column({kFactTable, schema.fk_column(n.dim)});
                break;
            default: break;
        }
        for (auto s : n.successors) {
            auto &c = plan.nodes[s];
            if (c.kind == NodeKind::Aggregate) {
                auto measure = bind.data->column({kFactTable, batch.queries.at(c.query).measure});
                auto it = std::find_if(ni.aggs.begin(), ni.aggs.end(),
                                       [&](auto &g) { return g.measure.data() == measure.data(); });
                if (it == ni.aggs.end()) {
                    ni.aggs.push_back({measure, QuerySet(plan.width)});
                    it = ni.aggs.end() - 1;
                }
                it->mask.set(c.query);
            } else {
                ni.children.push_back(s);
                ni.child_needs_mask.push_back(!n.queries.is_subset_of(c.queries));
            }
        }
    }
}

void PlanExecutor::run(std::size_t source, std::size_t begin, std::size_t end, std::span<std::int64_t> sums,
                       ExecCounters &counters, Scratch &scratch) const
{
    SHAREDB_CHECK(sums.size() >= plan_.width, "sum buffer too small");
    if (words_ == 1) run_impl(source, begin, end, sums, counters, scratch, std::integral_constant<std::size_t, 1>{});
    else if (words_ == 2) run_impl(source, begin, end, sums, counters, scratch, std::integral_constant<std::size_t, 2>{});
    else run_impl(source, begin, end, sums, counters, scratch, words_);
}

template<typename Words>
void PlanExecutor::run_impl(std::size_t source, std::size_t begin, std::size_t end, std::span<std::int64_t> sums,
                            ExecCounters &counters, Scratch &scratch, Words words_c) const
{
    const std::size_t words = words_c;
    auto &bind = bindings_[source];
    auto &blocks = *bind.data->blocks;
    auto &src = plan_.nodes[plan_.sources[source]];
    const bool is_view = src.kind == NodeKind::ViewScan;
    for (std::size_t b = begin; b < end && b < blocks.num_blocks(); ++b) {
        auto live = bind.skip->alive[b] & src.queries;
        if (live.none()) continue;
        ++counters.blocks_read;
        const auto first = blocks.offsets[b], last = blocks.offsets[b + 1];
        (is_view ? counters.view_rows : counters.base_rows) += last - first;
        scratch.block = b;
        for (auto r = first; r < last; r += kVectorSize) {
            auto &l = scratch.level(0, words);
            l.n = std::min<std::uint64_t>(kVectorSize, last - r);
            l.uniform = true;
            for (std::size_t i = 0; i < l.n; ++i) {
                l.rows[i] = static_cast<std::uint32_t>(r + i);
                for (std::size_t w = 0; w < words; ++w) l.qs[i * words + w] = live.words()[w];
            }
            emit(src.id, 0, sums, counters, scratch, words_c);
        }
    }
}

template<typename Words>
void PlanExecutor::push(std::uint32_t node, std::size_t depth, std::span<std::int64_t> sums, ExecCounters &counters,
                        Scratch &scratch, Words words_c) const
{
    const std::size_t words = words_c;
    auto &n = plan_.nodes[node];
    auto &ni = info_[node];
    auto &l = scratch.levels[depth];
    if (l.n == 0) return;
    switch (n.kind) {
        case NodeKind::Filter: {
            auto &skip = *bindings_[ni.source].skip;
            auto &amb = skip.ambivalent_at(scratch.block, ni.skip_slot);
            auto active = amb & n.queries;
            if (active.none()) break;               // filter skipping: every live predicate resolved on this block
            auto *keep = scratch.tmp.data();        // queries not ambivalent here pass unconditionally
            for (std::size_t w = 0; w < words; ++w) keep[w] = ~active.words()[w];
            counters.filter_tuples += l.n;
            counters.filter_work += l.n * active.count();
            const auto *col = ni.column.data();
            std::size_t j = 0;
            for (std::size_t i = 0; i < l.n; ++i) {
                const auto row = l.rows[i];
                const auto *m = ni.index.mask(ni.index.range_of(col[row]));
                std::uint64_t any = 0;
                for (std::size_t w = 0; w < words; ++w) {
                    auto x = l.qs[i * words + w] & (m[w] | keep[w]);
                    l.qs[j * words + w] = x;
                    any |= x;
                }
                l.rows[j] = row;
                j += any != 0;
            }
            l.n = j;
            l.uniform = false;
            break;
        }
        case NodeKind::Probe: {
            counters.probe_tuples += l.n;
            auto &dt = *dims_.dims[n.dim];
            const auto *col = ni.column.data();
            const auto *entries = dt.entries.data();
            std::size_t j = 0;
            for (std::size_t i = 0; i < l.n; ++i) {
                const auto row = l.rows[i];
                auto drow = dt.index.find(col[row]);
                if (drow < 0) continue;
                const auto *e = entries + static_cast<std::size_t>(drow) * words;
                std::uint64_t any = 0;
                for (std::size_t w = 0; w < words; ++w) {
                    auto x = l.qs[i * words + w] & e[w];
                    l.qs[j * words + w] = x;
                    any |= x;
                }
                l.rows[j] = row;
                j += any != 0;
            }
            l.n = j;
            l.uniform = false;
            break;
        }
        default: break;
    }
    emit(node, depth, sums, counters, scratch, words_c);
}

template<typename Words>
void PlanExecutor::emit(std::uint32_t node, std::size_t depth, std::span<std::int64_t> sums, ExecCounters &counters,
                        Scratch &scratch, Words words_c) const
{
    const std::size_t words = words_c;
    auto &ni = info_[node];
    {
        auto &l = scratch.levels[depth];
        if (l.n == 0) return;
        for (auto &g : ni.aggs) {
            const auto *m = g.measure.data();
            const auto *mask = g.mask.words().data();
            if (l.uniform) {
                std::int64_t total = 0;
                for (std::size_t i = 0; i < l.n; ++i) total += m[l.rows[i]];
                for (std::size_t w = 0; w < words; ++w)
                    for (auto bits = l.qs[w] & mask[w]; bits; bits &= bits - 1) {
                        sums[w * 64 + std::countr_zero(bits)] += total;
                        counters.agg_updates += l.n;
                    }
                continue;
            }
            for (std::size_t i = 0; i < l.n; ++i) {
                const std::int64_t v = m[l.rows[i]];
                for (std::size_t w = 0; w < words; ++w)
                    for (auto bits = l.qs[i * words + w] & mask[w]; bits; bits &= bits - 1) {
                        sums[w * 64 + std::countr_zero(bits)] += v;
                        ++counters.agg_updates;
                    }
            }
        }
    }
    const auto nc = ni.children.size();
    for (std::size_t c = 0; c < nc; ++c) {
        const auto child = ni.children[c];
        auto &in = scratch.levels[depth];
        if (in.n == 0) return;
        if (c + 1 == nc) {
            // last consumer takes the vector in place
            if (ni.child_needs_mask[c]) {
                const auto *mask = plan_.nodes[child].queries.words().data();
                std::size_t j = 0;
                for (std::size_t i = 0; i < in.n; ++i) {
                    std::uint64_t any = 0;
                    for (std::size_t w = 0; w < words; ++w) {
                        auto x = in.qs[i * words + w] & mask[w];
                        in.qs[j * words + w] = x;
                        any |= x;
                    }
                    in.rows[j] = in.rows[i];
                    j += any != 0;
                }
                in.n = j;
            }
            push(child, depth, sums, counters, scratch, words_c);
            return;
        }
        auto &out = scratch.level(depth + 1, words);
        auto &src = scratch.levels[depth];          // level() may have reallocated the vector of levels
        const auto *mask = plan_.nodes[child].queries.words().data();
        std::size_t j = 0;
        for (std::size_t i = 0; i < src.n; ++i) {
            std::uint64_t any = 0;
            for (std::size_t w = 0; w < words; ++w) {
                auto x = src.qs[i * words + w] & mask[w];
                out.qs[j * words + w] = x;
                any |= x;
            }
            out.rows[j] = src.rows[i];
            j += any != 0;
        }
        out.n = j;
        out.uniform = src.uniform;
        push(child, depth + 1, sums, counters, scratch, words_c);
    }
}

std::vector<std::int64_t> execute_plan(const GlobalPlan &plan, const Batch &batch, const Schema &schema,
                                       const DimensionState &dims, std::vector<SourceBinding> bindings,
                                       ExecCounters *counters)
{
    std::vector<std::int64_t> sums(plan.width, 0);
    if (plan.empty()) return sums;
    PlanExecutor ex(plan, batch, schema, dims, std::move(bindings));
    auto scratch = ex.make_scratch();
    ExecCounters local;
    for (std::size_t s = 0; s < ex.num_sources(); ++s) ex.run(s, 0, ex.num_blocks(s), sums, local, *scratch);
    if (counters) *counters += local;
    return sums;
}

} // namespace sharedb
