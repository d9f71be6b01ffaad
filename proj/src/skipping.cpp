#include <sharedb/global_plan.hpp>

#include <algorithm>

namespace sharedb {

std::optional<std::size_t> SourceData::find(ColumnRef c) const
{
    auto it = std::find(names.begin(), names.end(), c);
    if (it == names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names.begin());
}

std::span<const std::int32_t> SourceData::column(ColumnRef c) const
{
    auto i = find(c);
    if (!i) throw ExecutionError("source lacks column (table " + std::to_string(c.table) + ", column " +
                                 std::to_string(c.column) + ")");
    return columns[*i];
}

std::optional<std::size_t> SkipAnalysis::slot(ColumnRef c) const
{
    auto it = std::find(columns.begin(), columns.end(), c);
    if (it == columns.end()) return std::nullopt;
    return static_cast<std::size_t>(it - columns.begin());
}

SkipAnalysis analyze_blocks(const BlockLayout &blocks, const Batch &batch, const QuerySet &candidates,
                            std::span<const ColumnRef> columns, bool skipping)
{
    SkipAnalysis out;
    out.width = batch.width();
    out.columns.assign(columns.begin(), columns.end());
    const std::size_t nb = blocks.num_blocks(), ns = columns.size();
    out.alive.assign(nb, candidates);
    out.ambivalent.assign(nb * ns, QuerySet(out.width));
    out.touched = QuerySet(out.width);

    // per candidate query: (slot, zone slot, range) of each predicate this source applies
    struct Applied
    {
        std::size_t slot;
        std::optional<std::size_t> zone;
        Range range;
    };
    std::vector<std::pair<std::uint32_t, std::vector<Applied>>> work;
    candidates.for_each([&](std::size_t q) {
        if (q >= batch.width()) return;
        std::vector<Applied> preds;
        for (auto &f : batch.queries[q].filters) {
            auto it = std::find(columns.begin(), columns.end(), f.column);
            if (it == columns.end()) continue;
            preds.push_back({static_cast<std::size_t>(it - columns.begin()), blocks.zone_slot(f.column), f.range});
        }
        work.emplace_back(static_cast<std::uint32_t>(q), std::move(preds));
    });

    for (std::size_t b = 0; b < nb; ++b) {
        auto &alive = out.alive[b];
        QuerySet *amb = ns ? &out.ambivalent[b * ns] : nullptr;
        for (auto &[q, preds] : work) {
            std::uint64_t resolved = 0;
            bool dead = false;
            for (auto &p : preds) {
                auto cls = PredicateClassification::Ambivalent;
                if (p.range.empty()) cls = PredicateClassification::AlwaysFalse;
                else if (p.zone) cls = classify_predicate(blocks.zone(*p.zone, b), p.range);
                if (!skipping) cls = PredicateClassification::Ambivalent;
                if (cls == PredicateClassification::AlwaysFalse) {
                    dead = true;
                    break;
                }
                if (cls == PredicateClassification::AlwaysTrue) ++resolved;
                else amb[p.slot].set(q);
            }
            if (dead) {
                alive.reset(q);
                for (auto &p : preds) amb[p.slot].reset(q);
            } else {
                out.skipped_filters += resolved;
            }
        }
        if (alive.none() && candidates.any()) ++out.skipped_blocks;
        out.touched |= alive;
    }
    return out;
}

} // namespace sharedb
