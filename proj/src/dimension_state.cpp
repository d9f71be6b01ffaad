#include <sharedb/global_plan.hpp>

#include <bit>

namespace sharedb {

DimHashTable::DimHashTable(std::span<const std::int32_t> keys)
{
    std::uint64_t cap = std::bit_ceil(std::max<std::uint64_t>(2, keys.size() * 2));
    slots_.assign(cap, Slot{0, kEmpty});
    mask_ = cap - 1;
    shift_ = 64 - std::countr_zero(cap);
    for (std::uint32_t row = 0; row < keys.size(); ++row) {
        auto i = hash(keys[row]);
        while (slots_[i].row != kEmpty) {
            if (slots_[i].key == keys[row])
                throw DataError("duplicate dimension key " + std::to_string(keys[row]));
            i = (i + 1) & mask_;
        }
        slots_[i] = {keys[row], row};
    }
}

QuerySet DimensionState::entry_set(std::uint32_t dim, std::uint64_t row) const
{
    QuerySet s(width);
    auto *e = entry(dim, row);
    std::copy(e, e + words, s.words().begin());
    return s;
}

DimensionState build_dimension_state(const Database &db, const Batch &batch)
{
    DimensionState st;
    st.width = batch.width();
    st.words = words_for(st.width);
    st.dims.resize(db.dims.size());

    DimMask used = 0;
    for (auto &q : batch.queries) used |= q.joins;

    for (std::uint32_t d = 0; d < db.dims.size(); ++d) {
        if (!(used & dim_bit(d))) continue;
        auto &table = db.dims[d];
        auto &out = st.dims[d].emplace();
        out.index = DimHashTable(table.column(0));
        out.entries.assign(table.row_count * st.words, 0);
        out.selectivity.assign(st.width, 1.0);
        const TableId tid = d + 1;
        for (auto &q : batch.queries) {
            if (!(q.joins & dim_bit(d))) continue;
            std::vector<const Predicate *> preds;
            for (auto &f : q.filters)
                if (f.column.table == tid) preds.push_back(&f);
            const auto word = q.id / 64;
            const auto bit = std::uint64_t{1} << (q.id % 64);
            std::uint64_t hits = 0;
            for (std::uint64_t r = 0; r < table.row_count; ++r) {
                bool pass = true;
                for (auto *p : preds)
                    if (!p->range.contains(table.columns[p->column.column][r])) {
                        pass = false;
                        break;
                    }
                if (pass) {
                    out.entries[r * st.words + word] |= bit;
                    ++hits;
                }
            }
            out.selectivity[q.id] = table.row_count ? static_cast<double>(hits) / table.row_count : 0.0;
        }
    }
    return st;
}

} // namespace sharedb
