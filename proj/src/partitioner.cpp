#include <sharedb/partitioner.hpp>

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace sharedb {

double homogeneity(std::span<const std::uint32_t> tuples, const AccessMatrix &w)
{
    std::vector<char> seen(w.num_subqueries(), 0);
    double numerator = 0, denominator = 0;
    for (auto t : tuples)
        for (auto j : w.accessed[t]) {
            numerator += w.weights[j];
            if (!seen[j]) {
                seen[j] = 1;
                denominator += w.weights[j];
            }
        }
    return numerator / std::max(denominator, 1.0);
}

std::vector<CandidateCut> candidate_cuts(std::span<const Batch> batches)
{
    std::vector<CandidateCut> cuts;
    for (auto &b : batches)
        for (auto &q : b.queries)
            for (auto &f : q.filters) {
                if (f.column.table != kFactTable || f.range.empty()) continue;
                cuts.push_back({f.column.column, f.range.lo});
                cuts.push_back({f.column.column, f.range.hi});
            }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    return cuts;
}

namespace {

class Partitioner
{
    const ColumnarTable &fact_;
    const Schema &schema_;
    const AccessMatrix &w_;
    std::span<const CandidateCut> cuts_;
    PartitionerConfig cfg_;
    PartitionTree tree_;
    int next_leaf_ = 0;

    public:
    Partitioner(const ColumnarTable &fact, const Schema &schema, const AccessMatrix &w,
                std::span<const CandidateCut> cuts, const PartitionerConfig &cfg)
        : fact_(fact), schema_(schema), w_(w), cuts_(cuts), cfg_(cfg)
    {
    }

    PartitionTree run()
    {
        std::vector<std::uint32_t> all(w_.num_samples());
        std::iota(all.begin(), all.end(), 0u);
        std::vector<Range> box(schema_.fact.columns.size());
        for (std::size_t c = 0; c < box.size(); ++c) box[c] = {schema_.fact.columns[c].lo, schema_.fact.columns[c].hi};
        split(std::move(all), box);
        return std::move(tree_);
    }

    private:
    double estimated_rows(std::size_t samples) const { return static_cast<double>(samples) / w_.sample_rate; }

    std::int32_t value(std::uint32_t sample, std::uint32_t column) const
    {
        return fact_.columns[column][w_.sample_rows[sample]];
    }

    /** Scores every candidate cut on `column` with one sorted sweep; returns (H(left)+H(right), cut index) of the
     * first best cut, or nothing. */
    struct Best
    {
        double score = 0;
        std::size_t cut = 0;
        bool found = false;
    };

    void score_column(std::uint32_t column, std::span<const std::uint32_t> tuples, std::span<const std::size_t> cut_ids,
                      Best &best) const
    {
        std::vector<std::uint32_t> order(tuples.begin(), tuples.end());
        std::stable_sort(order.begin(), order.end(),
                         [&](auto a, auto b) { return value(a, column) < value(b, column); });
        const std::size_t n = order.size(), m = cut_ids.size();

        // position of each cut: number of sorted tuples with value < split
        std::vector<std::size_t> pos(m);
        for (std::size_t k = 0; k < m; ++k) {
            auto split = cuts_[cut_ids[k]].split;
            pos[k] = static_cast<std::size_t>(
                std::partition_point(order.begin(), order.end(), [&](auto t) { return value(t, column) < split; }) -
                order.begin());
        }

        // suffix sweep: denominator of the right side at each cut
        std::vector<double> right_den(m, 0);
        std::vector<std::uint32_t> count(w_.num_subqueries(), 0);
        {
            double den = 0;
            std::size_t i = n;
            for (std::size_t k = m; k-- > 0;) {
                while (i > pos[k]) {
                    --i;
                    for (auto j : w_.accessed[order[i]])
                        if (count[j]++ == 0) den += w_.weights[j];
                }
                right_den[k] = den;
            }
        }
        std::fill(count.begin(), count.end(), 0);
        double total_num = 0;
        for (auto t : order)
            for (auto j : w_.accessed[t]) total_num += w_.weights[j];

        double num = 0, den = 0;
        std::size_t i = 0;
        for (std::size_t k = 0; k < m; ++k) {
            while (i < pos[k]) {
                for (auto j : w_.accessed[order[i]]) {
                    num += w_.weights[j];
                    if (count[j]++ == 0) den += w_.weights[j];
                }
                ++i;
            }
            if (estimated_rows(pos[k]) < static_cast<double>(cfg_.ps_min) ||
                estimated_rows(n - pos[k]) < static_cast<double>(cfg_.ps_min))
                continue;
            double score = num / std::max(den, 1.0) + (total_num - num) / std::max(right_den[k], 1.0);
            if (!best.found || score > best.score || (score == best.score && cut_ids[k] < best.cut)) {
                best = {score, cut_ids[k], true};
            }
        }
    }

    int split(std::vector<std::uint32_t> tuples, std::vector<Range> box)
    {
        int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        const double score = homogeneity(tuples, w_);

        Best best;
        for (std::size_t k = 0; k < cuts_.size();) {
            auto column = cuts_[k].column;
            std::vector<std::size_t> ids;
            for (; k < cuts_.size() && cuts_[k].column == column; ++k) {
                auto &r = box.at(column);
                if (cuts_[k].split > r.lo && cuts_[k].split < r.hi) ids.push_back(k);
            }
            if (!ids.empty()) score_column(column, tuples, ids, best);
        }

        if (best.found && best.score > cfg_.improvement * score) {
            auto cut = cuts_[best.cut];
            std::vector<std::uint32_t> left, right;
            for (auto t : tuples) (value(t, cut.column) < cut.split ? left : right).push_back(t);
            auto lbox = box, rbox = box;
            lbox[cut.column].hi = cut.split;
            rbox[cut.column].lo = cut.split;
            tuples = {};
            int l = split(std::move(left), std::move(lbox));
            int r = split(std::move(right), std::move(rbox));
            auto &node = tree_.nodes[id];
            node.column = cut.column;
            node.split = cut.split;
            node.left = l;
            node.right = r;
        } else {
            tree_.nodes[id].leaf_id = next_leaf_++;
        }
        return id;
    }
};

} // namespace

PartitionTree partition_tree(const ColumnarTable &fact, const Schema &schema, const AccessMatrix &w,
                             std::span<const CandidateCut> cuts, const PartitionerConfig &config)
{
    if (!(config.improvement >= 1.0)) throw ConfigError("partitioning improvement threshold must be >= 1");
    if (w.num_samples() == 0) return PartitionTree::single_leaf();
    for (auto &c : cuts)
        if (c.column >= fact.columns.size()) throw ConfigError("candidate cut on a missing fact column");
    SHAREDB_CHECK(std::is_sorted(cuts.begin(), cuts.end()), "candidate cuts must be sorted");
    return Partitioner(fact, schema, w, cuts, config).run();
}

double aggregate_homogeneity(const PartitionTree &tree, const ColumnarTable &fact, const AccessMatrix &w)
{
    std::vector<std::vector<std::uint32_t>> per_leaf(tree.num_leaves());
    for (std::uint32_t t = 0; t < w.num_samples(); ++t)
        per_leaf[tree.route(fact, w.sample_rows[t])].push_back(t);
    double h = 0;
    for (auto &leaf : per_leaf) h += homogeneity(leaf, w);
    return h;
}

/*======================================================================================================================
 * Blocks
 *====================================================================================================================*/

Blocking build_blocks(std::uint64_t rows, std::span<const std::span<const std::int32_t>> key_columns,
                      std::span<const std::vector<std::int64_t>> bounds, const BlockingConfig &config)
{
    if (config.min_average == 0 || config.max_block < config.min_average)
        throw ConfigError("block sizes need 0 < min_average <= max_block");
    SHAREDB_CHECK(key_columns.size() == bounds.size(), "one bound list per key column");
    const std::size_t k = key_columns.size();

    Blocking out;
    out.order.resize(rows);
    std::iota(out.order.begin(), out.order.end(), 0u);
    std::vector<std::uint16_t> bucket(rows * k);
    for (std::size_t c = 0; c < k; ++c) {
        auto &b = bounds[c];
        SHAREDB_CHECK(b.size() < 65535, "too many bucket bounds");
        for (std::uint64_t r = 0; r < rows; ++r)
            bucket[r * k + c] = static_cast<std::uint16_t>(
                std::upper_bound(b.begin(), b.end(), static_cast<std::int64_t>(key_columns[c][r])) - b.begin());
    }
    auto key_less = [&](std::uint32_t a, std::uint32_t b) {
        return std::lexicographical_compare(bucket.begin() + a * k, bucket.begin() + (a + 1) * k,
                                            bucket.begin() + b * k, bucket.begin() + (b + 1) * k);
    };
    if (k) std::stable_sort(out.order.begin(), out.order.end(), key_less);

    // runs of equal bucket keys
    std::vector<std::uint64_t> run_ends;
    for (std::uint64_t i = 1; i <= rows; ++i)
        if (i == rows || key_less(out.order[i - 1], out.order[i])) run_ends.push_back(i);

    std::uint64_t start = 0;        // first row not yet assigned to a block
    for (auto end : run_ends) {
        auto len = end - start;
        if (len < config.min_average) continue;     // keep accumulating short runs
        auto pieces = (len + config.max_block - 1) / config.max_block;
        for (std::uint64_t p = 1; p <= pieces; ++p) out.offsets.push_back(start + len * p / pieces);
        start = end;
    }
    if (start < rows) {
        if (out.offsets.size() > 1) out.offsets.back() = rows;      // fold the short tail into the last block
        else out.offsets.push_back(rows);
    }
    return out;
}

} // namespace sharedb

/*======================================================================================================================
 * Physical layout
 *====================================================================================================================*/

namespace sharedb {

SourceData PhysicalLayout::source(std::size_t p) const
{
    auto &part = partitions.at(p);
    SourceData s;
    s.blocks = &part.blocks;
    for (std::uint32_t c = 0; c < fact.columns.size(); ++c) {
        s.names.push_back({kFactTable, c});
        s.columns.push_back(std::span<const std::int32_t>(fact.columns[c]).subspan(part.begin, part.rows()));
    }
    return s;
}

std::string PhysicalLayout::to_text() const
{
    std::string out = "layout partitions=" + std::to_string(partitions.size()) +
                      " rows=" + std::to_string(fact.row_count) + "\n";
    for (auto &p : partitions) {
        out += "partition " + std::to_string(p.id) + " " + std::to_string(p.begin) + " " + std::to_string(p.end) +
               " blocks=";
        for (std::size_t i = 0; i < p.blocks.offsets.size(); ++i)
            out += (i ? "," : "") + std::to_string(p.blocks.offsets[i]);
        out += "\n";
    }
    return out;
}

std::vector<ColumnRef> fact_zone_columns(const Schema &schema)
{
    std::vector<ColumnRef> out;
    for (std::uint32_t c = 0; c < schema.fact.columns.size(); ++c)
        if (!schema.is_fk_column(c)) out.push_back({kFactTable, c});
    return out;
}

namespace {

void build_partition_zones(PhysicalLayout &layout, const Schema &schema)
{
    auto names = fact_zone_columns(schema);
    for (std::size_t p = 0; p < layout.partitions.size(); ++p) {
        auto &part = layout.partitions[p];
        std::vector<std::span<const std::int32_t>> cols;
        for (auto c : names)
            cols.push_back(std::span<const std::int32_t>(layout.fact.columns[c.column]).subspan(part.begin, part.rows()));
        build_zone_maps(part.blocks, names, cols);
    }
}

} // namespace

PhysicalLayout build_layout(const ColumnarTable &fact, const Schema &schema, PartitionTree tree,
                            std::span<const Batch> tuning, const BlockingConfig &config, bool cluster)
{
    auto re = reorganize(fact, tree);
    auto keys = blocking_keys(tuning, [&](ColumnRef c) {
        return cluster && c.table == kFactTable && !schema.is_fk_column(c.column);
    });

    std::vector<std::uint32_t> order(re.table.row_count);
    for (auto &part : re.partitions) {
        std::vector<std::span<const std::int32_t>> key_cols;
        for (auto c : keys.columns)
            key_cols.push_back(std::span<const std::int32_t>(re.table.columns[c.column]).subspan(part.begin, part.rows()));
        auto blocking = build_blocks(part.rows(), key_cols, keys.bounds, config);
        for (std::uint64_t i = 0; i < part.rows(); ++i)
            order[part.begin + i] = static_cast<std::uint32_t>(part.begin + blocking.order[i]);
        part.blocks = BlockLayout{};
        part.blocks.offsets = std::move(blocking.offsets);
    }

    PhysicalLayout layout;
    layout.tree = std::move(tree);
    layout.fact = apply_order(re.table, order);
    layout.partitions = std::move(re.partitions);
    build_partition_zones(layout, schema);
    return layout;
}

PhysicalLayout parse_layout(std::string_view text, const Schema &schema, PartitionTree tree, ColumnarTable fact)
{
    PhysicalLayout layout;
    std::istringstream in{std::string(text)};
    std::string line, word;
    std::size_t count = 0;
    std::uint64_t rows = 0;
    if (!std::getline(in, line) || std::sscanf(line.c_str(), "layout partitions=%zu rows=%" SCNu64, &count, &rows) != 2)
        throw DataError("layout: bad header");
    if (rows != fact.row_count) throw DataError("layout: row count does not match the fact snapshot");
    if (count != tree.num_leaves()) throw DataError("layout: partition count does not match the tree");
    std::uint64_t expect = 0;
    for (std::size_t i = 0; i < count; ++i) {
        if (!std::getline(in, line)) throw DataError("layout: missing partition line");
        std::istringstream ls(line);
        Partition p;
        std::string blocks;
        if (!(ls >> word >> p.id >> p.begin >> p.end >> blocks) || word != "partition" || p.id != i ||
            blocks.rfind("blocks=", 0) != 0)
            throw DataError("layout: bad partition line " + std::to_string(i));
        if (p.begin != expect || p.end < p.begin || p.end > rows) throw DataError("layout: partitions must tile the table");
        expect = p.end;
        p.bounds = tree.leaf_bounds(static_cast<int>(i));
        p.blocks.offsets.clear();
        std::istringstream bs(blocks.substr(7));
        for (std::string tok; std::getline(bs, tok, ',');) p.blocks.offsets.push_back(std::stoull(tok));
        if (p.blocks.offsets.empty() || p.blocks.offsets.front() != 0 || p.blocks.offsets.back() != p.rows() ||
            !std::is_sorted(p.blocks.offsets.begin(), p.blocks.offsets.end()))
            throw DataError("layout: bad block offsets in partition " + std::to_string(i));
        layout.partitions.push_back(std::move(p));
    }
    if (expect != rows) throw DataError("layout: partitions must tile the table");
    layout.tree = std::move(tree);
    layout.fact = std::move(fact);
    build_partition_zones(layout, schema);
    return layout;
}

} // namespace sharedb
