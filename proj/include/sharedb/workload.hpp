#pragma once

#include <sharedb/common.hpp>
#include <sharedb/query_set.hpp>
#include <sharedb/storage.hpp>

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace sharedb {

/*======================================================================================================================
 * Queries and batches
 *====================================================================================================================*/

/** SELECT SUM(fact.measure) FROM fact, <joins> WHERE <conjunction of range filters>. */
struct Query
{
    std::uint32_t id = 0;                   ///< position in the batch; also its query-set bit
    DimMask joins = 0;
    std::vector<Predicate> filters;         ///< at most one per column, sorted by column
    std::uint32_t measure = 0;              ///< fact column summed
    std::string origin;                     ///< template name, or empty for literal queries

    const Predicate *filter_on(ColumnRef c) const;
    bool has_fact_filters() const;
};

struct Batch
{
    std::string name;
    std::uint32_t id = 0;
    std::vector<Query> queries;

    std::size_t width() const { return queries.size(); }
    QuerySet all() const { return QuerySet::all(queries.size(), queries.size()); }
};

/** Checks filter tables against the join set, merges duplicate filters per column by intersection, and sorts. */
void normalize_query(Query &q, const Schema &schema);

/** Range filter drawn per instantiation: [s, s + width) with s = from + k*step and s + width <= to. */
struct FilterTemplate
{
    ColumnRef column;
    std::int64_t width = 10;
    std::int64_t from = 0;
    std::int64_t to = 100;
    std::int64_t step = 1;
};

struct QueryTemplate
{
    std::string name;
    std::uint32_t measure = 0;
    DimMask joins = 0;
    std::vector<FilterTemplate> filters;
};

/** Instantiates a template.  `shift` slides every filter window; predicates are clipped to the column domain. */
template<typename Gen>
Query instantiate(const QueryTemplate &t, const Schema &schema, Gen &gen, std::int64_t shift = 0);

struct Workload
{
    Schema schema;
    std::vector<QueryTemplate> templates;
    std::vector<Batch> tuning;
    std::vector<Batch> runtime;
    std::size_t max_batch_width = kDefaultQuerySetWidth;

    const QueryTemplate &find_template(std::string_view name) const;
};

/** Parses the declarative workload format (docs/WORKLOAD_FORMAT.md).  Errors name the offending line. */
Workload parse_workload(std::string_view text, std::size_t max_batch_width = kDefaultQuerySetWidth);

/** Text form accepted by `parse_workload`.  Batches are written as literal queries. */
std::string to_text(const Workload &w);
std::string to_text(const Query &q, const Schema &schema);

/*======================================================================================================================
 * Subqueries
 *====================================================================================================================*/

/** Join subexpression rooted at the fact table, tracked per batch. */
struct Subquery
{
    std::uint32_t id = 0;
    std::uint32_t batch = 0;                ///< index into the batch list the catalog was built from
    DimMask tables = 0;                     ///< participating dimensions; the fact table is implicit
    double weight = 0;

    int table_count() const { return 1 + dim_count(tables); }
};

using SubqueryWeight = std::function<double(const Subquery &)>;

/** w(e) = number of participating tables, fact included. */
inline double table_count_weight(const Subquery &s) { return s.table_count(); }

struct SubqueryCatalog
{
    std::vector<Subquery> entries;
    /// per batch, per query: catalog ids of the query's subqueries
    std::vector<std::vector<std::vector<std::uint32_t>>> of_query;

    std::optional<std::uint32_t> find(std::uint32_t batch, DimMask tables) const;
};

/** One entry per distinct non-empty subset of each query's join set, deduplicated within a batch. */
SubqueryCatalog enumerate_subqueries(std::span<const Batch> batches, const SubqueryWeight &weight = table_count_weight);

/*======================================================================================================================
 * Access matrix
 *====================================================================================================================*/

/** Sparse sampled access matrix: row t has W[t][j] = w(e_j) for every listed subquery j, zero elsewhere. */
struct AccessMatrix
{
    std::vector<std::uint32_t> sample_rows;             ///< fact row ids, ascending
    std::vector<std::vector<std::uint32_t>> accessed;   ///< per sample: sorted catalog ids
    std::vector<double> weights;                        ///< per catalog id
    double sample_rate = 1.0;

    std::size_t num_samples() const { return sample_rows.size(); }
    std::size_t num_subqueries() const { return weights.size(); }
    double entry(std::size_t sample, std::uint32_t subquery) const;

    /** "sample_row subquery weight" triplets, one per non-zero entry, preceded by a header line. */
    std::string to_triplets() const;
};

/** Samples fact rows uniformly (Bernoulli, rate ρ) and records which subqueries access each sampled row.  A row is
 * accessed by subquery e iff it satisfies the fact-table filters of some query whose join set contains e. */
AccessMatrix record_access_matrix(const ColumnarTable &fact, std::span<const Batch> batches,
                                  const SubqueryCatalog &catalog, double sample_rate, std::uint64_t seed);

/*======================================================================================================================
 * Template instantiation
 *====================================================================================================================*/

template<typename Gen>
Query instantiate(const QueryTemplate &t, const Schema &schema, Gen &gen, std::int64_t shift)
{
    Query q;
    q.joins = t.joins;
    q.measure = t.measure;
    q.origin = t.name;
    for (auto &f : t.filters) {
        if (f.step <= 0 || f.width <= 0) throw ConfigError("template '" + t.name + "': width and step must be > 0");
        if (f.from + f.width > f.to)
            throw ConfigError("template '" + t.name + "': filter window on " + schema.column_name(f.column) +
                              " is narrower than the filter width");
        auto choices = static_cast<std::uint64_t>((f.to - f.width - f.from) / f.step + 1);
        auto s = f.from + static_cast<std::int64_t>(bounded(gen, choices)) * f.step + shift;
        auto &spec = schema.table(f.column.table).columns.at(f.column.column);
        Range r{std::max<std::int64_t>(s, spec.lo), std::min<std::int64_t>(s + f.width, spec.hi)};
        if (r.empty()) r = {spec.hi, spec.hi};     // slid out of the domain: selects nothing
        q.filters.push_back({f.column, r});
    }
    normalize_query(q, schema);
    return q;
}

} // namespace sharedb
