#include <sharedb/workload.hpp>

#include <algorithm>
#include <charconv>
#include <map>
#include <random>
#include <sstream>

namespace sharedb {

const Predicate *Query::filter_on(ColumnRef c) const
{
    for (auto &f : filters)
        if (f.column == c) return &f;
    return nullptr;
}

bool Query::has_fact_filters() const
{
    return std::any_of(filters.begin(), filters.end(), [](auto &f) { return f.column.table == kFactTable; });
}

void normalize_query(Query &q, const Schema &schema)
{
    if (q.measure >= schema.fact.columns.size()) throw ConfigError("aggregate column out of range");
    if (q.joins >> schema.dims.size()) throw ConfigError("join references a missing dimension");
    for (std::uint32_t d = 0; d < schema.dims.size(); ++d)
        if (q.joins & dim_bit(d)) schema.fk_column(d);     // throws when the fact table cannot join d
    std::vector<Predicate> merged;
    for (auto &f : q.filters) {
        if (f.column.table != kFactTable && !(q.joins & dim_bit(f.column.table - 1)))
            throw ConfigError("filter on " + schema.column_name(f.column) + " but its table is not joined");
        auto it = std::find_if(merged.begin(), merged.end(), [&](auto &m) { return m.column == f.column; });
        if (it == merged.end()) {
            merged.push_back(f);
        } else {
            it->range.lo = std::max(it->range.lo, f.range.lo);
            it->range.hi = std::min(it->range.hi, f.range.hi);
            if (it->range.empty()) it->range.hi = it->range.lo;
        }
    }
    std::sort(merged.begin(), merged.end(), [](auto &a, auto &b) { return a.column < b.column; });
    q.filters = std::move(merged);
}

const QueryTemplate &Workload::find_template(std::string_view name) const
{
    for (auto &t : templates)
        if (t.name == name) return t;
    throw ConfigError("unknown template '" + std::string(name) + "'");
}

/*======================================================================================================================
 * Parser
 *====================================================================================================================*/

namespace {

struct Line
{
    std::size_t number;
    std::vector<std::string> tokens;
};

[[noreturn]] void fail(std::size_t line, const std::string &msg)
{
    throw ConfigError("workload line " + std::to_string(line) + ": " + msg);
}

std::int64_t to_int(std::string_view s, std::size_t line, std::string_view what)
{
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        fail(line, "expected an integer for " + std::string(what) + ", got '" + std::string(s) + "'");
    return v;
}

/// key=value; returns {key, value} or {token, ""} when there is no '='
std::pair<std::string, std::string> split_kv(const std::string &tok)
{
    auto eq = tok.find('=');
    if (eq == std::string::npos) return {tok, ""};
    return {tok.substr(0, eq), tok.substr(eq + 1)};
}

std::pair<std::int64_t, std::int64_t> parse_pair(std::string_view s, char sep, std::size_t line, std::string_view what)
{
    auto c = s.find(sep, s.front() == '-' ? 1 : 0);
    if (c == std::string_view::npos) fail(line, "expected lo" + std::string(1, sep) + "hi for " + std::string(what));
    return {to_int(s.substr(0, c), line, what), to_int(s.substr(c + 1), line, what)};
}

class Parser
{
    std::vector<Line> lines_;
    std::size_t pos_ = 0;
    Workload w_;
    std::map<std::string, std::uint32_t> dim_rows_declared_;

    public:
    Parser(std::string_view text, std::size_t width)
    {
        w_.max_batch_width = width;
        std::istringstream is{std::string(text)};
        std::size_t n = 0;
        for (std::string l; std::getline(is, l);) {
            ++n;
            if (auto h = l.find('#'); h != std::string::npos) l.resize(h);
            std::istringstream ls(l);
            Line line{n, {}};
            for (std::string t; ls >> t;) line.tokens.push_back(t);
            if (!line.tokens.empty()) lines_.push_back(std::move(line));
        }
    }

    Workload run()
    {
        bool have_schema = false;
        while (pos_ < lines_.size()) {
            auto &l = lines_[pos_];
            auto &kw = l.tokens[0];
            if (kw == "schema") {
                if (have_schema) fail(l.number, "duplicate schema section");
                parse_schema();
                have_schema = true;
            } else if (kw == "template") {
                if (!have_schema) fail(l.number, "template before schema");
                parse_template();
            } else if (kw == "batch") {
                if (!have_schema) fail(l.number, "batch before schema");
                parse_batch();
            } else {
                fail(l.number, "unexpected '" + kw + "'");
            }
        }
        if (!have_schema) throw ConfigError("workload has no schema section");
        return std::move(w_);
    }

    private:
    void parse_schema()
    {
        auto start = lines_[pos_++].number;
        auto &s = w_.schema;
        struct PendingFk { std::size_t line; std::string column, dim; };
        std::vector<PendingFk> fks;
        std::vector<std::pair<std::size_t, std::vector<std::string>>> columns;
        for (;;) {
            if (pos_ >= lines_.size()) fail(start, "schema section not closed with 'end'");
            auto &l = lines_[pos_++];
            auto &t = l.tokens;
            if (t[0] == "end") break;
            if (t[0] == "fact" || t[0] == "dim") {
                if (t.size() != 3) fail(l.number, "expected '" + t[0] + " <name> rows=<n>'");
                auto [k, v] = split_kv(t[2]);
                if (k != "rows") fail(l.number, "expected rows=<n>");
                auto rows = to_int(v, l.number, "rows");
                if (rows <= 0) fail(l.number, "table '" + t[1] + "' must have rows > 0");
                if (s.find_table(t[1])) fail(l.number, "duplicate table '" + t[1] + "'");
                if (t[0] == "fact") {
                    if (!s.fact.name.empty()) fail(l.number, "second fact table");
                    s.fact.name = t[1];
                    s.fact.rows = static_cast<std::uint64_t>(rows);
                } else {
                    s.add_dimension(t[1], static_cast<std::uint64_t>(rows));
                }
            } else if (t[0] == "column") {
                columns.push_back({l.number, t});
            } else if (t[0] == "fk") {
                if (t.size() != 4 || t[2] != "->") fail(l.number, "expected 'fk <fact>.<column> -> <dim>'");
                fks.push_back({l.number, t[1], t[3]});
            } else {
                fail(l.number, "unexpected '" + t[0] + "' in schema section");
            }
        }
        if (s.fact.name.empty()) fail(start, "schema declares no fact table");
        // foreign keys first so FK columns get stable positions ahead of attributes
        for (auto &fk : fks) {
            auto dot = fk.column.find('.');
            if (dot == std::string::npos || fk.column.substr(0, dot) != s.fact.name)
                fail(fk.line, "foreign key must be a fact column, got '" + fk.column + "'");
            auto dim = s.find_dim(fk.dim);
            if (!dim) fail(fk.line, "unknown dimension '" + fk.dim + "'");
            if (s.fact.find_column(fk.column.substr(dot + 1))) fail(fk.line, "duplicate column '" + fk.column + "'");
            s.add_foreign_key(fk.column.substr(dot + 1), *dim);
        }
        for (auto &[line, t] : columns) {
            if (t.size() < 2 || t.size() > 3) fail(line, "expected 'column <table>.<name> [domain=lo:hi]'");
            auto dot = t[1].find('.');
            if (dot == std::string::npos) fail(line, "expected table.column, got '" + t[1] + "'");
            auto table = s.find_table(t[1].substr(0, dot));
            if (!table) fail(line, "unknown table '" + t[1].substr(0, dot) + "'");
            ColumnSpec c{t[1].substr(dot + 1), 0, 100};
            if (s.table(*table).find_column(c.name)) fail(line, "duplicate column '" + t[1] + "'");
            if (t.size() == 3) {
                auto [k, v] = split_kv(t[2]);
                if (k != "domain") fail(line, "expected domain=lo:hi");
                auto [lo, hi] = parse_pair(v, ':', line, "domain");
                if (lo >= hi || lo < std::numeric_limits<std::int32_t>::min() ||
                    hi > std::numeric_limits<std::int32_t>::max())
                    fail(line, "invalid domain for '" + t[1] + "'");
                c.lo = static_cast<std::int32_t>(lo);
                c.hi = static_cast<std::int32_t>(hi);
            }
            s.table(*table).columns.push_back(c);
        }
        try {
            s.validate();
        } catch (const ConfigError &e) {
            fail(start, e.what());
        }
    }

    ColumnRef resolve(const std::string &name, std::size_t line)
    {
        try {
            return w_.schema.resolve(name);
        } catch (const ConfigError &e) {
            fail(line, e.what());
        }
    }

    DimMask parse_joins(const std::string &list, std::size_t line)
    {
        DimMask m = 0;
        std::istringstream is(list);
        for (std::string d; std::getline(is, d, ',');) {
            if (d.empty()) continue;
            auto dim = w_.schema.find_dim(d);
            if (!dim) fail(line, "unknown dimension '" + d + "'");
            m |= dim_bit(*dim);
        }
        return m;
    }

    std::uint32_t parse_measure(const std::string &v, std::size_t line)
    {
        auto c = resolve(v, line);
        if (c.table != kFactTable) fail(line, "aggregate must be a fact column, got '" + v + "'");
        return c.column;
    }

    /// "F.x[w=10,from=0,to=40,step=5]"
    FilterTemplate parse_filter_template(const std::string &v, std::size_t line)
    {
        auto br = v.find('[');
        if (br == std::string::npos || v.back() != ']') fail(line, "expected filter=<table>.<column>[w=..,...]");
        FilterTemplate f;
        f.column = resolve(v.substr(0, br), line);
        auto &spec = w_.schema.table(f.column.table).columns[f.column.column];
        f.from = spec.lo;
        f.to = spec.hi;
        std::istringstream is(v.substr(br + 1, v.size() - br - 2));
        for (std::string kv; std::getline(is, kv, ',');) {
            auto [k, val] = split_kv(kv);
            auto x = to_int(val, line, k);
            if (k == "w") f.width = x;
            else if (k == "from") f.from = x;
            else if (k == "to") f.to = x;
            else if (k == "step") f.step = x;
            else fail(line, "unknown filter parameter '" + k + "'");
        }
        if (f.width <= 0 || f.step <= 0) fail(line, "filter width and step must be positive");
        if (f.from + f.width > f.to) fail(line, "filter window [from,to) narrower than w");
        return f;
    }

    /// "F.x[0,10)"
    Predicate parse_literal_filter(const std::string &v, std::size_t line)
    {
        auto br = v.find('[');
        if (br == std::string::npos || v.back() != ')') fail(line, "expected filter=<table>.<column>[lo,hi)");
        Predicate p;
        p.column = resolve(v.substr(0, br), line);
        auto [lo, hi] = parse_pair(std::string_view(v).substr(br + 1, v.size() - br - 2), ',', line, "filter range");
        p.range = {lo, hi};
        if (p.range.empty()) p.range.hi = p.range.lo;
        return p;
    }

    void parse_template()
    {
        auto &l = lines_[pos_++];
        if (l.tokens.size() < 2) fail(l.number, "expected 'template <name> ...'");
        QueryTemplate t;
        t.name = l.tokens[1];
        for (auto &ex : w_.templates)
            if (ex.name == t.name) fail(l.number, "duplicate template '" + t.name + "'");
        bool have_sum = false;
        for (std::size_t i = 2; i < l.tokens.size(); ++i) {
            auto [k, v] = split_kv(l.tokens[i]);
            if (k == "sum") {
                t.measure = parse_measure(v, l.number);
                have_sum = true;
            } else if (k == "join") {
                t.joins = parse_joins(v, l.number);
            } else if (k == "filter") {
                t.filters.push_back(parse_filter_template(v, l.number));
            } else {
                fail(l.number, "unknown template field '" + k + "'");
            }
        }
        if (!have_sum) fail(l.number, "template '" + t.name + "' lacks sum=");
        for (auto &f : t.filters)
            if (f.column.table != kFactTable && !(t.joins & dim_bit(f.column.table - 1)))
                fail(l.number, "filter on " + w_.schema.column_name(f.column) + " but its table is not joined");
        w_.templates.push_back(std::move(t));
    }

    void parse_batch()
    {
        auto &head = lines_[pos_++];
        auto &t = head.tokens;
        if (t.size() < 3 || (t[1] != "tune" && t[1] != "run"))
            fail(head.number, "expected 'batch <tune|run> <name> [seed=<n>]'");
        auto &list = t[1] == "tune" ? w_.tuning : w_.runtime;
        Batch b;
        b.name = t[2];
        b.id = static_cast<std::uint32_t>(list.size());
        std::uint64_t seed = mix64(w_.tuning.size() * 1000003 + w_.runtime.size() + (t[1] == "run" ? 7 : 0));
        for (std::size_t i = 3; i < t.size(); ++i) {
            auto [k, v] = split_kv(t[i]);
            if (k != "seed") fail(head.number, "unknown batch field '" + k + "'");
            seed = static_cast<std::uint64_t>(to_int(v, head.number, "seed"));
        }
        std::mt19937_64 gen(mix64(seed));
        for (;;) {
            if (pos_ >= lines_.size()) fail(head.number, "batch '" + b.name + "' not closed with 'end'");
            auto &l = lines_[pos_++];
            auto &lt = l.tokens;
            if (lt[0] == "end") break;
            if (lt[0] == "use") {
                if (lt.size() < 2) fail(l.number, "expected 'use <template> [count=<n>] [shift=<d>]'");
                const QueryTemplate *tmpl = nullptr;
                for (auto &x : w_.templates)
                    if (x.name == lt[1]) tmpl = &x;
                if (!tmpl) fail(l.number, "unknown template '" + lt[1] + "'");
                std::int64_t count = 1, shift = 0;
                for (std::size_t i = 2; i < lt.size(); ++i) {
                    auto [k, v] = split_kv(lt[i]);
                    if (k == "count") count = to_int(v, l.number, "count");
                    else if (k == "shift") shift = to_int(v, l.number, "shift");
                    else fail(l.number, "unknown field '" + k + "'");
                }
                if (count < 0) fail(l.number, "count must be >= 0");
                for (std::int64_t i = 0; i < count; ++i) {
                    try {
                        b.queries.push_back(instantiate(*tmpl, w_.schema, gen, shift));
                    } catch (const ConfigError &e) {
                        fail(l.number, e.what());
                    }
                }
            } else if (lt[0] == "query") {
                Query q;
                bool have_sum = false;
                for (std::size_t i = 1; i < lt.size(); ++i) {
                    auto [k, v] = split_kv(lt[i]);
                    if (k == "sum") {
                        q.measure = parse_measure(v, l.number);
                        have_sum = true;
                    } else if (k == "join") {
                        q.joins = parse_joins(v, l.number);
                    } else if (k == "filter") {
                        q.filters.push_back(parse_literal_filter(v, l.number));
                    } else {
                        fail(l.number, "unknown query field '" + k + "'");
                    }
                }
                if (!have_sum) fail(l.number, "query lacks sum=");
                try {
                    normalize_query(q, w_.schema);
                } catch (const ConfigError &e) {
                    fail(l.number, e.what());
                }
                b.queries.push_back(std::move(q));
            } else {
                fail(l.number, "unexpected '" + lt[0] + "' in batch");
            }
            if (b.queries.size() > w_.max_batch_width)
                fail(l.number, "batch '" + b.name + "' exceeds the query-set width of " +
                                   std::to_string(w_.max_batch_width) + " queries");
        }
        for (std::uint32_t i = 0; i < b.queries.size(); ++i) b.queries[i].id = i;
        list.push_back(std::move(b));
    }
};

} // namespace

Workload parse_workload(std::string_view text, std::size_t max_batch_width)
{
    return Parser(text, max_batch_width).run();
}

std::string to_text(const Query &q, const Schema &schema)
{
    std::ostringstream os;
    os << "query sum=" << schema.column_name({kFactTable, q.measure});
    if (q.joins) {
        os << " join=";
        bool first = true;
        for (std::uint32_t d = 0; d < schema.dims.size(); ++d)
            if (q.joins & dim_bit(d)) {
                os << (first ? "" : ",") << schema.dims[d].name;
                first = false;
            }
    }
    for (auto &f : q.filters)
        os << " filter=" << schema.column_name(f.column) << '[' << f.range.lo << ',' << f.range.hi << ')';
    return os.str();
}

std::string to_text(const Workload &w)
{
    std::ostringstream os;
    auto &s = w.schema;
    os << "schema\n  fact " << s.fact.name << " rows=" << s.fact.rows << '\n';
    for (auto &d : s.dims) os << "  dim " << d.name << " rows=" << d.rows << '\n';
    for (auto &fk : s.foreign_keys)
        os << "  fk " << s.fact.name << '.' << s.fact.columns[fk.fact_column].name << " -> " << s.dims[fk.dim].name
           << '\n';
    auto cols = [&](const TableSpec &t, std::size_t first) {
        for (std::size_t c = first; c < t.columns.size(); ++c) {
            if (&t == &s.fact && s.is_fk_column(static_cast<std::uint32_t>(c))) continue;
            os << "  column " << t.name << '.' << t.columns[c].name << " domain=" << t.columns[c].lo << ':'
               << t.columns[c].hi << '\n';
        }
    };
    cols(s.fact, 0);
    for (auto &d : s.dims) cols(d, 1);
    os << "end\n";
    for (auto &t : w.templates) {
        os << "template " << t.name << " sum=" << s.column_name({kFactTable, t.measure});
        if (t.joins) {
            os << " join=";
            bool first = true;
            for (std::uint32_t d = 0; d < s.dims.size(); ++d)
                if (t.joins & dim_bit(d)) {
                    os << (first ? "" : ",") << s.dims[d].name;
                    first = false;
                }
        }
        for (auto &f : t.filters)
            os << " filter=" << s.column_name(f.column) << "[w=" << f.width << ",from=" << f.from << ",to=" << f.to
               << ",step=" << f.step << ']';
        os << '\n';
    }
    auto batches = [&](const std::vector<Batch> &list, const char *kind) {
        for (auto &b : list) {
            os << "batch " << kind << ' ' << b.name << '\n';
            for (auto &q : b.queries) os << "  " << to_text(q, s) << '\n';
            os << "end\n";
        }
    };
    batches(w.tuning, "tune");
    batches(w.runtime, "run");
    return os.str();
}

/*======================================================================================================================
 * Subqueries
 *====================================================================================================================*/

std::optional<std::uint32_t> SubqueryCatalog::find(std::uint32_t batch, DimMask tables) const
{
    for (auto &e : entries)
        if (e.batch == batch && e.tables == tables) return e.id;
    return std::nullopt;
}

SubqueryCatalog enumerate_subqueries(std::span<const Batch> batches, const SubqueryWeight &weight)
{
    SubqueryCatalog cat;
    for (std::uint32_t b = 0; b < batches.size(); ++b) {
        std::map<DimMask, std::uint32_t> ids;
        // collect distinct table sets first so ids do not depend on query order within the batch
        for (auto &q : batches[b].queries)
            for (DimMask sub = q.joins; sub; sub = (sub - 1) & q.joins) ids.emplace(sub, 0);
        for (auto &[mask, id] : ids) {
            Subquery s;
            s.id = static_cast<std::uint32_t>(cat.entries.size());
            s.batch = b;
            s.tables = mask;
            s.weight = weight(s);
            id = s.id;
            cat.entries.push_back(s);
        }
        auto &per = cat.of_query.emplace_back();
        for (auto &q : batches[b].queries) {
            auto &v = per.emplace_back();
            for (DimMask sub = q.joins; sub; sub = (sub - 1) & q.joins) v.push_back(ids.at(sub));
            std::sort(v.begin(), v.end());
        }
    }
    return cat;
}

/*======================================================================================================================
 * Access matrix
 *====================================================================================================================*/

double AccessMatrix::entry(std::size_t sample, std::uint32_t subquery) const
{
    auto &row = accessed.at(sample);
    return std::binary_search(row.begin(), row.end(), subquery) ? weights.at(subquery) : 0.0;
}

std::string AccessMatrix::to_triplets() const
{
    std::ostringstream os;
    os << "# samples=" << num_samples() << " subqueries=" << num_subqueries() << " rate=" << sample_rate << '\n';
    for (std::size_t t = 0; t < accessed.size(); ++t)
        for (auto j : accessed[t]) os << sample_rows[t] << ' ' << j << ' ' << weights[j] << '\n';
    return os.str();
}

AccessMatrix record_access_matrix(const ColumnarTable &fact, std::span<const Batch> batches,
                                  const SubqueryCatalog &catalog, double sample_rate, std::uint64_t seed)
{
    if (!(sample_rate > 0.0 && sample_rate <= 1.0)) throw ConfigError("sample rate must be in (0, 1]");
    AccessMatrix w;
    w.sample_rate = sample_rate;
    for (auto &e : catalog.entries) w.weights.push_back(e.weight);

    std::mt19937_64 gen(mix64(seed ^ 0x5a3c'0f11ULL));
    for (std::uint64_t r = 0; r < fact.row_count; ++r)
        if (sample_rate >= 1.0 || unit_double(gen) < sample_rate) w.sample_rows.push_back(static_cast<std::uint32_t>(r));
    if (w.sample_rows.empty())
        throw ConfigError("access-matrix sample is empty; raise the sample rate for a table of " +
                          std::to_string(fact.row_count) + " rows");

    std::vector<char> mark(catalog.entries.size(), 0);
    w.accessed.resize(w.sample_rows.size());
    for (std::size_t t = 0; t < w.sample_rows.size(); ++t) {
        auto row = w.sample_rows[t];
        auto &out = w.accessed[t];
        for (std::size_t b = 0; b < batches.size(); ++b)
            for (auto &q : batches[b].queries) {
                bool pass = true;
                for (auto &f : q.filters)
                    if (f.column.table == kFactTable && !f.range.contains(fact.columns[f.column.column][row])) {
                        pass = false;
                        break;
                    }
                if (!pass) continue;
                for (auto j : catalog.of_query[b][q.id])
                    if (!mark[j]) {
                        mark[j] = 1;
                        out.push_back(j);
                    }
            }
        std::sort(out.begin(), out.end());
        for (auto j : out) mark[j] = 0;
    }
    return w;
}

} // namespace sharedb
