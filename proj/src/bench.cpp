#include <sharedb/bench.hpp>
#include <sharedb/tuner.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace sharedb {

namespace {

using Gen = std::mt19937_64;

void number_queries(Batch &b)
{
    for (std::uint32_t i = 0; i < b.queries.size(); ++i) b.queries[i].id = i;
}

/// Query on `measure` joining `joins`, with range [lo, lo + width) on each listed column.
Query make_query(const Schema &s, DimMask joins, std::vector<std::pair<ColumnRef, Range>> filters)
{
    Query q;
    q.joins = joins;
    q.measure = s.resolve("F.v").column;
    for (auto &[c, r] : filters) q.filters.push_back({c, r});
    normalize_query(q, s);
    return q;
}

Range window(Gen &gen, std::int64_t from, std::int64_t to, std::int64_t width)
{
    auto s = from + static_cast<std::int64_t>(bounded(gen, static_cast<std::uint64_t>(to - width - from + 1)));
    return {s, s + width};
}

/// Concatenates the arguments' stream output.
template<typename... Args>
std::string cat(const Args &...args)
{
    std::ostringstream os;
    (os << ... << args);
    return os.str();
}

std::int64_t width_of(double selectivity, std::int64_t domain)
{
    return std::clamp<std::int64_t>(std::llround(selectivity * static_cast<double>(domain)), 1, domain);
}

DimMask dims_named(const Schema &s, std::initializer_list<std::string> names)
{
    DimMask m = 0;
    for (auto &n : names) m |= dim_bit(s.find_dim(n).value());
    return m;
}

} // namespace

/*======================================================================================================================
 * Sensitivity
 *====================================================================================================================*/

Workload sensitivity_workload(const SensitivityParams &p)
{
    if (p.filters < 1 || p.filters > 8) throw ConfigError("filters must be in 1..8");
    if (p.joins < 1 || p.joins > 12) throw ConfigError("joins must be in 1..12");
    if (p.queries == 0) throw ConfigError("need at least one query");
    std::ostringstream os;
    os << "schema\n  fact F rows=" << p.fact_rows << '\n';
    for (int i = 0; i < p.joins - 1; ++i) os << "  dim S" << i << " rows=" << p.dim_rows << '\n';
    for (int i = 0; i < 4; ++i) os << "  dim E" << i << " rows=" << p.dim_rows << '\n';
    for (int i = 0; i < p.joins - 1; ++i) os << "  fk F.s" << i << " -> S" << i << '\n';
    for (int i = 0; i < 4; ++i) os << "  fk F.e" << i << " -> E" << i << '\n';
    os << "  column F.v domain=0:100\n";
    for (int i = 0; i < p.joins - 1; ++i) os << "  column S" << i << ".p domain=0:100\n";
    for (int i = 0; i < 4; ++i)
        for (int a = 0; a < 8; ++a) os << "  column E" << i << ".a" << a << " domain=0:100\n";
    os << "end\n";
    auto w = parse_workload(os.str(), std::max<std::size_t>(p.queries, kDefaultQuerySetWidth));
    auto &s = w.schema;

    DimMask shared = 0;
    for (int i = 0; i < p.joins - 1; ++i) shared |= dim_bit(s.find_dim("S" + std::to_string(i)).value());
    Gen gen(mix64(p.seed));
    Batch b;
    b.name = cat("filters", p.filters, "_joins", p.joins, "_sel", p.selectivity);
    auto width = width_of(p.selectivity, 100);
    for (std::size_t k = 0; k < p.queries; ++k) {
        auto t = static_cast<int>(k % 4);
        auto attr = static_cast<int>(k / 4) % p.filters;
        auto column = s.resolve(cat("E", t, ".a", attr));
        b.queries.push_back(make_query(s, shared | dims_named(s, {"E" + std::to_string(t)}),
                                       {{column, window(gen, 0, 100, width)}}));
    }
    number_queries(b);
    w.tuning.push_back(b);
    b.name += "_run";
    w.runtime.push_back(std::move(b));
    return w;
}

/*======================================================================================================================
 * Synergy
 *====================================================================================================================*/

Workload synergy_workload(const SynergyParams &p)
{
    // pair k: templates 5+k and 9+k join {A_k, B_k} first, then {C_k, E_k} or {G_k, H_k}
    std::ostringstream os;
    os << "schema\n  fact F rows=" << p.fact_rows << '\n';
    const char *roles[] = {"A", "B", "C", "E", "G", "H"};
    for (int k = 0; k < 4; ++k)
        for (auto r : roles) os << "  dim " << r << k << " rows=" << p.dim_rows << '\n';
    for (int k = 0; k < 4; ++k)
        for (auto r : roles) os << "  fk F." << char(std::tolower(r[0])) << k << " -> " << r << k << '\n';
    os << "  column F.x domain=0:100\n  column F.v domain=0:100\nend\n";
    auto w = parse_workload(os.str(), std::max<std::size_t>(8 * p.queries_per_template, kDefaultQuerySetWidth));
    auto &s = w.schema;
    auto x = s.resolve("F.x");

    // fact-filter bands per template index 0..7 (templates 5..12)
    struct Band { std::int64_t lo, hi; };
    Band bands[8];
    for (auto &b : bands) b = {0, 100};
    if (p.aligned) {
        bands[0] = bands[1] = {0, 40};      // t5, t6
        bands[4] = bands[6] = {20, 60};     // t9, t11
        bands[2] = bands[3] = {40, 80};     // t7, t8
        bands[5] = bands[7] = {60, 100};    // t10, t12
    }
    Gen gen(mix64(p.seed));
    Batch b;
    b.name = p.aligned ? "synergy_aligned" : "synergy";
    auto width = width_of(p.selectivity, 100);
    for (std::size_t i = 0; i < p.queries_per_template; ++i)
        for (int t = 0; t < 8; ++t) {
            auto k = std::to_string(t % 4);
            DimMask joins = dims_named(s, {"A" + k, "B" + k});
            joins |= t < 4 ? dims_named(s, {"C" + k, "E" + k}) : dims_named(s, {"G" + k, "H" + k});
            b.queries.push_back(make_query(s, joins, {{x, window(gen, bands[t].lo, bands[t].hi, width)}}));
        }
    number_queries(b);
    w.tuning.push_back(b);
    b.name += "_run";
    w.runtime.push_back(std::move(b));
    return w;
}

/*======================================================================================================================
 * Miss rate
 *====================================================================================================================*/

namespace {

Batch miss_queries(const Schema &s, const MissParams &p, double miss)
{
    Gen gen(mix64(p.seed));
    auto x = s.resolve("F.x");
    auto width = width_of(p.selectivity, 100);
    auto moved = static_cast<int>(std::llround(miss * 4));
    Batch b;
    for (std::size_t i = 0; i < p.queries_per_template; ++i)
        for (int t = 0; t < 4; ++t) {
            auto k = std::to_string(t);
            auto w = window(gen, 0, 25, width);
            std::int64_t region = t < moved ? (t + 2) % 4 : t;
            b.queries.push_back(make_query(s, dims_named(s, {"P" + k, "Q" + k, "R" + k}),
                                           {{x, {w.lo + 25 * region, w.hi + 25 * region}}}));
        }
    number_queries(b);
    return b;
}

} // namespace

Workload miss_workload(const MissParams &p)
{
    std::ostringstream os;
    os << "schema\n  fact F rows=" << p.fact_rows << '\n';
    for (int t = 0; t < 4; ++t)
        for (auto r : {"P", "Q", "R"}) os << "  dim " << r << t << " rows=" << p.dim_rows << '\n';
    for (int t = 0; t < 4; ++t)
        for (auto r : {"P", "Q", "R"}) os << "  fk F." << char(std::tolower(r[0])) << t << " -> " << r << t << '\n';
    os << "  column F.x domain=0:100\n  column F.v domain=0:100\nend\n";
    auto w = parse_workload(os.str());
    auto b = miss_queries(w.schema, p, 0.0);
    b.name = "miss_tune";
    w.tuning.push_back(b);
    b.name = "miss0";
    w.runtime.push_back(std::move(b));
    return w;
}

Batch miss_batch(const Workload &w, const MissParams &p, double miss)
{
    if (miss < 0 || miss > 1) throw ConfigError("miss rate must be in [0, 1]");
    auto b = miss_queries(w.schema, p, miss);
    b.name = cat("miss", std::llround(miss * 100));
    return b;
}

/*======================================================================================================================
 * Exactness matrix
 *====================================================================================================================*/

const char *to_string(Correlation c)
{
    switch (c) {
        case Correlation::Correlated: return "correlated";
        case Correlation::Semi: return "semi";
        case Correlation::Uncorrelated: return "uncorrelated";
    }
    return "?";
}

std::string MatrixCell::label() const
{
    return cat(to_string(correlation), "_sel", selectivity, "_q", queries, "_budget", std::llround(budget * 100), "_miss",
               std::llround(miss * 100), "_seed", seed);
}

std::vector<MatrixCell> exactness_matrix()
{
    const double levels[] = {0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<MatrixCell> cells;
    for (auto c : {Correlation::Correlated, Correlation::Semi, Correlation::Uncorrelated})
        for (double sel : {0.01, 0.1, 0.5})
            for (std::size_t q : {8, 64, 512})
                for (int variant = 0; variant < 2; ++variant) {
                    auto i = cells.size();
                    MatrixCell m;
                    m.correlation = c;
                    m.selectivity = sel;
                    m.queries = q;
                    m.budget = levels[i % 5];
                    m.miss = levels[(i / 5 + variant * 2) % 5];
                    m.seed = 100 + i;
                    cells.push_back(m);
                }
    return cells;
}

namespace {

const char *kMatrixSchema = R"(
schema
  fact F rows=30000
  dim B rows=200
  dim C rows=100
  dim D rows=50
  fk F.b -> B
  fk F.c -> C
  fk F.d -> D
  column F.x domain=0:1000
  column F.y domain=0:1000
  column F.v domain=0:100
  column B.p domain=0:100
  column C.q domain=0:50
  column D.r domain=0:20
end
)";

/// Fact windows per query: one shared window, one per group of eight, or one each.
std::vector<Range> fact_windows(const MatrixCell &cell, Gen &gen, std::size_t n)
{
    auto width = width_of(cell.selectivity, 1000);
    std::vector<Range> out;
    Range shared{};
    for (std::size_t i = 0; i < n; ++i) {
        bool fresh = cell.correlation == Correlation::Uncorrelated || i == 0 ||
                     (cell.correlation == Correlation::Semi && i % 8 == 0);
        if (fresh) shared = window(gen, 0, 1000, width);
        out.push_back(shared);
    }
    return out;
}

} // namespace

Workload matrix_workload(const MatrixCell &cell)
{
    auto w = parse_workload(kMatrixSchema, std::max<std::size_t>(cell.queries, kDefaultQuerySetWidth));
    auto &s = w.schema;
    auto x = s.resolve("F.x"), y = s.resolve("F.y"), bp = s.resolve("B.p"), cq = s.resolve("C.q");
    const DimMask shapes[] = {dims_named(s, {"B"}), dims_named(s, {"B", "C"}), dims_named(s, {"B", "C", "D"}),
                              dims_named(s, {"C", "D"})};
    Gen gen(mix64(cell.seed));
    auto windows = fact_windows(cell, gen, cell.queries);

    Batch tune;
    tune.name = "tune_" + cell.label();
    for (std::size_t i = 0; i < cell.queries; ++i) {
        std::vector<std::pair<ColumnRef, Range>> f{{x, windows[i]}};
        if (i % 3 == 0) f.push_back({bp, window(gen, 0, 100, 40)});
        if (i % 5 == 1) f.push_back({cq, window(gen, 0, 50, 25)});
        if (i % 7 == 2) f.push_back({y, window(gen, 0, 1000, 600)});
        auto joins = shapes[i % 4];
        std::erase_if(f, [&](auto &e) {
            return e.first.table != kFactTable && (joins & dim_bit(e.first.table - 1)) == 0;
        });
        tune.queries.push_back(make_query(s, joins, f));
    }
    number_queries(tune);

    // runtime: same queries, with fresh fact windows on a `miss` fraction of them
    Batch run = tune;
    run.name = "run_" + cell.label();
    auto fresh = fact_windows(cell, gen, cell.queries);
    auto moved = static_cast<std::size_t>(std::llround(cell.miss * static_cast<double>(cell.queries)));
    for (std::size_t i = 0; i < moved; ++i) {
        auto &q = run.queries[(i * 7919) % cell.queries];
        for (auto &f : q.filters)
            if (f.column == x) f.range = fresh[i];
    }
    w.tuning.push_back(std::move(tune));
    w.runtime.push_back(std::move(run));
    return w;
}

/*======================================================================================================================
 * Measurement and calibration
 *====================================================================================================================*/

BatchResult measure(const Database &db, const PhysicalLayout &layout, const ViewStore *views, const Batch &batch,
                    const ExecConfig &config, int reps)
{
    if (reps < 1) throw ConfigError("repetitions must be >= 1");
    std::vector<std::uint64_t> wall, exec;
    BatchResult last;
    for (int r = 0; r < reps; ++r) {
        last = execute_batch(db, layout, views, batch, config);
        wall.push_back(last.metrics.wall_ns);
        exec.push_back(last.metrics.exec_ns);
    }
    auto median = [](std::vector<std::uint64_t> &v) {
        std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
        return v[v.size() / 2];
    };
    last.metrics.wall_ns = median(wall);
    last.metrics.exec_ns = median(exec);
    return last;
}

Calibration calibrate(std::uint64_t seed, std::uint64_t fact_rows)
{
    std::ostringstream os;
    os << "schema\n  fact F rows=" << fact_rows << "\n  dim B rows=10000\n  dim C rows=10000\n  dim D rows=10000\n"
       << "  fk F.b -> B\n  fk F.c -> C\n  fk F.d -> D\n"
       << "  column F.x domain=0:1000\n  column F.y domain=0:1000\n  column F.z domain=0:1000\n"
       << "  column F.v domain=0:100\n  column B.p domain=0:100\nend\n";
    auto w = parse_workload(os.str());
    auto &s = w.schema;
    auto db = generate_database(s, seed);
    auto layout = untuned_layout(db, {256, 4096});
    const ColumnRef fact_cols[] = {s.resolve("F.x"), s.resolve("F.y"), s.resolve("F.z")};
    const DimMask join_sets[] = {0, dims_named(s, {"B"}), dims_named(s, {"B", "C"}), dims_named(s, {"B", "C", "D"})};

    // rows: scan rows, filter work, probe tuples, aggregate updates; target: execution ns
    std::vector<std::array<double, 4>> x;
    std::vector<double> t;
    Gen gen(mix64(seed + 17));
    ExecConfig ec;
    ec.threads = 1;
    ec.skipping = false;        // every predicate is evaluated, so filter work is large and varied
    for (std::size_t queries : {1, 8, 32})
        for (int filters = 0; filters <= 3; ++filters)
            for (auto joins : join_sets) {
                Batch b;
                for (std::size_t q = 0; q < queries; ++q) {
                    std::vector<std::pair<ColumnRef, Range>> f;
                    for (int c = 0; c < filters; ++c) f.push_back({fact_cols[c], window(gen, 0, 1000, 700)});
                    b.queries.push_back(make_query(s, joins, f));
                }
                number_queries(b);
                auto r = measure(db, layout, nullptr, b, ec, 3);
                auto &c = r.metrics.counters;
                x.push_back({double(c.base_rows + c.view_rows), double(c.filter_work), double(c.probe_tuples),
                             double(c.agg_updates)});
                t.push_back(static_cast<double>(r.metrics.exec_ns));
            }

    Eigen::MatrixXd a(x.size(), 4);
    Eigen::VectorXd b(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (int j = 0; j < 4; ++j) a(i, j) = x[i][j];
        b(i) = t[i];
    }
    Eigen::VectorXd coef = a.colPivHouseholderQr().solve(b);
    Eigen::VectorXd fitted = a * coef;
    double mean = b.mean();
    double ss_res = (b - fitted).squaredNorm(), ss_tot = (b.array() - mean).square().sum();

    Calibration out;
    out.samples = x.size();
    out.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    std::array<double, 4> ns{coef(0), coef(1), coef(2), coef(3)};
    const double floor = 1e-3;
    std::ostringstream rep;
    rep << "fit samples=" << out.samples << " r2=" << out.r_squared << '\n';
    const char *names[] = {"scan", "filter", "probe", "agg"};
    for (int j = 0; j < 4; ++j) rep << "ns_per_" << names[j] << '=' << ns[j] << '\n';
    double unit = ns[0] > floor ? ns[0] : floor;
    std::array<double, 4> rel;
    for (int j = 0; j < 4; ++j) {
        rel[j] = ns[j] / unit;
        if (!(rel[j] > floor)) {
            rep << "warning: " << names[j] << " cost fit to " << rel[j] << "; using " << floor << '\n';
            rel[j] = floor;
        }
    }
    out.model.c_scan = rel[0];
    out.model.c_filter = rel[1];
    out.model.c_probe = rel[2];
    out.model.c_agg = rel[3];
    out.model.c_f = rel[1];
    out.model.validate();
    rep << out.model.to_text() << '\n';
    out.report = rep.str();
    return out;
}

} // namespace sharedb
