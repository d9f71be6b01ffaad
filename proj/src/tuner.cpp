#include <sharedb/tuner.hpp>

#include <charconv>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sharedb {

Solver parse_solver(std::string_view name)
{
    if (name == "gr") return Solver::Gr;
    if (name == "isk") return Solver::Isk;
    throw ConfigError("unknown solver '" + std::string(name) + "' (expected gr or isk)");
}

const char *to_string(Solver s) { return s == Solver::Gr ? "gr" : "isk"; }

Budget Budget::parse(std::string_view text)
{
    Budget b;
    if (text == "unlimited" || text == "inf") return b;
    bool percent = !text.empty() && text.back() == '%';
    if (percent) text.remove_suffix(1);
    double v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !(v >= 0) || !std::isfinite(v))
        throw ConfigError("bad budget '" + std::string(text) + "' (expected bytes, N% or unlimited)");
    if (percent) b.fraction = v / 100.0;
    else b.bytes = v;
    return b;
}

TuneResult tune(const Database &db, std::span<const Batch> tuning, const TunerConfig &config)
{
    if (!(config.sample_rate > 0 && config.sample_rate <= 1)) throw ConfigError("sample rate must be in (0, 1]");
    config.model.validate();
    TuneResult out;

    PartitionTree tree = PartitionTree::single_leaf();
    auto catalog = enumerate_subqueries(tuning);
    if (!catalog.entries.empty()) {
        auto w = record_access_matrix(db.fact, tuning, catalog, config.sample_rate, config.seed);
        if (config.partition) tree = partition_tree(db.fact, db.schema, w, candidate_cuts(tuning), config.partitioner);
        out.homogeneity_single = aggregate_homogeneity(PartitionTree::single_leaf(), db.fact, w);
        out.homogeneity = aggregate_homogeneity(tree, db.fact, w);
    }
    out.layout = build_layout(db.fact, db.schema, std::move(tree), tuning, config.blocking, config.cluster);

    out.graph = build_workload_graph(db, out.layout, tuning, config.model);
    out.cuts = enumerate_cuts(out.graph, config.limits);
    std::vector<std::uint32_t> all(out.cuts.cuts.size());
    for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
    out.full_budget = budget(out.graph, out.cuts, all);
    out.budget_limit = config.budget.fraction ? *config.budget.fraction * out.full_budget : config.budget.bytes;
    if (std::isinf(out.budget_limit)) out.budget_limit = out.full_budget;

    out.selection = config.solver == Solver::Gr ? solve_gr(out.graph, out.cuts, out.budget_limit)
                                                : solve_isk(out.graph, out.cuts, out.budget_limit, config.isk);
    if (config.materialize) {
        std::vector<ViewKey> keys;
        for (auto k : out.selection.domain) keys.push_back(out.graph.keys()[k]);
        MaterializeConfig mc;
        mc.blocking = config.blocking;
        mc.slack = config.slack;
        mc.cluster = config.cluster;
        out.views = materialize(db, out.layout, keys, tuning, mc);
    }

    std::ostringstream rep;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "solver=%s budget_limit=%.6g full_budget=%.6g partitions=%zu cuts=%zu truncated_components=%zu\n"
                  "homogeneity single=%.6g tree=%.6g\nviews=%zu view_bytes=%" PRIu64 "\n",
                  to_string(config.solver), out.budget_limit, out.full_budget, out.layout.partitions.size(),
                  out.cuts.cuts.size(), out.cuts.truncated_components, out.homogeneity_single, out.homogeneity,
                  out.views.size(), out.views.total_bytes());
    rep << buf << selection_report(out.graph, out.cuts, out.selection);
    out.report = rep.str();
    return out;
}

/*======================================================================================================================
 * Artifacts
 *====================================================================================================================*/

namespace {

constexpr const char *kManifest = "manifest.txt";

std::string read_file(const std::filesystem::path &p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot read " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const std::filesystem::path &p, const std::string &text)
{
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) throw ExecutionError("cannot write " + p.string());
}

} // namespace

void save_tuned(const std::filesystem::path &dir, const Database &db, std::uint64_t data_seed, const TuneResult &t)
{
    std::filesystem::create_directories(dir);
    const auto hash = db.schema.hash();
    std::vector<std::uint64_t> leaf_rows;
    for (auto &p : t.layout.partitions) leaf_rows.push_back(p.rows());
    write_file(dir / "tree.txt", t.layout.tree.to_text(db.schema, leaf_rows));
    write_file(dir / "layout.txt", t.layout.to_text());
    write_file(dir / "selection.txt", t.report);
    {
        std::ofstream out(dir / "fact.snap", std::ios::binary);
        ColumnarTable tables[] = {t.layout.fact};
        write_table_snapshot(out, hash, tables);
        if (!out) throw ExecutionError("cannot write fact snapshot");
    }
    {
        std::ofstream out(dir / "views.snap", std::ios::binary);
        write_view_store(out, hash, t.views, db.schema);
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "sharedb-state 1\nschema_hash=%016" PRIx64 "\ndata_seed=%" PRIu64 "\n", hash,
                  data_seed);
    write_file(dir / kManifest, buf);
}

std::optional<TunedArtifacts> load_tuned(const std::filesystem::path &dir, const Database &db, std::uint64_t data_seed)
{
    if (!std::filesystem::exists(dir / kManifest)) return std::nullopt;
    auto manifest = read_file(dir / kManifest);
    std::uint64_t hash = 0, seed = 0;
    if (std::sscanf(manifest.c_str(), "sharedb-state 1\nschema_hash=%" SCNx64 "\ndata_seed=%" SCNu64, &hash, &seed) != 2)
        throw DataError("bad tuning manifest in " + dir.string());
    if (hash != db.schema.hash()) throw DataError("tuning artifacts were built for another schema");
    if (seed != data_seed) throw DataError("tuning artifacts were built from another data seed");

    auto tree = PartitionTree::parse(read_file(dir / "tree.txt"), db.schema);
    std::ifstream fin(dir / "fact.snap", std::ios::binary);
    auto tables = read_table_snapshot(fin, hash);
    if (tables.size() != 1 || tables[0].columns.size() != db.fact.columns.size() ||
        tables[0].row_count != db.fact.row_count)
        throw DataError("fact snapshot does not match the schema");
    TunedArtifacts a;
    a.layout = parse_layout(read_file(dir / "layout.txt"), db.schema, std::move(tree), std::move(tables[0]));
    std::ifstream vin(dir / "views.snap", std::ios::binary);
    a.views = read_view_store(vin, hash, db.schema);
    return a;
}

PhysicalLayout untuned_layout(const Database &db, const BlockingConfig &blocking)
{
    return build_layout(db.fact, db.schema, PartitionTree::single_leaf(), {}, blocking, false);
}

} // namespace sharedb
