// Command-line front end: generate workloads, tune, run, benchmark, calibrate and cross-check against the oracles.

#include <sharedb/bench.hpp>
#include <sharedb/executor.hpp>
#include <sharedb/oracle.hpp>
#include <sharedb/tuner.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace sharedb;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInvariant = 4;

struct Options
{
    std::string workload;
    std::uint64_t seed = 1;
    std::string budget = "unlimited";
    std::string solver = "isk";
    std::uint64_t psmin = std::uint64_t{1} << 16;
    double sample_rate = 0.01;
    std::uint64_t block_min = 256;
    std::size_t threads = 0;
    bool no_skip = false;
    bool no_reuse = false;
    bool no_partition = false;
    bool naive = false;
    std::string model;
    std::string state = "state";
    std::string out;
    // generate
    std::string kind = "sensitivity";
    int filters = 4;
    int joins = 4;
    double selectivity = 0.10;
    std::size_t queries = 64;
    std::uint64_t rows = 0;
    std::size_t cell = 0;
    // bench
    std::string grid = "all";
    int reps = 5;
};

std::string read_text(const std::string &path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

/// Writes to `path`, or to stdout when the path is empty or "-".
void emit(const std::string &path, const std::string &text)
{
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out || !(out << text)) throw ConfigError("cannot write '" + path + "'");
}

CostModel load_model(const Options &o)
{
    if (o.model.empty()) return {};
    auto text = read_text(o.model);
    // the calibration report ends with the constants line
    auto at = text.rfind("c_scan=");
    return CostModel::parse(at == std::string::npos ? text : text.substr(at));
}

Workload load_workload(const Options &o)
{
    if (o.workload.empty()) throw ConfigError("--workload is required");
    return parse_workload(read_text(o.workload));
}

TunerConfig tuner_config(const Options &o)
{
    TunerConfig tc;
    tc.sample_rate = o.sample_rate;
    tc.seed = o.seed;
    tc.partition = !o.no_partition;
    tc.partitioner.ps_min = o.psmin;
    tc.blocking.min_average = o.block_min;
    tc.model = load_model(o);
    tc.solver = parse_solver(o.solver);
    tc.budget = Budget::parse(o.budget);
    return tc;
}

ExecConfig exec_config(const Options &o)
{
    ExecConfig ec;
    ec.model = load_model(o);
    ec.skipping = !o.no_skip;
    ec.reuse = !o.no_reuse;
    ec.naive_reuse = o.naive;
    ec.threads = o.threads;
    return ec;
}

/*======================================================================================================================
 * Commands
 *====================================================================================================================*/

int cmd_generate(const Options &o)
{
    Workload w;
    if (o.kind == "sensitivity") {
        SensitivityParams p;
        p.filters = o.filters;
        p.joins = o.joins;
        p.selectivity = o.selectivity;
        p.queries = o.queries;
        if (o.rows) p.fact_rows = o.rows;
        p.seed = o.seed;
        w = sensitivity_workload(p);
    } else if (o.kind == "synergy" || o.kind == "synergy-aligned") {
        SynergyParams p;
        p.aligned = o.kind == "synergy-aligned";
        p.selectivity = o.selectivity;
        if (o.rows) p.fact_rows = o.rows;
        p.seed = o.seed;
        w = synergy_workload(p);
    } else if (o.kind == "miss") {
        MissParams p;
        if (o.rows) p.fact_rows = o.rows;
        p.seed = o.seed;
        w = miss_workload(p);
        w.runtime.clear();
        for (double m : {0.0, 0.25, 0.5, 0.75, 1.0}) w.runtime.push_back(miss_batch(w, p, m));
    } else if (o.kind == "matrix") {
        auto cells = exactness_matrix();
        if (o.cell >= cells.size()) throw ConfigError("--cell must be below " + std::to_string(cells.size()));
        w = matrix_workload(cells[o.cell]);
    } else {
        throw ConfigError("unknown workload kind '" + o.kind + "'");
    }
    emit(o.out, to_text(w));
    return 0;
}

int cmd_tune(const Options &o)
{
    auto w = load_workload(o);
    if (w.tuning.empty()) throw ConfigError("workload has no tuning batch");
    auto db = generate_database(w.schema, o.seed);
    auto t = tune(db, w.tuning, tuner_config(o));
    auto dir = o.out.empty() ? o.state : o.out;
    save_tuned(dir, db, o.seed, t);
    std::cout << t.report;
    std::cerr << "tuning state written to " << dir << '\n';
    return 0;
}

int cmd_run(const Options &o)
{
    auto w = load_workload(o);
    if (w.runtime.empty()) throw ConfigError("workload has no runtime batch");
    auto db = generate_database(w.schema, o.seed);
    auto state = load_tuned(o.state, db, o.seed);
    PhysicalLayout layout;
    ViewStore none;
    const ViewStore *views = &none;
    if (state) {
        layout = std::move(state->layout);
        views = &state->views;
    } else {
        std::cerr << "warning: no tuning state in '" << o.state << "'; running with work sharing only\n";
        BlockingConfig blk;
        blk.min_average = o.block_min;
        layout = untuned_layout(db, blk);
    }
    auto ec = exec_config(o);
    std::string csv = metrics_csv_header();
    for (auto &b : w.runtime) csv += metrics_csv_row("run", b, execute_batch(db, layout, views, b, ec));
    emit(o.out, csv);
    return 0;
}

/// Metrics rows for one generated workload under several execution modes.
struct BenchCell
{
    std::string label;
    Workload workload;
    std::vector<Batch> batches;         ///< runtime batches; defaults to the workload's
    TunerConfig tuner;
};

std::string run_cell(const BenchCell &cell, const Options &o, std::initializer_list<const char *> modes)
{
    auto db = generate_database(cell.workload.schema, o.seed);
    auto t = tune(db, cell.workload.tuning, cell.tuner);
    auto &batches = cell.batches.empty() ? cell.workload.runtime : cell.batches;
    std::string out;
    for (auto &b : batches)
        for (std::string mode : modes) {
            auto ec = exec_config(o);
            ec.model = cell.tuner.model;
            ec.reuse = mode != "ws";
            ec.naive_reuse = mode == "naive";
            auto r = measure(db, t.layout, &t.views, b, ec, o.reps);
            out += metrics_csv_row(cell.label + "/" + b.name + "/" + mode, b, r);
        }
    std::cerr << "  " << cell.label << " done\n";
    return out;
}

int cmd_bench(const Options &o)
{
    CostModel model;
    if (!o.model.empty()) {
        model = load_model(o);
    } else {
        std::cerr << "calibrating cost constants (pass --model to skip)\n";
        auto cal = calibrate(o.seed);
        std::cerr << cal.report;
        model = cal.model;
    }
    auto base = tuner_config(o);
    base.model = model;
    bool all = o.grid == "all";
    if (!all && o.grid != "filters" && o.grid != "joins" && o.grid != "selectivity" && o.grid != "budget" &&
        o.grid != "miss")
        throw ConfigError("unknown grid '" + o.grid + "'");

    std::string csv = metrics_csv_header();
    auto sensitivity = [&](const std::string &label, SensitivityParams p) {
        if (o.rows) p.fact_rows = o.rows;
        p.seed = o.seed;
        csv += run_cell({label, sensitivity_workload(p), {}, base}, o, {"ws", "naive", "full"});
    };
    if (all || o.grid == "filters")
        for (int f = 1; f <= 8; ++f) sensitivity("filters=" + std::to_string(f), {.filters = f});
    if (all || o.grid == "joins")
        for (int j = 2; j <= 6; ++j) sensitivity("joins=" + std::to_string(j), {.filters = 2, .joins = j});
    if (all || o.grid == "selectivity")
        for (double s : {0.01, 0.02, 0.05, 0.10, 0.20, 0.50}) {
            std::ostringstream label;
            label << "selectivity=" << s;
            sensitivity(label.str(), {.filters = 2, .selectivity = s});
        }
    if (all || o.grid == "budget") {
        SynergyParams p;
        if (o.rows) p.fact_rows = o.rows;
        p.seed = o.seed;
        auto w = synergy_workload(p);
        for (auto solver : {Solver::Gr, Solver::Isk})
            for (int pct : {0, 10, 20, 30, 50, 70, 100}) {
                auto tc = base;
                tc.solver = solver;
                tc.budget = Budget::parse(std::to_string(pct) + "%");
                csv += run_cell({std::string("budget=") + std::to_string(pct) + "%/" + to_string(solver), w, {}, tc}, o,
                                {"full"});
            }
    }
    if (all || o.grid == "miss") {
        MissParams p;
        if (o.rows) p.fact_rows = o.rows;
        p.seed = o.seed;
        BenchCell cell{"miss", miss_workload(p), {}, base};
        for (double m : {0.0, 0.25, 0.5, 0.75, 1.0}) cell.batches.push_back(miss_batch(cell.workload, p, m));
        csv += run_cell(cell, o, {"full"});
        cell.batches = {cell.batches.back()};     // no-view baseline on the fully missing batch
        csv += run_cell(cell, o, {"ws"});
    }
    emit(o.out, csv);
    return 0;
}

int cmd_calibrate(const Options &o)
{
    auto cal = calibrate(o.seed, o.rows ? o.rows : 400'000);
    emit(o.out, cal.report);
    return 0;
}

int cmd_oracle(const Options &o)
{
    auto w = load_workload(o);
    auto db = generate_database(w.schema, o.seed);
    int failures = 0;
    std::ostringstream os;

    // execution: engine (with tuning state when present) against query-at-a-time evaluation
    auto state = load_tuned(o.state, db, o.seed);
    auto layout = state ? state->layout : untuned_layout(db);
    ViewStore none;
    const ViewStore *views = state ? &state->views : &none;
    for (auto &b : w.runtime) {
        auto expect = qat_results(db, b);
        auto got = execute_batch(db, layout, views, b, exec_config(o)).sums;
        std::size_t wrong = 0;
        for (std::size_t q = 0; q < expect.size(); ++q) wrong += got[q] != expect[q];
        os << "batch " << b.name << " queries=" << expect.size() << " mismatches=" << wrong << '\n';
        failures += wrong != 0;
    }

    // selection: solvers against exhaustive search on the tuning graph, when it is small enough
    if (!w.tuning.empty()) {
        auto tc = tuner_config(o);
        tc.materialize = false;
        auto t = tune(db, w.tuning, tc);
        if (t.cuts.cuts.size() <= 20) {
            auto opt = exhaustive_selection(t.graph, t.cuts, t.budget_limit);
            auto gr = solve_gr(t.graph, t.cuts, t.budget_limit);
            auto isk = solve_isk(t.graph, t.cuts, t.budget_limit);
            auto bound = greedy_bound(t.graph, t.cuts, t.budget_limit);
            os << "selection cuts=" << t.cuts.cuts.size() << " optimum=" << opt.reduction << " gr=" << gr.reduction
               << " isk=" << isk.reduction << " gr_bound=" << bound.factor * opt.reduction << '\n';
            if (gr.reduction > opt.reduction * (1 + 1e-9) || isk.reduction > opt.reduction * (1 + 1e-9)) ++failures;
        } else {
            os << "selection cuts=" << t.cuts.cuts.size() << " (too many for exhaustive search)\n";
        }
    }
    emit(o.out, os.str());
    return failures ? kExitInvariant : 0;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Shared execution with reuse of materialized partition joins"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App *c) {
        c->add_option("--workload", o.workload, "workload file")->envname("SHAREDB_WORKLOAD");
        c->add_option("--seed", o.seed, "data and sampling seed")->envname("SHAREDB_SEED");
        c->add_option("--model", o.model, "cost constants written by 'calibrate'")->envname("SHAREDB_MODEL");
        c->add_option("--out", o.out, "output file or directory")->envname("SHAREDB_OUT");
    };
    auto tuning = [&](CLI::App *c) {
        c->add_option("--budget", o.budget, "storage budget: unlimited, bytes, or N%")->envname("SHAREDB_BUDGET");
        c->add_option("--solver", o.solver, "gr or isk")->envname("SHAREDB_SOLVER");
        c->add_option("--psmin", o.psmin, "minimum partition size in rows")->envname("SHAREDB_PSMIN");
        c->add_option("--sample-rate", o.sample_rate, "access sampling rate")->envname("SHAREDB_SAMPLE_RATE");
        c->add_option("--block-min", o.block_min, "minimum average block size")->envname("SHAREDB_BLOCK_MIN");
        c->add_flag("--no-partition", o.no_partition, "keep a single partition")->envname("SHAREDB_NO_PARTITION");
    };
    auto execution = [&](CLI::App *c) {
        c->add_option("--threads", o.threads, "worker threads, 0 for all cores")->envname("SHAREDB_THREADS");
        c->add_flag("--no-skip", o.no_skip, "disable data and filter skipping")->envname("SHAREDB_NO_SKIP");
        c->add_flag("--no-reuse", o.no_reuse, "ignore materialized views")->envname("SHAREDB_NO_REUSE");
        c->add_flag("--naive", o.naive, "inject every usable view, no skipping on views")->envname("SHAREDB_NAIVE");
        c->add_option("--state", o.state, "tuning state directory")->envname("SHAREDB_STATE");
    };

    auto gen = app.add_subcommand("generate", "write a generated workload file");
    common(gen);
    gen->add_option("--kind", o.kind, "sensitivity, synergy, synergy-aligned, miss or matrix");
    gen->add_option("--filters", o.filters, "filter attributes (sensitivity)");
    gen->add_option("--joins", o.joins, "joins per template (sensitivity)");
    gen->add_option("--selectivity", o.selectivity, "filter selectivity");
    gen->add_option("--queries", o.queries, "queries (sensitivity)");
    gen->add_option("--rows", o.rows, "fact rows");
    gen->add_option("--cell", o.cell, "exactness matrix cell (matrix)");

    auto tune_cmd = app.add_subcommand("tune", "partition, select and materialize views, save the state");
    common(tune_cmd);
    tuning(tune_cmd);
    tune_cmd->add_option("--state", o.state, "tuning state directory (when --out is not given)")
        ->envname("SHAREDB_STATE");

    auto run = app.add_subcommand("run", "execute the runtime batches and write metrics");
    common(run);
    execution(run);
    run->add_option("--block-min", o.block_min, "minimum average block size without tuning state");

    auto bench = app.add_subcommand("bench", "sweep generated workloads and write one metrics row per cell");
    common(bench);
    tuning(bench);
    execution(bench);
    bench->add_option("--grid", o.grid, "filters, joins, selectivity, budget, miss or all");
    bench->add_option("--reps", o.reps, "repetitions per cell (median reported)");
    bench->add_option("--rows", o.rows, "override fact rows");

    auto cal = app.add_subcommand("calibrate", "fit cost constants to measured execution times");
    common(cal);
    cal->add_option("--rows", o.rows, "fact rows of the calibration data");

    auto oracle = app.add_subcommand("oracle", "check results and solver quality against brute-force oracles");
    common(oracle);
    tuning(oracle);
    execution(oracle);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        auto code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*gen) return cmd_generate(o);
        if (*tune_cmd) return cmd_tune(o);
        if (*run) return cmd_run(o);
        if (*bench) return cmd_bench(o);
        if (*cal) return cmd_calibrate(o);
        if (*oracle) return cmd_oracle(o);
    } catch (const ConfigError &e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError &e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const ExecutionError &e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const InvariantError &e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInvariant;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
