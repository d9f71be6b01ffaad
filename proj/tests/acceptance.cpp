// Acceptance suite: one PASS/FAIL line per criterion, with the measured numbers behind it.  Exits non-zero when any
// criterion fails.

#include "support.hpp"

#include <sharedb/bench.hpp>
#include <sharedb/executor.hpp>
#include <sharedb/oracle.hpp>
#include <sharedb/tuner.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

using namespace sharedb;
using namespace sharedb::test;

namespace {

int failures = 0;
std::map<int, std::string> lines;     // printed in criterion order at the end

void report(int id, bool pass, const std::string &detail)
{
    char head[64];
    std::snprintf(head, sizeof head, "criterion %d: %s  ", id, pass ? "PASS" : "FAIL");
    lines[id] = head + detail;
    std::cerr << lines[id] << '\n';
    failures += !pass;
}

template<typename... Args>
std::string cat(const Args &...args)
{
    std::ostringstream os;
    os.precision(4);
    (os << ... << args);
    return os.str();
}

double ms(const BatchResult &r) { return static_cast<double>(r.metrics.wall_ns) / 1e6; }

/*======================================================================================================================
 * 1 and 9: exactness and skipping soundness over the configuration matrix
 *====================================================================================================================*/

void exactness_and_skipping()
{
    auto start = std::chrono::steady_clock::now();
    std::size_t cells = 0, wrong_cells = 0, skip_mismatch = 0, selective_correlated = 0, selective_skipping = 0;
    std::string first_wrong;
    for (auto &cell : exactness_matrix()) {
        auto w = matrix_workload(cell);
        auto db = generate_database(w.schema, cell.seed);
        TunerConfig tc;
        tc.seed = cell.seed;
        tc.sample_rate = 0.2;
        tc.partitioner.ps_min = 2000;
        tc.blocking = {64, 512};
        tc.model.c_f = 1.0;
        tc.budget = Budget::parse(cat(cell.budget * 100, "%"));
        auto t = tune(db, w.tuning, tc);
        auto &batch = w.runtime[0];
        auto expect = qat_results(db, batch);

        bool ok = true;
        std::vector<std::int64_t> with_skip, without_skip;
        for (int mode = 0; mode < 4; ++mode) {
            ExecConfig ec;
            ec.model = tc.model;
            ec.reuse = mode != 1;
            ec.naive_reuse = mode == 2;
            ec.skipping = mode != 3;
            auto r = execute_batch(db, t.layout, &t.views, batch, ec);
            ok &= r.sums == expect;
            if (mode == 0) {
                with_skip = r.sums;
                if (cell.correlation == Correlation::Correlated && cell.selectivity <= 0.1) {
                    ++selective_correlated;
                    selective_skipping += r.metrics.skipped_blocks > 0;
                }
            }
            if (mode == 3) without_skip = r.sums;
        }
        skip_mismatch += with_skip != without_skip;
        ++cells;
        if (!ok) {
            ++wrong_cells;
            if (first_wrong.empty()) first_wrong = cell.label();
        }
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report(1, cells >= 50 && wrong_cells == 0 && secs < 600,
           cat(cells, " configurations x 4 modes, ", wrong_cells, " with mismatches",
               first_wrong.empty() ? "" : " (first: " + first_wrong + ")", ", ", secs, " s"));
    report(9, skip_mismatch == 0 && selective_correlated > 0 && selective_skipping == selective_correlated,
           cat(skip_mismatch, " skip on/off mismatches over ", cells, " configurations; blocks skipped in ",
               selective_skipping, "/", selective_correlated, " correlated selective configurations"));
}

/*======================================================================================================================
 * 2-5: selection and reuse properties
 *====================================================================================================================*/

constexpr double kEps = 1e-9;

std::vector<std::uint32_t> random_subset(Rng &rng, std::size_t n, double p)
{
    std::vector<std::uint32_t> s;
    for (std::uint32_t i = 0; i < n; ++i)
        if (coin(rng, p)) s.push_back(i);
    return s;
}

void submodularity()
{
    Rng rng(2024);
    int triples = 0, violations = 0;
    while (triples < 1000) {
        auto g = random_graph(rng, 20, 1 + pick(rng, 3));
        auto cs = enumerate_cuts(g);
        if (cs.cuts.size() < 2) continue;
        auto big = random_subset(rng, cs.cuts.size(), 0.5);
        std::vector<std::uint32_t> small, outside;
        for (auto c : big)
            if (coin(rng, 0.5)) small.push_back(c);
        for (std::uint32_t c = 0; c < cs.cuts.size(); ++c)
            if (!std::binary_search(big.begin(), big.end(), c)) outside.push_back(c);
        if (outside.empty()) continue;
        auto c = outside[pick(rng, outside.size())];
        auto with = [&](std::vector<std::uint32_t> s) {
            s.push_back(c);
            return s;
        };
        double dr_s = reduction(g, cs, with(small)) - reduction(g, cs, small);
        double dr_b = reduction(g, cs, with(big)) - reduction(g, cs, big);
        double db_s = budget(g, cs, with(small)) - budget(g, cs, small);
        double db_b = budget(g, cs, with(big)) - budget(g, cs, big);
        violations += dr_s < dr_b - kEps || db_s < db_b - kEps;
        ++triples;
    }
    report(2, violations == 0, cat(triples, " triples, ", violations, " violations"));
}

void enrichment_properties()
{
    Rng rng(2025);
    int checked = 0, violations = 0;
    while (checked < 200) {
        auto g = random_graph(rng, 20, 1 + pick(rng, 3));
        auto cs = enumerate_cuts(g);
        if (cs.cuts.empty() || cs.truncated_components) continue;
        auto s = random_subset(rng, cs.cuts.size(), 0.3);
        auto e = enrichment(cs, s);
        bool ok = std::abs(budget(g, cs, e) - budget(g, cs, s)) <= kEps * (1 + budget(g, cs, s)) &&
                  reduction(g, cs, e) >= reduction(g, cs, s) - kEps &&
                  std::abs(eliminated_cost(g, domain(cs, s)) - reduction(g, cs, e)) <= kEps * (1 + reduction(g, cs, e));
        violations += !ok;
        ++checked;
    }
    report(3, violations == 0, cat(checked, " selections, ", violations, " violations"));
}

void reuse_optimality()
{
    auto start = std::chrono::steady_clock::now();
    Rng rng(2026);
    int checked = 0, mismatches = 0;
    while (checked < 500) {
        auto plan = random_plan(rng, 8);
        if (plan.nodes.size() > 12) continue;
        auto cand = random_candidates(rng, plan);
        double got = reuse_phase(plan, cand).optimized_cost, best = exhaustive_rewrite_cost(plan, cand);
        mismatches += std::abs(got - best) > 1e-9 * (1 + best);
        ++checked;
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report(4, mismatches == 0 && secs < 120, cat(checked, " plans, ", mismatches, " differ from the exhaustive minimum, ",
                                                 secs, " s"));
}

/// Smallest budget at which ISK reaches the reduction of materializing every cut (bisection on the budget).
double full_cover_budget(const TuneResult &t)
{
    std::vector<std::uint32_t> all(t.cuts.cuts.size());
    for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
    double target = reduction(t.graph, t.cuts, all), lo = 0, hi = budget(t.graph, t.cuts, all);
    for (int it = 0; it < 40; ++it) {
        double mid = (lo + hi) / 2;
        (solve_isk(t.graph, t.cuts, mid).reduction >= target * (1 - 1e-9) ? hi : lo) = mid;
    }
    return hi;
}

void greedy_guarantee(const CostModel &model)
{
    Rng rng(2027);
    int instances = 0, below = 0;
    double worst = 1e9;
    while (instances < 100) {
        auto g = random_graph(rng, 16, 1 + pick(rng, 3));
        auto cs = enumerate_cuts(g);
        if (cs.cuts.empty() || cs.cuts.size() > 12) continue;
        std::vector<std::uint32_t> all(cs.cuts.size());
        for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
        double b = uniform(rng, 0, budget(g, cs, all));
        auto opt = exhaustive_selection(g, cs, b);
        if (opt.reduction <= 0) continue;
        auto bound = greedy_bound(g, cs, b);
        double gr = solve_gr(g, cs, b).reduction;
        worst = std::min(worst, gr / opt.reduction - bound.factor);
        below += gr < bound.factor * opt.reduction - kEps;
        ++instances;
    }

    // synergy instance: pairs of four-join templates sharing their first two joins, one partition
    SynergyParams sp;
    auto w = synergy_workload(sp);
    auto db = generate_database(w.schema, 1);
    TunerConfig tc;
    tc.model = model;
    tc.partition = false;
    tc.materialize = false;
    tc.sample_rate = 0.05;
    auto t = tune(db, w.tuning, tc);
    int isk_lower = 0, isk_higher = 0;
    std::string detail;
    for (int pct : {5, 10, 20, 30, 40, 50, 70, 100}) {
        double b = t.full_budget * pct / 100.0;
        double gr = solve_gr(t.graph, t.cuts, b).reduction, isk = solve_isk(t.graph, t.cuts, b).reduction;
        isk_lower += isk < gr - kEps * (1 + gr);
        isk_higher += isk > gr + kEps * (1 + gr);
    }
    report(5, below == 0 && isk_lower == 0,
           cat(instances, " instances, ", below, " below the bound (min slack ", worst, "); synergy instance: ISK < Gr at ",
               isk_lower, "/8 budgets, ISK > Gr at ", isk_higher, "/8"));
}

/*======================================================================================================================
 * 6-8: measured trends
 *====================================================================================================================*/

void filter_amplification(const CostModel &model)
{
    // Machine load drifts on the scale of seconds.  All eight setups stay in memory and every round runs each
    // filter count in each mode once, so slow periods hit all points alike; each point keeps its fastest run
    // (interference only ever adds time).
    const int rounds = 9;
    struct Setup
    {
        Workload w;
        Database db;
        TuneResult t;
    };
    std::vector<Setup> setups;
    for (int f = 1; f <= 8; ++f) {
        SensitivityParams p;
        p.filters = f;
        auto w = sensitivity_workload(p);
        auto db = generate_database(w.schema, 1);
        TunerConfig tc;
        tc.model = model;
        auto t = tune(db, w.tuning, tc);
        setups.push_back({std::move(w), std::move(db), std::move(t)});
    }
    ExecConfig ec;
    ec.model = model;
    ExecConfig off = ec, eager = ec;
    off.reuse = false;
    eager.naive_reuse = true;
    std::vector<double> ws(8, 1e300), naive(8, 1e300), full(8, 1e300);
    for (int r = 0; r < rounds; ++r)
        for (std::size_t i = 0; i < setups.size(); ++i) {
            auto &[w, db, t] = setups[i];
            auto &b = w.runtime[0];
            ws[i] = std::min(ws[i], ms(execute_batch(db, t.layout, &t.views, b, off)));
            naive[i] = std::min(naive[i], ms(execute_batch(db, t.layout, &t.views, b, eager)));
            full[i] = std::min(full[i], ms(execute_batch(db, t.layout, &t.views, b, ec)));
        }
    bool increasing = true;
    for (std::size_t i = 1; i < naive.size(); ++i) increasing &= naive[i] > naive[i - 1];
    bool exceeds = naive.back() > ws.back();
    double min_speedup = 1e9;
    for (std::size_t i = 0; i < ws.size(); ++i) min_speedup = std::min(min_speedup, ws[i] / full[i]);
    const double threshold = 1.5 * 0.8;     // 1.5x with the 20% machine-variance allowance
    std::ostringstream d;
    d.precision(3);
    d << "ms per filter count 1..8: work sharing [";
    for (auto v : ws) d << ' ' << v;
    d << " ] naive [";
    for (auto v : naive) d << ' ' << v;
    d << " ] full [";
    for (auto v : full) d << ' ' << v;
    d << " ]; naive strictly increasing=" << increasing << ", naive > sharing at 8=" << exceeds
      << ", min speedup=" << min_speedup << " (need >= " << threshold << ")";
    report(6, increasing && exceeds && min_speedup >= threshold, d.str());
}

void graceful_degradation(const CostModel &model)
{
    const int reps = 7;
    MissParams p;
    auto w = miss_workload(p);
    auto db = generate_database(w.schema, 1);
    TunerConfig tc;
    tc.model = model;
    auto t = tune(db, w.tuning, tc);
    ExecConfig ec;
    ec.model = model;
    ExecConfig off = ec;
    off.reuse = false;
    // same treatment as the filter sweep: points interleaved per repetition, fastest run kept
    std::vector<Batch> batches;
    for (double m : {0.0, 0.25, 0.5, 0.75, 1.0}) batches.push_back(miss_batch(w, p, m));
    // the baseline runs the fully missing batch itself without views; the tuning batch without views is reported
    // for reference only, since its windows line up with blocks and need no filter work
    double baseline = 1e300, tuning_baseline = 1e300;
    std::vector<double> wall(batches.size(), 1e300), rate(batches.size());
    for (int r = 0; r < reps; ++r) {
        baseline = std::min(baseline, ms(execute_batch(db, t.layout, &t.views, batches.back(), off)));
        tuning_baseline = std::min(tuning_baseline, ms(execute_batch(db, t.layout, &t.views, w.runtime[0], off)));
        for (std::size_t i = 0; i < batches.size(); ++i) {
            auto res = execute_batch(db, t.layout, &t.views, batches[i], ec);
            wall[i] = std::min(wall[i], ms(res));
            rate[i] = res.metrics.miss_rate();
        }
    }
    bool monotone = true;
    for (std::size_t i = 1; i < wall.size(); ++i) monotone &= wall[i] >= wall[i - 1];
    bool close = std::abs(wall.back() - baseline) <= 0.25 * baseline;
    std::ostringstream d;
    d.precision(3);
    d << "ms at miss 0/25/50/75/100%: [";
    for (auto v : wall) d << ' ' << v;
    d << " ] measured miss [";
    for (auto v : rate) d << ' ' << v;
    d << " ] no-view baseline " << baseline << " ms (tuning batch without views " << tuning_baseline
      << " ms); monotone=" << monotone << ", within 25%=" << close;
    report(7, monotone && close, d.str());
}

void partitioning_budget(const CostModel &model)
{
    SynergyParams sp;
    sp.aligned = true;
    auto w = synergy_workload(sp);
    auto db = generate_database(w.schema, 1);
    TunerConfig tc;
    tc.model = model;
    tc.materialize = false;
    tc.sample_rate = 0.05;
    tc.partitioner.ps_min = 4000;
    auto parted = tune(db, w.tuning, tc);
    tc.partition = false;
    auto single = tune(db, w.tuning, tc);
    double a = full_cover_budget(parted), b = full_cover_budget(single);
    report(8, a <= 0.6 * b,
           cat("full-coverage budget ", a, " bytes with ", parted.layout.partitions.size(), " partitions vs ", b,
               " bytes with one; ratio ", a / b, " (need <= 0.6)"));
}

} // namespace

int main()
{
    try {
        exactness_and_skipping();
        submodularity();
        enrichment_properties();
        reuse_optimality();
        auto cal = calibrate(1);
        std::cout << "calibrated: " << cal.model.to_text() << " (r2 " << cal.r_squared << ")\n";
        greedy_guarantee(cal.model);
        filter_amplification(cal.model);
        graceful_degradation(cal.model);
        partitioning_budget(cal.model);
    } catch (const std::exception &e) {
        for (auto &[id, line] : lines) std::cout << line << '\n';
        std::cout << "acceptance aborted: " << e.what() << '\n';
        return 2;
    }
    for (auto &[id, line] : lines) std::cout << line << '\n';
    std::cout << (failures ? "acceptance: FAILED " : "acceptance: all criteria passed") << (failures ? cat(failures) : "")
              << '\n';
    return failures ? 1 : 0;
}
