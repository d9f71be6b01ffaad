#include <sharedb/executor.hpp>

#include <sharedb/parallel.hpp>

#include <chrono>
#include <cstdio>
#include <memory>

namespace sharedb {

double BatchMetrics::miss_rate() const
{
    auto total = counters.base_rows + counters.view_rows;
    return total ? static_cast<double>(counters.base_rows) / static_cast<double>(total) : 0.0;
}

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t since(Clock::time_point t)
{
    return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t).count());
}

/** Everything needed to run one partition. */
struct PartitionWork
{
    std::uint32_t partition = 0;
    bool touched = false;
    SourceData fact;
    SkipAnalysis fact_skip;
    GlobalPlan plan;
    std::vector<SourceData> view_data;                      ///< per view source
    std::vector<std::unique_ptr<SkipAnalysis>> view_skip;   ///< per baseline node, for usable views
    std::vector<SourceBinding> bindings;
    std::unique_ptr<PlanExecutor> executor;
    double baseline_cost = 0, optimized_cost = 0;
    std::uint64_t skipped_blocks = 0, skipped_filters = 0;
};

void check_views(const PhysicalLayout &layout, const ViewStore &views)
{
    for (auto &[key, v] : views) {
        if (key.partition >= layout.partitions.size() || v.rows() != layout.partitions[key.partition].rows())
            throw ExecutionError("view (partition " + std::to_string(key.partition) + ", tables " +
                                 std::to_string(key.tables) + ") does not match the partition layout");
    }
}

void plan_partition(PartitionWork &w, const Database &db, const PhysicalLayout &layout, const ViewStore *views,
                    const Batch &batch, const DimensionState &dims, const std::vector<ColumnRef> &fact_columns,
                    const ExecConfig &config)
{
    auto &part = layout.partitions[w.partition];
    w.fact = layout.source(w.partition);
    w.fact_skip = analyze_blocks(part.blocks, batch, batch.all(), fact_columns, config.skipping);
    w.skipped_blocks = w.fact_skip.skipped_blocks;
    w.skipped_filters = w.fact_skip.skipped_filters;
    if (w.fact_skip.touched.none()) return;
    w.touched = true;
    w.plan = build_global_plan(batch, w.fact_skip.touched);

    bool reuse = config.reuse && views && !views->empty();
    if (reuse) {
        auto loads = estimate_loads(w.plan, batch, part.blocks, w.fact_skip, dims, config.model.filter_exponent);
        w.baseline_cost = estimate_plan_cost(w.plan, loads, config.model);

        const double c_f = config.naive_reuse ? 0.0 : config.model.c_f;
        const bool view_skipping = config.skipping && !config.naive_reuse;
        std::vector<ReuseCandidate> cand(w.plan.nodes.size());
        w.view_skip.resize(w.plan.nodes.size());
        bool any = false;
        for (auto &n : w.plan.nodes) {
            if (!n.materializable()) continue;
            auto *v = views->find(w.partition, n.tables);
            if (!v || !v->covers(required_columns(db.schema, batch, n.queries, n.tables))) continue;
            auto cols = view_filter_columns(batch, n.queries, n.tables);
            auto skip = std::make_unique<SkipAnalysis>(analyze_blocks(v->blocks, batch, n.queries, cols, view_skipping));
            cand[n.id] = {true, c_f * view_filter_load(v->blocks, *skip, n.queries)};
            w.view_skip[n.id] = std::move(skip);
            any = true;
        }
        w.optimized_cost = w.baseline_cost;
        if (any) {
            auto decision = reuse_phase(w.plan, cand);
            w.optimized_cost = decision.optimized_cost;
            if (!decision.replaced.empty()) w.plan = rewrite_plan(w.plan, decision, batch, cand);
        }
    }

    w.view_data.reserve(w.plan.views.size());
    for (auto s : w.plan.sources) {
        auto &src = w.plan.nodes[s];
        if (src.kind == NodeKind::Scan) {
            w.bindings.push_back({&w.fact, &w.fact_skip});
        } else {
            auto *v = views->find(w.partition, w.plan.views[src.view]);
            SHAREDB_CHECK(v && src.origin >= 0 && w.view_skip[src.origin], "view source without a usable view");
            w.view_data.push_back(v->source());
            auto &skip = *w.view_skip[src.origin];
            w.skipped_blocks += skip.skipped_blocks;
            w.skipped_filters += skip.skipped_filters;
            w.bindings.push_back({&w.view_data.back(), &skip});
        }
    }
    w.executor = std::make_unique<PlanExecutor>(w.plan, batch, db.schema, dims, w.bindings);
}

} // namespace

BatchResult execute_batch(const Database &db, const PhysicalLayout &layout, const ViewStore *views, const Batch &batch,
                          const ExecConfig &config)
{
    config.model.validate();
    if (config.morsel_blocks == 0) throw ConfigError("morsel size must be positive");
    if (views) check_views(layout, *views);
    BatchResult result;
    auto &m = result.metrics;
    result.sums.assign(batch.width(), 0);
    auto start = Clock::now();
    if (batch.queries.empty()) return result;

    auto t = Clock::now();
    auto dims = build_dimension_state(db, batch);
    m.dims_ns = since(t);

    t = Clock::now();
    auto fact_columns = fact_filter_columns(batch);
    std::vector<PartitionWork> work(layout.partitions.size());
    for (std::uint32_t p = 0; p < work.size(); ++p) work[p].partition = p;
    parallel_for(work.size(), config.threads, [&](std::size_t, std::size_t p) {
        plan_partition(work[p], db, layout, views, batch, dims, fact_columns, config);
    });
    m.plan_ns = since(t);

    struct Task
    {
        std::uint32_t partition;
        std::uint32_t source;
        std::size_t begin, end;
    };
    std::vector<Task> tasks;
    const PlanExecutor *largest = nullptr;
    for (auto &w : work) {
        m.skipped_blocks += w.skipped_blocks;
        m.skipped_filters += w.skipped_filters;
        if (!w.touched) continue;
        ++m.partitions;
        m.baseline_cost += w.baseline_cost;
        m.optimized_cost += w.optimized_cost;
        for (auto s : w.plan.sources) m.views_used += w.plan.nodes[s].kind == NodeKind::ViewScan;
        for (std::uint32_t s = 0; s < w.executor->num_sources(); ++s) {
            auto nb = w.executor->num_blocks(s);
            for (std::size_t b = 0; b < nb; b += config.morsel_blocks)
                tasks.push_back({w.partition, s, b, std::min(nb, b + config.morsel_blocks)});
        }
    }
    std::size_t max_nodes = 0;
    for (auto &w : work)
        if (w.touched && w.plan.nodes.size() >= max_nodes) {
            max_nodes = w.plan.nodes.size();
            largest = w.executor.get();
        }

    t = Clock::now();
    const std::size_t threads = std::min(resolve_threads(config.threads), std::max<std::size_t>(tasks.size(), 1));
    std::vector<std::vector<std::int64_t>> sums(threads, std::vector<std::int64_t>(batch.width(), 0));
    std::vector<ExecCounters> counters(threads);
    std::vector<PlanExecutor::ScratchPtr> scratch(threads);
    parallel_for(tasks.size(), threads, [&](std::size_t worker, std::size_t i) {
        if (!scratch[worker]) scratch[worker] = largest->make_scratch();
        auto &task = tasks[i];
        work[task.partition].executor->run(task.source, task.begin, task.end, sums[worker], counters[worker],
                                           *scratch[worker]);
    });
    for (std::size_t w = 0; w < threads; ++w) {
        for (std::size_t q = 0; q < batch.width(); ++q) result.sums[q] += sums[w][q];
        m.counters += counters[w];
    }
    m.exec_ns = since(t);
    m.wall_ns = since(start);
    return result;
}

std::string metrics_csv_header()
{
    return "# sharedb metrics v" + std::to_string(kMetricsVersion) +
           "\nlabel,batch,queries,wall_ns,dims_ns,plan_ns,exec_ns,partitions,scan_rows,base_rows,view_rows,"
           "blocks_read,skipped_blocks,skipped_filters,views_used,filter_work,probe_tuples,agg_updates,"
           "baseline_cost,optimized_cost,miss_rate,results\n";
}

std::string metrics_csv_row(const std::string &label, const Batch &batch, const BatchResult &r)
{
    auto &m = r.metrics;
    auto &c = m.counters;
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "%s,%s,%zu,%llu,%llu,%llu,%llu,%llu,%llu,%llu,%llu,%llu,%llu,%llu,%llu,%llu,%llu,%llu,%.6g,%.6g,%.6f,",
                  label.c_str(), batch.name.c_str(), batch.width(), (unsigned long long)m.wall_ns,
                  (unsigned long long)m.dims_ns, (unsigned long long)m.plan_ns, (unsigned long long)m.exec_ns,
                  (unsigned long long)m.partitions, (unsigned long long)(c.base_rows + c.view_rows),
                  (unsigned long long)c.base_rows, (unsigned long long)c.view_rows, (unsigned long long)c.blocks_read,
                  (unsigned long long)m.skipped_blocks, (unsigned long long)m.skipped_filters,
                  (unsigned long long)m.views_used, (unsigned long long)c.filter_work,
                  (unsigned long long)c.probe_tuples, (unsigned long long)c.agg_updates, m.baseline_cost,
                  m.optimized_cost, m.miss_rate());
    std::string row = buf;
    for (std::size_t q = 0; q < r.sums.size(); ++q) row += (q ? ";" : "") + std::to_string(r.sums[q]);
    return row + "\n";
}

} // namespace sharedb
