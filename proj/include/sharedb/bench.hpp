#pragma once

#include <sharedb/executor.hpp>
#include <sharedb/workload.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace sharedb {

/*======================================================================================================================
 * Generated workloads
 *====================================================================================================================*/

/** Four templates that share every join but the last; each query filters one attribute of its template's private
 * dimension.  Tuning and runtime batches are identical. */
struct SensitivityParams
{
    int filters = 4;                ///< distinct filter attributes per private dimension (1..8)
    int joins = 4;                  ///< joins per template, all but one shared
    double selectivity = 0.10;
    std::size_t queries = 64;
    std::uint64_t fact_rows = 1'000'000;
    std::uint64_t dim_rows = 10'000;
    std::uint64_t seed = 1;
};
Workload sensitivity_workload(const SensitivityParams &p);

/** Eight four-join templates in four pairs; the templates of a pair share their first two joins.  With `aligned`
 * set, each pair's fact filters stay inside a fixed 40%-wide band of the fact attribute (the bands of different
 * pairs overlap by half); otherwise filters range over the whole domain. */
struct SynergyParams
{
    bool aligned = false;
    std::size_t queries_per_template = 64;
    double selectivity = 0.10;
    std::uint64_t fact_rows = 200'000;
    std::uint64_t dim_rows = 1'000;
    std::uint64_t seed = 1;
};
Workload synergy_workload(const SynergyParams &p);

/** Four templates over disjoint dimensions, each filtering the fact attribute inside its own quarter of the domain.
 * The single tuning batch is also the zero-miss runtime batch. */
struct MissParams
{
    std::size_t queries_per_template = 16;
    double selectivity = 0.05;
    std::uint64_t fact_rows = 1'000'000;
    std::uint64_t dim_rows = 1'000;
    std::uint64_t seed = 1;
};
Workload miss_workload(const MissParams &p);

/** Runtime batch for `miss_workload`: the tuning queries, except that round(4 x miss) of the templates have their
 * filter windows moved to the quarter two places away, which no view of theirs covers.  Every template reads about
 * the same number of rows, so the fraction of rows served from base data tracks `miss`. */
Batch miss_batch(const Workload &w, const MissParams &p, double miss);

enum class Correlation { Correlated, Semi, Uncorrelated };
const char *to_string(Correlation c);

/** One configuration of the exactness matrix. */
struct MatrixCell
{
    Correlation correlation = Correlation::Uncorrelated;
    double selectivity = 0.1;
    std::size_t queries = 64;
    double budget = 1.0;            ///< fraction of the full budget
    double miss = 0.0;              ///< fraction of runtime queries with fresh fact filters
    std::uint64_t seed = 1;

    std::string label() const;
};

/** 54 cells spanning correlation x selectivity x batch size, with budgets and miss rates cycling through
 * {0, 25, 50, 75, 100}%. */
std::vector<MatrixCell> exactness_matrix();

/** Small star schema with one tuning and one runtime batch for a matrix cell. */
Workload matrix_workload(const MatrixCell &cell);

/*======================================================================================================================
 * Measurement
 *====================================================================================================================*/

/** Runs the batch `reps` times and returns the last result with the median wall and execution times. */
BatchResult measure(const Database &db, const PhysicalLayout &layout, const ViewStore *views, const Batch &batch,
                    const ExecConfig &config, int reps);

struct Calibration
{
    CostModel model;
    double r_squared = 0;
    std::size_t samples = 0;
    std::string report;
};

/** Fits c_scan, c_filter, c_probe and c_agg to measured single-threaded execution times by least squares over a
 * set of generated plans, then rescales so that c_scan = 1.  c_f is set to the fitted per-tuple filter cost.
 * Constants that fit non-positive fall back to a small positive value. */
Calibration calibrate(std::uint64_t seed = 1, std::uint64_t fact_rows = 400'000);

} // namespace sharedb
