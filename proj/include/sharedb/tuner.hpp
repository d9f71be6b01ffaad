#pragma once

#include <sharedb/materializer.hpp>
#include <sharedb/partitioner.hpp>
#include <sharedb/views.hpp>

#include <filesystem>
#include <limits>
#include <optional>
#include <string>

namespace sharedb {

enum class Solver { Gr, Isk };

Solver parse_solver(std::string_view name);
const char *to_string(Solver s);

/** Storage budget: absolute bytes, or a fraction of what materializing every enumerated cut would need. */
struct Budget
{
    double bytes = std::numeric_limits<double>::infinity();
    std::optional<double> fraction;

    /** "unlimited", "<bytes>", or "<percent>%". */
    static Budget parse(std::string_view text);
};

struct TunerConfig
{
    double sample_rate = 0.01;
    std::uint64_t seed = 1;
    bool partition = true;
    PartitionerConfig partitioner;
    BlockingConfig blocking;
    bool cluster = true;
    CostModel model;
    Solver solver = Solver::Isk;
    Budget budget;
    CutLimits limits;
    IskConfig isk;
    bool materialize = true;
    double slack = 1.1;
};

struct TuneResult
{
    PhysicalLayout layout;
    ViewStore views;
    WorkloadGraph graph;
    CutSet cuts;
    Selection selection;
    double budget_limit = 0;
    double full_budget = 0;                 ///< B-bar of every enumerated cut
    double homogeneity_single = 0;          ///< aggregate H with one partition
    double homogeneity = 0;                 ///< aggregate H of the chosen tree
    std::string report;
};

/** Offline tuning: access sampling, homogeneity partitioning, block clustering, cut selection, materialization. */
TuneResult tune(const Database &db, std::span<const Batch> tuning, const TunerConfig &config);

/** Tuning artifacts on disk: tree.txt, layout.txt, fact.snap, views.snap, selection.txt and a manifest. */
void save_tuned(const std::filesystem::path &dir, const Database &db, std::uint64_t data_seed, const TuneResult &t);

struct TunedArtifacts
{
    PhysicalLayout layout;
    ViewStore views;
};

/** Loads artifacts written by `save_tuned`; nothing when the directory holds no manifest.  Throws DataError when
 * they belong to another schema or data seed. */
std::optional<TunedArtifacts> load_tuned(const std::filesystem::path &dir, const Database &db, std::uint64_t data_seed);

/** Layout without tuning: one partition cut into fixed-size blocks with zone maps. */
PhysicalLayout untuned_layout(const Database &db, const BlockingConfig &blocking = {});

} // namespace sharedb
