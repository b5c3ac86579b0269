#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pmig/workload.hpp"

namespace pmig {

struct MigrationLoad {
    std::string label;  // "low", "medium", "high" or the share as written
    double share = 0;
};

/// Accepts a preset name or a share in [0, 1].
std::optional<MigrationLoad> parse_migration_load(std::string_view text);

/// Preset name ("dual-socket", "uma", "tiered", "chiplet") or a JSON file.
Topology resolve_topology(const std::string& name);

struct ExperimentPlan {
    std::string topology = "dual-socket";
    BaseMix workload = BaseMix::YcsbA;
    std::vector<MigrationLoad> loads{{"high", 0.5}};
    std::vector<EngineVariant> variants{EngineVariant::MovePages, EngineVariant::MovePages2};
    std::vector<MigrationMode> modes{MigrationMode::Async};  // move_pages2 rows only
    std::vector<std::size_t> batches{512};                    // move_pages2 rows only
    unsigned reps = 3;
    std::uint64_t seed = 1;
    std::size_t threads = 0;  // 0: one worker per simulated core
    std::uint64_t records = 1'000'000;
    std::uint64_t ops = 20'000;
    KeyDist dist = KeyDist::Zipfian;
    std::size_t pages_per_query = 512;
    LeafSelector selector = LeafSelector::RandomLeaf;
    ContentionKnobs contention;
};

/// Throws ConfigError naming the offending field.
void validate_plan(const ExperimentPlan& plan);

/// One CSV line; column order is fixed (see csv_header()).
struct CsvRow {
    std::string variant;
    std::string mode;
    std::uint64_t batch = 0;
    std::string mig_load;
    std::uint64_t threads = 0;
    std::uint64_t seed = 0;
    std::uint64_t rep = 0;
    double query_tput = 0;
    double mig_tput = 0;
    std::uint64_t pages_migrated = 0;
    std::uint64_t pages_failed = 0;
    std::uint64_t rounds = 0;
    std::uint64_t batches = 0;
    std::uint64_t shootdowns = 0;
    std::uint64_t aborted_calls = 0;

    friend bool operator==(const CsvRow&, const CsvRow&) = default;
};

std::string csv_header();
std::string to_csv(const CsvRow& row);
/// Inverse of to_csv. Throws ConfigError on malformed input.
CsvRow parse_csv_row(std::string_view line);

struct RowResult {
    CsvRow row;
    RunMetrics metrics;
    std::size_t tree_height = 0;
    std::vector<std::uint64_t> tree_pages_per_node;
    std::vector<std::string> violations;  // conservation and integrity checks after the run
};

/// One (variant, mode, batch, load, rep) cell on a fresh machine and tree.
RowResult run_cell(const ExperimentPlan& plan, EngineVariant variant, MigrationMode mode, std::size_t batch,
                   const MigrationLoad& load, unsigned rep);

/// Every cell of the plan. Native rows ignore the mode and batch axes and
/// appear once per (load, rep) with mode "sync" and batch 512.
std::vector<RowResult> run_plan(const ExperimentPlan& plan,
                                const std::function<void(const RowResult&)>& on_row = {});

/// Post-run checks: no isolated pages, frame conservation, tree structure,
/// and a full scan holding exactly keys [0, expected_keys).
std::vector<std::string> integrity_violations(const MemoryModel& memory, const BTree& tree,
                                              std::uint64_t expected_keys);

struct CellSummary {
    std::string variant, mode, mig_load;
    std::uint64_t batch = 0;
    double query_tput = 0;  // medians over reps
    double mig_tput = 0;
    unsigned reps = 0;
};

std::vector<CellSummary> summarize(const std::vector<RowResult>& rows);

}  // namespace pmig
