#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "pmig/btree.hpp"
#include "pmig/migration.hpp"

namespace pmig {

enum class BaseMix { YcsbA, YcsbC, YcsbE };
enum class KeyDist { Zipfian, Uniform };
enum class OpKind { Read, Update, Insert, Scan, Migrate };
enum class EngineVariant { MovePages, MovePages2 };

std::string_view base_name(BaseMix base) noexcept;
/// "ycsb-a", "ycsb-c", "ycsb-e".
std::optional<BaseMix> parse_base(std::string_view text) noexcept;
std::string_view variant_name(EngineVariant v) noexcept;
/// "move_pages", "move_pages2".
std::optional<EngineVariant> parse_variant(std::string_view text) noexcept;
/// "low" = 0.0001, "medium" = 0.25, "high" = 0.5.
std::optional<double> migration_load_share(std::string_view name) noexcept;

struct WorkloadMix {
    BaseMix base = BaseMix::YcsbA;
    double migration_share = 0;  // Y; the YCSB part gets 1 - Y
    KeyDist dist = KeyDist::Zipfian;
    double theta = 0.99;

    /// Fraction of all operations that write a leaf.
    double write_share() const noexcept;
};

struct Operation {
    OpKind kind = OpKind::Read;
    std::uint64_t record = 0;     // reads, updates, scan start
    std::uint32_t scan_length = 0;
};

/// Uniform double in [0, 1) from 53 random bits; identical on every platform.
double unit_draw(std::mt19937_64& rng) noexcept;

/// YCSB's scrambled Zipfian: ranks drawn with the Gray et al. method, then
/// hashed so popular records are spread over the key space.
class ZipfianGenerator {
public:
    explicit ZipfianGenerator(std::uint64_t items, double theta = 0.99);
    std::uint64_t next(std::mt19937_64& rng) const noexcept;
    std::uint64_t rank(std::mt19937_64& rng) const noexcept;
    std::uint64_t items() const noexcept { return items_; }

private:
    std::uint64_t items_;
    double theta_, zetan_, alpha_, eta_, half_pow_theta_;
};

/// Draws record ids for one mix.
class KeyChooser {
public:
    KeyChooser(std::uint64_t records, KeyDist dist, double theta = 0.99);
    std::uint64_t next(std::mt19937_64& rng) const noexcept;
    std::uint64_t records() const noexcept { return records_; }

private:
    std::uint64_t records_;
    KeyDist dist_;
    std::optional<ZipfianGenerator> zipf_;
};

/// Draws one operation. Inserts leave `record` unset; the driver assigns keys.
Operation next_op(std::mt19937_64& rng, const WorkloadMix& mix, const KeyChooser& keys);

struct MigrationKnobs {
    EngineVariant variant = EngineVariant::MovePages2;
    MigrationMode mode = MigrationMode::Async;  // move_pages2 only; native is always sync
    std::size_t batch = 512;                     // move_pages2 only
    std::size_t pages_per_query = 512;
    LeafSelector selector = LeafSelector::RandomLeaf;
};

/// Background kernel activity on tree pages during a migration call: a page
/// is lock-held with probability hold_base + hold_per_write * write_share,
/// and under writeback with writeback_per_write * write_share.
struct ContentionKnobs {
    double hold_base = 0.005;
    double hold_per_write = 0.01;
    double writeback_per_write = 0.002;
};

struct RunConfig {
    std::size_t threads = 1;
    std::uint64_t total_ops = 10'000;
    WorkloadMix mix;
    MigrationKnobs migration;
    ContentionKnobs contention;
    std::uint64_t seed = 1;
    std::uint64_t records = 0;  // keys 0..records-1 must be loaded (sequential order)
    double op_overhead_ns = 100;
};

struct RunMetrics {
    std::uint64_t query_ops = 0;
    std::uint64_t migration_queries = 0;
    std::uint64_t inserts = 0;          // successful
    std::uint64_t restarts = 0;
    EngineStats engine;
    double query_ns = 0;                // simulated time spent in YCSB operations
    double migration_ns = 0;            // simulated engine latency, all calls
    double stolen_ns = 0;               // interrupts and drains charged to other workers
    double sim_seconds = 0;             // slowest worker's clock
    double query_throughput = 0;        // YCSB ops per simulated second, summed over workers
    double migration_throughput = 0;    // pages migrated per simulated second, summed over workers
};

/// Runs `total_ops` operations split over `threads` workers against a tree
/// holding keys [0, records). Throws ConfigError on invalid knobs.
RunMetrics run_workload(BTree& tree, MigrationEngine& engine, const RunConfig& config);

}  // namespace pmig
