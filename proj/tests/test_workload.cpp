#include <gtest/gtest.h>

#include <array>
#include <map>

#include "pmig/workload.hpp"

using namespace pmig;

namespace {

struct Bench {
    MemoryModel memory;
    MigrationEngine engine;
    BTree tree;
    explicit Bench(std::uint64_t records, std::uint32_t frames = 1u << 13)
        : memory(presets::dual_socket(frames)), engine(memory), tree(memory) {
        tree.load(records);
    }
};

std::array<std::uint64_t, 5> histogram(const WorkloadMix& mix, std::uint64_t draws, std::uint64_t seed = 42) {
    std::mt19937_64 rng(seed);
    const KeyChooser keys(1000, KeyDist::Uniform);
    std::array<std::uint64_t, 5> counts{};
    for (std::uint64_t i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(next_op(rng, mix, keys).kind)];
    return counts;
}

}  // namespace

TEST(Workload, ReadOnlyMixOnlyReads) {
    const auto h = histogram({BaseMix::YcsbC, 0.0}, 100'000);
    EXPECT_EQ(h[static_cast<std::size_t>(OpKind::Read)], 100'000u);
}

TEST(Workload, YcsbAReadFraction) {
    const auto h = histogram({BaseMix::YcsbA, 0.0}, 1'000'000);
    const double reads = static_cast<double>(h[static_cast<std::size_t>(OpKind::Read)]) / 1e6;
    EXPECT_NEAR(reads, 0.5, 0.01);
    EXPECT_EQ(h[static_cast<std::size_t>(OpKind::Read)] + h[static_cast<std::size_t>(OpKind::Update)], 1'000'000u);
}

TEST(Workload, MigrationShareIsHonoured) {
    const auto h = histogram({BaseMix::YcsbA, 0.25}, 1'000'000);
    EXPECT_NEAR(static_cast<double>(h[static_cast<std::size_t>(OpKind::Migrate)]) / 1e6, 0.25, 0.01);
}

TEST(Workload, MixFidelityChiSquare) {
    const WorkloadMix mix{BaseMix::YcsbE, 0.25};
    const auto h = histogram(mix, 1'000'000, 7);
    const std::map<OpKind, double> expected{
        {OpKind::Migrate, 0.25}, {OpKind::Scan, 0.75 * 0.95}, {OpKind::Insert, 0.75 * 0.05}};
    double chi2 = 0;
    for (const auto& [kind, p] : expected) {
        const double e = p * 1e6;
        const double o = static_cast<double>(h[static_cast<std::size_t>(kind)]);
        chi2 += (o - e) * (o - e) / e;
    }
    // Two degrees of freedom; 13.8 is the 0.999 quantile.
    EXPECT_LT(chi2, 13.8);
}

TEST(Workload, ScanLengthsWithinBounds) {
    std::mt19937_64 rng(3);
    const KeyChooser keys(100, KeyDist::Zipfian);
    std::uint32_t lo = 1000, hi = 0;
    for (int i = 0; i < 100'000; ++i) {
        const Operation op = next_op(rng, {BaseMix::YcsbE, 0.0}, keys);
        if (op.kind != OpKind::Scan) continue;
        lo = std::min(lo, op.scan_length);
        hi = std::max(hi, op.scan_length);
        EXPECT_LT(op.record, 100u);
    }
    EXPECT_EQ(lo, 1u);
    EXPECT_EQ(hi, 100u);
}

TEST(Workload, ZipfianIsSkewedAndInRange) {
    const ZipfianGenerator z(10'000, 0.99);
    std::mt19937_64 rng(9);
    std::map<std::uint64_t, std::uint64_t> freq;
    std::uint64_t top_rank = 0;
    for (int i = 0; i < 200'000; ++i) {
        const auto k = z.next(rng);
        ASSERT_LT(k, 10'000u);
        ++freq[k];
    }
    for (int i = 0; i < 200'000; ++i) top_rank += z.rank(rng) == 0;
    std::uint64_t top = 0;
    for (const auto& [k, c] : freq) top = std::max(top, c);
    // Rank 0 carries 1/zeta(10^4, 0.99), about 10% of the mass.
    EXPECT_NEAR(static_cast<double>(top_rank) / 200'000, 0.1, 0.02);
    EXPECT_GT(top, 200'000u / 20);
}

TEST(Workload, PresetNames) {
    EXPECT_EQ(migration_load_share("low"), 0.0001);
    EXPECT_EQ(migration_load_share("medium"), 0.25);
    EXPECT_EQ(migration_load_share("high"), 0.5);
    EXPECT_FALSE(migration_load_share("extreme"));
    EXPECT_EQ(parse_base("ycsb-e"), BaseMix::YcsbE);
    EXPECT_EQ(parse_variant("move_pages2"), EngineVariant::MovePages2);
    EXPECT_FALSE(parse_variant("move_pages3"));
}

TEST(Workload, NoMigrationLoadMeansNoMigrationThroughput) {
    Bench b(20'000);
    RunConfig c;
    c.threads = 1;
    c.total_ops = 10'000;
    c.mix = {BaseMix::YcsbA, 0.0};
    c.records = 20'000;
    const RunMetrics m = run_workload(b.tree, b.engine, c);
    EXPECT_EQ(m.query_ops, 10'000u);
    EXPECT_EQ(m.migration_queries, 0u);
    EXPECT_EQ(m.migration_throughput, 0.0);
    EXPECT_GT(m.query_throughput, 0.0);
}

TEST(Workload, SingleThreadRunsAreDeterministic) {
    auto once = [] {
        Bench b(30'000);
        RunConfig c;
        c.total_ops = 3'000;
        c.mix = {BaseMix::YcsbE, 0.05};
        c.records = 30'000;
        c.seed = 77;
        return run_workload(b.tree, b.engine, c);
    };
    const RunMetrics a = once();
    const RunMetrics b = once();
    EXPECT_EQ(a.query_ops, b.query_ops);
    EXPECT_EQ(a.migration_queries, b.migration_queries);
    EXPECT_EQ(a.inserts, b.inserts);
    EXPECT_EQ(a.engine.pages_migrated, b.engine.pages_migrated);
    EXPECT_EQ(a.engine.pages_failed, b.engine.pages_failed);
    EXPECT_EQ(a.engine.tlb_shootdowns, b.engine.tlb_shootdowns);
    EXPECT_EQ(a.query_ns, b.query_ns);
    EXPECT_EQ(a.migration_ns, b.migration_ns);
    EXPECT_EQ(a.sim_seconds, b.sim_seconds);
    EXPECT_EQ(a.query_throughput, b.query_throughput);
    EXPECT_EQ(a.migration_throughput, b.migration_throughput);
    EXPECT_GT(a.migration_queries, 0u);
}

TEST(Workload, PartialMigrationOutpacesNativeUnderContention) {
    auto run = [](EngineVariant v) {
        Bench b(100'000);
        RunConfig c;
        c.threads = 8;
        c.total_ops = 2'000;
        c.mix = {BaseMix::YcsbA, 0.5};
        c.migration.variant = v;
        c.records = 100'000;
        c.seed = 5;
        const RunMetrics m = run_workload(b.tree, b.engine, c);
        EXPECT_TRUE(b.memory.check_invariants().empty());
        EXPECT_TRUE(b.tree.check_structure().empty());
        return m;
    };
    const RunMetrics native = run(EngineVariant::MovePages);
    const RunMetrics partial = run(EngineVariant::MovePages2);
    ASSERT_GT(native.migration_throughput, 0.0);
    EXPECT_GT(partial.migration_throughput / native.migration_throughput, 1.0);
}

TEST(Workload, InvalidKnobsAreRejected) {
    Bench b(1000, 256);
    RunConfig c;
    c.records = 1000;
    c.threads = 0;
    EXPECT_THROW(run_workload(b.tree, b.engine, c), ConfigError);
    c.threads = 1;
    c.mix.migration_share = 1.5;
    EXPECT_THROW(run_workload(b.tree, b.engine, c), ConfigError);
    c.mix.migration_share = 0.1;
    c.migration.pages_per_query = 0;
    EXPECT_THROW(run_workload(b.tree, b.engine, c), ConfigError);
    c.migration.pages_per_query = 8;
    c.records = 0;
    EXPECT_THROW(run_workload(b.tree, b.engine, c), ConfigError);
}
