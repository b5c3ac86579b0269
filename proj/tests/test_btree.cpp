#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cstring>
#include <map>
#include <set>
#include <thread>

#include "pmig/btree.hpp"
#include "pmig/migration.hpp"

using namespace pmig;

namespace {

std::vector<std::byte> payload(const MemoryModel& m, PageId p) {
    const auto f = m.frame_of(p);
    std::vector<std::byte> out(kPageSize + kPageMetaSize);
    std::memcpy(out.data(), m.frame_data(*f), out.size());
    return out;
}

}  // namespace

TEST(BTree, MillionUniformRecordsGiveHeightThree) {
    MemoryModel m(presets::dual_socket(1u << 14));
    BTree t(m);
    t.load(1'000'000, KeyOrder::Uniform);
    EXPECT_GE(t.height(), 3u);
    EXPECT_TRUE(t.check_structure().empty());
    EXPECT_EQ(t.dump().size(), 1'000'000u);
    const auto per_node = t.pages_per_node();
    ASSERT_EQ(per_node.size(), 2u);
    EXPECT_LE(per_node[0] > per_node[1] ? per_node[0] - per_node[1] : per_node[1] - per_node[0], 1u);

    OpContext ctx;
    EXPECT_EQ(t.lookup(BTree::key_of(123456, KeyOrder::Uniform), ctx), BTree::value_of(123456));
    EXPECT_TRUE(m.check_invariants().empty());
}

TEST(BTree, EmptyLoadHasNoKeys) {
    MemoryModel m(presets::dual_socket(64));
    BTree t(m);
    t.load(0);
    OpContext ctx;
    EXPECT_FALSE(t.lookup(0, ctx).has_value());
    EXPECT_FALSE(t.lookup(42, ctx).has_value());
    EXPECT_TRUE(t.scan(0, 10, ctx).empty());
    EXPECT_TRUE(t.check_structure().empty());
}

TEST(BTree, FullLeafBoundary) {
    MemoryModel m(presets::dual_socket(64));
    BTree t(m);
    t.load(256, KeyOrder::Sequential);
    EXPECT_EQ(t.leaf_count(), 1u);
    EXPECT_EQ(t.inner_count(), 1u);
    EXPECT_EQ(t.height(), 2u);
    EXPECT_TRUE(t.check_structure().empty());

    // One more key forces the first split.
    OpContext ctx;
    EXPECT_TRUE(t.insert(1000, 7, ctx));
    EXPECT_EQ(t.leaf_count(), 2u);
    EXPECT_TRUE(t.check_structure().empty());
}

TEST(BTree, InsertLookupUpdate) {
    MemoryModel m(presets::dual_socket(64));
    BTree t(m);
    t.load(0);
    OpContext ctx;
    EXPECT_TRUE(t.insert(10, 100, ctx));
    EXPECT_EQ(t.lookup(10, ctx), 100u);
    EXPECT_FALSE(t.insert(10, 5, ctx));
    EXPECT_EQ(t.lookup(10, ctx), 100u);
    EXPECT_TRUE(t.update(10, 11, ctx));
    EXPECT_EQ(t.lookup(10, ctx), 11u);
    EXPECT_FALSE(t.update(11, 1, ctx));
    EXPECT_FALSE(t.lookup(11, ctx).has_value());
    EXPECT_GT(ctx.ns, 0.0);
}

TEST(BTree, ScanReturnsPairsInOrder) {
    MemoryModel m(presets::dual_socket(64));
    BTree t(m);
    t.load(0);
    OpContext ctx;
    for (std::uint64_t k = 10; k >= 1; --k) t.insert(k, k * 10, ctx);
    const auto got = t.scan(0, 5, ctx);
    const std::vector<BTree::Entry> want{{1, 10}, {2, 20}, {3, 30}, {4, 40}, {5, 50}};
    EXPECT_EQ(got, want);
    EXPECT_EQ(t.scan(8, 100, ctx).size(), 3u);
}

TEST(BTree, ScanCrossesLeaves) {
    MemoryModel m(presets::dual_socket(256));
    BTree t(m);
    t.load(2000);
    OpContext ctx;
    const auto got = t.scan(250, 600, ctx);
    ASSERT_EQ(got.size(), 600u);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i].first, 250 + i);
}

TEST(BTree, RandomInsertsKeepStructure) {
    MemoryModel m(presets::dual_socket(4096));
    BTree t(m);
    t.load(0);
    OpContext ctx;
    std::mt19937_64 rng(7);
    std::map<std::uint64_t, std::uint64_t> want;
    for (int i = 0; i < 200'000; ++i) {
        const std::uint64_t k = rng() % 1'000'000;
        const bool fresh = !want.count(k);
        EXPECT_EQ(t.insert(k, k + 1, ctx), fresh);
        want.emplace(k, k + 1);
    }
    EXPECT_TRUE(t.check_structure().empty());
    EXPECT_GE(t.height(), 3u);
    const auto got = t.dump();
    ASSERT_EQ(got.size(), want.size());
    EXPECT_TRUE(std::equal(got.begin(), got.end(), want.begin(), [](const auto& a, const auto& b) { return a.first == b.first && a.second == b.second; }));
}

TEST(BTree, CapacityExceededWhenMemoryRunsOut) {
    MemoryModel m(presets::dual_socket(4));
    BTree t(m);
    EXPECT_THROW(t.load(10'000), CapacityExceeded);
}

TEST(BTree, SamplePagesRandomLeafIsDistinct) {
    MemoryModel m(presets::dual_socket(8192));
    BTree t(m);
    t.load(10'000ull * 256);
    ASSERT_EQ(t.leaf_count(), 10'000u);
    std::mt19937_64 rng(1);
    EXPECT_TRUE(t.sample_pages(0, LeafSelector::RandomLeaf, rng).empty());
    const auto pages = t.sample_pages(512, LeafSelector::RandomLeaf, rng);
    ASSERT_EQ(pages.size(), 512u);
    EXPECT_EQ(std::set<PageId>(pages.begin(), pages.end()).size(), 512u);
    const auto all = t.pages();
    const std::set<PageId> tree_pages(all.begin(), all.end());
    for (PageId p : pages) EXPECT_TRUE(tree_pages.count(p));
}

TEST(BTree, SamplePagesReturnsAllWhenAskedForTooMany) {
    MemoryModel m(presets::dual_socket(64));
    BTree t(m);
    t.load(1000);
    std::mt19937_64 rng(1);
    EXPECT_EQ(t.sample_pages(100, LeafSelector::RandomLeaf, rng).size(), t.leaf_count());
    EXPECT_EQ(t.sample_pages(100, LeafSelector::HotLeaf, rng).size(), t.leaf_count());
    EXPECT_EQ(t.sample_pages(100, LeafSelector::Subtree, rng).size(), t.leaf_count());
}

TEST(BTree, SubtreeCoveringOneLeaf) {
    MemoryModel m(presets::dual_socket(64));
    BTree t(m);
    t.load(1024);  // leaves hold [0,255], [256,511], ...
    std::mt19937_64 rng(1);
    const auto pages = t.sample_pages(10, LeafSelector::Subtree, rng, 300, 400);
    ASSERT_EQ(pages.size(), 1u);
    EXPECT_EQ(t.sample_pages(10, LeafSelector::Subtree, rng, 256, 511), pages);
    EXPECT_EQ(t.sample_pages(10, LeafSelector::Subtree, rng, 0, 511).size(), 2u);
}

TEST(BTree, HotLeafPrefersRecentlyTouchedLeaves) {
    MemoryModel m(presets::dual_socket(64));
    BTree t(m);
    t.load(4096);
    std::mt19937_64 rng(1);
    OpContext ctx;
    t.lookup(5, ctx);
    t.lookup(3000, ctx);
    const auto hot = t.sample_pages(2, LeafSelector::HotLeaf, rng);
    ASSERT_EQ(hot.size(), 2u);
    const auto a = t.sample_pages(1, LeafSelector::Subtree, rng, 3000, 3000);
    const auto b = t.sample_pages(1, LeafSelector::Subtree, rng, 5, 5);
    EXPECT_EQ(hot[0], a[0]);
    EXPECT_EQ(hot[1], b[0]);
}

TEST(BTree, MigrationPreservesNodePayloads) {
    MemoryModel m(presets::dual_socket(512));
    MigrationEngine engine(m);
    BTree t(m, Placement{Placement::Kind::Fixed, 0});
    t.load(20'000);
    std::mt19937_64 rng(3);
    const auto pages = t.sample_pages(40, LeafSelector::RandomLeaf, rng);
    std::vector<std::vector<std::byte>> before;
    for (PageId p : pages) before.push_back(payload(m, p));
    MigrationRequest req;
    req.pages = pages;
    req.nodes.assign(pages.size(), 1);
    const auto r = engine.move_pages(req);
    ASSERT_EQ(r.ret, 0);
    for (std::size_t i = 0; i < pages.size(); ++i) {
        EXPECT_EQ(m.node_of(pages[i]), 1);
        EXPECT_EQ(payload(m, pages[i]), before[i]);
    }
    EXPECT_TRUE(t.check_structure().empty());
    OpContext ctx;
    for (std::uint64_t k = 0; k < 20'000; k += 97) EXPECT_EQ(t.lookup(k, ctx), BTree::value_of(k));
}

TEST(BTree, ConcurrentWritersReadersAndMigrationKeepEveryKey) {
    MemoryModel m(presets::dual_socket(1u << 13));
    MigrationEngine engine(m);
    BTree t(m);
    constexpr std::uint64_t kLoaded = 50'000;
    t.load(kLoaded);

    constexpr int kWriters = 3;
    constexpr std::uint64_t kPerWriter = 20'000;
    std::atomic<bool> done{false};
    std::atomic<std::uint64_t> wrong{0};
    std::vector<std::thread> threads;
    for (int w = 0; w < kWriters; ++w) {
        threads.emplace_back([&, w] {
            OpContext ctx{w % 4, static_cast<OwnerId>(10 + w)};
            for (std::uint64_t i = 0; i < kPerWriter; ++i) {
                const std::uint64_t k = kLoaded + i * kWriters + static_cast<std::uint64_t>(w);
                if (!t.insert(k, k ^ 0xabc, ctx)) wrong.fetch_add(1);
                const std::uint64_t u = (i * 7919 + static_cast<std::uint64_t>(w)) % kLoaded;
                if (u % kWriters == static_cast<std::uint64_t>(w) && !t.update(u, BTree::value_of(u), ctx))
                    wrong.fetch_add(1);
            }
        });
    }
    threads.emplace_back([&] {
        OpContext ctx{5, 99};
        std::mt19937_64 rng(11);
        while (!done.load()) {
            const std::uint64_t k = rng() % kLoaded;
            if (t.lookup(k, ctx) != BTree::value_of(k)) wrong.fetch_add(1);
        }
    });
    std::thread migrator([&] {
        std::mt19937_64 rng(5);
        std::uint64_t calls = 0;
        while (!done.load() || calls < 20) {
            MigrationRequest req;
            req.pages = t.sample_pages(64, LeafSelector::RandomLeaf, rng);
            req.nodes.assign(req.pages.size(), static_cast<NodeId>(calls % 2));
            req.mode = MigrationMode::Async;
            req.batch = 16;
            CallContext cc;
            cc.core = 7;
            (calls % 2 ? engine.move_pages(req, cc) : engine.move_pages2(req, cc));
            ++calls;
        }
    });
    for (int w = 0; w < kWriters; ++w) threads[static_cast<std::size_t>(w)].join();
    done.store(true);
    threads.back().join();
    migrator.join();

    EXPECT_EQ(wrong.load(), 0u);
    EXPECT_TRUE(t.check_structure().empty());
    EXPECT_TRUE(m.check_invariants().empty());
    EXPECT_EQ(m.isolated_count(), 0u);
    const auto got = t.dump();
    ASSERT_EQ(got.size(), kLoaded + kWriters * kPerWriter);
    for (std::size_t i = 0; i < got.size(); ++i) {
        ASSERT_EQ(got[i].first, i);
        const std::uint64_t want = i < kLoaded ? BTree::value_of(i) : (i ^ 0xabc);
        ASSERT_EQ(got[i].second, want);
    }
}
